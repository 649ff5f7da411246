#include "dynamask/target.hpp"

#include <algorithm>
#include <stdexcept>

namespace dynamask {

SaliencyTarget SaliencyTarget::from_pairs(
    std::vector<std::pair<std::size_t, std::size_t>> pairs, std::size_t rows,
    std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("SaliencyTarget: grid must be nonempty");
    }
    for (const auto& [t, i] : pairs) {
        if (t >= rows || i >= cols) {
            throw std::invalid_argument("SaliencyTarget: index out of bounds");
        }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    SaliencyTarget target;
    target.rows_ = rows;
    target.cols_ = cols;
    target.flags_.assign(rows * cols, 0);
    for (const auto& [t, i] : pairs) target.flags_[t * cols + i] = 1;
    target.pairs_ = std::move(pairs);
    return target;
}

SaliencyTarget SaliencyTarget::from_product(
    const std::vector<std::size_t>& times,
    const std::vector<std::size_t>& features, std::size_t rows,
    std::size_t cols) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(times.size() * features.size());
    for (std::size_t t : times) {
        for (std::size_t i : features) pairs.emplace_back(t, i);
    }
    return from_pairs(std::move(pairs), rows, cols);
}

Matrix SaliencyTarget::indicator() const {
    if (rows_ == 0) {
        throw std::logic_error("SaliencyTarget::indicator: empty target grid");
    }
    Matrix m(rows_, cols_, 0.0);
    for (const auto& [t, i] : pairs_) m(t, i) = 1.0;
    return m;
}

}  // namespace dynamask
