#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "dynamask/matrix.hpp"

namespace dynamask {

/// Set of salient (time, feature) index pairs attached to a T x d grid.
/// Indices are 0-based in memory; every serialized form is 1-based.
class SaliencyTarget {
public:
    SaliencyTarget() = default;

    /// Validates bounds, deduplicates and sorts the pairs.
    static SaliencyTarget from_pairs(
        std::vector<std::pair<std::size_t, std::size_t>> pairs,
        std::size_t rows, std::size_t cols);

    /// Cartesian product times x features.
    static SaliencyTarget from_product(const std::vector<std::size_t>& times,
                                       const std::vector<std::size_t>& features,
                                       std::size_t rows, std::size_t cols);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }

    bool contains(std::size_t t, std::size_t i) const {
        return flags_[t * cols_ + i] != 0;
    }

    /// Sorted, unique (t, i) pairs.
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const {
        return pairs_;
    }

    /// 0/1 indicator matrix of shape rows x cols.
    Matrix indicator() const;

    bool operator==(const SaliencyTarget& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::pair<std::size_t, std::size_t>> pairs_;
    std::vector<unsigned char> flags_;
};

}  // namespace dynamask
