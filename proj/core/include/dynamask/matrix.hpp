#pragma once

#include <cassert>
#include <cstddef>
#include <string>
#include <vector>

namespace dynamask {

/// Dense row-major matrix of doubles. Throughout the library rows index time
/// steps and columns index features (or output channels), so entry (t, i) of a
/// series lives at row t, column i.
class Matrix {
public:
    Matrix() = default;

    /// rows and cols must both be positive.
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    static Matrix constant(std::size_t rows, std::size_t cols, double value);

    /// Builds a matrix from nested row data; all rows must have equal,
    /// nonzero length.
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    /// Flat row-major access; index = r * cols() + c.
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    const std::vector<double>& values() const { return data_; }
    std::vector<double>& values() { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    /// True when every entry is finite (no NaN/inf).
    bool all_finite() const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Indices that sort v ascending; ties keep their original relative order.
std::vector<std::size_t> argsort_ascending(const std::vector<double>& v);

/// Indices that sort v descending; ties keep their original relative order,
/// so among equal values the smallest index comes first.
std::vector<std::size_t> argsort_descending(const std::vector<double>& v);

/// Writes a matrix as CSV with header "t,f1,...,fd". The leading column holds
/// the 1-based time index starting at first_time. Values are written with 17
/// significant digits so a read round-trips bit-exactly.
void write_csv_matrix(const std::string& path, const Matrix& m,
                      long long first_time = 1);

/// Reads a matrix written by write_csv_matrix. Validates the header shape,
/// consecutive time indices, and that every value is finite.
Matrix read_csv_matrix(const std::string& path);

}  // namespace dynamask
