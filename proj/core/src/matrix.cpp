#include "dynamask/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dynamask {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("Matrix: rows and cols must be positive");
    }
}

Matrix Matrix::constant(std::size_t rows, std::size_t cols, double value) {
    return Matrix(rows, cols, value);
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) {
        throw std::invalid_argument("Matrix::from_rows: empty input");
    }
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) {
            throw std::invalid_argument("Matrix::from_rows: ragged rows");
        }
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
}

std::vector<std::size_t> argsort_ascending(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return idx;
}

std::vector<std::size_t> argsort_descending(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    return idx;
}

void write_csv_matrix(const std::string& path, const Matrix& m,
                      long long first_time) {
    if (m.empty()) {
        throw std::invalid_argument("write_csv_matrix: empty matrix");
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_csv_matrix: cannot open " + path);
    }
    out << 't';
    for (std::size_t c = 0; c < m.cols(); ++c) out << ",f" << (c + 1);
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out << (first_time + static_cast<long long>(r));
        for (std::size_t c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("write_csv_matrix: write failed for " + path);
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

Matrix read_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("read_csv_matrix: cannot open " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("read_csv_matrix: empty file " + path);
    }
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "t") {
        throw std::runtime_error("read_csv_matrix: bad header in " + path);
    }
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c] != "f" + std::to_string(c)) {
            throw std::runtime_error("read_csv_matrix: bad header in " + path);
        }
    }
    const std::size_t cols = header.size() - 1;

    std::vector<std::vector<double>> rows;
    bool have_first_time = false;
    long long expect_time = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != cols + 1) {
            throw std::runtime_error("read_csv_matrix: ragged row in " + path);
        }
        std::size_t pos = 0;
        const long long t = std::stoll(fields[0], &pos);
        if (pos != fields[0].size()) {
            throw std::runtime_error("read_csv_matrix: bad time index in " + path);
        }
        if (!have_first_time) {
            expect_time = t;
            have_first_time = true;
        }
        if (t != expect_time) {
            throw std::runtime_error("read_csv_matrix: non-consecutive time index in " +
                                     path);
        }
        ++expect_time;
        std::vector<double> row(cols);
        for (std::size_t c = 0; c < cols; ++c) {
            try {
                row[c] = std::stod(fields[c + 1], &pos);
            } catch (const std::exception&) {
                throw std::runtime_error("read_csv_matrix: bad value in " + path);
            }
            if (pos != fields[c + 1].size() || !std::isfinite(row[c])) {
                throw std::runtime_error("read_csv_matrix: bad value in " + path);
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw std::runtime_error("read_csv_matrix: no data rows in " + path);
    }
    return Matrix::from_rows(rows);
}

}  // namespace dynamask
