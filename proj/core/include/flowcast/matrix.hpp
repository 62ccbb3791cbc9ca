#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "flowcast/errors.hpp"

namespace flowcast {

/// Dense row-major matrix of doubles used for datasets and scenario sets.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != r * c) throw ShapeError("Matrix: value count does not match shape");
    }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    bool empty() const { return rows == 0; }

    /// Rows [begin, end) as a new matrix.
    Matrix slice_rows(std::size_t begin, std::size_t end) const {
        Matrix out(end - begin, cols);
        std::copy(data.begin() + begin * cols, data.begin() + end * cols, out.data.begin());
        return out;
    }
    /// Rows picked by index, in the given order.
    Matrix gather_rows(std::span<const std::size_t> idx) const {
        Matrix out(idx.size(), cols);
        for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(row(idx[i]).begin(), cols, out.row(i).begin());
        return out;
    }
};

}  // namespace flowcast
