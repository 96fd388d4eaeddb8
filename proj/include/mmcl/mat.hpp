#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace mmcl {

/// Dense row-major matrix of doubles. Thin value type; all heavy math goes
/// through the kernels layer.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), d_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return d_.size(); }
    bool empty() const { return d_.empty(); }

    double* data() { return d_.data(); }
    const double* data() const { return d_.data(); }

    double* row(std::size_t r) {
        assert(r < rows_);
        return d_.data() + r * cols_;
    }
    const double* row(std::size_t r) const {
        assert(r < rows_);
        return d_.data() + r * cols_;
    }

    double& at(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return d_[r * cols_ + c];
    }
    double at(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return d_[r * cols_ + c];
    }

    void fill(double v) { d_.assign(d_.size(), v); }

    bool operator==(const Mat& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && d_ == o.d_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> d_;
};

}  // namespace mmcl
