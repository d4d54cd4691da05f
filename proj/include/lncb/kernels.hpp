#pragma once

#include <cstddef>
#include <vector>

namespace lncb {

// Dense row-major matrix.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    bool operator==(const Mat&) const = default;
};

// OpenMP kernels. Every kernel parallelizes over output elements and keeps
// inner reductions serial in a fixed order, so results are bit-identical to
// the serial reference for any thread count.
namespace kernels {

// y = x · Wᵀ + b with x: n×in, w: out×in, b: out, y: n×out.
void linear_forward(const Mat& x, const Mat& w, const std::vector<double>& b, Mat& y);

// Gradients of the same layer given dy = ∂L/∂y:
// dx = dy · W, dw = dyᵀ · x, db = column sums of dy.
void linear_backward(const Mat& x, const Mat& w, const Mat& dy, Mat& dx, Mat& dw,
                     std::vector<double>& db);

void relu_forward(const Mat& x, Mat& y);

// dx = dy where x > 0, else 0.
void relu_backward(const Mat& x, const Mat& dy, Mat& dx);

// Row-wise softmax with max subtraction.
void softmax_rows(const Mat& logits, Mat& probs);

}  // namespace kernels

// Serial twins of the kernels, kept for equivalence tests and benchmarks.
namespace reference {

void linear_forward(const Mat& x, const Mat& w, const std::vector<double>& b, Mat& y);
void linear_backward(const Mat& x, const Mat& w, const Mat& dy, Mat& dx, Mat& dw,
                     std::vector<double>& db);
void relu_forward(const Mat& x, Mat& y);
void relu_backward(const Mat& x, const Mat& dy, Mat& dx);
void softmax_rows(const Mat& logits, Mat& probs);

}  // namespace reference

}  // namespace lncb
