#include "lncb/kernels.hpp"

#include <cassert>
#include <cmath>

namespace lncb {

namespace kernels {

void linear_forward(const Mat& x, const Mat& w, const std::vector<double>& b, Mat& y) {
    assert(x.cols == w.cols && b.size() == w.rows);
    y = Mat(x.rows, w.rows);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double* xi = x.row(static_cast<std::size_t>(i));
        double* yi = y.row(static_cast<std::size_t>(i));
        for (std::size_t o = 0; o < w.rows; ++o) {
            const double* wo = w.row(o);
            double acc = b[o];
            for (std::size_t k = 0; k < w.cols; ++k) acc += xi[k] * wo[k];
            yi[o] = acc;
        }
    }
}

void linear_backward(const Mat& x, const Mat& w, const Mat& dy, Mat& dx, Mat& dw,
                     std::vector<double>& db) {
    assert(x.rows == dy.rows && x.cols == w.cols && dy.cols == w.rows);
    dx = Mat(x.rows, x.cols);
    dw = Mat(w.rows, w.cols);
    db.assign(w.rows, 0.0);

    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double* dyi = dy.row(static_cast<std::size_t>(i));
        double* dxi = dx.row(static_cast<std::size_t>(i));
        for (std::size_t k = 0; k < w.cols; ++k) {
            double acc = 0.0;
            for (std::size_t o = 0; o < w.rows; ++o) acc += dyi[o] * w.at(o, k);
            dxi[k] = acc;
        }
    }

    const std::ptrdiff_t out = static_cast<std::ptrdiff_t>(w.rows);
#pragma omp parallel for
    for (std::ptrdiff_t o = 0; o < out; ++o) {
        double* dwo = dw.row(static_cast<std::size_t>(o));
        double acc_b = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double g = dy.at(i, static_cast<std::size_t>(o));
            acc_b += g;
            const double* xi = x.row(i);
            for (std::size_t k = 0; k < x.cols; ++k) dwo[k] += g * xi[k];
        }
        db[static_cast<std::size_t>(o)] = acc_b;
    }
}

void relu_forward(const Mat& x, Mat& y) {
    y = Mat(x.rows, x.cols);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.data.size());
#pragma omp parallel for
    for (std::ptrdiff_t i = 0; i < n; ++i)
        y.data[static_cast<std::size_t>(i)] =
            x.data[static_cast<std::size_t>(i)] > 0.0 ? x.data[static_cast<std::size_t>(i)] : 0.0;
}

void relu_backward(const Mat& x, const Mat& dy, Mat& dx) {
    assert(x.rows == dy.rows && x.cols == dy.cols);
    dx = Mat(x.rows, x.cols);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.data.size());
#pragma omp parallel for
    for (std::ptrdiff_t i = 0; i < n; ++i)
        dx.data[static_cast<std::size_t>(i)] =
            x.data[static_cast<std::size_t>(i)] > 0.0 ? dy.data[static_cast<std::size_t>(i)] : 0.0;
}

void softmax_rows(const Mat& logits, Mat& probs) {
    probs = Mat(logits.rows, logits.cols);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(logits.rows);
#pragma omp parallel for
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double* zi = logits.row(static_cast<std::size_t>(i));
        double* pi = probs.row(static_cast<std::size_t>(i));
        double zmax = zi[0];
        for (std::size_t j = 1; j < logits.cols; ++j) zmax = zi[j] > zmax ? zi[j] : zmax;
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            pi[j] = std::exp(zi[j] - zmax);
            sum += pi[j];
        }
        for (std::size_t j = 0; j < logits.cols; ++j) pi[j] /= sum;
    }
}

}  // namespace kernels

namespace reference {

void linear_forward(const Mat& x, const Mat& w, const std::vector<double>& b, Mat& y) {
    assert(x.cols == w.cols && b.size() == w.rows);
    y = Mat(x.rows, w.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        double* yi = y.row(i);
        for (std::size_t o = 0; o < w.rows; ++o) {
            const double* wo = w.row(o);
            double acc = b[o];
            for (std::size_t k = 0; k < w.cols; ++k) acc += xi[k] * wo[k];
            yi[o] = acc;
        }
    }
}

void linear_backward(const Mat& x, const Mat& w, const Mat& dy, Mat& dx, Mat& dw,
                     std::vector<double>& db) {
    assert(x.rows == dy.rows && x.cols == w.cols && dy.cols == w.rows);
    dx = Mat(x.rows, x.cols);
    dw = Mat(w.rows, w.cols);
    db.assign(w.rows, 0.0);

    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* dyi = dy.row(i);
        double* dxi = dx.row(i);
        for (std::size_t k = 0; k < w.cols; ++k) {
            double acc = 0.0;
            for (std::size_t o = 0; o < w.rows; ++o) acc += dyi[o] * w.at(o, k);
            dxi[k] = acc;
        }
    }

    for (std::size_t o = 0; o < w.rows; ++o) {
        double* dwo = dw.row(o);
        double acc_b = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double g = dy.at(i, o);
            acc_b += g;
            const double* xi = x.row(i);
            for (std::size_t k = 0; k < x.cols; ++k) dwo[k] += g * xi[k];
        }
        db[o] = acc_b;
    }
}

void relu_forward(const Mat& x, Mat& y) {
    y = Mat(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
}

void relu_backward(const Mat& x, const Mat& dy, Mat& dx) {
    assert(x.rows == dy.rows && x.cols == dy.cols);
    dx = Mat(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        dx.data[i] = x.data[i] > 0.0 ? dy.data[i] : 0.0;
}

void softmax_rows(const Mat& logits, Mat& probs) {
    probs = Mat(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* zi = logits.row(i);
        double* pi = probs.row(i);
        double zmax = zi[0];
        for (std::size_t j = 1; j < logits.cols; ++j) zmax = zi[j] > zmax ? zi[j] : zmax;
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            pi[j] = std::exp(zi[j] - zmax);
            sum += pi[j];
        }
        for (std::size_t j = 0; j < logits.cols; ++j) pi[j] /= sum;
    }
}

}  // namespace reference

}  // namespace lncb
