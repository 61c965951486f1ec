#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "ffpkit/common.hpp"
#include "ffpkit/rng.hpp"

namespace ffpkit {

// Dense row-major f64 tensor. Small and copy-friendly; all model state,
// latents and attention maps at this scale fit comfortably in memory.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(size_t(count(shape_)), 0.0);
    }

    Tensor(std::vector<int64_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        check_arg(int64_t(data_.size()) == count(shape_), "tensor data does not match shape");
    }

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int64_t> shape, double v) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static int64_t count(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            check_arg(d >= 0, "negative dimension");
            n *= d;
        }
        return n;
    }

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t rank() const { return int64_t(shape_.size()); }
    int64_t dim(int i) const { return shape_.at(size_t(i)); }
    int64_t size() const { return int64_t(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int64_t i) { return data_[size_t(i)]; }
    double operator[](int64_t i) const { return data_[size_t(i)]; }

    // Rank-2 access: (row, col).
    double& at(int64_t r, int64_t c) { return data_[size_t(r * shape_[1] + c)]; }
    double at(int64_t r, int64_t c) const { return data_[size_t(r * shape_[1] + c)]; }

    // Rank-4 access: (f, h, w, c), row-major with f slowest.
    double& at4(int64_t f, int64_t h, int64_t w, int64_t c) {
        return data_[size_t(((f * shape_[1] + h) * shape_[2] + w) * shape_[3] + c)];
    }
    double at4(int64_t f, int64_t h, int64_t w, int64_t c) const {
        return data_[size_t(((f * shape_[1] + h) * shape_[2] + w) * shape_[3] + c)];
    }

    // Same storage, new shape. Element count must match.
    Tensor reshaped(std::vector<int64_t> shape) const {
        check_arg(count(shape) == size(), "reshape changes element count");
        return Tensor(std::move(shape), data_);
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    void fill_normal(Rng& rng, double stddev = 1.0) {
        for (auto& v : data_) v = rng.normal() * stddev;
    }

    void fill_uniform(Rng& rng, double lo, double hi) {
        for (auto& v : data_) v = rng.uniform(lo, hi);
    }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

using EigenRowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EigenMap = Eigen::Map<EigenRowMat>;
using EigenConstMap = Eigen::Map<const EigenRowMat>;

inline EigenConstMap as_matrix(const Tensor& t) {
    check_arg(t.rank() == 2, "as_matrix expects a rank-2 tensor, got " + t.shape_str());
    return EigenConstMap(t.data(), t.dim(0), t.dim(1));
}

inline EigenMap as_matrix(Tensor& t) {
    check_arg(t.rank() == 2, "as_matrix expects a rank-2 tensor, got " + t.shape_str());
    return EigenMap(t.data(), t.dim(0), t.dim(1));
}

// C = A * B, rank-2.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    check_arg(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
              "matmul shape mismatch " + a.shape_str() + " x " + b.shape_str());
    Tensor c({a.dim(0), b.dim(1)});
    as_matrix(c).noalias() = as_matrix(a) * as_matrix(b);
    return c;
}

// C = A * B^T, rank-2.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_arg(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1),
              "matmul_nt shape mismatch " + a.shape_str() + " x " + b.shape_str());
    Tensor c({a.dim(0), b.dim(0)});
    as_matrix(c).noalias() = as_matrix(a) * as_matrix(b).transpose();
    return c;
}

// C = A^T * B, rank-2.
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    check_arg(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0),
              "matmul_tn shape mismatch " + a.shape_str() + " x " + b.shape_str());
    Tensor c({a.dim(1), b.dim(1)});
    as_matrix(c).noalias() = as_matrix(a).transpose() * as_matrix(b);
    return c;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    check_arg(a.same_shape(b), "max_abs_diff shape mismatch");
    double m = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::fabs(a[i] - b[i]));
    }
    return m;
}

inline double mean_squared_diff(const Tensor& a, const Tensor& b) {
    check_arg(a.same_shape(b), "mean_squared_diff shape mismatch");
    if (a.size() == 0) return 0.0;
    double s = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / double(a.size());
}

inline double l2_norm(const Tensor& a) {
    double s = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return std::sqrt(s);
}

}  // namespace ffpkit
