#include "sidekit/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sidekit/error.hpp"

namespace sidekit {

namespace {

using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ShapeError("Tensor2: data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
    }
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<float> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("Tensor2::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor2(r, c, std::move(data));
}

Tensor2 Tensor2::identity(std::size_t n) {
    Tensor2 t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0f;
    return t;
}

Tensor2 Tensor2::row_vector(std::span<const float> values) {
    return Tensor2(1, values.size(), std::vector<float>(values.begin(), values.end()));
}

void Tensor2::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor2::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

std::size_t first_non_finite(const Tensor2& t) {
    const auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) return i;
    }
    return v.size();
}

void gemm(const Tensor2& a, bool trans_a, const Tensor2& b, bool trans_b, Tensor2& out,
          bool accumulate) {
    const std::size_t m = trans_a ? a.cols() : a.rows();
    const std::size_t ka = trans_a ? a.rows() : a.cols();
    const std::size_t kb = trans_b ? b.cols() : b.rows();
    const std::size_t n = trans_b ? b.rows() : b.cols();
    if (ka != kb) {
        throw ShapeError("gemm: inner dimensions differ (" + a.shape_string() + " vs " +
                         b.shape_string() + ")");
    }
    if (out.rows() != m || out.cols() != n) {
        if (accumulate) throw ShapeError("gemm: accumulate target has wrong shape");
        out = Tensor2(m, n);
    }
    ConstMap am(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
    ConstMap bm(b.data(), static_cast<Eigen::Index>(b.rows()), static_cast<Eigen::Index>(b.cols()));
    Map om(out.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    if (m == 0 || n == 0) return;
    if (ka == 0) {
        if (!accumulate) om.setZero();
        return;
    }
    if (!accumulate) om.setZero();
    if (!trans_a && !trans_b) {
        om.noalias() += am * bm;
    } else if (trans_a && !trans_b) {
        om.noalias() += am.transpose() * bm;
    } else if (!trans_a && trans_b) {
        om.noalias() += am * bm.transpose();
    } else {
        om.noalias() += am.transpose() * bm.transpose();
    }
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    Tensor2 out;
    gemm(a, false, b, false, out);
    return out;
}

Tensor2 transpose(const Tensor2& a) {
    Tensor2 t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
    }
    return t;
}

Tensor2 l2_normalize_rows(const Tensor2& x) {
    Tensor2 out = x;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        const float norm = std::sqrt(dot(row, row));
        if (norm > 0.0f) {
            for (float& v : row) v /= norm;
        }
    }
    return out;
}

float dot(std::span<const float> a, std::span<const float> b) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

float squared_distance(std::span<const float> a, std::span<const float> b) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const float d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace sidekit
