#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace sidekit {

/// Dense row-major matrix of 32-bit floats. Also used for embedding corpora
/// (one vector per row).
class Tensor2 {
public:
    Tensor2() = default;
    Tensor2(std::size_t rows, std::size_t cols, float fill = 0.0f);
    Tensor2(std::size_t rows, std::size_t cols, std::vector<float> data);

    static Tensor2 from_rows(std::initializer_list<std::initializer_list<float>> rows);
    static Tensor2 identity(std::size_t n);
    static Tensor2 row_vector(std::span<const float> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<float> values() noexcept { return data_; }
    std::span<const float> values() const noexcept { return data_; }
    float* data() noexcept { return data_.data(); }
    const float* data() const noexcept { return data_.data(); }

    void fill(float v);
    std::string shape_string() const;

    friend bool operator==(const Tensor2& a, const Tensor2& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

/// Index of the first non-finite entry, or size() when all entries are finite.
std::size_t first_non_finite(const Tensor2& t);

/// out = op(a) * op(b), where op transposes when the flag is set.
/// `out` is resized as needed; when `accumulate` is set the product is added.
void gemm(const Tensor2& a, bool trans_a, const Tensor2& b, bool trans_b, Tensor2& out,
          bool accumulate = false);

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 transpose(const Tensor2& a);

/// Copy of `x` with every row scaled to unit L2 norm. Zero rows stay zero.
Tensor2 l2_normalize_rows(const Tensor2& x);

float dot(std::span<const float> a, std::span<const float> b);
float squared_distance(std::span<const float> a, std::span<const float> b);

}  // namespace sidekit
