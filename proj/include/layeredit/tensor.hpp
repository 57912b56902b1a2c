#ifndef LAYEREDIT_TENSOR_HPP
#define LAYEREDIT_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "mask.hpp"

namespace layeredit {

/// C x H x W latent, stored channel-major then row-major.
class LatentTensor {
public:
    LatentTensor() = default;
    LatentTensor(int channels, int height, int width, float fill = 0.0f)
        : channels_(channels), height_(height), width_(width) {
        require(channels > 0 && height > 0 && width > 0, ErrorCode::InvalidArgument, "latent dims must be positive");
        values_.assign(static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
                           static_cast<std::size_t>(width),
                       fill);
    }

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t cells() const { return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_); }
    std::size_t size() const { return values_.size(); }

    float& at(int c, int y, int x) { return values_[offset(c, y, x)]; }
    float at(int c, int y, int x) const { return values_[offset(c, y, x)]; }
    /// Channel c, cell index (row-major).
    float& at(int c, std::size_t cell) { return values_[static_cast<std::size_t>(c) * cells() + cell]; }
    float at(int c, std::size_t cell) const { return values_[static_cast<std::size_t>(c) * cells() + cell]; }

    std::span<float> values() { return values_; }
    std::span<const float> values() const { return values_; }

    bool same_shape(const LatentTensor& o) const {
        return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
    }

    void check_shape(const LatentTensor& o) const {
        if (!same_shape(o))
            fail(ErrorCode::DimensionMismatch, "latent " + shape_string() + " vs " + o.shape_string());
    }

    void check_mask(const Mask& m) const {
        if (m.width() != width_ || m.height() != height_)
            fail(ErrorCode::DimensionMismatch, "mask " + std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                                                   " vs latent " + shape_string());
    }

    bool all_finite() const {
        for (float v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void check_finite(const std::string& where) const {
        require(all_finite(), ErrorCode::NumericFailure, "non-finite latent value in " + where);
    }

    std::string shape_string() const {
        return std::to_string(channels_) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
    }

    bool operator==(const LatentTensor&) const = default;

private:
    std::size_t offset(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height_) + static_cast<std::size_t>(y)) *
                   static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<float> values_;
};

/// Dense row-major float matrix used for token activations and weights.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

    float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

/// out = a * b (a: n x k, b: k x m).
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols == b.rows, ErrorCode::DimensionMismatch, "matmul inner dims");
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        float* o = out.data.data() + i * out.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            float av = a(i, k);
            const float* br = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) o[j] += av * br[j];
        }
    }
    return out;
}

inline void add_row_bias(Matrix& m, std::span<const float> bias) {
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) m(i, j) += bias[j];
}

inline void add_in_place(Matrix& a, const Matrix& b) {
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

}  // namespace layeredit

#endif
