#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sr2cnn {

enum class ErrorCode {
    invalid_argument,  // bad config or parameter
    shape_mismatch,    // tensor extents disagree
    non_finite,        // NaN/Inf where finite values are required
    data_format,       // corrupt or incompatible file contents
    io,                // filesystem failure
    numeric            // runtime numerical failure (diverged loss, bad gradient)
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

/// Dense n-dimensional array, row-major contiguous storage.
template <typename T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)), data(numel_of(shape), T(0)) {}
    Tensor(std::vector<std::size_t> s, std::vector<T> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != data.size())
            throw Error(ErrorCode::shape_mismatch, "tensor data length does not match shape");
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t e : s) n *= e;
        return s.empty() ? 0 : n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t extent(std::size_t i) const { return shape.at(i); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& operator()(std::size_t i) { return data[i]; }
    const T& operator()(std::size_t i) const { return data[i]; }
    T& operator()(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    T& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    T& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
    void zero() { fill(T(0)); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

template <typename T>
void require_shape(const Tensor<T>& t, const std::vector<std::size_t>& shape, const char* what) {
    if (t.shape != shape)
        throw Error(ErrorCode::shape_mismatch, std::string("unexpected shape for ") + what);
}

template <typename T>
void require_finite(const Tensor<T>& t, const char* what) {
    if (!t.all_finite())
        throw Error(ErrorCode::non_finite, std::string("non-finite values in ") + what);
}

}  // namespace sr2cnn
