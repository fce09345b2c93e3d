#pragma once

// Raw compute kernels behind the autodiff ops.
//
// Two implementations live side by side:
//   kernels::           im2col + packed GEMM, OpenMP across batch samples
//   kernels::reference  direct nested loops, serial
//
// The reference versions are kept for testing and benchmarking only. Every
// optimized kernel computes each batch sample with the same instruction
// sequence regardless of batch size or thread count, so a sample's result is
// bit-identical however it is batched.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mcdseg::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t kernel = 1;  // odd; zero padding (kernel - 1) / 2

  std::size_t plane() const { return height * width; }
  std::size_t patch() const { return in_channels * kernel * kernel; }
};

/// C[m x n] (+)= op(A)[m x k] * op(B)[k x n], row-major.
/// With trans_a, A is stored k x m (lda >= m); with trans_b, B is stored n x k.
template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, bool trans_a,
          const T* b, std::size_t ldb, bool trans_b, T* c, std::size_t ldc, bool accumulate);

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col);

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* dx);

/// y[N,O,H,W] = conv(x[N,C,H,W], w[O,C,k,k]) + bias[O]. bias may be null.
template <typename T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y, const ConvGeometry& g);

/// Any of dx, dw, db may be null. dw and db are accumulated into; dx is overwritten.
template <typename T>
void conv2d_backward(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db,
                     const ConvGeometry& g);

/// 2x2 stride-2 transposed convolution. x[N,C,H,W], w[C,O,2,2] -> y[N,O,2H,2W].
template <typename T>
void conv_transpose2x2_forward(const T* x, const T* w, const T* bias, T* y, const ConvGeometry& g);

template <typename T>
void conv_transpose2x2_backward(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db,
                                const ConvGeometry& g);

/// 2x2 stride-2 max pooling over N*C planes of size H x W. argmax receives the
/// in-plane index of each window maximum (first maximum on ties).
template <typename T>
void max_pool2x2_forward(const T* x, std::size_t planes, std::size_t height, std::size_t width,
                         T* y, std::uint32_t* argmax);

template <typename T>
void max_pool2x2_backward(const T* dy, const std::uint32_t* argmax, std::size_t planes,
                          std::size_t height, std::size_t width, T* dx);

namespace reference {

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, bool trans_a,
          const T* b, std::size_t ldb, bool trans_b, T* c, std::size_t ldc, bool accumulate);

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y, const ConvGeometry& g);

template <typename T>
void conv2d_backward(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db,
                     const ConvGeometry& g);

}  // namespace reference

}  // namespace mcdseg::kernels
