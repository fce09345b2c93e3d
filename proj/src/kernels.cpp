#include "mcdseg/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#include <omp.h>

namespace mcdseg::kernels {

namespace {

// One register tile is kMr rows by two vectors of kLanes.
template <typename T>
struct Blocking {
  static constexpr std::size_t kLanes = 64 / sizeof(T);
  static constexpr std::size_t kMr = 6;
  static constexpr std::size_t kNr = 2 * kLanes;
  static constexpr std::size_t kKc = 256;
  static constexpr std::size_t kMc = 96;
  static constexpr std::size_t kNc = 512;
};

template <typename T>
struct VecOf;
template <>
struct VecOf<float> {
  typedef float type __attribute__((vector_size(64)));
};
template <>
struct VecOf<double> {
  typedef double type __attribute__((vector_size(64)));
};
template <typename T>
using Vec = typename VecOf<T>::type;

template <typename T>
inline T load(const T* m, std::size_t ld, bool trans, std::size_t row, std::size_t col) {
  return trans ? m[col * ld + row] : m[row * ld + col];
}

// ap[panel][p][r], zero-padded to full kMr rows.
template <typename T>
void pack_a(const T* a, std::size_t lda, bool trans, std::size_t i0, std::size_t mc, std::size_t p0,
            std::size_t kc, T* ap) {
  constexpr std::size_t mr = Blocking<T>::kMr;
  for (std::size_t ip = 0; ip < mc; ip += mr) {
    const std::size_t rows = std::min(mr, mc - ip);
    if (trans) {
      // Rows of the stored matrix are contiguous along the panel's rows.
      for (std::size_t p = 0; p < kc; ++p) {
        const T* src = a + (p0 + p) * lda + i0 + ip;
        for (std::size_t r = 0; r < mr; ++r) ap[p * mr + r] = r < rows ? src[r] : T{0};
      }
    } else {
      for (std::size_t r = 0; r < mr; ++r) {
        const T* src = a + (i0 + ip + r) * lda + p0;
        for (std::size_t p = 0; p < kc; ++p) ap[p * mr + r] = r < rows ? src[p] : T{0};
      }
    }
    ap += kc * mr;
  }
}

// bp[panel][p][j], zero-padded to full kNr columns.
template <typename T>
void pack_b(const T* b, std::size_t ldb, bool trans, std::size_t p0, std::size_t kc, std::size_t j0,
            std::size_t nc, T* bp) {
  constexpr std::size_t nr = Blocking<T>::kNr;
  for (std::size_t jp = 0; jp < nc; jp += nr) {
    const std::size_t cols = std::min(nr, nc - jp);
    if (trans) {
      for (std::size_t j = 0; j < nr; ++j) {
        if (j >= cols) {
          for (std::size_t p = 0; p < kc; ++p) bp[p * nr + j] = T{0};
          continue;
        }
        const T* src = b + (j0 + jp + j) * ldb + p0;
        for (std::size_t p = 0; p < kc; ++p) bp[p * nr + j] = src[p];
      }
    } else {
      for (std::size_t p = 0; p < kc; ++p) {
        const T* src = b + (p0 + p) * ldb + j0 + jp;
        if (cols == nr) {
          std::memcpy(bp + p * nr, src, nr * sizeof(T));
        } else {
          for (std::size_t j = 0; j < nr; ++j) bp[p * nr + j] = j < cols ? src[j] : T{0};
        }
      }
    }
    bp += kc * nr;
  }
}

template <typename T>
inline void micro_kernel(std::size_t kc, const T* __restrict ap, const T* __restrict bp,
                         T (&acc)[Blocking<T>::kMr][Blocking<T>::kNr]) {
  constexpr std::size_t mr = Blocking<T>::kMr;
  constexpr std::size_t lanes = Blocking<T>::kLanes;
  Vec<T> c0[mr], c1[mr];
  for (std::size_t r = 0; r < mr; ++r) c0[r] = c1[r] = Vec<T>{};
  for (std::size_t p = 0; p < kc; ++p) {
    Vec<T> b0, b1;
    __builtin_memcpy(&b0, bp + p * 2 * lanes, sizeof b0);
    __builtin_memcpy(&b1, bp + p * 2 * lanes + lanes, sizeof b1);
    const T* aa = ap + p * mr;
    for (std::size_t r = 0; r < mr; ++r) {
      const Vec<T> a = Vec<T>{} + aa[r];
      c0[r] += a * b0;
      c1[r] += a * b1;
    }
  }
  for (std::size_t r = 0; r < mr; ++r) {
    __builtin_memcpy(&acc[r][0], &c0[r], sizeof c0[r]);
    __builtin_memcpy(&acc[r][lanes], &c1[r], sizeof c1[r]);
  }
}

template <typename T>
void gemm_column_block(std::size_t m, std::size_t k, const T* a, std::size_t lda, bool trans_a,
                       const T* b, std::size_t ldb, bool trans_b, T* c, std::size_t ldc,
                       bool accumulate, std::size_t j0, std::size_t nc) {
  using B = Blocking<T>;
  thread_local std::vector<T> abuf;
  thread_local std::vector<T> bbuf;
  const std::size_t nc_pad = (nc + B::kNr - 1) / B::kNr * B::kNr;
  bbuf.resize(nc_pad * B::kKc);
  abuf.resize((B::kMc + B::kMr) * B::kKc);

  for (std::size_t p0 = 0; p0 < k; p0 += B::kKc) {
    const std::size_t kc = std::min(B::kKc, k - p0);
    const bool store = (p0 == 0) && !accumulate;
    pack_b(b, ldb, trans_b, p0, kc, j0, nc, bbuf.data());
    for (std::size_t i0 = 0; i0 < m; i0 += B::kMc) {
      const std::size_t mc = std::min(B::kMc, m - i0);
      pack_a(a, lda, trans_a, i0, mc, p0, kc, abuf.data());
      for (std::size_t jp = 0; jp < nc; jp += B::kNr) {
        const std::size_t cols = std::min(B::kNr, nc - jp);
        const T* bp = bbuf.data() + jp * kc;
        for (std::size_t ip = 0; ip < mc; ip += B::kMr) {
          const std::size_t rows = std::min(B::kMr, mc - ip);
          T acc[B::kMr][B::kNr];
          micro_kernel<T>(kc, abuf.data() + ip * kc, bp, acc);
          for (std::size_t r = 0; r < rows; ++r) {
            T* crow = c + (i0 + ip + r) * ldc + j0 + jp;
            if (store) {
              for (std::size_t j = 0; j < cols; ++j) crow[j] = acc[r][j];
            } else {
              for (std::size_t j = 0; j < cols; ++j) crow[j] += acc[r][j];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void add_bias(T* y, const T* bias, std::size_t channels, std::size_t plane) {
  if (!bias) return;
  for (std::size_t o = 0; o < channels; ++o) {
    T* row = y + o * plane;
    const T bv = bias[o];
    for (std::size_t i = 0; i < plane; ++i) row[i] += bv;
  }
}

}  // namespace

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, bool trans_a,
          const T* b, std::size_t ldb, bool trans_b, T* c, std::size_t ldc, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate)
      for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T{0});
    return;
  }
  constexpr std::size_t nc = Blocking<T>::kNc;
  const std::size_t blocks = (n + nc - 1) / nc;
  const bool parallel = blocks > 1 && m * n * k > (1u << 18) && !omp_in_parallel();
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t jb = 0; jb < blocks; ++jb) {
    const std::size_t j0 = jb * nc;
    gemm_column_block(m, k, a, lda, trans_a, b, ldb, trans_b, c, ldc, accumulate, j0,
                      std::min(nc, n - j0));
  }
}

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t h = g.height, w = g.width, k = g.kernel;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const T* plane = x + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = col + ((c * k + ky) * k + kx) * h * w;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::size_t x_lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
        const std::size_t x_hi = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(w) - dx));
        for (std::size_t y = 0; y < h; ++y) {
          T* out = row + y * w;
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h) || x_lo >= x_hi) {
            std::fill(out, out + w, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(sy) * w;
          std::fill(out, out + x_lo, T{0});
          for (std::size_t xx = x_lo; xx < x_hi; ++xx) out[xx] = src[xx + dx];
          std::fill(out + x_hi, out + w, T{0});
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* dx_out) {
  const std::size_t h = g.height, w = g.width, k = g.kernel;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    T* plane = dx_out + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = col + ((c * k + ky) * k + kx) * h * w;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::size_t x_lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
        const std::size_t x_hi = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(w) - dx));
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = plane + static_cast<std::size_t>(sy) * w;
          const T* src = row + y * w;
          for (std::size_t xx = x_lo; xx < x_hi; ++xx) dst[xx + dx] += src[xx];
        }
      }
    }
  }
}

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y, const ConvGeometry& g) {
  const std::size_t plane = g.plane(), patch = g.patch();
  const std::size_t in_stride = g.in_channels * plane, out_stride = g.out_channels * plane;
#pragma omp parallel for schedule(static) if (g.batch > 1)
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* xn = x + n * in_stride;
    T* yn = y + n * out_stride;
    if (g.kernel == 1) {
      gemm(g.out_channels, plane, patch, w, patch, false, xn, plane, false, yn, plane, false);
    } else {
      thread_local std::vector<T> col;
      col.resize(patch * plane);
      im2col(xn, g, col.data());
      gemm(g.out_channels, plane, patch, w, patch, false, col.data(), plane, false, yn, plane, false);
    }
    add_bias(yn, bias, g.out_channels, plane);
  }
}

template <typename T>
void conv2d_backward(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db,
                     const ConvGeometry& g) {
  const std::size_t plane = g.plane(), patch = g.patch(), oc = g.out_channels;
  const std::size_t in_stride = g.in_channels * plane, out_stride = oc * plane;
  const std::size_t wsize = oc * patch;
  // Per-sample weight gradients, reduced afterwards in sample order so the
  // sum does not depend on thread scheduling.
  std::vector<T> dw_parts(dw ? g.batch * wsize : 0);

#pragma omp parallel for schedule(static) if (g.batch > 1)
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* xn = x + n * in_stride;
    const T* dyn = dy + n * out_stride;
    thread_local std::vector<T> col;
    col.resize(patch * plane);
    if (dw) {
      const T* cols = xn;
      if (g.kernel != 1) {
        im2col(xn, g, col.data());
        cols = col.data();
      }
      gemm(oc, patch, plane, dyn, plane, false, cols, plane, true, dw_parts.data() + n * wsize,
           patch, false);
    }
    if (dx) {
      T* dxn = dx + n * in_stride;
      if (g.kernel == 1) {
        gemm(patch, plane, oc, w, patch, true, dyn, plane, false, dxn, plane, false);
      } else {
        gemm(patch, plane, oc, w, patch, true, dyn, plane, false, col.data(), plane, false);
        std::fill(dxn, dxn + in_stride, T{0});
        col2im_add(col.data(), g, dxn);
      }
    }
  }
  if (dw) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* part = dw_parts.data() + n * wsize;
      for (std::size_t i = 0; i < wsize; ++i) dw[i] += part[i];
    }
  }
  if (db) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t o = 0; o < oc; ++o) {
        const T* row = dy + n * out_stride + o * plane;
        T s{0};
        for (std::size_t i = 0; i < plane; ++i) s += row[i];
        db[o] += s;
      }
    }
  }
}

template <typename T>
void conv_transpose2x2_forward(const T* x, const T* w, const T* bias, T* y, const ConvGeometry& g) {
  const std::size_t h = g.height, wd = g.width, ow = 2 * wd;
  const std::size_t in_plane = h * wd, out_plane = 4 * in_plane;
#pragma omp parallel for schedule(static) if (g.batch > 1)
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      T* yo = y + (n * g.out_channels + o) * out_plane;
      std::fill(yo, yo + out_plane, bias ? bias[o] : T{0});
      for (std::size_t c = 0; c < g.in_channels; ++c) {
        const T* xc = x + (n * g.in_channels + c) * in_plane;
        const T* wk = w + (c * g.out_channels + o) * 4;
        for (std::size_t i = 0; i < h; ++i) {
          T* r0 = yo + (2 * i) * ow;
          T* r1 = r0 + ow;
          const T* xr = xc + i * wd;
          for (std::size_t j = 0; j < wd; ++j) {
            const T v = xr[j];
            r0[2 * j] += v * wk[0];
            r0[2 * j + 1] += v * wk[1];
            r1[2 * j] += v * wk[2];
            r1[2 * j + 1] += v * wk[3];
          }
        }
      }
    }
  }
}

template <typename T>
void conv_transpose2x2_backward(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db,
                                const ConvGeometry& g) {
  const std::size_t h = g.height, wd = g.width, ow = 2 * wd;
  const std::size_t in_plane = h * wd, out_plane = 4 * in_plane;
  if (dx) {
#pragma omp parallel for schedule(static) if (g.batch > 1)
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t c = 0; c < g.in_channels; ++c) {
        T* dxc = dx + (n * g.in_channels + c) * in_plane;
        std::fill(dxc, dxc + in_plane, T{0});
        for (std::size_t o = 0; o < g.out_channels; ++o) {
          const T* dyo = dy + (n * g.out_channels + o) * out_plane;
          const T* wk = w + (c * g.out_channels + o) * 4;
          for (std::size_t i = 0; i < h; ++i) {
            const T* r0 = dyo + (2 * i) * ow;
            const T* r1 = r0 + ow;
            T* dr = dxc + i * wd;
            for (std::size_t j = 0; j < wd; ++j) {
              dr[j] += r0[2 * j] * wk[0] + r0[2 * j + 1] * wk[1] + r1[2 * j] * wk[2] +
                       r1[2 * j + 1] * wk[3];
            }
          }
        }
      }
    }
  }
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      const T* dyo = dy + (n * g.out_channels + o) * out_plane;
      if (db) {
        T s{0};
        for (std::size_t i = 0; i < out_plane; ++i) s += dyo[i];
        db[o] += s;
      }
      if (!dw) continue;
      for (std::size_t c = 0; c < g.in_channels; ++c) {
        const T* xc = x + (n * g.in_channels + c) * in_plane;
        T acc[4] = {T{0}, T{0}, T{0}, T{0}};
        for (std::size_t i = 0; i < h; ++i) {
          const T* r0 = dyo + (2 * i) * ow;
          const T* r1 = r0 + ow;
          const T* xr = xc + i * wd;
          for (std::size_t j = 0; j < wd; ++j) {
            acc[0] += xr[j] * r0[2 * j];
            acc[1] += xr[j] * r0[2 * j + 1];
            acc[2] += xr[j] * r1[2 * j];
            acc[3] += xr[j] * r1[2 * j + 1];
          }
        }
        T* wk = dw + (c * g.out_channels + o) * 4;
        for (int q = 0; q < 4; ++q) wk[q] += acc[q];
      }
    }
  }
}

template <typename T>
void max_pool2x2_forward(const T* x, std::size_t planes, std::size_t height, std::size_t width,
                         T* y, std::uint32_t* argmax) {
  const std::size_t oh = height / 2, ow = width / 2;
#pragma omp parallel for schedule(static) if (planes > 16)
  for (std::size_t p = 0; p < planes; ++p) {
    const T* xp = x + p * height * width;
    T* yp = y + p * oh * ow;
    std::uint32_t* ap = argmax + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const std::size_t base = 2 * i * width + 2 * j;
        const std::size_t cand[4] = {base, base + 1, base + width, base + width + 1};
        std::size_t best = cand[0];
        for (int q = 1; q < 4; ++q)
          if (xp[cand[q]] > xp[best]) best = cand[q];
        yp[i * ow + j] = xp[best];
        ap[i * ow + j] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

template <typename T>
void max_pool2x2_backward(const T* dy, const std::uint32_t* argmax, std::size_t planes,
                          std::size_t height, std::size_t width, T* dx) {
  const std::size_t out_plane = (height / 2) * (width / 2);
  std::fill(dx, dx + planes * height * width, T{0});
  for (std::size_t p = 0; p < planes; ++p) {
    T* dxp = dx + p * height * width;
    for (std::size_t i = 0; i < out_plane; ++i) dxp[argmax[p * out_plane + i]] += dy[p * out_plane + i];
  }
}

namespace reference {

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, bool trans_a,
          const T* b, std::size_t ldb, bool trans_b, T* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T s{0};
      for (std::size_t p = 0; p < k; ++p) s += load(a, lda, trans_a, i, p) * load(b, ldb, trans_b, p, j);
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + s : s;
    }
  }
}

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* bias, T* y, const ConvGeometry& g) {
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(g.height);
  const std::ptrdiff_t wd = static_cast<std::ptrdiff_t>(g.width);
  const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(g.kernel), pad = k / 2;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::ptrdiff_t i = 0; i < h; ++i)
        for (std::ptrdiff_t j = 0; j < wd; ++j) {
          T s = bias ? bias[o] : T{0};
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::ptrdiff_t ky = 0; ky < k; ++ky)
              for (std::ptrdiff_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t si = i + ky - pad, sj = j + kx - pad;
                if (si < 0 || si >= h || sj < 0 || sj >= wd) continue;
                s += x[((n * g.in_channels + c) * g.height + si) * g.width + sj] *
                     w[((o * g.in_channels + c) * g.kernel + ky) * g.kernel + kx];
              }
          y[((n * g.out_channels + o) * g.height + i) * g.width + j] = s;
        }
}

template <typename T>
void conv2d_backward(const T* x, const T* w, const T* dy, T* dx, T* dw, T* db,
                     const ConvGeometry& g) {
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(g.height);
  const std::ptrdiff_t wd = static_cast<std::ptrdiff_t>(g.width);
  const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(g.kernel), pad = k / 2;
  if (dx) std::fill(dx, dx + g.batch * g.in_channels * g.plane(), T{0});
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::ptrdiff_t i = 0; i < h; ++i)
        for (std::ptrdiff_t j = 0; j < wd; ++j) {
          const T gy = dy[((n * g.out_channels + o) * g.height + i) * g.width + j];
          if (db) db[o] += gy;
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::ptrdiff_t ky = 0; ky < k; ++ky)
              for (std::ptrdiff_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t si = i + ky - pad, sj = j + kx - pad;
                if (si < 0 || si >= h || sj < 0 || sj >= wd) continue;
                const std::size_t xi = ((n * g.in_channels + c) * g.height + si) * g.width + sj;
                const std::size_t wi = ((o * g.in_channels + c) * g.kernel + ky) * g.kernel + kx;
                if (dw) dw[wi] += gy * x[xi];
                if (dx) dx[xi] += gy * w[wi];
              }
        }
}

}  // namespace reference

#define MCDSEG_INSTANTIATE(T)                                                                     \
  template void gemm<T>(std::size_t, std::size_t, std::size_t, const T*, std::size_t, bool,       \
                        const T*, std::size_t, bool, T*, std::size_t, bool);                      \
  template void im2col<T>(const T*, const ConvGeometry&, T*);                                     \
  template void col2im_add<T>(const T*, const ConvGeometry&, T*);                                 \
  template void conv2d_forward<T>(const T*, const T*, const T*, T*, const ConvGeometry&);         \
  template void conv2d_backward<T>(const T*, const T*, const T*, T*, T*, T*, const ConvGeometry&); \
  template void conv_transpose2x2_forward<T>(const T*, const T*, const T*, T*, const ConvGeometry&); \
  template void conv_transpose2x2_backward<T>(const T*, const T*, const T*, T*, T*, T*,           \
                                              const ConvGeometry&);                               \
  template void max_pool2x2_forward<T>(const T*, std::size_t, std::size_t, std::size_t, T*,       \
                                       std::uint32_t*);                                           \
  template void max_pool2x2_backward<T>(const T*, const std::uint32_t*, std::size_t, std::size_t, \
                                        std::size_t, T*);                                         \
  template void reference::gemm<T>(std::size_t, std::size_t, std::size_t, const T*, std::size_t, \
                                   bool, const T*, std::size_t, bool, T*, std::size_t, bool);     \
  template void reference::conv2d_forward<T>(const T*, const T*, const T*, T*, const ConvGeometry&); \
  template void reference::conv2d_backward<T>(const T*, const T*, const T*, T*, T*, T*,          \
                                              const ConvGeometry&);

MCDSEG_INSTANTIATE(float)
MCDSEG_INSTANTIATE(double)

#undef MCDSEG_INSTANTIATE

}  // namespace mcdseg::kernels
