#include "mcdseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>

#include "mcdseg/kernels.hpp"

namespace mcdseg {

namespace {

void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) throw DimensionError(std::string(op) + ": expected [N,C,H,W], got " + shape_str(s));
}

template <typename T>
bool needs_grad(const std::shared_ptr<Node<T>>& n) {
  return n->requires_grad;
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& weight, const std::optional<Var<T>>& bias) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require_rank4(xs, "conv2d");
  if (ws.size() != 4 || ws[2] != ws[3]) throw DimensionError("conv2d: weight must be [O,C,k,k], got " + shape_str(ws));
  if (ws[1] != xs[1]) {
    throw DimensionError("conv2d: input has " + std::to_string(xs[1]) + " channels, weight expects " +
                         std::to_string(ws[1]));
  }
  if (ws[2] % 2 == 0) throw DimensionError("conv2d: kernel size must be odd");
  if (xs[2] == 0 || xs[3] == 0) throw DimensionError("conv2d: empty spatial dims");
  if (bias && (bias->shape().size() != 1 || bias->shape()[0] != ws[0])) {
    throw DimensionError("conv2d: bias must be [O]");
  }

  kernels::ConvGeometry g{xs[0], xs[1], ws[0], xs[2], xs[3], ws[2]};
  Tensor<T> out(Shape{xs[0], ws[0], xs[2], xs[3]});
  kernels::conv2d_forward(input.value().ptr(), weight.value().ptr(),
                          bias ? bias->value().ptr() : nullptr, out.ptr(), g);

  std::vector<Var<T>> inputs{input, weight};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return detail::make_result<T>(std::move(out), std::move(inputs), [g, has_bias](Node<T>& self) {
    auto& x = self.inputs[0];
    auto& w = self.inputs[1];
    T* dx = needs_grad(x) ? x->grad_buffer().ptr() : nullptr;
    T* dw = needs_grad(w) ? w->grad_buffer().ptr() : nullptr;
    T* db = (has_bias && needs_grad(self.inputs[2])) ? self.inputs[2]->grad_buffer().ptr() : nullptr;
    // The kernel overwrites dx, so route through a scratch buffer to keep
    // accumulation semantics for inputs used more than once.
    Tensor<T> dx_tmp;
    if (dx) dx_tmp = Tensor<T>(x->value.shape());
    kernels::conv2d_backward(x->value.ptr(), w->value.ptr(), self.grad.ptr(), dx ? dx_tmp.ptr() : nullptr,
                             dw, db, g);
    if (dx) {
      for (std::size_t i = 0; i < dx_tmp.size(); ++i) dx[i] += dx_tmp[i];
    }
  });
}

template <typename T>
Var<T> transposed_conv2d(const Var<T>& input, const Var<T>& weight,
                         const std::optional<Var<T>>& bias) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require_rank4(xs, "transposed_conv2d");
  if (ws.size() != 4 || ws[2] != 2 || ws[3] != 2 || ws[0] != xs[1]) {
    throw DimensionError("transposed_conv2d: weight must be [C,O,2,2] with C=" + std::to_string(xs[1]) +
                         ", got " + shape_str(ws));
  }
  if (bias && (bias->shape().size() != 1 || bias->shape()[0] != ws[1])) {
    throw DimensionError("transposed_conv2d: bias must be [O]");
  }
  kernels::ConvGeometry g{xs[0], xs[1], ws[1], xs[2], xs[3], 2};
  Tensor<T> out(Shape{xs[0], ws[1], 2 * xs[2], 2 * xs[3]});
  kernels::conv_transpose2x2_forward(input.value().ptr(), weight.value().ptr(),
                                     bias ? bias->value().ptr() : nullptr, out.ptr(), g);
  std::vector<Var<T>> inputs{input, weight};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return detail::make_result<T>(std::move(out), std::move(inputs), [g, has_bias](Node<T>& self) {
    auto& x = self.inputs[0];
    auto& w = self.inputs[1];
    Tensor<T> dx_tmp;
    if (needs_grad(x)) dx_tmp = Tensor<T>(x->value.shape());
    T* dw = needs_grad(w) ? w->grad_buffer().ptr() : nullptr;
    T* db = (has_bias && needs_grad(self.inputs[2])) ? self.inputs[2]->grad_buffer().ptr() : nullptr;
    kernels::conv_transpose2x2_backward(x->value.ptr(), w->value.ptr(), self.grad.ptr(),
                                        dx_tmp.empty() ? nullptr : dx_tmp.ptr(), dw, db, g);
    if (!dx_tmp.empty()) {
      auto& dx = x->grad_buffer();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx_tmp[i];
    }
  });
}

template <typename T>
Var<T> max_pool2d(const Var<T>& input) {
  const Shape& xs = input.shape();
  require_rank4(xs, "max_pool2d");
  if (xs[2] % 2 || xs[3] % 2) {
    throw DimensionError("max_pool2d: spatial dims must be even, got " + shape_str(xs));
  }
  const std::size_t planes = xs[0] * xs[1];
  Tensor<T> out(Shape{xs[0], xs[1], xs[2] / 2, xs[3] / 2});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.size());
  kernels::max_pool2x2_forward(input.value().ptr(), planes, xs[2], xs[3], out.ptr(), argmax->data());
  const std::size_t h = xs[2], w = xs[3];
  return detail::make_result<T>(std::move(out), {input}, [argmax, planes, h, w](Node<T>& self) {
    auto& x = self.inputs[0];
    Tensor<T> dx_tmp(x->value.shape());
    kernels::max_pool2x2_backward(self.grad.ptr(), argmax->data(), planes, h, w, dx_tmp.ptr());
    auto& dx = x->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx_tmp[i];
  });
}

template <typename T>
Var<T> batch_norm2d(const Var<T>& input, const Var<T>& gamma, const Var<T>& beta,
                    BatchNormState<T>& state, NormMode mode, const BatchNormOptions& opts) {
  const Shape& xs = input.shape();
  require_rank4(xs, "batch_norm2d");
  const std::size_t n = xs[0], c = xs[1], plane = xs[2] * xs[3];
  const std::size_t count = n * plane;
  if (gamma.size() != c || beta.size() != c || state.running_mean.size() != c ||
      state.running_var.size() != c) {
    throw DimensionError("batch_norm2d: per-channel parameters must have " + std::to_string(c) + " entries");
  }
  if (mode == NormMode::train && count < 2) {
    throw DegenerateError("batch_norm2d: train mode needs at least two values per channel");
  }

  const T* x = input.value().ptr();
  Tensor<T> out(xs);
  // Per-channel mean and inverse std actually used for normalization.
  auto mu = std::make_shared<std::vector<T>>(c);
  auto inv_std = std::make_shared<std::vector<T>>(c);

  for (std::size_t ch = 0; ch < c; ++ch) {
    T m, var;
    if (mode == NormMode::train) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x + (b * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double md = s / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x + (b * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - md;
          sq += d * d;
        }
      }
      m = static_cast<T>(md);
      var = static_cast<T>(sq / static_cast<double>(count));
      const T mom = static_cast<T>(opts.momentum);
      state.running_mean[ch] = (T{1} - mom) * state.running_mean[ch] + mom * m;
      state.running_var[ch] = (T{1} - mom) * state.running_var[ch] + mom * var;
    } else {
      m = state.running_mean[ch];
      var = state.running_var[ch];
    }
    (*mu)[ch] = m;
    (*inv_std)[ch] = T{1} / std::sqrt(var + static_cast<T>(opts.epsilon));
    const T gm = gamma.value()[ch], bt = beta.value()[ch], is = (*inv_std)[ch];
    for (std::size_t b = 0; b < n; ++b) {
      const T* p = x + (b * c + ch) * plane;
      T* q = out.ptr() + (b * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) q[i] = gm * ((p[i] - m) * is) + bt;
    }
  }

  const bool train = mode == NormMode::train;
  return detail::make_result<T>(
      std::move(out), {input, gamma, beta}, [mu, inv_std, n, c, plane, count, train](Node<T>& self) {
        auto& xn = self.inputs[0];
        auto& gn = self.inputs[1];
        auto& bn = self.inputs[2];
        const T* x = xn->value.ptr();
        const T* dy = self.grad.ptr();
        for (std::size_t ch = 0; ch < c; ++ch) {
          const T m = (*mu)[ch], is = (*inv_std)[ch];
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_dy += dy[off + i];
              sum_dy_xhat += static_cast<double>(dy[off + i]) * ((x[off + i] - m) * is);
            }
          }
          if (needs_grad(gn)) gn->grad_buffer()[ch] += static_cast<T>(sum_dy_xhat);
          if (needs_grad(bn)) bn->grad_buffer()[ch] += static_cast<T>(sum_dy);
          if (!needs_grad(xn)) continue;
          const T g = gn->value[ch];
          T* dx = xn->grad_buffer().ptr();
          if (train) {
            const T k = g * is / static_cast<T>(count);
            const T a = static_cast<T>(sum_dy);
            const T bsum = static_cast<T>(sum_dy_xhat);
            for (std::size_t b = 0; b < n; ++b) {
              const std::size_t off = (b * c + ch) * plane;
              for (std::size_t i = 0; i < plane; ++i) {
                const T xhat = (x[off + i] - m) * is;
                dx[off + i] += k * (static_cast<T>(count) * dy[off + i] - a - xhat * bsum);
              }
            }
          } else {
            const T k = g * is;
            for (std::size_t b = 0; b < n; ++b) {
              const std::size_t off = (b * c + ch) * plane;
              for (std::size_t i = 0; i < plane; ++i) dx[off + i] += k * dy[off + i];
            }
          }
        }
      });
}

template <typename T>
Var<T> dropout(const Var<T>& input, double rate, std::span<RngStream> streams, bool active) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw ParameterError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!active || rate == 0.0) return input;

  const std::size_t total = input.size();
  std::size_t groups = streams.size();
  if (groups == 0) throw UsageError("dropout: no random stream supplied");
  if (groups != 1 && (input.shape().empty() || input.shape()[0] != groups)) {
    throw DimensionError("dropout: expected one stream per sample (" +
                         std::to_string(input.shape().empty() ? 0 : input.shape()[0]) + "), got " +
                         std::to_string(groups));
  }
  const std::size_t per = total / groups;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));

  auto mask = std::make_shared<std::vector<T>>(total);
  Tensor<T> out(input.shape());
  const T* x = input.value().ptr();
  for (std::size_t gidx = 0; gidx < groups; ++gidx) {
    RngStream& rng = streams[gidx];
    const std::uint64_t base = rng.position();
    T* mk = mask->data() + gidx * per;
    const T* xs = x + gidx * per;
    T* ys = out.ptr() + gidx * per;
    for (std::size_t i = 0; i < per; ++i) {
      mk[i] = rng.uniform_at(base + i) >= rate ? keep_scale : T{0};
      ys[i] = xs[i] * mk[i];
    }
    rng.skip(per);
  }
  return detail::make_result<T>(std::move(out), {input}, [mask](Node<T>& self) {
    auto& dx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * (*mask)[i];
  });
}

template <typename T>
Var<T> activation(const Var<T>& input, Activation kind) {
  const std::size_t total = input.size();
  const T* x = input.value().ptr();
  Tensor<T> out(input.shape());
  T* y = out.ptr();
  if (kind == Activation::relu) {
    for (std::size_t i = 0; i < total; ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
    return detail::make_result<T>(std::move(out), {input}, [](Node<T>& self) {
      auto& in = self.inputs[0];
      auto& dx = in->grad_buffer();
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (in->value[i] > T{0}) dx[i] += self.grad[i];
    });
  }
  // Kept strictly inside (0, 1) so probabilities never hit a log singularity.
  constexpr T lo = std::numeric_limits<T>::min();
  constexpr T hi = T{1} - std::numeric_limits<T>::epsilon() / 2;
  for (std::size_t i = 0; i < total; ++i) {
    T s;
    if (x[i] >= T{0}) {
      s = T{1} / (T{1} + std::exp(-x[i]));
    } else {
      const T e = std::exp(x[i]);
      s = e / (T{1} + e);
    }
    y[i] = std::clamp(s, lo, hi);
  }
  return detail::make_result<T>(std::move(out), {input}, [](Node<T>& self) {
    auto& dx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const T s = self.value[i];
      dx[i] += self.grad[i] * s * (T{1} - s);
    }
  });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  require_rank4(as, "concat_channels");
  require_rank4(bs, "concat_channels");
  if (as[0] != bs[0] || as[2] != bs[2] || as[3] != bs[3]) {
    throw DimensionError("concat_channels: mismatched shapes " + shape_str(as) + " and " + shape_str(bs));
  }
  const std::size_t n = as[0], ca = as[1], cb = bs[1], plane = as[2] * as[3];
  Tensor<T> out(Shape{n, ca + cb, as[2], as[3]});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.value().ptr() + i * ca * plane, ca * plane, out.ptr() + i * (ca + cb) * plane);
    std::copy_n(b.value().ptr() + i * cb * plane, cb * plane, out.ptr() + (i * (ca + cb) + ca) * plane);
  }
  return detail::make_result<T>(std::move(out), {a, b}, [n, ca, cb, plane](Node<T>& self) {
    const T* g = self.grad.ptr();
    if (needs_grad(self.inputs[0])) {
      T* da = self.inputs[0]->grad_buffer().ptr();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < ca * plane; ++j) da[i * ca * plane + j] += g[i * (ca + cb) * plane + j];
    }
    if (needs_grad(self.inputs[1])) {
      T* db = self.inputs[1]->grad_buffer().ptr();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cb * plane; ++j)
          db[i * cb * plane + j] += g[(i * (ca + cb) + ca) * plane + j];
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& input) {
  T s{0};
  for (T v : input.value().data()) s += v;
  return detail::make_result<T>(Tensor<T>(Shape{1}, s), {input}, [](Node<T>& self) {
    auto& dx = self.inputs[0]->grad_buffer();
    const T g = self.grad[0];
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& input) {
  if (input.size() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(input), T{1} / static_cast<T>(input.size()));
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) throw DimensionError("mul: shape mismatch");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return detail::make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    auto& an = self.inputs[0];
    auto& bn = self.inputs[1];
    // Copy values first: a and b may be the same node.
    const Tensor<T> av = an->value, bv = bn->value;
    if (needs_grad(an)) {
      auto& da = an->grad_buffer();
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += self.grad[i] * bv[i];
    }
    if (needs_grad(bn)) {
      auto& db = bn->grad_buffer();
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += self.grad[i] * av[i];
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) throw DimensionError("add: shape mismatch");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return detail::make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& in : self.inputs) {
      if (!needs_grad(in)) continue;
      auto& d = in->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * factor;
  return detail::make_result<T>(std::move(out), {a}, [factor](Node<T>& self) {
    auto& d = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * factor;
  });
}

#define MCDSEG_INSTANTIATE(T)                                                                     \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const std::optional<Var<T>>&);             \
  template Var<T> transposed_conv2d(const Var<T>&, const Var<T>&, const std::optional<Var<T>>&);  \
  template Var<T> max_pool2d(const Var<T>&);                                                      \
  template Var<T> batch_norm2d(const Var<T>&, const Var<T>&, const Var<T>&, BatchNormState<T>&,   \
                               NormMode, const BatchNormOptions&);                                \
  template Var<T> dropout(const Var<T>&, double, std::span<RngStream>, bool);                     \
  template Var<T> activation(const Var<T>&, Activation);                                          \
  template Var<T> concat_channels(const Var<T>&, const Var<T>&);                                  \
  template Var<T> sum(const Var<T>&);                                                             \
  template Var<T> mean(const Var<T>&);                                                            \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                              \
  template Var<T> add(const Var<T>&, const Var<T>&);                                              \
  template Var<T> scale(const Var<T>&, T);

MCDSEG_INSTANTIATE(float)
MCDSEG_INSTANTIATE(double)

#undef MCDSEG_INSTANTIATE

}  // namespace mcdseg
