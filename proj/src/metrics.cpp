#include "mcdseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcdseg {

double dice_coefficient(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_dims(b)) throw DimensionError("dice: mask dimensions differ");
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i];
    nb += b[i];
    inter += a[i] & b[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

FpFnRates fp_fn_rates(std::span<const BinaryMask> predictions, std::span<const BinaryMask> references) {
  if (predictions.empty()) throw UsageError("fp_fn_rates: no images");
  if (predictions.size() != references.size()) throw UsageError("fp_fn_rates: list lengths differ");
  double fp = 0.0, fn = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const auto& p = predictions[k];
    const auto& r = references[k];
    if (!p.same_dims(r)) throw DimensionError("fp_fn_rates: mask dimensions differ");
    for (std::size_t i = 0; i < p.size(); ++i) {
      fp += (p[i] && !r[i]) ? 1.0 : 0.0;
      fn += (!p[i] && r[i]) ? 1.0 : 0.0;
    }
  }
  const double n = static_cast<double>(predictions.size());
  return {fp / n, fn / n};
}

BinaryMask erode1(const BinaryMask& mask) {
  const std::size_t h = mask.height(), w = mask.width();
  BinaryMask out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!mask.at(y, x)) continue;
      bool keep = y > 0 && x > 0 && y + 1 < h && x + 1 < w;
      for (std::size_t dy = 0; keep && dy < 3; ++dy)
        for (std::size_t dx = 0; keep && dx < 3; ++dx) keep = mask.at(y + dy - 1, x + dx - 1) != 0;
      out.set(y, x, keep);
    }
  }
  return out;
}

BinaryMask dilate1(const BinaryMask& mask) {
  const std::size_t h = mask.height(), w = mask.width();
  BinaryMask out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!mask.at(y, x)) continue;
      for (std::size_t yy = (y ? y - 1 : 0); yy <= std::min(h - 1, y + 1); ++yy)
        for (std::size_t xx = (x ? x - 1 : 0); xx <= std::min(w - 1, x + 1); ++xx) out.set(yy, xx, true);
    }
  }
  return out;
}

RegressionResult linear_regression(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("linear_regression: length mismatch");
  if (x.size() < 3) throw DegenerateError("linear_regression: need at least 3 points");
  const double n = static_cast<double>(x.size());
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw DegenerateError("linear_regression: x has zero variance");
  RegressionResult r;
  r.n = x.size();
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (r.intercept + r.slope * x[i]);
    ss_res += e * e;
  }
  if (syy == 0.0) {
    r.r_squared = 1.0;
    r.pearson = 0.0;
  } else {
    r.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    r.pearson = sxy / std::sqrt(sxx * syy);
  }
  const double vx = sxx / n, vy = syy / n, cov = sxy / n;
  r.ccc = 2.0 * cov / (vx + vy + (mx - my) * (mx - my));
  return r;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DimensionError("spearman: need two equal-length series");
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = mean_of(rx), my = mean_of(ry);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
    sxy += (rx[i] - mx) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateError("spearman: constant series");
  return sxy / std::sqrt(sxx * syy);
}

double mean_of(std::span<const double> v) {
  if (v.empty()) throw DimensionError("mean of empty series");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

namespace {

// Sum of squared deviations, computed on values shifted by the first one so
// that constant input gives exactly zero.
double squared_deviations(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double x0 = v[0];
  double m = 0.0;
  for (double x : v) m += x - x0;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - x0 - m) * (x - x0 - m);
  return s;
}

}  // namespace

double population_std(std::span<const double> v) {
  return std::sqrt(squared_deviations(v) / static_cast<double>(v.size()));
}

double standard_error(std::span<const double> v) {
  if (v.size() < 2) throw DegenerateError("standard error needs two values");
  const double n = static_cast<double>(v.size());
  return std::sqrt(squared_deviations(v) / (n - 1.0)) / std::sqrt(n);
}

}  // namespace mcdseg
