#pragma once

#include <span>
#include <vector>

#include "mcdseg/mask.hpp"

namespace mcdseg {

/// 2|A n B| / (|A| + |B|). Two empty masks score 1.
double dice_coefficient(const BinaryMask& a, const BinaryMask& b);

struct FpFnRates {
  double fp_rate = 0.0;  // mean false-positive pixels per image
  double fn_rate = 0.0;  // mean false-negative pixels per image
};

FpFnRates fp_fn_rates(std::span<const BinaryMask> predictions, std::span<const BinaryMask> references);

/// Erosion by a 3x3 square; out-of-bounds pixels count as background.
BinaryMask erode1(const BinaryMask& mask);
/// Dilation by a 3x3 square, clipped to the image.
BinaryMask dilate1(const BinaryMask& mask);

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double ccc = 0.0;      // Lin's concordance, population moments
  double pearson = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares of y on x plus concordance. Needs n >= 3 and
/// non-constant x. A constant y is fitted exactly (R^2 = 1, pearson = 0).
RegressionResult linear_regression(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation, average ranks for ties.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

double mean_of(std::span<const double> v);
/// Population standard deviation.
double population_std(std::span<const double> v);
/// Sample standard deviation over sqrt(n).
double standard_error(std::span<const double> v);

}  // namespace mcdseg
