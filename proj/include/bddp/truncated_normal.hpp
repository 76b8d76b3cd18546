// Copyright 2026 The bddp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include "bddp/gaussian.hpp"

namespace bddp {

inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kInvSqrt2Pi = 0.3989422804014327;
inline constexpr double kSqrt2OverPi = 0.7978845608028654;

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

namespace detail {

/// Scaled complementary error function exp(x^2) erfc(x), accurate for the
/// large positive arguments where erfc itself underflows.
inline double erfcx(double x) {
  if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
  if (x < 26.0) return std::exp(x * x) * std::erfc(x);
  // Asymptotic series: erfcx(x) ~ 1/(x sqrt(pi)) sum_k (-1)^k (2k-1)!!/(2x^2)^k.
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= -(2.0 * k - 1.0) * inv2x2;
    sum += term;
  }
  return sum / (x * 1.7724538509055160);
}

/// Inverse Mills ratio phi(b) / (1 - Phi(b)), stable for all b representable
/// before the tail mass underflows.
inline double upper_hazard(double b) { return kSqrt2OverPi / erfcx(b / kSqrt2); }

}  // namespace detail

/// First two moments (and contained mass) of a truncated 1-D normal.
struct Moments1d {
  double mean = 0.0;
  double var = 0.0;
  double mass = 0.0;
};

enum class TruncationSide { kAbove, kBelow };

inline constexpr double kFullyTruncatedMass = 1e-300;
// Standardized bound beyond which the retained side carries all mass that is
// representable in double precision.
inline constexpr double kNoTruncationZ = 37.5;

/// Moments of N(mu, sigma^2) restricted to one side of `bound`
/// (kAbove keeps x >= bound). Returns nullopt when the requested side holds
/// mass below 1e-300, signalling the empty-side condition. A zero sigma is a
/// point mass: it is returned unchanged with mass 0 or 1 by the side test.
inline std::optional<Moments1d> truncated_moments_1d(double mu, double sigma,
                                                     TruncationSide side, double bound) {
  if (!(sigma >= 0.0) || !std::isfinite(mu)) {
    throw ContractError("truncated_moments_1d: invalid mean or sigma");
  }
  if (sigma == 0.0) {
    const bool kept = side == TruncationSide::kAbove ? (mu >= bound) : (mu <= bound);
    return Moments1d{mu, 0.0, kept ? 1.0 : 0.0};
  }
  if (std::isinf(bound)) {
    const bool whole = (side == TruncationSide::kAbove) == (bound < 0);
    if (whole) return Moments1d{mu, sigma * sigma, 1.0};
    return std::nullopt;
  }
  // Standardize so the kept side is always the upper tail of z >= beta.
  double beta = (bound - mu) / sigma;
  const double sign = side == TruncationSide::kAbove ? 1.0 : -1.0;
  beta *= sign;
  if (beta <= -kNoTruncationZ) return Moments1d{mu, sigma * sigma, 1.0};
  const double mass = 0.5 * std::erfc(beta / kSqrt2);
  if (mass < kFullyTruncatedMass) return std::nullopt;
  const double h = detail::upper_hazard(beta);
  const double mean = mu + sign * sigma * h;
  const double var = std::max(sigma * sigma * (1.0 + beta * h - h * h), 0.0);
  return Moments1d{mean, var, mass};
}

/// Two-sided counterpart over [l, u]; retained for cross-checks of the
/// one-sided specializations.
inline Moments1d truncated_moments_interval(double mu, double sigma, double l, double u) {
  if (!(sigma > 0.0) || !(l < u)) {
    throw ContractError("truncated_moments_interval: need sigma > 0 and l < u");
  }
  const double lb = (l - mu) / sigma;
  const double ub = (u - mu) / sigma;
  const double mass = normal_cdf(ub) - normal_cdf(lb);
  if (mass < kFullyTruncatedMass) {
    throw NumericalError("truncated_moments_interval: interval mass underflow");
  }
  const double pl = std::isinf(lb) ? 0.0 : normal_pdf(lb);
  const double pu = std::isinf(ub) ? 0.0 : normal_pdf(ub);
  const double lpl = std::isinf(lb) ? 0.0 : lb * pl;
  const double upu = std::isinf(ub) ? 0.0 : ub * pu;
  const double r = (pl - pu) / mass;
  const double mean = mu + sigma * r;
  const double var = sigma * sigma * (1.0 + (lpl - upu) / mass - r * r);
  return Moments1d{mean, std::max(var, 0.0), mass};
}

}  // namespace bddp
