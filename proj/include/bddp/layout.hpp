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

#include <algorithm>
#include <vector>

#include "bddp/gaussian.hpp"

namespace bddp {

/// How the covariance is flattened into the belief vector.
///  - kFull: upper triangle of Sigma, n(n+1)/2 slots.
///  - kDiagonal: one variance slot per index group; off-diagonals and
///    ungrouped diagonal entries are pinned at zero.
enum class CovScheme { kFull, kDiagonal };

/// Coordinate chart mapping structured beliefs to the flat vectors the
/// trajectory optimizer differentiates. With `constrained` set, the vector
/// holds two Gaussian blocks followed by the mixture weight.
struct BeliefLayout {
  int state_dim = 0;
  CovScheme scheme = CovScheme::kFull;
  bool constrained = false;
  // kDiagonal only: state indices sharing one scalar variance slot.
  std::vector<std::vector<int>> groups;

  static BeliefLayout full(int n, bool constrained = false) {
    BeliefLayout l;
    l.state_dim = n;
    l.scheme = CovScheme::kFull;
    l.constrained = constrained;
    return l;
  }

  static BeliefLayout diagonal(int n) {
    BeliefLayout l;
    l.state_dim = n;
    l.scheme = CovScheme::kDiagonal;
    for (int i = 0; i < n; ++i) l.groups.push_back({i});
    return l;
  }

  /// Diagonal layout where each group of state indices shares one variance
  /// slot; indices in no group have their variance pinned at zero.
  static BeliefLayout grouped_diagonal(int n, std::vector<std::vector<int>> groups) {
    BeliefLayout l;
    l.state_dim = n;
    l.scheme = CovScheme::kDiagonal;
    l.groups = std::move(groups);
    l.validate();
    return l;
  }

  int cov_slots() const {
    return scheme == CovScheme::kFull ? state_dim * (state_dim + 1) / 2
                                      : static_cast<int>(groups.size());
  }

  /// Slots for one Gaussian block: mean entries plus covariance slots.
  int gaussian_dim() const { return state_dim + cov_slots(); }

  /// Total belief-vector length.
  int dim() const { return constrained ? 2 * gaussian_dim() + 1 : gaussian_dim(); }

  void validate() const {
    if (state_dim <= 0) throw ContractError("BeliefLayout: state_dim must be positive");
    if (scheme == CovScheme::kDiagonal) {
      std::vector<char> seen(state_dim, 0);
      for (const auto& g : groups) {
        if (g.empty()) throw ContractError("BeliefLayout: empty variance group");
        for (int idx : g) {
          if (idx < 0 || idx >= state_dim) throw ContractError("BeliefLayout: group index out of range");
          if (seen[idx]) throw ContractError("BeliefLayout: state index in two variance groups");
          seen[idx] = 1;
        }
      }
    }
  }
};

namespace detail {

inline void encode_gaussian(const GaussianBelief& b, const BeliefLayout& l, double* out) {
  const int n = l.state_dim;
  for (int i = 0; i < n; ++i) out[i] = b.mean[i];
  double* c = out + n;
  if (l.scheme == CovScheme::kFull) {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) *c++ = b.cov(i, j);
  } else {
    for (const auto& g : l.groups) {
      double v = 0.0;
      for (int idx : g) v += b.cov(idx, idx);
      *c++ = v / static_cast<double>(g.size());
    }
  }
}

inline GaussianBelief decode_gaussian(const double* in, const BeliefLayout& l) {
  const int n = l.state_dim;
  GaussianBelief b;
  b.mean = Eigen::Map<const Vector>(in, n);
  b.cov = Matrix::Zero(n, n);
  const double* c = in + n;
  if (l.scheme == CovScheme::kFull) {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        b.cov(i, j) = *c;
        b.cov(j, i) = *c;
        ++c;
      }
    // Perturbed vectors may leave the PSD cone; project back.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(b.cov);
    if (eig.eigenvalues().minCoeff() < 0.0) {
      b.cov = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
              eig.eigenvectors().transpose();
      b.cov = symmetrized(b.cov);
    }
  } else {
    for (const auto& g : l.groups) {
      const double v = std::max(*c++, 0.0);
      for (int idx : g) b.cov(idx, idx) = v;
    }
  }
  return b;
}

}  // namespace detail

inline Vector vectorize(const GaussianBelief& b, const BeliefLayout& layout) {
  if (layout.constrained) {
    throw ContractError("vectorize: constrained layout given a plain Gaussian");
  }
  if (b.dim() != layout.state_dim) {
    throw ContractError("vectorize: belief dimension does not match layout");
  }
  Vector v(layout.dim());
  detail::encode_gaussian(b, layout, v.data());
  return v;
}

inline Vector vectorize(const ConstrainedBelief& b, const BeliefLayout& layout) {
  if (!layout.constrained) {
    throw ContractError("vectorize: plain layout given a constrained belief");
  }
  if (b.dim() != layout.state_dim) {
    throw ContractError("vectorize: belief dimension does not match layout");
  }
  Vector v(layout.dim());
  const int g = layout.gaussian_dim();
  detail::encode_gaussian(b.free, layout, v.data());
  detail::encode_gaussian(b.surface, layout, v.data() + g);
  v[2 * g] = b.weight;
  return v;
}

inline Vector vectorize(const Belief& b, const BeliefLayout& layout) {
  return std::visit([&](const auto& x) { return vectorize(x, layout); }, b);
}

/// Inverse of vectorize. Repairs perturbed encodings: full covariances are
/// projected onto the PSD cone, diagonal variances clamped at zero, the
/// mixture weight clamped to [0, 1].
inline Belief devectorize(const Vector& v, const BeliefLayout& layout) {
  if (v.size() != layout.dim()) {
    throw ContractError("devectorize: vector length does not match layout");
  }
  if (!layout.constrained) {
    return detail::decode_gaussian(v.data(), layout);
  }
  const int g = layout.gaussian_dim();
  ConstrainedBelief b;
  b.free = detail::decode_gaussian(v.data(), layout);
  b.surface = detail::decode_gaussian(v.data() + g, layout);
  b.weight = std::clamp(v[2 * g], 0.0, 1.0);
  return b;
}

inline GaussianBelief devectorize_gaussian(const Vector& v, const BeliefLayout& layout) {
  return std::get<GaussianBelief>(devectorize(v, layout));
}

inline ConstrainedBelief devectorize_constrained(const Vector& v, const BeliefLayout& layout) {
  return std::get<ConstrainedBelief>(devectorize(v, layout));
}

}  // namespace bddp
