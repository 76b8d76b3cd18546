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
#include <vector>

#include "bddp/gaussian.hpp"

namespace bddp {

// Central finite differences with per-coordinate step h0 * (1 + |x_i|).

inline double fd_step(double x, double h0) { return h0 * (1.0 + std::abs(x)); }

template <typename F>
Matrix jacobian_fd(F&& f, const Vector& x, double h0 = 1e-5) {
  Vector xp = x, xm = x;
  Matrix jac;
  for (int i = 0; i < x.size(); ++i) {
    const double h = fd_step(x[i], h0);
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    const Vector fp = f(xp);
    const Vector fm = f(xm);
    if (jac.size() == 0) jac.resize(fp.size(), x.size());
    jac.col(i) = (fp - fm) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  if (!jac.allFinite()) throw NumericalError("jacobian_fd: non-finite derivative estimate");
  return jac;
}

template <typename F>
Vector gradient_fd(F&& f, const Vector& x, double h0 = 1e-5) {
  Vector g(x.size());
  Vector xp = x, xm = x;
  for (int i = 0; i < x.size(); ++i) {
    const double h = fd_step(x[i], h0);
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  if (!g.allFinite()) throw NumericalError("gradient_fd: non-finite derivative estimate");
  return g;
}

/// Symmetric second differences. A larger default step than the Jacobians
/// keeps roundoff in the second-order quotient under control.
template <typename F>
Matrix hessian_fd(F&& f, const Vector& x, double h0 = 1e-3) {
  const int n = static_cast<int>(x.size());
  Matrix hess(n, n);
  const double f0 = f(x);
  Vector xt = x;
  for (int i = 0; i < n; ++i) {
    const double hi = fd_step(x[i], h0);
    xt[i] = x[i] + hi;
    const double fp = f(xt);
    xt[i] = x[i] - hi;
    const double fm = f(xt);
    xt[i] = x[i];
    hess(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (int j = i + 1; j < n; ++j) {
      const double hj = fd_step(x[j], h0);
      xt[i] = x[i] + hi;
      xt[j] = x[j] + hj;
      const double fpp = f(xt);
      xt[j] = x[j] - hj;
      const double fpm = f(xt);
      xt[i] = x[i] - hi;
      const double fmm = f(xt);
      xt[j] = x[j] + hj;
      const double fmp = f(xt);
      xt[i] = x[i];
      xt[j] = x[j];
      const double v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  if (!hess.allFinite()) throw NumericalError("hessian_fd: non-finite derivative estimate");
  return hess;
}

/// Per-output-component Hessians of a vector map, sharing one evaluation
/// stencil across outputs: result[j](p, q) = d2 f_j / dx_p dx_q.
template <typename F>
std::vector<Matrix> vector_hessians_fd(F&& f, const Vector& x, double h0 = 1e-3) {
  const int n = static_cast<int>(x.size());
  const Vector f0 = f(x);
  const int nout = static_cast<int>(f0.size());
  std::vector<Matrix> hess(nout, Matrix(n, n));
  Vector xt = x;
  for (int i = 0; i < n; ++i) {
    const double hi = fd_step(x[i], h0);
    xt[i] = x[i] + hi;
    const Vector fp = f(xt);
    xt[i] = x[i] - hi;
    const Vector fm = f(xt);
    xt[i] = x[i];
    const Vector dii = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (int j = 0; j < nout; ++j) hess[j](i, i) = dii[j];
    for (int k = i + 1; k < n; ++k) {
      const double hk = fd_step(x[k], h0);
      xt[i] = x[i] + hi;
      xt[k] = x[k] + hk;
      const Vector fpp = f(xt);
      xt[k] = x[k] - hk;
      const Vector fpm = f(xt);
      xt[i] = x[i] - hi;
      const Vector fmm = f(xt);
      xt[k] = x[k] + hk;
      const Vector fmp = f(xt);
      xt[i] = x[i];
      xt[k] = x[k];
      const Vector v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hk);
      for (int j = 0; j < nout; ++j) {
        hess[j](i, k) = v[j];
        hess[j](k, i) = v[j];
      }
    }
  }
  for (const Matrix& h : hess) {
    if (!h.allFinite()) {
      throw NumericalError("vector_hessians_fd: non-finite derivative estimate");
    }
  }
  return hess;
}

}  // namespace bddp
