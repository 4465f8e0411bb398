// Copyright 2026 The qwdqpt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Test-only reference implementations. These deliberately avoid the library
// types so that checks against them are independent.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace oracle {

using C = std::complex<double>;
using M = std::array<C, 4>;
using V = std::array<C, 2>;

inline constexpr double pi = std::numbers::pi;

inline M mul(const M& a, const M& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}
inline V apply(const M& a, const V& v) { return {a[0] * v[0] + a[1] * v[1], a[2] * v[0] + a[3] * v[1]}; }
inline M scale(C s, M a) {
    for (auto& x : a) x *= s;
    return a;
}

/// exp(-i theta sigma_y) from its power series, truncated far past convergence.
inline M coin(double theta) {
    M sum{1.0, 0.0, 0.0, 1.0};
    const M gen{0.0, -theta, theta, 0.0};  // -i theta sigma_y
    M term{1.0, 0.0, 0.0, 1.0};
    for (int n = 1; n < 40; ++n) {
        term = scale(1.0 / n, mul(term, gen));
        for (int i = 0; i < 4; ++i) sum[i] += term[i];
    }
    return sum;
}

inline M shift(double k) { return {std::exp(C(0, k)), 0.0, 0.0, std::exp(C(0, -k))}; }

/// Partial measurement written in the H/V basis from the diagonal +/- form.
inline M measurement(double loss) {
    const double s = std::sqrt(1.0 - loss);
    const double a = 0.5 * (1.0 + s), b = 0.5 * (1.0 - s);
    return {a, b, b, a};
}

inline M floquet(double t1, double t2, double loss, double k) {
    const M o = coin(t1 / 2.0);
    if (loss == 0.0) return mul(o, mul(shift(k), mul(coin(t2), mul(shift(k), o))));
    const M h = coin(t2 / 2.0);
    const double g = std::pow(1.0 - loss, -0.25);
    return scale(g, mul(o, mul(shift(k), mul(h, mul(measurement(loss), mul(h, mul(shift(k), o)))))));
}

inline M power(const M& a, int n) {
    M r{1.0, 0.0, 0.0, 1.0};
    for (int i = 0; i < n; ++i) r = mul(a, r);
    return r;
}

inline C dot(const V& a, const V& b) { return std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1]; }

/// Eigenvalues of a 2x2 matrix from the characteristic polynomial.
inline std::array<C, 2> eigenvalues(const M& a) {
    const C tr = a[0] + a[3];
    const C det = a[0] * a[3] - a[1] * a[2];
    const C disc = std::sqrt(tr * tr - 4.0 * det);
    return {(tr + disc) / 2.0, (tr - disc) / 2.0};
}

/// Null vector of (a - lambda), unit norm.
inline V eigenvector(const M& a, C lambda) {
    V v = std::abs(a[1]) > std::abs(a[2]) ? V{a[1], lambda - a[0]} : V{lambda - a[3], a[2]};
    if (std::abs(v[0]) + std::abs(v[1]) < 1e-14) v = {1.0, 0.0};
    const double n = std::sqrt(std::norm(v[0]) + std::norm(v[1]));
    return {v[0] / n, v[1] / n};
}

/// Brute-force winding of (d2, d3) = (-i)(coefficients of sigma_y, sigma_z)
/// extracted from the matrix itself, on a dense grid.
inline double winding_from_matrix(double t1, double t2, double loss, int n) {
    double total = 0.0;
    double prev = 0.0;
    for (int j = 0; j <= n; ++j) {
        const double k = -pi + 2.0 * pi * j / n;
        const M u = floquet(t1, t2, loss, k);
        // u = d0 - i d1 sx - i d2 sy - i d3 sz
        const double d2 = (0.5 * (u[2] - u[1])).real();  // -i d2 sy = [[0,-d2],[d2,0]]
        const double d3 = (C(0, 0.5) * (u[0] - u[3])).real();
        const double ph = std::atan2(d2, -d3);
        if (j > 0) {
            total += std::remainder(ph - prev, 2.0 * pi);
        }
        prev = ph;
    }
    return -total / (2.0 * pi);
}

}  // namespace oracle
