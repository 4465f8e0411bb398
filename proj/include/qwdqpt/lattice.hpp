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

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qwdqpt/tolerances.hpp"

namespace qwdqpt {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

/// Maps a finite angle onto the canonical interval (-pi, pi].
inline double normalize_angle(double a) {
    if (!std::isfinite(a)) throw std::invalid_argument("normalize_angle: non-finite angle");
    double r = std::remainder(a, kTwoPi);
    if (r <= -kPi) r += kTwoPi;
    return r;
}

/// Coin parameters (theta1, theta2) of one Floquet protocol, in radians.
struct CoinAngles {
    double theta1 = 0.0;
    double theta2 = 0.0;

    CoinAngles normalized() const { return {normalize_angle(theta1), normalize_angle(theta2)}; }
    bool finite() const { return std::isfinite(theta1) && std::isfinite(theta2); }
};

/// Two-component coin state in the fixed (|H>, |V>) basis.
struct Spinor {
    Complex amp_h{};
    Complex amp_v{};

    double norm_sq() const { return std::norm(amp_h) + std::norm(amp_v); }
    double norm() const { return std::sqrt(norm_sq()); }

    friend Spinor operator+(const Spinor& a, const Spinor& b) { return {a.amp_h + b.amp_h, a.amp_v + b.amp_v}; }
    friend Spinor operator-(const Spinor& a, const Spinor& b) { return {a.amp_h - b.amp_h, a.amp_v - b.amp_v}; }
    friend Spinor operator*(Complex c, const Spinor& s) { return {c * s.amp_h, c * s.amp_v}; }
    Spinor& operator+=(const Spinor& o) {
        amp_h += o.amp_h;
        amp_v += o.amp_v;
        return *this;
    }
};

/// <a|b> with the bra conjugated.
inline Complex braket(const Spinor& a, const Spinor& b) {
    return std::conj(a.amp_h) * b.amp_h + std::conj(a.amp_v) * b.amp_v;
}

/// Row covector times column vector, no conjugation. Used for left
/// eigenvectors of non-normal operators.
inline Complex contract(const Spinor& row, const Spinor& col) {
    return row.amp_h * col.amp_h + row.amp_v * col.amp_v;
}

/// Fixed-size 2x2 complex matrix, row-major.
struct Mat2 {
    std::array<Complex, 4> a{};

    Complex& operator()(int r, int c) { return a[2 * r + c]; }
    const Complex& operator()(int r, int c) const { return a[2 * r + c]; }

    static Mat2 identity() { return {{1.0, 0.0, 0.0, 1.0}}; }
    static Mat2 diag(Complex d0, Complex d1) { return {{d0, 0.0, 0.0, d1}}; }

    Complex trace() const { return a[0] + a[3]; }
    Complex det() const { return a[0] * a[3] - a[1] * a[2]; }
    Mat2 adjoint() const { return {{std::conj(a[0]), std::conj(a[2]), std::conj(a[1]), std::conj(a[3])}}; }

    friend Mat2 operator*(const Mat2& x, const Mat2& y) {
        return {{x.a[0] * y.a[0] + x.a[1] * y.a[2], x.a[0] * y.a[1] + x.a[1] * y.a[3],
                 x.a[2] * y.a[0] + x.a[3] * y.a[2], x.a[2] * y.a[1] + x.a[3] * y.a[3]}};
    }
    friend Spinor operator*(const Mat2& m, const Spinor& s) {
        return {m.a[0] * s.amp_h + m.a[1] * s.amp_v, m.a[2] * s.amp_h + m.a[3] * s.amp_v};
    }
    friend Mat2 operator+(const Mat2& x, const Mat2& y) {
        return {{x.a[0] + y.a[0], x.a[1] + y.a[1], x.a[2] + y.a[2], x.a[3] + y.a[3]}};
    }
    friend Mat2 operator-(const Mat2& x, const Mat2& y) {
        return {{x.a[0] - y.a[0], x.a[1] - y.a[1], x.a[2] - y.a[2], x.a[3] - y.a[3]}};
    }
    friend Mat2 operator*(Complex c, const Mat2& m) { return {{c * m.a[0], c * m.a[1], c * m.a[2], c * m.a[3]}}; }

    double max_abs() const {
        double r = 0.0;
        for (const auto& v : a) r = std::max(r, std::abs(v));
        return r;
    }
};

/// |s><s| for a column spinor.
inline Mat2 outer(const Spinor& ket, const Spinor& bra_source) {
    return {{ket.amp_h * std::conj(bra_source.amp_h), ket.amp_h * std::conj(bra_source.amp_v),
             ket.amp_v * std::conj(bra_source.amp_h), ket.amp_v * std::conj(bra_source.amp_v)}};
}

/// |r><l| where l is already a row covector (not conjugated).
inline Mat2 outer_row(const Spinor& ket, const Spinor& row) {
    return {{ket.amp_h * row.amp_h, ket.amp_h * row.amp_v, ket.amp_v * row.amp_h, ket.amp_v * row.amp_v}};
}

/// Pauli matrices sigma_0 (identity), sigma_x, sigma_y, sigma_z.
inline Mat2 pauli(int which) {
    switch (which) {
        case 0: return Mat2::identity();
        case 1: return {{0.0, 1.0, 1.0, 0.0}};
        case 2: return {{0.0, -kI, kI, 0.0}};
        case 3: return {{1.0, 0.0, 0.0, -1.0}};
        default: throw std::invalid_argument("pauli: index must be 0..3");
    }
}

inline Spinor pauli_apply(int which, const Spinor& s) { return pauli(which) * s; }

/// Coin rotation C(theta) = exp(-i theta sigma_y).
inline Mat2 coin(double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {{c, -s, s, c}};
}

/// Shift in the k-sector: |H> picks up e^{ik}, |V> picks up e^{-ik}.
inline Mat2 shift_k(double k) { return Mat2::diag(std::polar(1.0, k), std::polar(1.0, -k)); }

/// Partial measurement M = |+><+| + sqrt(1-l) |-><-|.
inline Mat2 partial_measurement(double loss) {
    const double s = std::sqrt(1.0 - loss);
    const double diag = 0.5 * (1.0 + s);
    const double off = 0.5 * (1.0 - s);
    return {{diag, off, off, diag}};
}

/// Density matrix of the coin, validated on construction.
class CoinDensityMatrix {
public:
    static CoinDensityMatrix from_matrix(const Mat2& m) {
        const double herm = (m - m.adjoint()).max_abs();
        if (herm > tol::kStructural)
            throw std::invalid_argument("CoinDensityMatrix: not Hermitian");
        if (std::abs(m.trace() - 1.0) > tol::kStructural)
            throw std::invalid_argument("CoinDensityMatrix: trace differs from 1");
        const auto ev = eigenvalues(m);
        if (ev[0] < -tol::kStructural || ev[1] < -tol::kStructural)
            throw std::invalid_argument("CoinDensityMatrix: negative eigenvalue");
        return CoinDensityMatrix(m);
    }

    /// p |minus><minus| + (1-p) |plus><plus| for normalized kets.
    static CoinDensityMatrix mixture(double p, const Spinor& minus, const Spinor& plus) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("CoinDensityMatrix: p outside [0,1]");
        return from_matrix(Complex(p) * outer(minus, minus) + Complex(1.0 - p) * outer(plus, plus));
    }

    const Mat2& matrix() const { return m_; }
    Complex operator()(int r, int c) const { return m_(r, c); }

    /// Ascending real eigenvalues of a Hermitian 2x2 matrix.
    static std::array<double, 2> eigenvalues(const Mat2& m) {
        const double a = m(0, 0).real();
        const double d = m(1, 1).real();
        const double half_gap = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(m(0, 1)));
        const double mean = 0.5 * (a + d);
        return {mean - half_gap, mean + half_gap};
    }

    std::array<double, 2> eigenvalues() const { return eigenvalues(m_); }

private:
    explicit CoinDensityMatrix(const Mat2& m) : m_(m) {}
    Mat2 m_;
};

/// Uniform k-grid on (-pi, pi]: -pi excluded, pi included.
class MomentumGrid {
public:
    explicit MomentumGrid(std::size_t n_points) : n_(n_points) {
        if (n_points < 16 || n_points % 2 != 0)
            throw std::invalid_argument("MomentumGrid: n_points must be even and >= 16");
    }

    std::size_t size() const { return n_; }
    double spacing() const { return kTwoPi / static_cast<double>(n_); }
    double operator[](std::size_t j) const {
        return -kPi + kTwoPi * static_cast<double>(j + 1) / static_cast<double>(n_);
    }
    std::vector<double> samples() const {
        std::vector<double> ks(n_);
        for (std::size_t j = 0; j < n_; ++j) ks[j] = (*this)[j];
        return ks;
    }
    MomentumGrid refined() const { return MomentumGrid(2 * n_); }

private:
    std::size_t n_;
};

/// Time axis in units of walk steps: continuous samples j*dt plus integer steps.
class TimeGrid {
public:
    TimeGrid(double t_max, double dt) : t_max_(t_max), dt_(dt) {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("TimeGrid: dt must be positive");
        if (!(t_max >= 1.0) || !std::isfinite(t_max)) throw std::invalid_argument("TimeGrid: t_max must be >= 1");
    }

    double t_max() const { return t_max_; }
    double dt() const { return dt_; }

    std::vector<double> samples() const {
        const auto n = static_cast<std::size_t>(std::floor(t_max_ / dt_ + 1e-9));
        std::vector<double> ts(n + 1);
        for (std::size_t j = 0; j <= n; ++j) ts[j] = static_cast<double>(j) * dt_;
        return ts;
    }
    std::vector<int> integer_steps() const {
        std::vector<int> steps;
        for (int t = 0; t <= static_cast<int>(std::floor(t_max_ + 1e-9)); ++t) steps.push_back(t);
        return steps;
    }

private:
    double t_max_;
    double dt_;
};

/// Walker state on a finite window of lattice sites. amplitudes[i] holds
/// site x = i - origin_offset.
struct PositionState {
    long origin_offset = 0;
    std::vector<Spinor> amplitudes;

    static PositionState localized(const Spinor& coin_state, long half_width = 0) {
        PositionState s;
        s.origin_offset = half_width;
        s.amplitudes.assign(static_cast<std::size_t>(2 * half_width + 1), Spinor{});
        s.amplitudes[static_cast<std::size_t>(half_width)] = coin_state;
        return s;
    }

    long min_site() const { return -origin_offset; }
    long max_site() const { return static_cast<long>(amplitudes.size()) - 1 - origin_offset; }

    Spinor at(long x) const {
        const long i = x + origin_offset;
        if (i < 0 || i >= static_cast<long>(amplitudes.size())) return {};
        return amplitudes[static_cast<std::size_t>(i)];
    }

    double total_probability() const {
        double p = 0.0;
        for (const auto& s : amplitudes) p += s.norm_sq();
        return p;
    }
};

}  // namespace qwdqpt
