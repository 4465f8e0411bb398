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

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qwdqpt/errors.hpp"
#include "qwdqpt/lattice.hpp"
#include "qwdqpt/parallel.hpp"
#include "qwdqpt/tolerances.hpp"

namespace qwdqpt {

/// Loss-derived constants of the non-unitary walk: gamma = (1-l)^{-1/4},
/// alpha = gamma (1 + sqrt(1-l)) / 2, beta = gamma (1 - sqrt(1-l)) / 2.
struct LossParameters {
    double loss = 0.0;
    double gamma = 1.0;
    double alpha = 1.0;
    double beta = 0.0;

    static LossParameters from_loss(double l) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw std::invalid_argument("loss must be finite and >= 0");
        if (l >= 1.0) throw std::invalid_argument("loss must be < 1 (total loss)");
        const double s = std::sqrt(1.0 - l);
        const double g = std::pow(1.0 - l, -0.25);
        return {l, g, 0.5 * g * (1.0 + s), 0.5 * g * (1.0 - s)};
    }
};

/// k-sector operator written as d0 s0 - i d1 s1 - i d2 s2 - i d3 s3.
struct BlochDecomposition {
    Complex d0{};
    Complex d1{};
    Complex d2{};
    Complex d3{};
    bool is_unitary = true;

    Mat2 matrix() const {
        return Complex(d0) * pauli(0) - (kI * d1) * pauli(1) - (kI * d2) * pauli(2) - (kI * d3) * pauli(3);
    }

    /// d0^2 + d1^2 + d2^2 + d3^2, which equals det of the operator.
    Complex norm_sum() const { return d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3; }
};

/// Bloch coefficients of U_k = C(theta1/2) S C(theta2) S C(theta1/2).
inline BlochDecomposition bloch_unitary(const CoinAngles& angles, double k) {
    const double c1 = std::cos(angles.theta1), s1 = std::sin(angles.theta1);
    const double c2 = std::cos(angles.theta2), s2 = std::sin(angles.theta2);
    const double c2k = std::cos(2.0 * k), s2k = std::sin(2.0 * k);
    return {c2k * c1 * c2 - s1 * s2, 0.0, c2k * c2 * s1 + c1 * s2, -s2k * c2, true};
}

/// Bloch coefficients of the loss-dressed operator; d1 = i beta.
inline BlochDecomposition bloch_nonunitary(const CoinAngles& angles, double loss, double k) {
    const auto lp = LossParameters::from_loss(loss);
    if (loss == 0.0) return bloch_unitary(angles, k);
    const auto n = bloch_unitary(angles, k);
    return {lp.alpha * n.d0, Complex(0.0, lp.beta), lp.alpha * n.d2, lp.alpha * n.d3, false};
}

/// Explicit factor product gamma C(t1/2) S_k C(t2/2) M C(t2/2) S_k C(t1/2).
/// For zero loss this is C(t1/2) S_k C(t2) S_k C(t1/2).
inline Mat2 floquet_matrix(const CoinAngles& angles, double loss, double k) {
    const auto lp = LossParameters::from_loss(loss);
    const Mat2 outer_coin = coin(0.5 * angles.theta1);
    const Mat2 s = shift_k(k);
    if (loss == 0.0) return outer_coin * s * coin(angles.theta2) * s * outer_coin;
    const Mat2 half = coin(0.5 * angles.theta2);
    return Complex(lp.gamma) * (outer_coin * s * half * partial_measurement(loss) * half * s * outer_coin);
}

/// Eigen-decomposition of a k-sector operator with paired right/left vectors.
/// Left vectors are row covectors normalized so that <left_mu|right_nu> = delta.
struct BiorthogonalEigensystem {
    Complex lambda_plus{};
    Complex lambda_minus{};
    Complex quasienergy{};
    Spinor right_plus;
    Spinor right_minus;
    Spinor left_plus;
    Spinor left_minus;
    Complex omega{};
    double vartheta = 0.0;
    bool closed_form = false;

    const Spinor& right(int sign) const { return sign > 0 ? right_plus : right_minus; }
    const Spinor& left(int sign) const { return sign > 0 ? left_plus : left_minus; }
    Complex lambda(int sign) const { return sign > 0 ? lambda_plus : lambda_minus; }

    /// Projector |r_mu><l_mu|.
    Mat2 projector(int sign) const { return outer_row(right(sign), left(sign)); }

    Mat2 reconstruct() const {
        return lambda_plus * projector(+1) + lambda_minus * projector(-1);
    }

    /// lambda_mu^t on the principal quasienergy branch, lambda_pm = e^{-/+ i E}.
    Complex lambda_power(int sign, double t) const {
        return std::exp(-kI * static_cast<double>(sign) * quasienergy * t);
    }
};

namespace detail {

/// Quasienergy E with lambda_+ = e^{-iE}, cos E = d0; real in [0, pi] for
/// real d0 in [-1, 1].
inline Complex quasienergy_from_d0(Complex d0) {
    if (d0.imag() == 0.0 && std::abs(d0.real()) <= 1.0) return std::acos(d0.real());
    return std::acos(d0);
}

/// Basis rotation V = exp(i (pi/4) sigma_y) that carries the closed-form gauge.
inline Mat2 gauge_rotation() {
    const double r = std::numbers::sqrt2 / 2.0;
    return {{r, r, -r, r}};
}

inline Spinor eigenvector_for(const Mat2& a, Complex lambda) {
    Spinor v;
    if (std::abs(a(0, 1)) >= std::abs(a(1, 0))) {
        v = {a(0, 1), lambda - a(0, 0)};
    } else {
        v = {lambda - a(1, 1), a(1, 0)};
    }
    if (v.norm() < 1e-14) {
        // Diagonal operator: pick the basis vector whose entry matches lambda.
        v = std::abs(a(0, 0) - lambda) <= std::abs(a(1, 1) - lambda) ? Spinor{1.0, 0.0} : Spinor{0.0, 1.0};
    }
    return v;
}

/// Phase-fix so that the first component of V r is real and positive, then
/// normalize to unit length.
inline Spinor fix_gauge(Spinor v) {
    const Spinor rotated = gauge_rotation() * v;
    Complex ref = rotated.amp_h;
    if (std::abs(ref) < 1e-14) ref = rotated.amp_v;
    const Complex phase = std::abs(ref) > 0.0 ? std::conj(ref) / std::abs(ref) : Complex(1.0);
    return Complex(1.0 / v.norm()) * (phase * v);
}

inline void degeneracy_guard(Complex d0) {
    if (std::abs(d0 - 1.0) < tol::kGapClosing || std::abs(d0 + 1.0) < tol::kGapClosing) {
        std::ostringstream os;
        os << "degenerate spectrum: d0 = " << d0.real() << (d0.imag() < 0 ? "-" : "+") << std::abs(d0.imag()) << "i";
        throw PhysicsError(ErrorKind::degenerate_spectrum, os.str());
    }
}

}  // namespace detail

/// Generic 2x2 eigen-solver; left vectors are the rows of the inverse of the
/// right-eigenvector matrix. Labels follow lambda_pm = e^{-/+ i E}, cos E = tr/2.
inline BiorthogonalEigensystem diagonalize_generic(const Mat2& a) {
    const Complex d0 = 0.5 * a.trace();
    detail::degeneracy_guard(d0);
    BiorthogonalEigensystem e;
    e.quasienergy = detail::quasienergy_from_d0(d0);
    e.lambda_plus = std::exp(-kI * e.quasienergy);
    e.lambda_minus = std::exp(kI * e.quasienergy);
    e.right_plus = detail::fix_gauge(detail::eigenvector_for(a, e.lambda_plus));
    e.right_minus = detail::fix_gauge(detail::eigenvector_for(a, e.lambda_minus));
    const Complex det = e.right_plus.amp_h * e.right_minus.amp_v - e.right_minus.amp_h * e.right_plus.amp_v;
    if (std::abs(det) < 1e-13)
        throw PhysicsError(ErrorKind::degenerate_spectrum, "degenerate spectrum: eigenvectors coalesce");
    e.left_plus = {e.right_minus.amp_v / det, -e.right_minus.amp_h / det};
    e.left_minus = {-e.right_plus.amp_v / det, e.right_plus.amp_h / det};
    return e;
}

/// Closed-form eigenvectors in terms of Omega and vartheta, available when the
/// sector is PT-unbroken and cos(2 Omega) is bounded away from zero.
inline std::optional<BiorthogonalEigensystem> diagonalize_closed_form(const BlochDecomposition& b) {
    if (std::abs(b.d2.imag()) > tol::kStructural || std::abs(b.d3.imag()) > tol::kStructural ||
        std::abs(b.d1.real()) > tol::kStructural || std::abs(b.d0.imag()) > tol::kStructural)
        return std::nullopt;
    const double d2 = b.d2.real(), d3 = b.d3.real();
    const double d = std::hypot(d2, d3);
    if (d < tol::kGapClosing) return std::nullopt;
    const double ratio = b.d1.imag() / d;  // -i d1 / d
    if (std::abs(ratio) >= 1.0) return std::nullopt;
    const double cos2omega = std::sqrt(1.0 - ratio * ratio);
    if (cos2omega <= tol::kClosedFormCos) return std::nullopt;
    detail::degeneracy_guard(b.d0);

    BiorthogonalEigensystem e;
    e.closed_form = true;
    e.omega = 0.5 * std::asin(ratio);
    e.vartheta = std::atan2(d2, -d3);
    e.quasienergy = detail::quasienergy_from_d0(b.d0);
    e.lambda_plus = std::exp(-kI * e.quasienergy);
    e.lambda_minus = std::exp(kI * e.quasienergy);

    const double om = e.omega.real();
    const double scale = 1.0 / std::sqrt(2.0 * cos2omega);
    const Mat2 v = detail::gauge_rotation();
    const Mat2 v_dag = v.adjoint();
    const Complex eth = std::polar(1.0, e.vartheta);
    for (int sign : {+1, -1}) {
        const double sg = static_cast<double>(sign);
        const Complex first = sg * std::polar(1.0, sg * om);
        const Complex second_r = eth * std::polar(1.0, -sg * om);
        const Complex second_l = std::conj(eth) * std::polar(1.0, -sg * om);
        const Spinor r = v_dag * Spinor{scale * first, scale * second_r};
        // Row covector (first, second_l) V.
        const Spinor row{scale * (first * v(0, 0) + second_l * v(1, 0)), scale * (first * v(0, 1) + second_l * v(1, 1))};
        if (sign > 0) {
            e.right_plus = r;
            e.left_plus = row;
        } else {
            e.right_minus = r;
            e.left_minus = row;
        }
    }
    return e;
}

/// Biorthogonal eigensystem of a gapped sector. Uses the closed form where it
/// is valid and falls back to the generic solver otherwise.
inline BiorthogonalEigensystem diagonalize(const BlochDecomposition& b) {
    detail::degeneracy_guard(b.d0);
    if (auto closed = diagonalize_closed_form(b)) return *closed;
    auto e = diagonalize_generic(b.matrix());
    if (std::abs(b.d2.imag()) < tol::kStructural && std::abs(b.d3.imag()) < tol::kStructural) {
        e.vartheta = std::atan2(b.d2.real(), -b.d3.real());
        const double d = std::hypot(b.d2.real(), b.d3.real());
        if (d > 0.0) e.omega = 0.5 * std::asin(Complex(b.d1.imag() / d, 0.0));
    }
    return e;
}

namespace detail {

inline double wrap_increment(double delta) {
    delta = std::remainder(delta, kTwoPi);
    if (delta <= -kPi) delta += kTwoPi;
    return delta;
}

/// -(1/2pi) times the unwrapped change of arg(-d3 + i d2) around the zone.
template <class BlochAt>
int vartheta_winding(const MomentumGrid& grid, BlochAt&& bloch_at, double scale) {
    const std::size_t n = grid.size();
    std::vector<double> phase(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto b = bloch_at(grid[j]);
        const double d2 = b.d2.real(), d3 = b.d3.real();
        if (std::hypot(d2, d3) / scale < tol::kGapClosing) {
            std::ostringstream os;
            os << "topological boundary: gap closes at k=" << grid[j];
            throw PhysicsError(ErrorKind::topological_boundary, os.str());
        }
        phase[j] = std::atan2(d2, -d3);
    }
    double total = 0.0;
    double largest = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double inc = wrap_increment(phase[(j + 1) % n] - phase[j]);
        largest = std::max(largest, std::abs(inc));
        total += inc;
    }
    const double nu = -total / kTwoPi;
    const double rounded = std::round(nu);
    if (std::abs(nu - rounded) >= tol::kWindingResidual || largest > 0.5 * kPi)
        throw PhysicsError(ErrorKind::insufficient_resolution, "winding: k-grid too coarse to resolve the phase");
    return static_cast<int>(rounded);
}

}  // namespace detail

/// Winding number of (n2, n3) about the origin, sign convention
/// nu = -(1/2pi) \oint (n x dn/dk)_1 / |n|^2.
inline int winding_unitary(const CoinAngles& angles, const MomentumGrid& grid) {
    return detail::vartheta_winding(grid, [&](double k) { return bloch_unitary(angles, k); }, 1.0);
}

/// Winding via the vartheta shortcut for any loss; defined wherever d2, d3 do
/// not vanish together, including PT-broken sectors.
inline int winding_vartheta(const CoinAngles& angles, double loss, const MomentumGrid& grid) {
    const double alpha = LossParameters::from_loss(loss).alpha;
    return detail::vartheta_winding(grid, [&](double k) { return bloch_nonunitary(angles, loss, k); }, alpha);
}

/// Global Berry phase over both bands divided by 2pi. Links
/// <chi_mu(k_j)|psi_mu(k_{j+1})> are accumulated from the generic solver and
/// must agree with the vartheta shortcut.
inline int winding_global_berry(const CoinAngles& angles, double loss, const MomentumGrid& grid) {
    const std::size_t n = grid.size();
    std::vector<BiorthogonalEigensystem> sectors;
    sectors.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto b = bloch_nonunitary(angles, loss, grid[j]);
        if (std::norm(b.d0) >= 1.0 - tol::kPtBoundary) {
            std::ostringstream os;
            os << "global Berry phase requested in a PT-broken or gapless sector at k=" << grid[j];
            throw PhysicsError(ErrorKind::pt_broken, os.str());
        }
        sectors.push_back(diagonalize_generic(b.matrix()));
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto& a = sectors[j];
        const auto& b = sectors[(j + 1) % n];
        const Complex link = contract(a.left_plus, b.right_plus) * contract(a.left_minus, b.right_minus);
        total += std::arg(link);
    }
    const double nu = -total / kTwoPi;
    const double rounded = std::round(nu);
    if (std::abs(nu - rounded) >= tol::kWindingResidual)
        throw PhysicsError(ErrorKind::insufficient_resolution, "global Berry phase: residual too large");
    const int berry = static_cast<int>(rounded);
    const int shortcut = winding_vartheta(angles, loss, grid);
    if (berry != shortcut)
        throw PhysicsError(ErrorKind::insufficient_resolution, "global Berry phase disagrees with vartheta winding");
    return berry;
}

enum class PtStatus { unbroken, broken, boundary };

inline std::string_view to_string(PtStatus s) {
    switch (s) {
        case PtStatus::unbroken: return "unbroken";
        case PtStatus::broken: return "broken";
        case PtStatus::boundary: return "boundary";
    }
    return "unknown";
}

struct PtClassification {
    PtStatus status = PtStatus::unbroken;
    double max_d0_sq = 0.0;
    double argmax_k = 0.0;
};

namespace detail {

/// Golden-section maximization of f on [lo, hi].
template <class F>
double golden_max(F&& f, double lo, double hi, double xtol = 1e-13) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200 && hi - lo > xtol; ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Unbroken iff max_k d0^2 < 1 - tol, broken iff > 1 + tol.
inline PtClassification pt_classify(const CoinAngles& angles, double loss, const MomentumGrid& grid,
                                    double tolerance = tol::kPtBoundary) {
    auto d0_sq = [&](double k) { return std::norm(bloch_nonunitary(angles, loss, k).d0); };
    std::size_t best = 0;
    double best_val = -1.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double v = d0_sq(grid[j]);
        if (v > best_val) {
            best_val = v;
            best = j;
        }
    }
    const double h = grid.spacing();
    const double k_star = detail::golden_max(d0_sq, grid[best] - h, grid[best] + h);
    PtClassification out;
    out.max_d0_sq = std::max(best_val, d0_sq(k_star));
    out.argmax_k = out.max_d0_sq > best_val ? normalize_angle(k_star) : grid[best];
    if (out.max_d0_sq < 1.0 - tolerance) out.status = PtStatus::unbroken;
    else if (out.max_d0_sq > 1.0 + tolerance) out.status = PtStatus::broken;
    else out.status = PtStatus::boundary;
    return out;
}

struct AngleRange {
    double min = -kPi;
    double max = kPi;
};

/// One cell of the (theta1, theta2) phase diagram. winding is empty for
/// cells whose topological gap is too small to certify an invariant.
struct PhaseDiagramCell {
    CoinAngles angles;
    double loss = 0.0;
    std::optional<int> winding;
    PtStatus pt_status = PtStatus::unbroken;
    double min_gap = 0.0;
};

/// Minimum over the grid of |(n2, n3)| = sqrt(1 - n0^2); zero at gap closings.
inline double topological_gap(const CoinAngles& angles, const MomentumGrid& grid) {
    double gap = 1.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const auto b = bloch_unitary(angles, grid[j]);
        gap = std::min(gap, std::hypot(b.d2.real(), b.d3.real()));
    }
    return gap;
}

/// Row-major (theta1 outer, theta2 inner) scan. Cell i sits at
/// range.min + i * (range.max - range.min) / resolution.
inline std::vector<PhaseDiagramCell> phase_diagram_scan(const AngleRange& theta1_range, const AngleRange& theta2_range,
                                                        std::size_t resolution, double loss,
                                                        const MomentumGrid& grid, std::size_t threads = 1) {
    if (resolution < 32) throw std::invalid_argument("phase_diagram_scan: resolution must be >= 32");
    LossParameters::from_loss(loss);
    const double h1 = (theta1_range.max - theta1_range.min) / static_cast<double>(resolution);
    const double h2 = (theta2_range.max - theta2_range.min) / static_cast<double>(resolution);
    // |(n2, n3)| is 1-Lipschitz in each angle, so a gap below this bound may
    // close somewhere inside the cell.
    const double straddle = 0.5 * (std::abs(h1) + std::abs(h2));
    std::vector<PhaseDiagramCell> cells(resolution * resolution);
    parallel_for(cells.size(), threads, [&](std::size_t idx) {
        const std::size_t i = idx / resolution, j = idx % resolution;
        PhaseDiagramCell cell;
        cell.angles = {theta1_range.min + static_cast<double>(i) * h1, theta2_range.min + static_cast<double>(j) * h2};
        cell.loss = loss;
        cell.min_gap = topological_gap(cell.angles, grid);
        cell.pt_status = pt_classify(cell.angles, loss, grid).status;
        if (cell.min_gap >= std::max(straddle, tol::kGapClosing)) {
            try {
                if (loss == 0.0) cell.winding = winding_unitary(cell.angles, grid);
                else if (cell.pt_status == PtStatus::unbroken) cell.winding = winding_global_berry(cell.angles, loss, grid);
                else cell.winding = winding_vartheta(cell.angles, loss, grid);
            } catch (const PhysicsError&) {
                cell.winding.reset();
            }
        }
        cells[idx] = cell;
    });
    return cells;
}

/// CSV with columns theta1, theta2, loss, winding, pt_status, min_gap.
inline void write_phase_diagram_csv(std::ostream& os, const std::vector<PhaseDiagramCell>& cells) {
    os << "theta1,theta2,loss,winding,pt_status,min_gap\n";
    os << std::setprecision(12);
    for (const auto& c : cells) {
        os << c.angles.theta1 << ',' << c.angles.theta2 << ',' << c.loss << ',';
        if (c.winding) os << *c.winding;
        else os << "boundary";
        os << ',' << to_string(c.pt_status) << ',' << c.min_gap << '\n';
    }
}

}  // namespace qwdqpt
