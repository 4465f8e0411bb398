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
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qwdqpt/errors.hpp"
#include "qwdqpt/floquet.hpp"
#include "qwdqpt/lattice.hpp"
#include "qwdqpt/parallel.hpp"
#include "qwdqpt/tolerances.hpp"

namespace qwdqpt {

enum class Regime { unitary_pure, unitary_mixed, nonunitary_pure };

inline std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::unitary_pure: return "unitary_pure";
        case Regime::unitary_mixed: return "unitary_mixed";
        case Regime::nonunitary_pure: return "nonunitary_pure";
    }
    return "unknown";
}

/// Default k-grid used to certify that the initial protocol has localized,
/// k-independent eigenstates.
inline constexpr std::size_t kDefaultInvariantGrid = 2048;

/// A quench from the eigenstates of the initial protocol into evolution under
/// the final protocol. Both protocols share the same loss.
struct QuenchSpec {
    CoinAngles initial_angles{kPi / 4.0, -kPi / 2.0};
    CoinAngles final_angles;
    double mixing_p = 1.0;
    double loss = 0.0;
    Regime regime = Regime::unitary_pure;

    /// Picks the regime implied by p and loss.
    static QuenchSpec make(CoinAngles initial, CoinAngles final_angles, double p = 1.0, double loss = 0.0) {
        QuenchSpec s;
        s.initial_angles = initial;
        s.final_angles = final_angles;
        s.mixing_p = p;
        s.loss = loss;
        if (loss > 0.0) s.regime = Regime::nonunitary_pure;
        else if (p == 1.0 || p == 0.0) s.regime = Regime::unitary_pure;
        else s.regime = Regime::unitary_mixed;
        s.validate();
        return s;
    }

    bool unitary() const { return regime != Regime::nonunitary_pure; }

    void validate() const {
        if (!initial_angles.finite() || !final_angles.finite())
            throw std::invalid_argument("QuenchSpec: coin angles must be finite");
        if (!(mixing_p >= 0.0 && mixing_p <= 1.0)) throw std::invalid_argument("QuenchSpec: p outside [0,1]");
        LossParameters::from_loss(loss);
        switch (regime) {
            case Regime::unitary_pure:
                if (loss != 0.0) throw std::invalid_argument("QuenchSpec: unitary regimes require loss = 0");
                if (mixing_p != 1.0 && mixing_p != 0.0)
                    throw std::invalid_argument("QuenchSpec: unitary_pure requires p in {0, 1}");
                break;
            case Regime::unitary_mixed:
                if (loss != 0.0) throw std::invalid_argument("QuenchSpec: unitary regimes require loss = 0");
                break;
            case Regime::nonunitary_pure:
                if (mixing_p != 1.0) throw std::invalid_argument("QuenchSpec: nonunitary_pure requires p = 1");
                break;
        }
        const MomentumGrid grid(kDefaultInvariantGrid);
        const auto ref = bloch_nonunitary(initial_angles, loss, grid[0]);
        double drift = 0.0;
        for (std::size_t j = 1; j < grid.size(); ++j) {
            const auto b = bloch_nonunitary(initial_angles, loss, grid[j]);
            drift = std::max({drift, std::abs(b.d0 - ref.d0), std::abs(b.d2 - ref.d2), std::abs(b.d3 - ref.d3)});
        }
        if (drift > tol::kRoot)
            throw PhysicsError(ErrorKind::invalid_initial_protocol,
                               "initial protocol has k-dependent Bloch vector (no localized eigenstates)");
    }
};

/// |psi^i_->, |psi^i_+>: unit-norm right eigenvectors of the initial sector
/// operator for lambda_- = e^{+iE} and lambda_+ = e^{-iE}. Phase fixed so the
/// |H> amplitude is real and positive; for the default initial protocol at zero
/// loss this gives (|H> +/- i|V>)/sqrt(2).
struct InitialKets {
    Spinor minus;
    Spinor plus;

    const Spinor& branch(int sign) const { return sign > 0 ? plus : minus; }
};

namespace detail {

inline Spinor phase_fix_h(Spinor v) {
    v = Complex(1.0 / v.norm()) * v;
    const Complex ref = std::abs(v.amp_h) > 1e-14 ? v.amp_h : v.amp_v;
    return (std::conj(ref) / std::abs(ref)) * v;
}

}  // namespace detail

inline InitialKets initial_kets(const QuenchSpec& spec) {
    const MomentumGrid grid(kDefaultInvariantGrid);
    const auto e = diagonalize(bloch_nonunitary(spec.initial_angles, spec.loss, 0.0));
    InitialKets kets{detail::phase_fix_h(e.right_minus), detail::phase_fix_h(e.right_plus)};
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const Mat2 u = bloch_nonunitary(spec.initial_angles, spec.loss, grid[j]).matrix();
        const double r_minus = (u * kets.minus - e.lambda_minus * kets.minus).norm();
        const double r_plus = (u * kets.plus - e.lambda_plus * kets.plus).norm();
        if (r_minus > tol::kRoot || r_plus > tol::kRoot) {
            std::ostringstream os;
            os << "initial kets are not eigenvectors of the initial protocol at k=" << grid[j];
            throw PhysicsError(ErrorKind::invalid_initial_protocol, os.str());
        }
    }
    return kets;
}

/// rho_0 = p |psi^i_-><psi^i_-| + (1-p) |psi^i_+><psi^i_+|.
inline CoinDensityMatrix initial_state(const QuenchSpec& spec) {
    spec.validate();
    const auto kets = initial_kets(spec);
    if (spec.regime == Regime::nonunitary_pure) return CoinDensityMatrix::mixture(1.0, kets.minus, kets.plus);
    return CoinDensityMatrix::mixture(spec.mixing_p, kets.minus, kets.plus);
}

/// Overlaps of the initial ket with the final eigenbasis.
/// Unitary: c_pm = <psi^f_pm|psi^i_->. Non-unitary: b_pm = <psi^i_-|psi~^f_pm>,
/// ctilde_pm = <chi~^f_pm|psi^i_->. In the unitary case b = conj(c) and
/// ctilde = c, so b_pm ctilde_pm = |c_pm|^2 in every regime.
struct OverlapCoefficients {
    Complex c_plus{};
    Complex c_minus{};
    Complex b_plus{};
    Complex b_minus{};
    Complex ctilde_plus{};
    Complex ctilde_minus{};

    Complex weight(int sign) const { return sign > 0 ? b_plus * ctilde_plus : b_minus * ctilde_minus; }
};

/// Everything needed to evaluate G(k, t) and the dynamic phase at one k.
struct SectorData {
    double k = 0.0;
    BiorthogonalEigensystem eig;
    OverlapCoefficients ov;
    Spinor initial;
};

inline SectorData sector(const QuenchSpec& spec, const InitialKets& kets, double k) {
    SectorData s;
    s.k = k;
    s.eig = diagonalize(bloch_nonunitary(spec.final_angles, spec.loss, k));
    s.initial = kets.minus;
    const Spinor& psi = kets.minus;
    auto& ov = s.ov;
    ov.ctilde_plus = contract(s.eig.left_plus, psi);
    ov.ctilde_minus = contract(s.eig.left_minus, psi);
    ov.b_plus = braket(psi, s.eig.right_plus);
    ov.b_minus = braket(psi, s.eig.right_minus);
    if (spec.unitary()) {
        ov.c_plus = braket(s.eig.right_plus, psi);
        ov.c_minus = braket(s.eig.right_minus, psi);
    } else {
        ov.c_plus = ov.ctilde_plus;
        ov.c_minus = ov.ctilde_minus;
    }
    return s;
}

inline OverlapCoefficients overlaps(const QuenchSpec& spec, double k) {
    return sector(spec, initial_kets(spec), k).ov;
}

/// ctilde_pm from the closed form in Omega and vartheta, for the initial ket
/// taken as the closed-form right eigenvector psi~^i_- of the initial sector
/// (normalization <chi~|psi~> = 1, not unit length).
inline std::array<Complex, 2> ctilde_closed_form(const QuenchSpec& spec, double k) {
    const auto ei = diagonalize_closed_form(bloch_nonunitary(spec.initial_angles, spec.loss, k));
    const auto ef = diagonalize_closed_form(bloch_nonunitary(spec.final_angles, spec.loss, k));
    if (!ei || !ef)
        throw PhysicsError(ErrorKind::pt_broken, "closed-form overlaps need PT-unbroken initial and final sectors");
    const double oi = ei->omega.real(), of = ef->omega.real();
    const double v0 = ei->vartheta - ef->vartheta;
    const double denom = 2.0 * std::sqrt(std::cos(2.0 * oi) * std::cos(2.0 * of));
    std::array<Complex, 2> out{};
    for (int idx = 0; idx < 2; ++idx) {
        const double s = idx == 0 ? 1.0 : -1.0;  // [0] = plus, [1] = minus
        out[static_cast<std::size_t>(idx)] =
            (-s * std::exp(-kI * (oi - s * of)) + std::exp(kI * v0) * std::exp(kI * (oi - s * of))) / denom;
    }
    return out;
}

/// Final sector operator at k.
inline Mat2 final_operator(const QuenchSpec& spec, double k) {
    return bloch_nonunitary(spec.final_angles, spec.loss, k).matrix();
}

/// (U^f_k)^steps |psi^i_branch> by repeated multiplication.
inline Spinor evolve_k_steps(const QuenchSpec& spec, const InitialKets& kets, double k, int steps, int branch = -1) {
    if (steps < 0) throw std::invalid_argument("evolve_k: t must be >= 0");
    const Mat2 u = final_operator(spec, k);
    Spinor s = kets.branch(branch);
    for (int i = 0; i < steps; ++i) s = u * s;
    return s;
}

/// Spectral continuation lambda_pm^t = e^{-/+ i E t} on the principal branch.
inline Spinor evolve_k_spectral(const QuenchSpec& spec, const InitialKets& kets, double k, double t, int branch = -1) {
    if (!(t >= 0.0)) throw std::invalid_argument("evolve_k: t must be >= 0");
    const auto e = diagonalize(bloch_nonunitary(spec.final_angles, spec.loss, k));
    const Spinor& psi = kets.branch(branch);
    Spinor out;
    for (int sign : {+1, -1}) out += (e.lambda_power(sign, t) * contract(e.left(sign), psi)) * e.right(sign);
    return out;
}

/// Integer t uses repeated application, any other t the spectral form.
inline Spinor evolve_k(const QuenchSpec& spec, double k, double t, int branch = -1) {
    const auto kets = initial_kets(spec);
    if (t >= 0.0 && t == std::floor(t) && t < 1e6) return evolve_k_steps(spec, kets, k, static_cast<int>(t), branch);
    return evolve_k_spectral(spec, kets, k, t, branch);
}

/// Mixed-regime coin state p|psi_-(t)><psi_-(t)| + (1-p)|psi_+(t)><psi_+(t)|,
/// propagated as two pure branches.
inline CoinDensityMatrix evolve_density_k(const QuenchSpec& spec, double k, double t) {
    if (!spec.unitary()) throw std::invalid_argument("evolve_density_k: density evolution is unitary-only");
    const Spinor minus = evolve_k(spec, k, t, -1);
    const Spinor plus = evolve_k(spec, k, t, +1);
    return CoinDensityMatrix::from_matrix(Complex(spec.mixing_p) * outer(minus, minus) +
                                          Complex(1.0 - spec.mixing_p) * outer(plus, plus));
}

/// Closed-form Loschmidt amplitude for a precomputed sector.
inline Complex loschmidt(const QuenchSpec& spec, const SectorData& s, double t) {
    const Complex fwd = s.eig.lambda_power(-1, t);  // e^{iEt}
    const Complex bwd = s.eig.lambda_power(+1, t);  // e^{-iEt}
    if (spec.regime == Regime::nonunitary_pure) return s.ov.weight(+1) * bwd + s.ov.weight(-1) * fwd;
    const double cm = std::norm(s.ov.c_minus);
    const double cp = std::norm(s.ov.c_plus);
    const double p = spec.mixing_p;
    return p * (fwd * cm + bwd * cp) + (1.0 - p) * (bwd * cm + fwd * cp);
}

inline Complex loschmidt_k(const QuenchSpec& spec, double k, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("loschmidt_k: t must be >= 0");
    return loschmidt(spec, sector(spec, initial_kets(spec), k), t);
}

/// Tr[rho_0 (U^f_k)^t] by explicit matrix powers; the independent route used
/// to check the closed forms.
inline Complex loschmidt_direct(const QuenchSpec& spec, const InitialKets& kets, double k, int t) {
    const Mat2 u = final_operator(spec, k);
    Mat2 power = Mat2::identity();
    for (int i = 0; i < t; ++i) power = u * power;
    const double p = spec.regime == Regime::nonunitary_pure ? 1.0 : spec.mixing_p;
    Complex g = p * braket(kets.minus, power * kets.minus);
    if (p < 1.0) g += (1.0 - p) * braket(kets.plus, power * kets.plus);
    return g;
}

/// Per-step coin settings: C(outer_out) S C(half_b) [M] C(half_a) S C(outer_in),
/// applied right to left. For unitary steps half_b is unused and the middle
/// coin is C(half_a) alone.
struct StepCoins {
    double outer_in = 0.0;
    double half_a = 0.0;
    double half_b = 0.0;
    double outer_out = 0.0;
};

inline StepCoins nominal_step(const QuenchSpec& spec) {
    const auto& a = spec.final_angles;
    if (spec.unitary()) return {0.5 * a.theta1, a.theta2, 0.0, 0.5 * a.theta1};
    return {0.5 * a.theta1, 0.5 * a.theta2, 0.5 * a.theta2, 0.5 * a.theta1};
}

namespace detail {

inline void apply_coin(std::vector<Spinor>& amps, const Mat2& m) {
    for (auto& s : amps) s = m * s;
}

/// |H> moves to x-1, |V> to x+1.
inline void apply_shift(std::vector<Spinor>& amps) {
    const std::size_t n = amps.size();
    std::vector<Spinor> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) out[i - 1].amp_h = amps[i].amp_h;
        if (i + 1 < n) out[i + 1].amp_v = amps[i].amp_v;
    }
    amps.swap(out);
}

}  // namespace detail

/// One walk step in position space. `amps` must have room for the support to
/// grow by two sites on each side.
inline void walk_step(std::vector<Spinor>& amps, const StepCoins& c, bool unitary, double loss) {
    detail::apply_coin(amps, coin(c.outer_in));
    detail::apply_shift(amps);
    if (unitary) {
        detail::apply_coin(amps, coin(c.half_a));
    } else {
        detail::apply_coin(amps, coin(c.half_a));
        detail::apply_coin(amps, partial_measurement(loss));
        detail::apply_coin(amps, coin(c.half_b));
    }
    detail::apply_shift(amps);
    detail::apply_coin(amps, coin(c.outer_out));
    if (!unitary) {
        const double g = LossParameters::from_loss(loss).gamma;
        for (auto& s : amps) s = Complex(g) * s;
    }
}

/// Walk with per-step coin settings. Returns states for t = 0..coins.size(),
/// each stored densely over [-2t, 2t].
inline std::vector<PositionState> evolve_position_with(const Spinor& start, const std::vector<StepCoins>& coins,
                                                       bool unitary, double loss) {
    const long steps = static_cast<long>(coins.size());
    const long half = 2 * steps;
    std::vector<Spinor> amps(static_cast<std::size_t>(2 * half + 1));
    amps[static_cast<std::size_t>(half)] = start;
    std::vector<PositionState> out;
    out.reserve(coins.size() + 1);
    auto snapshot = [&](long t) {
        PositionState s;
        s.origin_offset = 2 * t;
        s.amplitudes.assign(amps.begin() + (half - 2 * t), amps.begin() + (half + 2 * t + 1));
        out.push_back(std::move(s));
    };
    snapshot(0);
    for (long t = 1; t <= steps; ++t) {
        walk_step(amps, coins[static_cast<std::size_t>(t - 1)], unitary, loss);
        snapshot(t);
    }
    return out;
}

/// Direct lattice simulation from |x=0> (x) |psi^i_branch>.
inline std::vector<PositionState> evolve_position(const QuenchSpec& spec, int steps, int branch = -1) {
    if (steps < 0) throw std::invalid_argument("evolve_position: steps must be >= 0");
    const auto kets = initial_kets(spec);
    return evolve_position_with(kets.branch(branch), std::vector<StepCoins>(static_cast<std::size_t>(steps), nominal_step(spec)),
                                spec.unitary(), spec.loss);
}

/// P-bar(x, t) for t = 0..steps; row t covers sites -2t..2t.
struct PbarTable {
    std::vector<std::vector<Complex>> rows;

    Complex at(long x, int t) const {
        const auto& row = rows.at(static_cast<std::size_t>(t));
        const long i = x + 2L * t;
        if (i < 0 || i >= static_cast<long>(row.size())) return {};
        return row[static_cast<std::size_t>(i)];
    }
};

inline PbarTable pbar_from_states(const InitialKets& kets, double p, const std::vector<PositionState>& minus,
                                  const std::vector<PositionState>* plus) {
    PbarTable table;
    for (std::size_t t = 0; t < minus.size(); ++t) {
        const auto& sm = minus[t];
        std::vector<Complex> row(sm.amplitudes.size());
        for (std::size_t i = 0; i < row.size(); ++i) {
            row[i] = p * braket(kets.minus, sm.amplitudes[i]);
            if (plus != nullptr && p < 1.0) row[i] += (1.0 - p) * braket(kets.plus, (*plus)[t].amplitudes[i]);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline PbarTable pbar_table(const QuenchSpec& spec, int steps) {
    const auto kets = initial_kets(spec);
    const double p = spec.regime == Regime::nonunitary_pure ? 1.0 : spec.mixing_p;
    const auto minus = evolve_position(spec, steps, -1);
    if (p < 1.0) {
        const auto plus = evolve_position(spec, steps, +1);
        return pbar_from_states(kets, p, minus, &plus);
    }
    return pbar_from_states(kets, p, minus, nullptr);
}

inline Complex pbar(const QuenchSpec& spec, long x, int t) {
    if (t < 0) throw std::invalid_argument("pbar: t must be >= 0");
    return pbar_table(spec, t).at(x, t);
}

/// sum_x e^{-ikx} P-bar(x, t) for one table row.
inline Complex fourier_loschmidt(const std::vector<Complex>& row, int t, double k) {
    Complex g{};
    for (std::size_t i = 0; i < row.size(); ++i) {
        const double x = static_cast<double>(static_cast<long>(i) - 2L * t);
        g += std::polar(1.0, -k * x) * row[i];
    }
    return g;
}

/// G(k, t) sampled on a (t, k) grid; values are stored t-major.
struct LoschmidtField {
    MomentumGrid grid{16};
    std::vector<double> times;
    std::vector<Complex> values;
    Regime regime = Regime::unitary_pure;

    Complex operator()(std::size_t t_index, std::size_t k_index) const { return values[t_index * grid.size() + k_index]; }
};

/// Dense G(k, t) via the closed forms, parallel over k columns. Integer
/// times up to 7 are spot-checked against the position-space route.
inline LoschmidtField loschmidt_field(const QuenchSpec& spec, const MomentumGrid& grid, const std::vector<double>& times,
                                      std::size_t threads = 1, bool verify = true) {
    spec.validate();
    const auto kets = initial_kets(spec);
    LoschmidtField field;
    field.grid = grid;
    field.times = times;
    field.regime = spec.regime;
    field.values.assign(times.size() * grid.size(), Complex{});
    parallel_for(grid.size(), threads, [&](std::size_t j) {
        SectorData s;
        try {
            s = sector(spec, kets, grid[j]);
        } catch (const PhysicsError& e) {
            std::ostringstream os;
            os << "quench-engine: k index " << j << " (k=" << grid[j] << "): " << e.what();
            throw PhysicsError(e.kind(), os.str());
        }
        for (std::size_t ti = 0; ti < times.size(); ++ti) field.values[ti * grid.size() + j] = loschmidt(spec, s, times[ti]);
    });
    if (verify) {
        int max_step = 0;
        for (double t : times)
            if (t == std::floor(t) && t <= 7.0) max_step = std::max(max_step, static_cast<int>(t));
        const auto table = pbar_table(spec, max_step);
        const std::size_t stride = std::max<std::size_t>(1, grid.size() / 8);
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            const double t = times[ti];
            if (t != std::floor(t) || t > 7.0) continue;
            const int step = static_cast<int>(t);
            for (std::size_t j = 0; j < grid.size(); j += stride) {
                const Complex ref = fourier_loschmidt(table.rows[static_cast<std::size_t>(step)], step, grid[j]);
                if (std::abs(ref - field(ti, j)) > 1e-8) {
                    std::ostringstream os;
                    os << "quench-engine: closed form and lattice route disagree at k index " << j << ", t=" << t;
                    throw std::logic_error(os.str());
                }
            }
        }
    }
    return field;
}

inline LoschmidtField loschmidt_field(const QuenchSpec& spec, const MomentumGrid& grid, const TimeGrid& times,
                                      std::size_t threads = 1) {
    return loschmidt_field(spec, grid, times.samples(), threads);
}

/// CSV columns k, t, re_G, im_G, abs_G.
inline void write_loschmidt_csv(std::ostream& os, const LoschmidtField& f) {
    os << "k,t,re_G,im_G,abs_G\n" << std::setprecision(12);
    for (std::size_t ti = 0; ti < f.times.size(); ++ti) {
        for (std::size_t j = 0; j < f.grid.size(); ++j) {
            const Complex g = f(ti, j);
            os << f.grid[j] << ',' << f.times[ti] << ',' << g.real() << ',' << g.imag() << ',' << std::abs(g) << '\n';
        }
    }
}

/// CSV columns t, x, re_H, im_H, re_V, im_V.
inline void write_position_csv(std::ostream& os, const std::vector<PositionState>& states) {
    os << "t,x,re_H,im_H,re_V,im_V\n" << std::setprecision(12);
    for (std::size_t t = 0; t < states.size(); ++t) {
        const auto& s = states[t];
        for (long x = s.min_site(); x <= s.max_site(); ++x) {
            const Spinor a = s.at(x);
            os << t << ',' << x << ',' << a.amp_h.real() << ',' << a.amp_h.imag() << ',' << a.amp_v.real() << ','
               << a.amp_v.imag() << '\n';
        }
    }
}

}  // namespace qwdqpt
