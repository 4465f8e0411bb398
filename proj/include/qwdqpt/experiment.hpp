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
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "qwdqpt/analysis.hpp"
#include "qwdqpt/errors.hpp"
#include "qwdqpt/lattice.hpp"
#include "qwdqpt/parallel.hpp"
#include "qwdqpt/quench.hpp"

namespace qwdqpt {

/// Instrument error budget.
struct ErrorModel {
    double wp_angle_tol = 0.1 * kPi / 180.0;
    double path_loss_tol = 0.02;
    double total_coincidences = 40000.0;
    double dephasing_eta = 0.97;
    std::size_t mc_samples = 1000;
    std::uint64_t seed = 1;

    static ErrorModel noiseless() {
        ErrorModel m;
        m.wp_angle_tol = 0.0;
        m.path_loss_tol = 0.0;
        m.total_coincidences = std::numeric_limits<double>::infinity();
        m.dephasing_eta = 1.0;
        return m;
    }

    void validate() const {
        if (!(wp_angle_tol >= 0.0) || !(path_loss_tol >= 0.0) || !(path_loss_tol < 1.0))
            throw std::invalid_argument("ErrorModel: tolerances must be >= 0 (path loss < 1)");
        if (!(total_coincidences > 0.0)) throw std::invalid_argument("ErrorModel: total_coincidences must be > 0");
        if (!(dephasing_eta >= 0.0 && dephasing_eta <= 1.0)) throw std::invalid_argument("ErrorModel: eta outside [0,1]");
    }
};

/// eta rho + (1 - eta) sz rho sz: diagonal kept, coherences scaled by 2 eta - 1.
inline Mat2 dephase(const Mat2& rho, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("dephase: eta outside [0,1]");
    const Mat2 z = pauli(3);
    return Complex(eta) * rho + Complex(1.0 - eta) * (z * rho * z);
}

inline CoinDensityMatrix dephase(const CoinDensityMatrix& rho, double eta) {
    return CoinDensityMatrix::from_matrix(dephase(rho.matrix(), eta));
}

/// Click probabilities of one (x, t) measurement. p1 = p11 + p11_prime and
/// p2 = p21 + p21_prime. Values are relative to one input photon per arm
/// pair and are not capped at one.
struct MeasurementProbs {
    double p11 = 0.0;
    double p11_prime = 0.0;
    double p12 = 0.0;
    double p21 = 0.0;
    double p21_prime = 0.0;
    double p22 = 0.0;
    double p1 = 0.0;
    double p2 = 0.0;
};

/// Analyzer and interferometer settings. proj_i is the projector used for
/// the P_a1 readings (orthogonal port gives P_a1'), proj_plus for P_a2.
struct MeasurementSettings {
    Spinor proj1_i{1.0 / std::sqrt(2.0), Complex(0.0, -1.0 / std::sqrt(2.0))};
    Spinor proj1_plus{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
    Spinor proj2_i{1.0 / std::sqrt(2.0), Complex(0.0, -1.0 / std::sqrt(2.0))};
    Spinor proj2_plus{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
    double walker_transmission = 1.0;
    double reference_transmission = 1.0;
    double eta = 1.0;
};

namespace detail {

inline Spinor orthogonal(const Spinor& v) { return {-std::conj(v.amp_v), std::conj(v.amp_h)}; }

inline double expectation(const Mat2& rho, const Spinor& v) { return braket(v, rho * v).real(); }

/// Path-1 and path-2 polarization states after the first PBS: the walker
/// photon supplies the |H> (path 1) or |V> (path 2) slot, the reference
/// photon the other.
inline void path_states(double p, const Spinor& ref_m, const Spinor& ev_m, const Spinor& ref_p, const Spinor& ev_p,
                        double tw, double tr, Mat2& rho1, Mat2& rho2) {
    const double sw = std::sqrt(tw), sr = std::sqrt(tr);
    const Spinor p1m{sw * ev_m.amp_h, sr * ref_m.amp_h}, p1p{sw * ev_p.amp_h, sr * ref_p.amp_h};
    const Spinor p2m{sr * ref_m.amp_v, sw * ev_m.amp_v}, p2p{sr * ref_p.amp_v, sw * ev_p.amp_v};
    rho1 = Complex(p) * outer(p1m, p1m) + Complex(1.0 - p) * outer(p1p, p1p);
    rho2 = Complex(p) * outer(p2m, p2m) + Complex(1.0 - p) * outer(p2p, p2p);
}

}  // namespace detail

/// Six readings for given reference kets and evolved on-site spinors.
inline MeasurementProbs measure(double p, const Spinor& ref_minus, const Spinor& evolved_minus, const Spinor& ref_plus,
                                const Spinor& evolved_plus, const MeasurementSettings& s) {
    Mat2 rho1, rho2;
    detail::path_states(p, ref_minus, evolved_minus, ref_plus, evolved_plus, s.walker_transmission,
                        s.reference_transmission, rho1, rho2);
    if (s.eta != 1.0) {
        rho1 = dephase(rho1, s.eta);
        rho2 = dephase(rho2, s.eta);
    }
    MeasurementProbs m;
    m.p11 = detail::expectation(rho1, s.proj1_i);
    m.p11_prime = detail::expectation(rho1, detail::orthogonal(s.proj1_i));
    m.p12 = detail::expectation(rho1, s.proj1_plus);
    m.p21 = detail::expectation(rho2, s.proj2_i);
    m.p21_prime = detail::expectation(rho2, detail::orthogonal(s.proj2_i));
    m.p22 = detail::expectation(rho2, s.proj2_plus);
    m.p1 = m.p11 + m.p11_prime;
    m.p2 = m.p21 + m.p21_prime;
    return m;
}

/// i(P11 - P1/2 - P21 + P2/2) + (P12 - P1/2 + P22 - P2/2).
inline Complex reconstruct_pbar(const MeasurementProbs& m) {
    return kI * (m.p11 - 0.5 * m.p1 - m.p21 + 0.5 * m.p2) + (m.p12 - 0.5 * m.p1 + m.p22 - 0.5 * m.p2);
}

/// Readings for the lattice state at (x, t). With error_free = false the
/// default dephasing is applied; nothing else is perturbed.
inline MeasurementProbs simulate_measurement_probs(const QuenchSpec& spec, long x, int t, bool error_free = true) {
    if (t < 0) throw std::invalid_argument("simulate_measurement_probs: t must be >= 0");
    const auto kets = initial_kets(spec);
    const double p = spec.regime == Regime::nonunitary_pure ? 1.0 : spec.mixing_p;
    const auto minus = evolve_position(spec, t, -1);
    const Spinor em = minus.back().at(x);
    const Spinor ep = p < 1.0 ? evolve_position(spec, t, +1).back().at(x) : Spinor{};
    MeasurementSettings s;
    if (!error_free) s.eta = ErrorModel{}.dephasing_eta;
    return measure(p, kets.minus, em, kets.plus, ep, s);
}

/// Protocol as realized in one Monte Carlo draw.
struct PerturbedProtocol {
    std::vector<StepCoins> steps;
    MeasurementSettings settings;
};

namespace detail {

inline Spinor perturb_analyzer(const Spinor& v, double d1, double d2) {
    return coin(d1) * (Mat2::diag(std::polar(1.0, -d2), std::polar(1.0, d2)) * v);
}

}  // namespace detail

/// Independent uniform draws for every plate angle in every step, for the
/// analyzer settings, and for the two arm transmissions.
inline PerturbedProtocol perturb_protocol(const QuenchSpec& spec, const ErrorModel& model, int steps, std::mt19937_64& rng) {
    model.validate();
    std::uniform_real_distribution<double> ang(-1.0, 1.0);
    auto da = [&] { return model.wp_angle_tol * ang(rng); };
    PerturbedProtocol out;
    const StepCoins nominal = nominal_step(spec);
    out.steps.assign(static_cast<std::size_t>(steps), nominal);
    for (auto& c : out.steps) {
        c.outer_in += da();
        c.half_a += da();
        if (!spec.unitary()) c.half_b += da();
        c.outer_out += da();
    }
    auto& s = out.settings;
    for (Spinor* v : {&s.proj1_i, &s.proj1_plus, &s.proj2_i, &s.proj2_plus}) {
        const double d1 = da();
        const double d2 = da();
        *v = detail::perturb_analyzer(*v, d1, d2);
    }
    s.walker_transmission = 1.0 + model.path_loss_tol * ang(rng);
    s.reference_transmission = 1.0 + model.path_loss_tol * ang(rng);
    s.eta = model.dephasing_eta;
    return out;
}

/// count / total with count ~ Poisson(prob * total).
inline double poisson_probability(double prob, double total, std::mt19937_64& rng) {
    if (!(prob >= 0.0)) prob = 0.0;
    if (!std::isfinite(total)) return prob;
    const double mean = prob * total;
    if (mean == 0.0) return 0.0;
    std::poisson_distribution<long long> d(mean);
    return static_cast<double>(d(rng)) / total;
}

inline MeasurementProbs poisson_counts(const MeasurementProbs& m, double total, std::mt19937_64& rng) {
    MeasurementProbs o;
    o.p11 = poisson_probability(m.p11, total, rng);
    o.p11_prime = poisson_probability(m.p11_prime, total, rng);
    o.p12 = poisson_probability(m.p12, total, rng);
    o.p21 = poisson_probability(m.p21, total, rng);
    o.p21_prime = poisson_probability(m.p21_prime, total, rng);
    o.p22 = poisson_probability(m.p22, total, rng);
    o.p1 = o.p11 + o.p11_prime;
    o.p2 = o.p21 + o.p21_prime;
    return o;
}

// ---------------------------------------------------------------- Monte Carlo

enum class Quantity { rate_function, dtop, pbar };

inline std::string_view to_string(Quantity q) {
    switch (q) {
        case Quantity::rate_function: return "rate_function";
        case Quantity::dtop: return "dtop";
        case Quantity::pbar: return "pbar";
    }
    return "unknown";
}

struct MonteCarloOptions {
    std::vector<Quantity> quantities{Quantity::rate_function, Quantity::dtop, Quantity::pbar};
    int t_max = 7;
    std::size_t kpoints = 512;
    std::size_t dtop_subgrid = kDefaultDtopSubgrid;
    std::size_t threads = 1;
};

struct ErrorBarRow {
    std::string quantity;
    double t = 0.0;
    double center = 0.0;
    double err_plus = 0.0;
    double err_minus = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

struct ErrorBarResult {
    std::vector<ErrorBarRow> rows;
    std::size_t samples_requested = 0;

    const ErrorBarRow& find(const std::string& quantity, double t) const {
        for (const auto& r : rows)
            if (r.quantity == quantity && std::abs(r.t - t) < 1e-9) return r;
        throw std::out_of_range("ErrorBarResult: no row for " + quantity);
    }
};

namespace detail {

/// One observable evaluated on the emulated readings at every integer time.
struct Observable {
    std::string name;
    std::vector<double> reference;  // per time
};

/// Evaluates all observables from a P-bar table.
class ObservableSet {
public:
    ObservableSet(const QuenchSpec& spec, const MonteCarloOptions& opt)
        : spec_(spec), opt_(opt), kets_(initial_kets(spec)) {
        // Midpoint grid: keeps the sampled k away from symmetric critical momenta.
        for (std::size_t j = 0; j < opt.kpoints; ++j)
            ks_.push_back(-kPi + kTwoPi * (static_cast<double>(j) + 0.5) / static_cast<double>(opt.kpoints));
        for (auto q : opt.quantities) {
            if (q == Quantity::rate_function) want_rate_ = true;
            if (q == Quantity::dtop) want_dtop_ = true;
            if (q == Quantity::pbar) want_pbar_ = true;
        }
        if (want_dtop_) {
            try {
                fps_ = find_fixed_points(spec, MomentumGrid(2048));
            } catch (const PhysicsError& e) {
                if (e.kind() != ErrorKind::trivial_quench) throw;
            }
            segs_ = segments(fps_);
            for (const auto& seg : segs_) {
                std::vector<SectorData> sec(opt.dtop_subgrid);
                for (std::size_t i = 0; i < opt.dtop_subgrid; ++i)
                    sec[i] = sector(spec, kets_, sub_k(seg, i));
                sectors_.push_back(std::move(sec));
            }
        }
        for (int t = 0; t <= opt.t_max; ++t) times_.push_back(t);
    }

    const std::vector<int>& times() const { return times_; }

    std::vector<std::string> names(const PbarTable& shape) const {
        std::vector<std::string> n;
        if (want_rate_) n.emplace_back("rate_function");
        if (want_dtop_)
            for (const auto& seg : segs_) n.push_back("dtop_m" + std::to_string(seg.m));
        if (want_pbar_) {
            const auto& last = shape.rows.back();
            const long half = (static_cast<long>(last.size()) - 1) / 2;
            for (long x = -half; x <= half; x += 2) {
                n.push_back("pbar_re_x" + std::to_string(x));
                n.push_back("pbar_im_x" + std::to_string(x));
            }
        }
        return n;
    }

    /// Values (one vector per observable, indexed by time). Non-finite
    /// entries mark a failed evaluation.
    std::vector<std::vector<double>> evaluate(const PbarTable& table, bool reference) const {
        std::vector<std::vector<double>> out;
        const std::size_t nt = times_.size();
        if (want_rate_) {
            std::vector<double> g(nt);
            for (std::size_t ti = 0; ti < nt; ++ti) {
                double sum = 0.0;
                for (double k : ks_) {
                    const Complex G = reference ? loschmidt(spec_, sector_at(k), times_[ti])
                                                : fourier_loschmidt(table.rows[ti], times_[ti], k);
                    sum += std::log(std::abs(G));
                }
                g[ti] = -2.0 * sum / static_cast<double>(ks_.size());
            }
            out.push_back(std::move(g));
        }
        if (want_dtop_) {
            for (std::size_t s = 0; s < segs_.size(); ++s) {
                std::vector<double> v(nt);
                for (std::size_t ti = 0; ti < nt; ++ti) v[ti] = dtop_value(table, s, ti, reference);
                out.push_back(std::move(v));
            }
        }
        if (want_pbar_) {
            const auto& last = table.rows.back();
            const long half = (static_cast<long>(last.size()) - 1) / 2;
            for (long x = -half; x <= half; x += 2) {
                std::vector<double> re(nt), im(nt);
                for (std::size_t ti = 0; ti < nt; ++ti) {
                    const Complex v = table.at(x, times_[ti]);
                    re[ti] = v.real();
                    im[ti] = v.imag();
                }
                out.push_back(std::move(re));
                out.push_back(std::move(im));
            }
        }
        return out;
    }

private:
    double sub_k(const Segment& seg, std::size_t i) const {
        return seg.k_begin + (seg.k_end - seg.k_begin) * static_cast<double>(i) / static_cast<double>(opt_.dtop_subgrid - 1);
    }

    SectorData sector_at(double k) const { return sector(spec_, kets_, k); }

    double dtop_value(const PbarTable& table, std::size_t s, std::size_t ti, bool reference) const {
        const auto& seg = segs_[s];
        const double t = times_[ti];
        auto phase = [&](double k, const SectorData& sd, double tt) {
            const Complex G = reference ? loschmidt(spec_, sd, tt) : fourier_loschmidt(table.rows[ti], times_[ti], k);
            if (std::abs(G) < tol::kZeroAmplitude)
                throw PhysicsError(ErrorKind::ill_defined_phase, "emulated G vanishes");
            return std::arg(G) - dynamic_phase(spec_, sd, tt);
        };
        auto winding_at = [&](double tt) {
            std::vector<double> ph(opt_.dtop_subgrid);
            for (std::size_t i = 0; i < ph.size(); ++i) ph[i] = phase(sub_k(seg, i), sectors_[s][i], tt);
            return phase_winding([&](double k) { return phase(k, sector_at(k), tt); }, seg.k_begin, seg.k_end,
                                 opt_.dtop_subgrid, &ph);
        };
        try {
            return winding_at(t);
        } catch (const PhysicsError& e) {
            if (e.kind() != ErrorKind::ill_defined_phase && e.kind() != ErrorKind::insufficient_resolution) throw;
        }
        if (!reference) return std::numeric_limits<double>::quiet_NaN();
        // At a critical time the reference is the midpoint of the two sides.
        constexpr double h = 1e-3;
        return 0.5 * (winding_at(t - h) + winding_at(t + h));
    }

    QuenchSpec spec_;
    MonteCarloOptions opt_;
    std::vector<double> ks_;
    InitialKets kets_;
    FixedPointSet fps_;
    std::vector<Segment> segs_;
    std::vector<std::vector<SectorData>> sectors_;
    std::vector<int> times_;
    bool want_rate_ = false;
    bool want_dtop_ = false;
    bool want_pbar_ = false;
};

/// Emulated P-bar table for one Monte Carlo draw.
inline PbarTable emulate_pbar(const QuenchSpec& spec, const InitialKets& kets, const PerturbedProtocol& proto,
                              const ErrorModel& model, bool counting_only, std::mt19937_64& rng) {
    const double p = spec.regime == Regime::nonunitary_pure ? 1.0 : spec.mixing_p;
    const auto& steps = proto.steps;
    const auto minus = evolve_position_with(kets.minus, steps, spec.unitary(), spec.loss);
    std::vector<PositionState> plus;
    if (p < 1.0) plus = evolve_position_with(kets.plus, steps, spec.unitary(), spec.loss);
    const MeasurementSettings settings = counting_only ? MeasurementSettings{} : proto.settings;
    PbarTable table;
    for (std::size_t t = 0; t < minus.size(); ++t) {
        const auto& sm = minus[t];
        std::vector<Complex> row(sm.amplitudes.size());
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i % 2 == 1) continue;  // odd sites carry no amplitude
            const Spinor ep = p < 1.0 ? plus[t].amplitudes[i] : Spinor{};
            const auto probs = measure(p, kets.minus, sm.amplitudes[i], kets.plus, ep, settings);
            row[i] = reconstruct_pbar(poisson_counts(probs, model.total_coincidences, rng));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace detail

/// Monte Carlo error bars against the noiseless closed-form reference. The
/// largest positive deviation sets err_minus, the largest negative one
/// err_plus. Non-unitary runs use photon counting noise only.
inline ErrorBarResult monte_carlo_errorbars(const QuenchSpec& spec, const ErrorModel& model,
                                            const MonteCarloOptions& opt = {}) {
    model.validate();
    spec.validate();
    if (model.mc_samples < 100) throw std::invalid_argument("monte_carlo_errorbars: mc_samples must be >= 100");
    if (opt.t_max < 1) throw std::invalid_argument("monte_carlo_errorbars: t_max must be >= 1");
    const bool counting_only = !spec.unitary();
    const auto kets = initial_kets(spec);
    const detail::ObservableSet obs(spec, opt);
    const PbarTable nominal = pbar_table(spec, opt.t_max);
    const auto names = obs.names(nominal);
    const auto reference = obs.evaluate(nominal, true);
    const std::size_t nq = names.size(), nt = obs.times().size();

    std::vector<std::vector<std::vector<double>>> samples(model.mc_samples);
    parallel_for(model.mc_samples, opt.threads, [&](std::size_t i) {
        std::mt19937_64 rng(model.seed ^ static_cast<std::uint64_t>(i));
        ErrorModel m = model;
        if (counting_only) {
            m.wp_angle_tol = 0.0;
            m.path_loss_tol = 0.0;
            m.dephasing_eta = 1.0;
        }
        const auto proto = perturb_protocol(spec, m, opt.t_max, rng);
        const auto table = detail::emulate_pbar(spec, kets, proto, m, counting_only, rng);
        samples[i] = obs.evaluate(table, false);
    });

    ErrorBarResult res;
    res.samples_requested = model.mc_samples;
    for (std::size_t q = 0; q < nq; ++q) {
        for (std::size_t ti = 0; ti < nt; ++ti) {
            ErrorBarRow row;
            row.quantity = names[q];
            row.t = obs.times()[ti];
            row.center = reference[q][ti];
            row.seed = model.seed;
            double up = 0.0, down = 0.0;
            for (const auto& s : samples) {
                const double v = s[q][ti];
                if (!std::isfinite(v)) continue;
                ++row.n_samples;
                up = std::max(up, v - row.center);
                down = std::max(down, row.center - v);
            }
            row.err_minus = up;
            row.err_plus = down;
            res.rows.push_back(row);
        }
    }
    return res;
}

/// CSV columns quantity, t, center, err_plus, err_minus, n_samples, seed.
inline void write_errorbar_csv(std::ostream& os, const ErrorBarResult& r) {
    os << "quantity,t,center,err_plus,err_minus,n_samples,seed\n" << std::setprecision(12);
    for (const auto& row : r.rows)
        os << row.quantity << ',' << row.t << ',' << row.center << ',' << row.err_plus << ',' << row.err_minus << ','
           << row.n_samples << ',' << row.seed << '\n';
}

}  // namespace qwdqpt
