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
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qwdqpt/errors.hpp"
#include "qwdqpt/floquet.hpp"
#include "qwdqpt/lattice.hpp"
#include "qwdqpt/parallel.hpp"
#include "qwdqpt/quench.hpp"
#include "qwdqpt/tolerances.hpp"

namespace qwdqpt {

// ---------------------------------------------------------------- rate function

/// -(1/pi) * periodic trapezoid of ln|G| over the k-grid at one time index.
/// Returns +infinity if G vanishes exactly at a grid point.
inline double rate_function_at(const LoschmidtField& f, std::size_t t_index) {
    const std::size_t n = f.grid.size();
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double a = std::abs(f(t_index, j));
        if (a == 0.0) return std::numeric_limits<double>::infinity();
        sum += std::log(a);
    }
    return -2.0 * sum / static_cast<double>(n);
}

inline std::vector<double> rate_function(const LoschmidtField& f) {
    std::vector<double> g(f.times.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = rate_function_at(f, i);
    return g;
}

/// g(t) for a time present in the field.
inline double rate_function(const LoschmidtField& f, double t) {
    for (std::size_t i = 0; i < f.times.size(); ++i)
        if (std::abs(f.times[i] - t) < 1e-9) return rate_function_at(f, i);
    throw std::invalid_argument("rate_function: t is not a sample of the field");
}

// ---------------------------------------------------------------- phases

/// Unitary (pure and mixed): (2p-1)(|c_-|^2 - |c_+|^2) E t.
/// Non-unitary: Re[b_- c~_- - b_+ c~_+] E t, PT-unbroken sectors only.
inline double dynamic_phase(const QuenchSpec& spec, const SectorData& s, double t) {
    if (spec.unitary()) {
        const double bias = std::norm(s.ov.c_minus) - std::norm(s.ov.c_plus);
        return (2.0 * spec.mixing_p - 1.0) * bias * s.eig.quasienergy.real() * t;
    }
    if (std::abs(s.eig.quasienergy.imag()) > tol::kRoot) {
        std::ostringstream os;
        os << "dynamic phase undefined in PT-broken sector k=" << s.k;
        throw PhysicsError(ErrorKind::undefined_dynamic_phase, os.str());
    }
    const double bias = (s.ov.weight(-1) - s.ov.weight(+1)).real();
    return bias * s.eig.quasienergy.real() * t;
}

inline double dynamic_phase(const QuenchSpec& spec, double k, double t) {
    return dynamic_phase(spec, sector(spec, initial_kets(spec), k), t);
}

/// Pancharatnam geometric phase arg G - phi_dyn, wrapped to (-pi, pi].
inline double pgp(const QuenchSpec& spec, const SectorData& s, double t) {
    const Complex g = loschmidt(spec, s, t);
    if (std::abs(g) < tol::kZeroAmplitude) {
        std::ostringstream os;
        os << "geometric phase ill-defined: G(k=" << s.k << ", t=" << t << ") = 0";
        throw PhysicsError(ErrorKind::ill_defined_phase, os.str());
    }
    return detail::wrap_increment(std::arg(g) - dynamic_phase(spec, s, t));
}

inline double pgp(const QuenchSpec& spec, double k, double t) {
    return pgp(spec, sector(spec, initial_kets(spec), k), t);
}

// ---------------------------------------------------------------- fixed points

enum class FixedPointKind { c_plus_zero, c_minus_zero };

inline std::string_view to_string(FixedPointKind k) {
    return k == FixedPointKind::c_plus_zero ? "c_plus_zero" : "c_minus_zero";
}

struct FixedPoint {
    double k = 0.0;
    FixedPointKind kind = FixedPointKind::c_plus_zero;
    double residual = 0.0;
};

struct FixedPointSet {
    std::vector<FixedPoint> points;
    std::string diagnostic;

    std::size_t count(FixedPointKind kind) const {
        return static_cast<std::size_t>(
            std::count_if(points.begin(), points.end(), [&](const FixedPoint& p) { return p.kind == kind; }));
    }
};

namespace detail {

/// |P_sign psi|, the size of the initial ket's component along one final
/// eigenvector; independent of eigenvector normalization.
inline double component_norm(const QuenchSpec& spec, const Spinor& psi, double k, int sign) {
    const auto e = diagonalize(bloch_nonunitary(spec.final_angles, spec.loss, k));
    return (e.projector(sign) * psi).norm();
}

template <class F>
double golden_min(F&& f, double a, double b, double xtol) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > xtol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

inline double circular_distance(double a, double b) { return std::abs(wrap_increment(a - b)); }

}  // namespace detail

/// Momenta where the initial ket is an eigenvector of the final sector
/// operator. Grid local minima of |P_pm psi| are refined by golden-section
/// search and kept if the residual is below tolerance.
inline FixedPointSet find_fixed_points(const QuenchSpec& spec, const MomentumGrid& grid) {
    const auto kets = initial_kets(spec);
    const std::size_t n = grid.size();
    FixedPointSet out;
    for (int sign : {+1, -1}) {
        std::vector<double> v(n);
        for (std::size_t j = 0; j < n; ++j) v[j] = detail::component_norm(spec, kets.minus, grid[j], sign);
        if (*std::max_element(v.begin(), v.end()) < tol::kFixedPoint)
            throw PhysicsError(ErrorKind::trivial_quench, "trivial quench: initial state is an eigenstate of the final protocol at every k");
        const auto kind = sign > 0 ? FixedPointKind::c_plus_zero : FixedPointKind::c_minus_zero;
        auto f = [&](double k) { return detail::component_norm(spec, kets.minus, k, sign); };
        for (std::size_t j = 0; j < n; ++j) {
            const double left = v[(j + n - 1) % n], right = v[(j + 1) % n];
            if (!(v[j] <= left && v[j] < right)) continue;
            const double k = detail::golden_min(f, grid[j] - grid.spacing(), grid[j] + grid.spacing(), 1e-13);
            const double res = f(k);
            if (res >= tol::kFixedPoint) continue;
            const double kw = normalize_angle(k);
            const bool dup = std::any_of(out.points.begin(), out.points.end(), [&](const FixedPoint& p) {
                return p.kind == kind && detail::circular_distance(p.k, kw) < 1e-7;
            });
            if (!dup) out.points.push_back({kw, kind, res});
        }
    }
    std::sort(out.points.begin(), out.points.end(), [](const FixedPoint& a, const FixedPoint& b) { return a.k < b.k; });
    if (out.points.empty()) {
        const auto pt = pt_classify(spec.final_angles, spec.loss, grid);
        out.diagnostic = pt.status == PtStatus::broken ? "no fixed points: final protocol is PT-broken"
                                                       : "no fixed points found on the grid";
    }
    return out;
}

// ---------------------------------------------------------------- segments

/// Momentum interval (k_begin, k_end) between cyclically adjacent fixed
/// points; the last segment wraps through the zone edge (k_end may exceed pi).
struct Segment {
    std::size_t m = 1;
    double k_begin = 0.0;
    double k_end = 0.0;
    FixedPointKind kind_begin = FixedPointKind::c_plus_zero;
    FixedPointKind kind_end = FixedPointKind::c_plus_zero;

    bool contains(double k) const {
        const double shifted = k_begin + std::fmod(std::fmod(k - k_begin, kTwoPi) + kTwoPi, kTwoPi);
        return shifted > k_begin && shifted < k_end;
    }
};

inline std::vector<Segment> segments(const FixedPointSet& fps) {
    std::vector<Segment> out;
    const auto& p = fps.points;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& a = p[i];
        const auto& b = p[(i + 1) % p.size()];
        const double end = i + 1 < p.size() ? b.k : b.k + kTwoPi;
        out.push_back({i + 1, a.k, end, a.kind, b.kind});
    }
    return out;
}

// ---------------------------------------------------------------- critical set

struct CriticalMomentum {
    double k = 0.0;
    double t0 = 0.0;
    std::size_t segment = 0;
};

struct CriticalSet {
    std::vector<CriticalMomentum> entries;
    std::vector<double> momenta;
    std::vector<double> time_scales;
    std::vector<double> critical_times;
};

/// Roots of |b_+ c~_+| = |b_- c~_-| between adjacent fixed points of
/// different kinds, with t0 = pi / (2 E(k_c)) and t_c = (2n-1) t0 <= t_max.
inline CriticalSet find_critical(const QuenchSpec& spec, const FixedPointSet& fps, const MomentumGrid& grid,
                                 double t_max = 7.0) {
    CriticalSet cs;
    const auto kets = initial_kets(spec);
    auto h = [&](double k) {
        const auto s = sector(spec, kets, k);
        return std::abs(s.ov.weight(+1)) - std::abs(s.ov.weight(-1));
    };
    for (const auto& seg : segments(fps)) {
        if (seg.kind_begin == seg.kind_end) continue;
        // h < 0 where c_+ vanishes, h > 0 where c_- vanishes.
        std::vector<double> ks{seg.k_begin};
        std::vector<double> hs{seg.kind_begin == FixedPointKind::c_plus_zero ? -1.0 : 1.0};
        for (std::size_t j = 0; j < 2 * grid.size(); ++j) {
            const double k = grid[j % grid.size()] + (j >= grid.size() ? kTwoPi : 0.0);
            if (k > seg.k_begin + 1e-9 && k < seg.k_end - 1e-9) {
                ks.push_back(k);
                hs.push_back(h(k));
            }
        }
        ks.push_back(seg.k_end);
        hs.push_back(seg.kind_end == FixedPointKind::c_plus_zero ? -1.0 : 1.0);
        for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
            double a = ks[i], b = ks[i + 1];
            double ha = hs[i];
            if (ha == 0.0) {
                b = a;
            } else if (hs[i + 1] == 0.0 || (ha < 0.0) == (hs[i + 1] < 0.0)) {
                continue;
            } else {
                for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
                    const double mid = 0.5 * (a + b);
                    const double hm = h(mid);
                    if (hm == 0.0) {
                        a = b = mid;
                        break;
                    }
                    if ((hm < 0.0) == (ha < 0.0)) {
                        a = mid;
                        ha = hm;
                    } else {
                        b = mid;
                    }
                }
            }
            const double kc = normalize_angle(0.5 * (a + b));
            const auto e = diagonalize(bloch_nonunitary(spec.final_angles, spec.loss, kc));
            if (std::abs(e.quasienergy.imag()) > tol::kRoot || e.quasienergy.real() <= 0.0) continue;
            cs.entries.push_back({kc, kPi / (2.0 * e.quasienergy.real()), seg.m});
        }
    }
    std::sort(cs.entries.begin(), cs.entries.end(), [](const auto& x, const auto& y) { return x.k < y.k; });
    for (const auto& e : cs.entries) {
        cs.momenta.push_back(e.k);
        const bool dup = std::any_of(cs.time_scales.begin(), cs.time_scales.end(),
                                     [&](double t) { return std::abs(t - e.t0) < tol::kGapClosing; });
        if (!dup) cs.time_scales.push_back(e.t0);
    }
    std::sort(cs.time_scales.begin(), cs.time_scales.end());
    for (double t0 : cs.time_scales) {
        for (int n = 1; (2 * n - 1) * t0 <= t_max + 1e-12; ++n) {
            const double tc = (2 * n - 1) * t0;
            const bool dup = std::any_of(cs.critical_times.begin(), cs.critical_times.end(),
                                         [&](double t) { return std::abs(t - tc) < tol::kGapClosing; });
            if (!dup) cs.critical_times.push_back(tc);
        }
    }
    std::sort(cs.critical_times.begin(), cs.critical_times.end());
    return cs;
}

// ---------------------------------------------------------------- DTOP

inline constexpr std::size_t kDefaultDtopSubgrid = 512;
inline constexpr int kDtopRefineLevels = 3;
inline constexpr std::size_t kDtopRefineSplit = 8;

namespace detail {

inline constexpr double kMaxPhaseStep = kPi - 0.1;

template <class PhaseAt>
double refine_increment(PhaseAt& phase_at, double ka, double kb, double pa, double pb, int level) {
    double total = 0.0;
    double prev_k = ka, prev_p = pa;
    for (std::size_t i = 1; i <= kDtopRefineSplit; ++i) {
        const double k = i == kDtopRefineSplit ? kb : ka + (kb - ka) * static_cast<double>(i) / kDtopRefineSplit;
        const double p = i == kDtopRefineSplit ? pb : phase_at(k);
        const double inc = wrap_increment(p - prev_p);
        if (std::abs(inc) > kMaxPhaseStep) {
            if (level >= kDtopRefineLevels) {
                std::ostringstream os;
                os << "DTOP: unresolved phase jump near k=" << 0.5 * (prev_k + k);
                throw PhysicsError(ErrorKind::insufficient_resolution, os.str());
            }
            total += refine_increment(phase_at, prev_k, k, prev_p, p, level + 1);
        } else {
            total += inc;
        }
        prev_k = k;
        prev_p = p;
    }
    return total;
}

}  // namespace detail

/// (1/2pi) times the accumulated unwrapped change of phase_at(k) over
/// [ka, kb] sampled at n points, with local refinement of large increments.
template <class PhaseAt>
double phase_winding(PhaseAt&& phase_at, double ka, double kb, std::size_t n,
                     const std::vector<double>* precomputed = nullptr) {
    if (n < 2) throw std::invalid_argument("phase_winding: need at least two sample points");
    std::vector<double> ph(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double k = ka + (kb - ka) * static_cast<double>(i) / static_cast<double>(n - 1);
        ph[i] = precomputed != nullptr ? (*precomputed)[i] : phase_at(k);
    }
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double inc = detail::wrap_increment(ph[i + 1] - ph[i]);
        if (std::abs(inc) > detail::kMaxPhaseStep) {
            const double k0 = ka + (kb - ka) * static_cast<double>(i) / static_cast<double>(n - 1);
            const double k1 = ka + (kb - ka) * static_cast<double>(i + 1) / static_cast<double>(n - 1);
            total += detail::refine_increment(phase_at, k0, k1, ph[i], ph[i + 1], 1);
        } else {
            total += inc;
        }
    }
    return total / kTwoPi;
}

/// nu^m(t) for one segment (1-based m).
inline double dtop(const QuenchSpec& spec, const FixedPointSet& fps, std::size_t m, double t,
                   std::size_t subgrid = kDefaultDtopSubgrid) {
    const auto segs = segments(fps);
    if (m < 1 || m > segs.size()) throw std::out_of_range("dtop: segment index out of range");
    const auto kets = initial_kets(spec);
    const auto& seg = segs[m - 1];
    return phase_winding([&](double k) { return pgp(spec, sector(spec, kets, k), t); }, seg.k_begin, seg.k_end,
                         subgrid);
}

struct DtopTrace {
    std::size_t m = 1;
    double k_begin = 0.0;
    double k_end = 0.0;
    std::vector<double> times;
    std::vector<double> values;  // NaN where the phase could not be resolved
    bool quantized = false;
};

inline bool dtop_quantized(const QuenchSpec& spec, const MomentumGrid& grid) {
    if (spec.regime == Regime::unitary_pure) return true;
    if (spec.regime == Regime::nonunitary_pure)
        return pt_classify(spec.final_angles, spec.loss, grid).status == PtStatus::unbroken;
    return false;
}

/// DTOP traces for every segment on the given times. Sector data on the
/// sub-grid is computed once; times are processed in parallel.
inline std::vector<DtopTrace> dtop_traces(const QuenchSpec& spec, const FixedPointSet& fps,
                                          const std::vector<double>& times, std::size_t subgrid = kDefaultDtopSubgrid,
                                          std::size_t threads = 1) {
    const auto kets = initial_kets(spec);
    const bool quantized = dtop_quantized(spec, MomentumGrid(256));
    std::vector<DtopTrace> out;
    for (const auto& seg : segments(fps)) {
        DtopTrace tr;
        tr.m = seg.m;
        tr.k_begin = seg.k_begin;
        tr.k_end = seg.k_end;
        tr.times = times;
        tr.quantized = quantized;
        tr.values.assign(times.size(), std::numeric_limits<double>::quiet_NaN());
        std::vector<SectorData> sectors(subgrid);
        parallel_for(subgrid, threads, [&](std::size_t i) {
            const double k = seg.k_begin + (seg.k_end - seg.k_begin) * static_cast<double>(i) / static_cast<double>(subgrid - 1);
            sectors[i] = sector(spec, kets, k);
        });
        parallel_for(times.size(), threads, [&](std::size_t ti) {
            const double t = times[ti];
            try {
                std::vector<double> ph(subgrid);
                for (std::size_t i = 0; i < subgrid; ++i) ph[i] = pgp(spec, sectors[i], t);
                tr.values[ti] = phase_winding([&](double k) { return pgp(spec, sector(spec, kets, k), t); },
                                              seg.k_begin, seg.k_end, subgrid, &ph);
            } catch (const PhysicsError& e) {
                if (e.kind() != ErrorKind::ill_defined_phase && e.kind() != ErrorKind::insufficient_resolution) throw;
            }
        });
        out.push_back(std::move(tr));
    }
    return out;
}

// ---------------------------------------------------------------- detection

struct DqptEvent {
    double t_c = 0.0;
    bool predicted = true;
    bool g_minimum = false;
    bool rate_spike = false;
    bool dtop_jump = false;

    int signals_agreeing() const { return int(g_minimum) + int(rate_spike) + int(dtop_jump); }
    bool detected() const { return signals_agreeing() > 0; }
};

struct DqptReport {
    std::vector<DqptEvent> events;
    std::vector<double> g_minima;
    std::vector<double> rate_spikes;
    std::vector<double> dtop_jumps;

    std::vector<double> detected_times() const {
        std::vector<double> t;
        for (const auto& e : events)
            if (e.detected()) t.push_back(e.t_c);
        return t;
    }
};

namespace detail {

/// Merge times closer than `window`, keeping the first of each cluster.
inline std::vector<double> cluster(std::vector<double> ts, double window) {
    std::sort(ts.begin(), ts.end());
    std::vector<double> out;
    for (double t : ts)
        if (out.empty() || t - out.back() > window) out.push_back(t);
    return out;
}

inline bool near_any(const std::vector<double>& ts, double t, double window) {
    return std::any_of(ts.begin(), ts.end(), [&](double x) { return std::abs(x - t) <= window + 1e-12; });
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

}  // namespace detail

/// Threshold on min_k |G(k, t)| below which a local minimum in t counts as a
/// Fisher zero crossing the real time axis.
inline double zero_threshold(const MomentumGrid& grid) { return 0.02 + 2.0 * grid.spacing(); }

/// Times where min_k |G| is below zero_threshold and minimal within
/// +/- window. The window absorbs the jitter of the zero line between k-grid
/// points.
inline std::vector<double> loschmidt_minima(const LoschmidtField& f, double window = tol::kCriticalTimeWindow) {
    const std::size_t nt = f.times.size(), nk = f.grid.size();
    std::vector<double> m(nt, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < nt; ++i)
        for (std::size_t j = 0; j < nk; ++j) m[i] = std::min(m[i], std::abs(f(i, j)));
    const double thr = zero_threshold(f.grid);
    std::vector<double> out;
    for (std::size_t i = 1; i + 1 < nt; ++i) {
        if (!(m[i] < thr)) continue;
        bool is_min = true;
        for (std::size_t q = 0; q < nt && is_min; ++q)
            if (q != i && std::abs(f.times[q] - f.times[i]) <= window && m[q] < m[i]) is_min = false;
        if (is_min) out.push_back(f.times[i]);
    }
    return out;
}

inline constexpr std::size_t kSpikeMedianHalfWidth = 50;

/// Times where the absolute second difference of g is a local peak exceeding
/// `factor` times its median over the surrounding +/- half_width samples, or
/// where g is infinite. Candidates closer than `merge` form one kink, reported
/// at its largest second difference.
inline std::vector<double> rate_spikes(const std::vector<double>& times, const std::vector<double>& g,
                                       double factor = 10.0, std::size_t half_width = kSpikeMedianHalfWidth,
                                       double merge = 2.0 * tol::kCriticalTimeWindow) {
    const std::size_t n = g.size();
    std::vector<double> out;
    if (n < 3) return out;
    std::vector<double> d2(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) d2[i] = std::abs(g[i + 1] - 2.0 * g[i] + g[i - 1]);
    d2[0] = d2[1];
    d2[n - 1] = d2[n - 2];
    std::vector<std::size_t> cand;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!std::isfinite(g[i])) {
            cand.push_back(i);
            continue;
        }
        if (!std::isfinite(d2[i])) continue;
        if (!(d2[i] >= d2[i - 1] && d2[i] >= d2[i + 1]) || d2[i] <= 1e-12) continue;
        const std::size_t lo = i > half_width ? i - half_width : 0;
        const std::size_t hi = std::min(n - 1, i + half_width);
        std::vector<double> local;
        for (std::size_t q = lo; q <= hi; ++q)
            if (std::isfinite(d2[q])) local.push_back(d2[q]);
        if (d2[i] > factor * detail::median(local)) cand.push_back(i);
    }
    auto strength = [&](std::size_t i) {
        return std::isfinite(g[i]) ? d2[i] : std::numeric_limits<double>::infinity();
    };
    for (std::size_t c = 0; c < cand.size();) {
        std::size_t best = cand[c], e = c + 1;
        while (e < cand.size() && times[cand[e]] - times[cand[e - 1]] <= merge) {
            if (strength(cand[e]) > strength(best)) best = cand[e];
            ++e;
        }
        out.push_back(times[best]);
        c = e;
    }
    return out;
}

/// Midpoints between consecutive resolved samples whose values differ by
/// more than one half.
inline std::vector<double> dtop_jumps(const DtopTrace& tr) {
    std::vector<double> out;
    std::optional<std::size_t> prev;
    for (std::size_t i = 0; i < tr.values.size(); ++i) {
        if (!std::isfinite(tr.values[i])) continue;
        if (prev && std::abs(tr.values[i] - tr.values[*prev]) > 0.5)
            out.push_back(0.5 * (tr.times[i] + tr.times[*prev]));
        prev = i;
    }
    return out;
}

/// Reconciles |G| minima, rate-function spikes and DTOP jumps with the
/// predicted critical times. Observed signals that match no prediction are
/// reported as unpredicted events.
inline DqptReport detect_dqpt(const LoschmidtField& field, const CriticalSet& critical,
                              const std::vector<DtopTrace>& traces = {}, double window = tol::kCriticalTimeWindow) {
    DqptReport r;
    r.g_minima = detail::cluster(loschmidt_minima(field), window);
    r.rate_spikes = detail::cluster(rate_spikes(field.times, rate_function(field)), window);
    std::vector<double> jumps;
    for (const auto& tr : traces) {
        const auto j = dtop_jumps(tr);
        jumps.insert(jumps.end(), j.begin(), j.end());
    }
    r.dtop_jumps = detail::cluster(jumps, window);
    const double t_lo = field.times.empty() ? 0.0 : field.times.front();
    const double t_hi = field.times.empty() ? 0.0 : field.times.back();
    for (double tc : critical.critical_times) {
        if (tc < t_lo || tc > t_hi) continue;
        DqptEvent e;
        e.t_c = tc;
        e.g_minimum = detail::near_any(r.g_minima, tc, window);
        e.rate_spike = detail::near_any(r.rate_spikes, tc, window);
        e.dtop_jump = detail::near_any(r.dtop_jumps, tc, window);
        r.events.push_back(e);
    }
    std::vector<double> stray;
    for (const auto* list : {&r.g_minima, &r.rate_spikes, &r.dtop_jumps})
        for (double t : *list)
            if (!detail::near_any(critical.critical_times, t, window)) stray.push_back(t);
    for (double t : detail::cluster(stray, window)) {
        DqptEvent e;
        e.t_c = t;
        e.predicted = false;
        e.g_minimum = detail::near_any(r.g_minima, t, window);
        e.rate_spike = detail::near_any(r.rate_spikes, t, window);
        e.dtop_jump = detail::near_any(r.dtop_jumps, t, window);
        r.events.push_back(e);
    }
    std::sort(r.events.begin(), r.events.end(), [](const auto& a, const auto& b) { return a.t_c < b.t_c; });
    return r;
}

// ---------------------------------------------------------------- full analysis

struct AnalysisOptions {
    std::size_t kpoints = 2048;
    double t_max = 7.0;
    double dt = 0.01;
    std::size_t dtop_subgrid = kDefaultDtopSubgrid;
    std::size_t threads = 1;
};

struct AnalysisReport {
    QuenchSpec spec;
    AnalysisOptions options;
    PtClassification pt;
    std::optional<int> winding_initial;
    std::optional<int> winding_final;
    FixedPointSet fixed_points;
    CriticalSet critical;
    std::vector<double> times;
    std::vector<double> rate;
    std::vector<DtopTrace> dtop_traces;
    DqptReport dqpt;
    std::vector<std::string> notes;
};

namespace detail {

inline std::optional<int> winding_for(const CoinAngles& a, double loss, const MomentumGrid& grid) {
    try {
        if (loss == 0.0) return winding_unitary(a, grid);
        if (pt_classify(a, loss, grid).status == PtStatus::unbroken) return winding_global_berry(a, loss, grid);
        return winding_vartheta(a, loss, grid);
    } catch (const PhysicsError&) {
        return std::nullopt;
    }
}

}  // namespace detail

inline AnalysisReport run_analysis(const QuenchSpec& spec, const AnalysisOptions& opt = {}) {
    spec.validate();
    AnalysisReport r;
    r.spec = spec;
    r.options = opt;
    const MomentumGrid grid(opt.kpoints);
    r.pt = pt_classify(spec.final_angles, spec.loss, grid);
    r.winding_initial = detail::winding_for(spec.initial_angles, spec.loss, grid);
    r.winding_final = detail::winding_for(spec.final_angles, spec.loss, grid);
    const TimeGrid tg(opt.t_max, opt.dt);
    r.times = tg.samples();
    const auto field = loschmidt_field(spec, grid, r.times, opt.threads);
    r.rate = rate_function(field);
    try {
        r.fixed_points = find_fixed_points(spec, grid);
    } catch (const PhysicsError& e) {
        if (e.kind() != ErrorKind::trivial_quench) throw;
        r.notes.emplace_back(e.what());
    }
    if (!r.fixed_points.diagnostic.empty()) r.notes.push_back(r.fixed_points.diagnostic);
    r.critical = find_critical(spec, r.fixed_points, grid, opt.t_max);
    if (r.pt.status != PtStatus::broken) {
        r.dtop_traces = dtop_traces(spec, r.fixed_points, r.times, opt.dtop_subgrid, opt.threads);
    } else {
        r.notes.emplace_back("DTOP not evaluated: dynamic phase undefined in PT-broken sectors");
    }
    r.dqpt = detect_dqpt(field, r.critical, r.dtop_traces);
    return r;
}

// ---------------------------------------------------------------- output

namespace detail {

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace detail

inline nlohmann::json to_json(const AnalysisReport& r) {
    using nlohmann::json;
    json j;
    j["regime"] = std::string(to_string(r.spec.regime));
    j["pt_status"] = std::string(to_string(r.pt.status));
    j["max_d0_sq"] = r.pt.max_d0_sq;
    j["winding_initial"] = r.winding_initial ? json(*r.winding_initial) : json(nullptr);
    j["winding_final"] = r.winding_final ? json(*r.winding_final) : json(nullptr);
    j["fixed_points"] = json::array();
    for (const auto& p : r.fixed_points.points)
        j["fixed_points"].push_back({{"k", p.k}, {"k_over_pi", p.k / kPi}, {"kind", std::string(to_string(p.kind))},
                                     {"residual", p.residual}});
    j["critical_momenta"] = json::array();
    for (const auto& c : r.critical.entries)
        j["critical_momenta"].push_back({{"k", c.k}, {"k_over_pi", c.k / kPi}, {"t0", c.t0}, {"segment", c.segment}});
    j["time_scales"] = r.critical.time_scales;
    j["critical_times"] = r.critical.critical_times;
    j["dtop_traces"] = json::array();
    for (const auto& tr : r.dtop_traces) {
        json values = json::array();
        for (double v : tr.values) values.push_back(detail::finite_or_null(v));
        j["dtop_traces"].push_back({{"m", tr.m}, {"k_begin", tr.k_begin}, {"k_end", tr.k_end},
                                    {"quantized", tr.quantized}, {"t", tr.times}, {"value", values}});
    }
    j["rate_function"] = json::array();
    for (std::size_t i = 0; i < r.times.size(); ++i)
        j["rate_function"].push_back({{"t", r.times[i]}, {"g", detail::finite_or_null(r.rate[i])}});
    j["dqpt_events"] = json::array();
    for (const auto& e : r.dqpt.events)
        j["dqpt_events"].push_back({{"t_c", e.t_c},
                                    {"predicted", e.predicted},
                                    {"signals_agreeing", e.signals_agreeing()},
                                    {"loschmidt_minimum", e.g_minimum},
                                    {"rate_spike", e.rate_spike},
                                    {"dtop_jump", e.dtop_jump}});
    j["notes"] = r.notes;
    return j;
}

inline void write_rate_csv(std::ostream& os, const std::vector<double>& times, const std::vector<double>& g) {
    os << "t,g\n" << std::setprecision(12);
    for (std::size_t i = 0; i < times.size(); ++i) os << times[i] << ',' << g[i] << '\n';
}

inline void write_dtop_csv(std::ostream& os, const std::vector<DtopTrace>& traces) {
    os << "m,t,value\n" << std::setprecision(12);
    for (const auto& tr : traces)
        for (std::size_t i = 0; i < tr.times.size(); ++i) os << tr.m << ',' << tr.times[i] << ',' << tr.values[i] << '\n';
}

inline void write_fixed_points_csv(std::ostream& os, const FixedPointSet& fps) {
    os << "k,k_over_pi,kind,residual\n" << std::setprecision(12);
    for (const auto& p : fps.points) os << p.k << ',' << p.k / kPi << ',' << to_string(p.kind) << ',' << p.residual << '\n';
}

inline void write_critical_csv(std::ostream& os, const CriticalSet& cs) {
    os << "k_c,k_c_over_pi,t0,segment\n" << std::setprecision(12);
    for (const auto& c : cs.entries) os << c.k << ',' << c.k / kPi << ',' << c.t0 << ',' << c.segment << '\n';
}

}  // namespace qwdqpt
