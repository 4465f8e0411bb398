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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "qwdqpt/analysis.hpp"

namespace qwdqpt {
namespace {

const CoinAngles kInitial{kPi / 4, -kPi / 2};

QuenchSpec fig2a(double p = 1.0) { return QuenchSpec::make(kInitial, {-kPi / 2, 3 * kPi / 8}, p); }
QuenchSpec fig2b() { return QuenchSpec::make(kInitial, {-kPi / 2, kPi / 4}); }
QuenchSpec fig3() { return QuenchSpec::make(kInitial, {-kPi / 16, -3 * kPi / 16}); }
QuenchSpec fig4a() { return QuenchSpec::make(kInitial, {-kPi / 3, kPi / 5}, 1.0, 0.36); }
QuenchSpec fig4b() {
    const double xi = std::acos(1.0 / LossParameters::from_loss(0.36).alpha);
    return QuenchSpec::make(kInitial, {-kPi / 2, (kPi - xi) / 2}, 1.0, 0.36);
}

const MomentumGrid kGrid(2048);

double circ(double a, double b) { return std::abs(std::remainder(a - b, kTwoPi)); }

TEST(RateFunction, ZeroAtStartAndForNoQuench) {
    const auto f = loschmidt_field(fig2a(), MomentumGrid(256), TimeGrid(7.0, 0.5).samples());
    EXPECT_NEAR(rate_function(f, 0.0), 0.0, 1e-14);
    const auto same = loschmidt_field(QuenchSpec::make(kInitial, kInitial), MomentumGrid(64), std::vector<double>{0.0, 2.5, 6.0});
    for (double g : rate_function(same)) EXPECT_NEAR(g, 0.0, 1e-12);
    EXPECT_THROW(rate_function(f, 0.25), std::invalid_argument);
}

TEST(RateFunction, KinkAtFirstCriticalTime) {
    // 250 points keeps k_c off the grid so g stays finite.
    const auto f = loschmidt_field(fig2a(), MomentumGrid(250), std::vector<double>{3.5, 4.0, 4.5});
    const auto g = rate_function(f);
    EXPECT_TRUE(std::isfinite(g[1]));
    EXPECT_GT(g[1], g[0]);
    EXPECT_GT(g[1], g[2]);
    // An exact zero on the grid is reported as +infinity.
    LoschmidtField z;
    z.times = {0.0};
    z.values.assign(16, Complex(1.0));
    z.values[3] = 0.0;
    EXPECT_TRUE(std::isinf(rate_function(z)[0]));
}

TEST(DynamicPhase, RegimeFormulas) {
    const auto pure = fig2a();
    const auto kets = initial_kets(pure);
    // c_+ = 0 at k = 0: phase is E t and the PGP vanishes.
    const auto s0 = sector(pure, kets, 0.0);
    for (double t : {0.3, 2.0, 5.5}) {
        EXPECT_NEAR(dynamic_phase(pure, s0, t), s0.eig.quasienergy.real() * t, 1e-12);
        EXPECT_NEAR(pgp(pure, s0, t), 0.0, 1e-12);
    }
    const auto half = fig2a(0.5);
    for (double k : {-1.0, 0.4}) EXPECT_EQ(dynamic_phase(half, k, 3.0), 0.0);
    // p = 1 in the mixed formula equals the pure formula.
    QuenchSpec mixed_one = fig2a();
    mixed_one.regime = Regime::unitary_mixed;
    EXPECT_NEAR(dynamic_phase(mixed_one, 0.7, 2.2), dynamic_phase(pure, 0.7, 2.2), 1e-15);
    EXPECT_NEAR(pgp(pure, 0.8, 0.0), 0.0, 1e-14);
}

TEST(DynamicPhase, PtBrokenThrows) {
    try {
        dynamic_phase(fig4b(), 0.3, 1.0);
        FAIL();
    } catch (const PhysicsError& e) {
        EXPECT_EQ(e.kind(), ErrorKind::undefined_dynamic_phase);
    }
}

TEST(Pgp, IllDefinedAtFisherZero) {
    try {
        pgp(fig2a(), kPi / 4, 4.0);
        FAIL();
    } catch (const PhysicsError& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ill_defined_phase);
    }
}

TEST(FixedPoints, UnitaryQuench) {
    const auto fps = find_fixed_points(fig2a(), kGrid);
    ASSERT_EQ(fps.points.size(), 4u);
    // The zone-edge point refines to just above -pi and sorts first.
    const double expect[] = {-kPi, -kPi / 2, 0.0, kPi / 2};
    const FixedPointKind kinds[] = {FixedPointKind::c_plus_zero, FixedPointKind::c_minus_zero,
                                    FixedPointKind::c_plus_zero, FixedPointKind::c_minus_zero};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_LT(circ(fps.points[i].k, expect[i]), 1e-9);
        EXPECT_EQ(fps.points[i].kind, kinds[i]);
        EXPECT_LT(fps.points[i].residual, 1e-8);
    }
}

TEST(FixedPoints, NonunitaryQuenchMatchesCaption) {
    const auto fps = find_fixed_points(fig4a(), kGrid);
    ASSERT_EQ(fps.points.size(), 4u);
    // -1.0094 pi is reported as 0.9906 pi.
    const double expect[] = {-0.4470, -0.0094, 0.5530, 0.9906};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(fps.points[i].k / kPi, expect[i], 1e-3);
    EXPECT_GE(fps.count(FixedPointKind::c_plus_zero), 2u);
    EXPECT_GE(fps.count(FixedPointKind::c_minus_zero), 2u);
}

TEST(FixedPoints, PtBrokenEmptyAndTrivialThrows) {
    const auto fps = find_fixed_points(fig4b(), kGrid);
    EXPECT_TRUE(fps.points.empty());
    EXPECT_NE(fps.diagnostic.find("PT-broken"), std::string::npos);
    try {
        find_fixed_points(QuenchSpec::make(kInitial, kInitial), MomentumGrid(64));
        FAIL();
    } catch (const PhysicsError& e) {
        EXPECT_EQ(e.kind(), ErrorKind::trivial_quench);
    }
}

TEST(Critical, UnitaryPresets) {
    const auto cs = find_critical(fig2a(), find_fixed_points(fig2a(), kGrid), kGrid);
    ASSERT_EQ(cs.momenta.size(), 4u);
    const double expect[] = {-0.75, -0.25, 0.25, 0.75};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(cs.momenta[i] / kPi, expect[i], 1e-9);
    ASSERT_EQ(cs.time_scales.size(), 1u);
    EXPECT_NEAR(cs.time_scales[0], 4.0, 1e-9);
    ASSERT_EQ(cs.critical_times.size(), 1u);
    const auto cb = find_critical(fig2b(), find_fixed_points(fig2b(), kGrid), kGrid);
    ASSERT_EQ(cb.time_scales.size(), 1u);
    EXPECT_NEAR(cb.time_scales[0], 2.0, 1e-9);
    ASSERT_EQ(cb.critical_times.size(), 2u);
    EXPECT_NEAR(cb.critical_times[0], 2.0, 1e-9);
    EXPECT_NEAR(cb.critical_times[1], 6.0, 1e-9);
}

TEST(Critical, TwoTimeScalesAlternate) {
    const auto fps = find_fixed_points(fig4a(), kGrid);
    const auto cs = find_critical(fig4a(), fps, kGrid);
    ASSERT_EQ(cs.momenta.size(), 4u);
    const double expect[] = {-0.7888, -0.1534, 0.2112, 0.8466};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(cs.momenta[i] / kPi, expect[i], 1e-3);
    ASSERT_EQ(cs.time_scales.size(), 2u);
    EXPECT_NEAR(cs.time_scales[0], 1.7183, 1e-3);
    EXPECT_NEAR(cs.time_scales[1], 2.1482, 1e-3);
    // Adjacent segments carry different time scales.
    std::vector<double> by_segment(5, 0.0);
    for (const auto& e : cs.entries) by_segment[e.segment] = e.t0;
    for (std::size_t m = 1; m <= 4; ++m) EXPECT_GT(std::abs(by_segment[m] - by_segment[m % 4 + 1]), 0.1);
    for (const auto& e : cs.entries) {
        const auto segs = segments(fps);
        EXPECT_TRUE(segs[e.segment - 1].contains(e.k));
        EXPECT_NE(segs[e.segment - 1].kind_begin, segs[e.segment - 1].kind_end);
    }
}

TEST(Dtop, TrivialQuenchStaysZero) {
    const auto spec = fig3();
    const auto fps = find_fixed_points(spec, kGrid);
    const auto traces = dtop_traces(spec, fps, TimeGrid(7.0, 0.05).samples(), 256);
    ASSERT_FALSE(traces.empty());
    for (const auto& tr : traces)
        for (double v : tr.values) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(Dtop, Fig2aAntisymmetryAndUnitJump) {
    const auto spec = fig2a();
    const auto fps = find_fixed_points(spec, kGrid);
    const auto traces = dtop_traces(spec, fps, TimeGrid(7.0, 0.01).samples());
    ASSERT_EQ(traces.size(), 4u);
    for (std::size_t i = 0; i < traces[0].values.size(); ++i) {
        if (!std::isfinite(traces[0].values[i])) continue;
        EXPECT_NEAR(traces[0].values[i], -traces[1].values[i], 1e-6);
        EXPECT_NEAR(traces[2].values[i], -traces[3].values[i], 1e-6);
    }
    EXPECT_NEAR(std::abs(dtop(spec, fps, 1, 4.2) - dtop(spec, fps, 1, 3.8)), 1.0, 1e-9);
    for (const auto& tr : traces) {
        EXPECT_TRUE(tr.quantized);
        for (std::size_t i = 0; i < tr.times.size(); ++i)
            if (std::abs(tr.times[i] - 4.0) > 0.05) { EXPECT_NEAR(tr.values[i], std::round(tr.values[i]), 1e-3); }
    }
}

TEST(Dtop, JumpsOnlyAtCriticalTimesOfOwnSegment) {
    const auto spec = fig4a();
    const auto fps = find_fixed_points(spec, kGrid);
    const auto cs = find_critical(spec, fps, kGrid);
    const auto traces = dtop_traces(spec, fps, TimeGrid(7.0, 0.01).samples());
    for (const auto& tr : traces) {
        std::vector<double> expected;
        for (const auto& e : cs.entries)
            if (e.segment == tr.m)
                for (int n = 1; (2 * n - 1) * e.t0 <= 7.0; ++n) expected.push_back((2 * n - 1) * e.t0);
        const auto jumps = dtop_jumps(tr);
        ASSERT_EQ(jumps.size(), expected.size()) << "segment " << tr.m;
        std::sort(expected.begin(), expected.end());
        for (std::size_t i = 0; i < jumps.size(); ++i) EXPECT_NEAR(jumps[i], expected[i], 0.05);
    }
}

TEST(Dtop, SubgridDoublingInvariant) {
    const auto spec = fig4a();
    const auto fps = find_fixed_points(spec, kGrid);
    for (std::size_t m = 1; m <= 4; ++m)
        for (double t : {0.9, 3.0, 4.4}) EXPECT_NEAR(dtop(spec, fps, m, t, 512), dtop(spec, fps, m, t, 1024), 1e-6);
}

TEST(Dtop, MixedStatesNotQuantized) {
    for (double p : {0.7, 0.9}) {
        const auto spec = fig2a(p);
        const auto fps = find_fixed_points(spec, kGrid);
        const auto traces = dtop_traces(spec, fps, TimeGrid(7.0, 0.05).samples(), 256);
        double worst = 0.0;
        for (const auto& tr : traces) {
            EXPECT_FALSE(tr.quantized);
            for (double v : tr.values)
                if (std::isfinite(v)) worst = std::max(worst, std::abs(v - std::round(v)));
        }
        EXPECT_GT(worst, 0.05) << "p=" << p;
    }
}

TEST(Detect, Presets) {
    AnalysisOptions opt;
    const auto a = run_analysis(fig2a(), opt);
    const auto times = a.dqpt.detected_times();
    ASSERT_FALSE(times.empty());
    EXPECT_NEAR(times.front(), 4.0, 0.05);
    for (const auto& e : a.dqpt.events) {
        EXPECT_TRUE(e.predicted);
        EXPECT_EQ(e.signals_agreeing(), 3);
    }
    const auto b = run_analysis(fig4b(), opt);
    EXPECT_TRUE(b.dqpt.detected_times().empty());
    EXPECT_TRUE(b.dqpt.rate_spikes.empty());
    const auto m = run_analysis(fig2a(0.9), opt);
    EXPECT_EQ(m.dqpt.detected_times(), times);
    const auto c = run_analysis(fig3(), opt);
    EXPECT_TRUE(c.dqpt.events.empty());
}

TEST(Detect, KinksCoincideWithJumps) {
    const auto r = run_analysis(fig4a());
    EXPECT_EQ(r.dqpt.events.size(), 4u);
    for (double s : r.dqpt.rate_spikes) {
        const bool near = std::any_of(r.dqpt.dtop_jumps.begin(), r.dqpt.dtop_jumps.end(),
                                      [&](double j) { return std::abs(j - s) <= 0.05; });
        EXPECT_TRUE(near) << s;
    }
}

TEST(Report, JsonAndCsv) {
    AnalysisOptions opt;
    opt.kpoints = 256;
    opt.dt = 0.05;
    opt.dtop_subgrid = 128;
    const auto r = run_analysis(fig2a(), opt);
    const auto j = to_json(r);
    for (const char* key : {"fixed_points", "critical_momenta", "time_scales", "critical_times", "dtop_traces",
                            "rate_function", "dqpt_events"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_EQ(j["dtop_traces"].size(), 4u);
    EXPECT_EQ(j["dtop_traces"][0]["t"].size(), r.times.size());
    EXPECT_EQ(j["winding_final"], -2);
    std::ostringstream os;
    write_dtop_csv(os, r.dtop_traces);
    EXPECT_EQ(os.str().rfind("m,t,value\n", 0), 0u);
}

}  // namespace
}  // namespace qwdqpt
