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

// Quench from a trivial walk into a nu = -2 phase: prints invariants, fixed
// points, critical momenta and the DTOP of the first segment.

#include <cstdio>

#include "qwdqpt/qwdqpt.hpp"

int main() {
    using namespace qwdqpt;
    const auto spec = QuenchSpec::make({kPi / 4, -kPi / 2}, {-kPi / 2, 3 * kPi / 8});
    const MomentumGrid grid(kDefaultInvariantGrid);

    std::printf("winding initial %d final %d\n", winding_unitary(spec.initial_angles, grid),
                winding_unitary(spec.final_angles, grid));

    const auto fps = find_fixed_points(spec, grid);
    for (const auto& f : fps.points) std::printf("fixed point k = %+.6f pi (%s)\n", f.k / kPi, to_string(f.kind).data());

    const auto crit = find_critical(spec, fps, grid);
    for (const auto& c : crit.entries) std::printf("k_c = %+.6f pi  t0 = %.6f\n", c.k / kPi, c.t0);

    const std::vector<double> times{1.0, 3.0, 3.9, 4.1, 5.0, 7.0};
    const auto field = loschmidt_field(spec, grid, times);
    for (std::size_t i = 0; i < times.size(); ++i)
        std::printf("t = %.1f  g = %.5f  nu^1 = %+.4f\n", times[i], rate_function_at(field, i), dtop(spec, fps, 1, times[i]));
    return 0;
}
