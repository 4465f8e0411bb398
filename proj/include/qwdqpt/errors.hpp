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

#include <stdexcept>
#include <string>
#include <string_view>

namespace qwdqpt {

/// Physics-layer failure categories. Each maps onto a distinct condition in
/// the walk model (spectral degeneracy, PT breaking, numerical resolution).
enum class ErrorKind {
    degenerate_spectrum,
    topological_boundary,
    insufficient_resolution,
    pt_broken,
    invalid_initial_protocol,
    trivial_quench,
    ill_defined_phase,
    undefined_dynamic_phase,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::degenerate_spectrum: return "degenerate_spectrum";
        case ErrorKind::topological_boundary: return "topological_boundary";
        case ErrorKind::insufficient_resolution: return "insufficient_resolution";
        case ErrorKind::pt_broken: return "pt_broken";
        case ErrorKind::invalid_initial_protocol: return "invalid_initial_protocol";
        case ErrorKind::trivial_quench: return "trivial_quench";
        case ErrorKind::ill_defined_phase: return "ill_defined_phase";
        case ErrorKind::undefined_dynamic_phase: return "undefined_dynamic_phase";
    }
    return "unknown";
}

class PhysicsError : public std::runtime_error {
public:
    PhysicsError(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace qwdqpt
