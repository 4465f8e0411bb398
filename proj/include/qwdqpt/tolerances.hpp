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

namespace qwdqpt::tol {

// Structural identities: normalization, hermiticity, determinants.
inline constexpr double kStructural = 1e-12;
// Quadrature, root refinement and eigen-decomposition checks.
inline constexpr double kRoot = 1e-10;
// |d0 -/+ 1| below this is treated as a closed gap.
inline constexpr double kGapClosing = 1e-9;
// PT classification band around max_k d0^2 = 1.
inline constexpr double kPtBoundary = 1e-9;
// Closed-form biorthogonal eigenvectors need cos(2 Omega) above this.
inline constexpr double kClosedFormCos = 1e-6;
// Fixed point acceptance on |c_kind(k_m)|.
inline constexpr double kFixedPoint = 1e-8;
// Winding residual from the nearest integer.
inline constexpr double kWindingResidual = 0.01;
// |G| below this makes the Pancharatnam phase ill-defined.
inline constexpr double kZeroAmplitude = 1e-12;
// Time window around a critical time used when matching DQPT signals.
inline constexpr double kCriticalTimeWindow = 0.05;

}  // namespace qwdqpt::tol
