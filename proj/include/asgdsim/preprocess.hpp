/* Copyright 2026 The asgdsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "asgdsim/trace_model.hpp"

namespace asgdsim {

/// Linear receiver-side parsing cost: overhead(size) = alpha * size + beta.
/// Platform-global; fit once per cluster, independent of the DNN.
struct OverheadModel {
  double alpha_us_per_byte = 0.0;
  double beta_us = 0.0;

  double overhead_us(std::int64_t size_bytes) const {
    return alpha_us_per_byte * static_cast<double>(size_bytes) + beta_us;
  }
};

struct OverheadFit {
  OverheadModel model;
  bool clamped = false;  // set when the unconstrained fit was negative in alpha or beta
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AlreadySplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-squares line through (size_bytes, latency_us) samples. Requires at
/// least two distinct sizes. Negative slope/intercept are clamped to zero and
/// reported through OverheadFit::clamped.
OverheadFit fit_overhead(const std::vector<std::pair<std::int64_t, double>>& samples);

/// Nominal full-bandwidth transfer time for a whole operation, in integer
/// microseconds, rounded up so nonzero transfers never collapse to zero.
std::int64_t transmission_nominal_us(std::int64_t size_bytes, std::int64_t bandwidth_bps);

/// A simulation-ready operation. Former communication ops become
/// transmissions (size kept, duration derived from the target bandwidth);
/// their parsing overhead becomes a separate computation op on the
/// receiver's compute resource. Edges are index-based and symmetric.
struct SimOp {
  std::string id;
  ResourceKind res;
  bool is_transmission = false;
  std::int64_t size_bytes = 0;       // transmissions only
  double nominal_duration_us = 0.0;  // compute/overhead ops; annotation for transmissions
  std::vector<int> waiting_for;
  std::vector<int> dependents;  // sorted by dependent op id
};

struct SimStep {
  std::vector<SimOp> ops;
  int profile_step_index = 0;
  std::vector<int> source_downlinks;  // ops with empty waiting_for on a downlink, in step order
};

struct SimProfile {
  std::vector<SimStep> steps;
  int num_ps = 1;
  std::int64_t bandwidth_bps = 0;
  std::int64_t win_bytes = 0;
};

/// Rewrites one profiled step for simulation at the target bandwidth:
/// every communication op becomes a transmission followed by its overhead
/// computation on the receiver (worker for downlinks, ps core for uplinks).
/// Zero-duration overheads are elided and their edges contracted.
SimStep split_comm_ops(const Step& step, const OverheadModel& model,
                       std::int64_t target_bandwidth_bps);

/// Splitting an already-split step is rejected, never applied twice.
SimStep split_comm_ops(const SimStep& step, const OverheadModel& model,
                       std::int64_t target_bandwidth_bps);

/// Applies split_comm_ops to every step of a bundle.
SimProfile preprocess_profile(const ProfileBundle& bundle, const OverheadModel& model,
                              std::int64_t target_bandwidth_bps);

}  // namespace asgdsim
