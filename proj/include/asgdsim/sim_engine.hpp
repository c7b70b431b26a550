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
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "asgdsim/link_scheduler.hpp"
#include "asgdsim/preprocess.hpp"
#include "asgdsim/trace_model.hpp"

namespace asgdsim {

/// SplitMix64: tiny splittable generator with a fixed, documented algorithm
/// (Steele, Lea & Flood's mixer). The seed fully determines every draw, on
/// every platform, so simulation runs are reproducible byte for byte.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform draw in [0, n) via 128-bit multiply-shift (no libc distribution
  /// involved, so results are identical across standard libraries).
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  /// Derives an independent stream, e.g. one per worker.
  static SplitMix64 substream(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 mixer(seed ^ (0xA0761D6478BD642Full * (stream + 1)));
    return SplitMix64(mixer.next());
  }

 private:
  std::uint64_t state_;
};

struct ClusterConfig {
  int num_workers = 1;
  int num_ps = 1;  // must equal the profile's num_ps
  std::int64_t bandwidth_bps = 0;
  SchedulerPolicy policy;
  int steps_per_worker = 1000;
  std::uint64_t seed = 0;
};

/// Which workers hold an in-flight chunk on each (direction, ps) link.
struct ActiveSet {
  std::vector<std::set<int>> downlink;  // one entry per ps index
  std::vector<std::set<int>> uplink;

  explicit ActiveSet(int num_ps) : downlink(num_ps), uplink(num_ps) {}

  const std::set<int>& link(ResourceType direction, int ps_index) const {
    return direction == ResourceType::kDownlink ? downlink[ps_index] : uplink[ps_index];
  }
  std::set<int>& link(ResourceType direction, int ps_index) {
    return direction == ResourceType::kDownlink ? downlink[ps_index] : uplink[ps_index];
  }
};

/// Single-parameter-server sharing: links split equally among active
/// workers; worker and ps compute resources are private, share 1.
double share(const ResourceKind& res, const ActiveSet& active, int worker);

/// Two-parameter-server sharing: each PS link splits equally among its own
/// active workers, but a worker active on both PS links in one direction is
/// limited by its own capacity: if its two base shares exceed 1, the larger
/// one is capped at 1 minus the smaller (ties cap the higher ps index).
double share_two_ps(int worker, int ps_index, ResourceType direction, const ActiveSet& active);

struct TraceEvent {
  int worker = 0;
  ResourceKind res;
  std::string op;
  double start_us = 0.0;
  double duration_us = 0.0;
  int step_ordinal = 0;  // 1-based per-worker step this chunk belongs to

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct StepCompletion {
  int worker = 0;
  int ordinal = 0;  // 1-based
  double completion_us = 0.0;
  int profile_step = 0;  // which profiled step was sampled

  friend bool operator==(const StepCompletion&, const StepCompletion&) = default;
};

/// Timestamped per-worker, per-resource execution segments (one per chunk)
/// plus per-worker step completion times.
struct SyntheticTrace {
  std::vector<TraceEvent> events;
  std::vector<StepCompletion> step_completions;

  friend bool operator==(const SyntheticTrace&, const SyntheticTrace&) = default;
};

/// Optional per-run accounting, filled when a SimAudit is passed to
/// generate_trace: bandwidth-share sums per link at every event, and
/// integrated work per chunk against its nominal duration.
struct ShareSample {
  double t_us = 0.0;
  ResourceType direction = ResourceType::kDownlink;
  int ps_index = 0;
  int active_workers = 0;
  double share_sum = 0.0;
};

struct ChunkWork {
  std::string op;
  int worker = 0;
  double nominal_us = 0.0;
  double integrated_us = 0.0;
};

struct SimAudit {
  std::vector<ShareSample> share_samples;
  std::vector<ChunkWork> chunk_work;
};

class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the discrete-event loop: every worker repeatedly samples a profiled
/// step (uniformly, with replacement, from its own seeded stream), streams
/// its operations through per-(worker, resource) schedulers, and advances one
/// chunk completion at a time, stretching in-flight chunks by the bandwidth
/// share in effect between events. Records W x steps_per_worker completions.
/// Throws DeadlockError if work remains but nothing can run.
SyntheticTrace generate_trace(const SimProfile& profile, const ClusterConfig& config,
                              SimAudit* audit = nullptr);

/// Greedy layer placement: each layer goes to the server currently holding
/// the smallest total size, ties to the lower index.
std::vector<int> partition_parameters(const std::vector<std::int64_t>& layer_sizes, int num_ps);

}  // namespace asgdsim
