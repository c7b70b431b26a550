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

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace asgdsim {

enum class ResourceType { kDownlink, kWorker, kUplink, kPs };

/// One simulated resource: the worker's compute unit, or a per-server
/// link direction / update core. Links and ps cores carry the index of
/// the parameter server they belong to; the worker resource does not.
struct ResourceKind {
  ResourceType type = ResourceType::kWorker;
  int ps_index = 0;

  static ResourceKind downlink(int ps = 0) { return {ResourceType::kDownlink, ps}; }
  static ResourceKind worker() { return {ResourceType::kWorker, 0}; }
  static ResourceKind uplink(int ps = 0) { return {ResourceType::kUplink, ps}; }
  static ResourceKind ps(int index = 0) { return {ResourceType::kPs, index}; }

  bool is_link() const {
    return type == ResourceType::kDownlink || type == ResourceType::kUplink;
  }
  bool is_compute() const { return !is_link(); }

  friend bool operator==(const ResourceKind&, const ResourceKind&) = default;
  friend auto operator<=>(const ResourceKind&, const ResourceKind&) = default;
};

/// Canonical text form: "downlink:0", "uplink:1", "ps:0", "worker".
std::string to_string(const ResourceKind& res);

/// Parses the canonical form; a bare "downlink"/"uplink"/"ps" means index 0.
/// Throws SchemaError on anything else.
ResourceKind parse_resource(const std::string& text);

enum class OpKind { kCommunication, kComputation };

/// One node of a profiled SGD step. Communication ops carry a byte size,
/// computation ops a duration; dependency edges are kept in both
/// directions (waiting_for / dependent_ops are mutually consistent after
/// load).
struct Operation {
  std::string id;
  ResourceKind res;
  OpKind kind = OpKind::kComputation;
  std::optional<std::int64_t> duration_us;
  std::optional<std::int64_t> size_bytes;
  std::set<std::string> waiting_for;
  std::set<std::string> dependent_ops;
};

/// One profiled SGD iteration: a DAG of operations.
struct Step {
  std::vector<Operation> ops;
  int step_index = 0;

  const Operation* find(const std::string& id) const;
};

/// Profiled steps plus the calibration metadata recorded alongside them.
/// Immutable after load; safe to share read-only across simulation runs.
struct ProfileBundle {
  std::vector<Step> steps;
  std::int64_t profile_bandwidth_bps = 0;
  double alpha_us_per_byte = 0.0;
  double beta_us = 0.0;
  std::int64_t win_bytes = 0;
  int num_ps = 1;
};

/// One invariant breach found by validate_step.
struct Violation {
  std::string op_id;  // empty for step-level rules
  std::string rule;
  std::string detail;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DanglingRefError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CycleError : public std::runtime_error {
 public:
  CycleError(const std::string& message, std::vector<std::string> cycle);
  const std::vector<std::string>& cycle() const { return cycle_; }

 private:
  std::vector<std::string> cycle_;
};

/// Loads and validates a profile from the canonical JSON format.
/// Dependency edges may be written in either direction ("deps" and/or
/// "dependents"); the loader symmetrizes them. Steps must all share one
/// dependency structure.
ProfileBundle load_profile(const std::string& path);

/// Same as load_profile but from an in-memory document.
ProfileBundle parse_profile(const std::string& json_text);

void save_profile(const ProfileBundle& bundle, const std::string& path);
std::string profile_to_json(const ProfileBundle& bundle);

/// Structural validation; returns one record per breached rule instead of
/// throwing. Empty result iff all Step and Operation invariants hold.
std::vector<Violation> validate_step(const Step& step);

}  // namespace asgdsim
