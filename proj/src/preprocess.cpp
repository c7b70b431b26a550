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

#include "asgdsim/preprocess.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace asgdsim {

OverheadFit fit_overhead(const std::vector<std::pair<std::int64_t, double>>& samples) {
  std::set<std::int64_t> distinct;
  for (const auto& [size, _] : samples) distinct.insert(size);
  if (distinct.size() < 2) {
    throw InsufficientDataError("overhead fit needs at least 2 samples with distinct sizes, got " +
                                std::to_string(distinct.size()));
  }

  // Centered least squares keeps the sums well conditioned for large sizes.
  const double n = static_cast<double>(samples.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& [x, y] : samples) {
    mean_x += static_cast<double>(x);
    mean_y += y;
  }
  mean_x /= n;
  mean_y /= n;

  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : samples) {
    const double dx = static_cast<double>(x) - mean_x;
    sxx += dx * dx;
    sxy += dx * (y - mean_y);
  }

  OverheadFit fit;
  fit.model.alpha_us_per_byte = sxy / sxx;
  fit.model.beta_us = mean_y - fit.model.alpha_us_per_byte * mean_x;
  if (fit.model.alpha_us_per_byte < 0.0) {
    fit.model.alpha_us_per_byte = 0.0;
    fit.clamped = true;
  }
  if (fit.model.beta_us < 0.0) {
    fit.model.beta_us = 0.0;
    fit.clamped = true;
  }
  return fit;
}

std::int64_t transmission_nominal_us(std::int64_t size_bytes, std::int64_t bandwidth_bps) {
  if (bandwidth_bps <= 0) throw std::invalid_argument("bandwidth must be > 0");
  if (size_bytes < 0) throw std::invalid_argument("size must be >= 0");
  const auto bits_us = static_cast<unsigned __int128>(size_bytes) * 8u * 1000000u;
  const auto b = static_cast<unsigned __int128>(bandwidth_bps);
  return static_cast<std::int64_t>((bits_us + b - 1) / b);
}

namespace {

std::string violations_message(const std::vector<Violation>& violations) {
  std::ostringstream out;
  out << "step fails validation:";
  for (const auto& v : violations) out << " [" << v.rule << " op=" << v.op_id << "]";
  return out.str();
}

void sort_dependents_by_id(SimStep& step) {
  for (auto& op : step.ops) {
    std::sort(op.dependents.begin(), op.dependents.end(),
              [&](int a, int b) { return step.ops[a].id < step.ops[b].id; });
    std::sort(op.waiting_for.begin(), op.waiting_for.end());
  }
}

}  // namespace

SimStep split_comm_ops(const Step& step, const OverheadModel& model,
                       std::int64_t target_bandwidth_bps) {
  if (target_bandwidth_bps <= 0) throw std::invalid_argument("target bandwidth must be > 0");
  if (auto violations = validate_step(step); !violations.empty()) {
    throw std::invalid_argument(violations_message(violations));
  }

  SimStep out;
  out.profile_step_index = step.step_index;

  // Pass 1: main op per original op (transmission for comm, compute otherwise).
  std::unordered_map<std::string, int> main_index;
  std::unordered_map<std::string, int> exit_index;  // node former dependents should hang off
  for (const auto& op : step.ops) {
    SimOp sim;
    sim.id = op.id;
    sim.res = op.res;
    if (op.kind == OpKind::kCommunication) {
      sim.is_transmission = true;
      sim.size_bytes = op.size_bytes.value_or(0);
      sim.nominal_duration_us =
          static_cast<double>(transmission_nominal_us(sim.size_bytes, target_bandwidth_bps));
    } else {
      sim.nominal_duration_us = static_cast<double>(op.duration_us.value_or(0));
    }
    main_index[op.id] = static_cast<int>(out.ops.size());
    exit_index[op.id] = main_index[op.id];
    out.ops.push_back(std::move(sim));
  }

  // Pass 2: receiver-side overhead nodes, serialized after each transmission.
  for (const auto& op : step.ops) {
    if (op.kind != OpKind::kCommunication) continue;
    const double overhead = model.overhead_us(op.size_bytes.value_or(0));
    if (overhead <= 0.0) continue;  // elide, edges contract to the transmission

    SimOp ovh;
    ovh.id = op.id + "#ovh";
    if (main_index.count(ovh.id)) {
      throw std::invalid_argument("op id '" + ovh.id + "' collides with a derived overhead op");
    }
    ovh.res = op.res.type == ResourceType::kDownlink ? ResourceKind::worker()
                                                     : ResourceKind::ps(op.res.ps_index);
    ovh.nominal_duration_us = overhead;
    const int tx = main_index[op.id];
    const int idx = static_cast<int>(out.ops.size());
    ovh.waiting_for.push_back(tx);
    out.ops.push_back(std::move(ovh));
    out.ops[tx].dependents.push_back(idx);
    exit_index[op.id] = idx;
  }

  // Pass 3: original edges, rerouted through the overhead exits.
  for (const auto& op : step.ops) {
    const int target = main_index[op.id];
    for (const auto& dep : op.waiting_for) {
      const int source = exit_index[dep];
      out.ops[target].waiting_for.push_back(source);
      out.ops[source].dependents.push_back(target);
    }
  }

  sort_dependents_by_id(out);
  for (std::size_t i = 0; i < out.ops.size(); ++i) {
    const auto& op = out.ops[i];
    if (op.waiting_for.empty() && op.res.type == ResourceType::kDownlink) {
      out.source_downlinks.push_back(static_cast<int>(i));
    }
  }
  return out;
}

SimStep split_comm_ops(const SimStep& step, const OverheadModel&, std::int64_t) {
  for (const auto& op : step.ops) {
    if (op.is_transmission) {
      throw AlreadySplitError("step already contains transmission op '" + op.id +
                              "'; communication splitting is applied once");
    }
  }
  return step;
}

SimProfile preprocess_profile(const ProfileBundle& bundle, const OverheadModel& model,
                              std::int64_t target_bandwidth_bps) {
  SimProfile profile;
  profile.num_ps = bundle.num_ps;
  profile.bandwidth_bps = target_bandwidth_bps;
  profile.win_bytes = bundle.win_bytes;
  profile.steps.reserve(bundle.steps.size());
  for (const auto& step : bundle.steps) {
    profile.steps.push_back(split_comm_ops(step, model, target_bandwidth_bps));
  }
  return profile;
}

}  // namespace asgdsim
