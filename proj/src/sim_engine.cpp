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

#include "asgdsim/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <utility>

namespace asgdsim {

double share(const ResourceKind& res, const ActiveSet& active, int worker) {
  if (!res.is_link()) return 1.0;
  const auto& workers = active.link(res.type, res.ps_index);
  (void)worker;
  return 1.0 / static_cast<double>(workers.size());
}

double share_two_ps(int worker, int ps_index, ResourceType direction, const ActiveSet& active) {
  const auto& mine = active.link(direction, ps_index);
  const double s_mine = 1.0 / static_cast<double>(mine.size());
  const int other_index = 1 - ps_index;
  const auto& other = active.link(direction, other_index);
  if (!other.count(worker)) return s_mine;

  const double s_other = 1.0 / static_cast<double>(other.size());
  if (s_mine + s_other <= 1.0) return s_mine;
  // The worker's own capacity binds: cap the larger allocation at what the
  // smaller one leaves over. Ties cap the higher ps index.
  const bool cap_mine = s_mine > s_other || (s_mine == s_other && ps_index > other_index);
  return cap_mine ? 1.0 - s_other : s_mine;
}

std::vector<int> partition_parameters(const std::vector<std::int64_t>& layer_sizes, int num_ps) {
  if (num_ps < 1) throw std::invalid_argument("num_ps must be >= 1");
  std::vector<std::int64_t> totals(static_cast<std::size_t>(num_ps), 0);
  std::vector<int> assignment;
  assignment.reserve(layer_sizes.size());
  for (const auto size : layer_sizes) {
    if (size < 0) throw std::invalid_argument("layer sizes must be >= 0");
    int target = 0;
    for (int i = 1; i < num_ps; ++i) {
      if (totals[i] < totals[target]) target = i;
    }
    totals[target] += size;
    assignment.push_back(target);
  }
  return assignment;
}

namespace {

struct ComputeTask {
  std::string op_id;
  double duration_us = 0.0;
  int tag = -1;
};

struct Slot {
  ResourceKind res;
  std::unique_ptr<LinkScheduler> link;  // link slots only
  std::deque<ComputeTask> tasks;        // compute slots only

  bool queue_empty() const { return link ? link->empty() : tasks.empty(); }
  bool busy = false;
};

struct Instance {
  const SimStep* step = nullptr;
  std::vector<int> unmet;
  int remaining_ops = 0;
  int ordinal = 0;
  int profile_index = 0;
};

struct Flight {
  Chunk chunk;
  double integrated_us = 0.0;
};

class Simulation {
 public:
  Simulation(const SimProfile& profile, const ClusterConfig& config, SimAudit* audit)
      : profile_(profile), config_(config), audit_(audit), active_(config.num_ps) {
    validate();
    const int num_slots = 3 * config_.num_ps + 1;
    workers_.resize(static_cast<std::size_t>(config_.num_workers));
    for (int w = 0; w < config_.num_workers; ++w) {
      auto& state = workers_[w];
      state.rng = SplitMix64::substream(config_.seed, static_cast<std::uint64_t>(w));
      state.slots.resize(static_cast<std::size_t>(num_slots));
      for (int s = 0; s < num_slots; ++s) {
        state.slots[s].res = slot_resource(s);
        if (state.slots[s].res.is_link()) {
          state.slots[s].link = std::make_unique<LinkScheduler>(
              config_.policy, w, state.slots[s].res, config_.bandwidth_bps);
        }
      }
    }
  }

  SyntheticTrace run() {
    for (int w = 0; w < config_.num_workers; ++w) start_step(w);
    while (!queue_.empty()) advance();
    for (int w = 0; w < config_.num_workers; ++w) {
      if (workers_[w].completed < config_.steps_per_worker) {
        throw DeadlockError("worker " + std::to_string(w) + " stalled after " +
                            std::to_string(workers_[w].completed) +
                            " steps with unmet dependencies; profile is malformed");
      }
    }
    return std::move(trace_);
  }

 private:
  struct WorkerState {
    std::vector<Slot> slots;
    Instance instance;
    int completed = 0;
    SplitMix64 rng{0};
  };

  void validate() const {
    if (config_.num_workers < 1) throw std::invalid_argument("num_workers must be >= 1");
    if (config_.steps_per_worker < 1) throw std::invalid_argument("steps_per_worker must be >= 1");
    if (config_.num_ps != 1 && config_.num_ps != 2) {
      throw std::invalid_argument("num_ps must be 1 or 2");
    }
    if (config_.num_ps != profile_.num_ps) {
      throw std::invalid_argument("config num_ps (" + std::to_string(config_.num_ps) +
                                  ") must match the profile's num_ps (" +
                                  std::to_string(profile_.num_ps) + ")");
    }
    if (config_.bandwidth_bps <= 0) throw std::invalid_argument("bandwidth must be > 0");
    if (config_.bandwidth_bps != profile_.bandwidth_bps) {
      throw std::invalid_argument("profile was preprocessed at a different bandwidth");
    }
    if (profile_.steps.empty()) throw std::invalid_argument("profile has no steps");
    config_.policy.validate();
  }

  ResourceKind slot_resource(int slot) const {
    const int m = config_.num_ps;
    if (slot < m) return ResourceKind::downlink(slot);
    if (slot < 2 * m) return ResourceKind::uplink(slot - m);
    if (slot == 2 * m) return ResourceKind::worker();
    return ResourceKind::ps(slot - 2 * m - 1);
  }

  int slot_of(const ResourceKind& res) const {
    const int m = config_.num_ps;
    switch (res.type) {
      case ResourceType::kDownlink:
        return res.ps_index;
      case ResourceType::kUplink:
        return m + res.ps_index;
      case ResourceType::kWorker:
        return 2 * m;
      case ResourceType::kPs:
        return 2 * m + 1 + res.ps_index;
    }
    return 2 * m;
  }

  double share_of(const Chunk& chunk) const {
    if (chunk.res.is_compute()) return 1.0;
    if (config_.num_ps == 1) return share(chunk.res, active_, chunk.worker);
    return share_two_ps(chunk.worker, chunk.res.ps_index, chunk.res.type, active_);
  }

  void start_step(int w) {
    auto& state = workers_[w];
    const auto index = state.rng.next_below(profile_.steps.size());
    const SimStep& step = profile_.steps[index];

    state.instance.step = &step;
    state.instance.profile_index = static_cast<int>(index);
    state.instance.ordinal = state.completed + 1;
    state.instance.remaining_ops = static_cast<int>(step.ops.size());
    state.instance.unmet.assign(step.ops.size(), 0);
    for (std::size_t i = 0; i < step.ops.size(); ++i) {
      state.instance.unmet[i] = static_cast<int>(step.ops[i].waiting_for.size());
    }

    for (int idx : step.source_downlinks) {
      const SimOp& op = step.ops[idx];
      state.slots[slot_of(op.res)].link->add(op.id, op.size_bytes, idx);
    }
    for (int ps = 0; ps < config_.num_ps; ++ps) {
      Slot& slot = state.slots[slot_of(ResourceKind::downlink(ps))];
      if (!slot.busy && !slot.queue_empty()) emit(w, slot);
    }
  }

  void emit(int w, Slot& slot) {
    Chunk chunk;
    if (slot.link) {
      chunk = slot.link->remove_chunk();
    } else {
      ComputeTask task = std::move(slot.tasks.front());
      slot.tasks.pop_front();
      chunk.main_op = std::move(task.op_id);
      chunk.remaining_us = task.duration_us;
      chunk.nominal_us = task.duration_us;
      chunk.is_last = true;
      chunk.worker = w;
      chunk.res = slot.res;
      chunk.tag = task.tag;
    }
    chunk.emitted_at_us = now_;
    slot.busy = true;
    if (slot.res.is_link()) active_.link(slot.res.type, slot.res.ps_index).insert(w);
    queue_.push_back({std::move(chunk), 0.0});
  }

  void release(int w, int op_index) {
    auto& state = workers_[w];
    const SimOp& op = state.instance.step->ops[op_index];
    Slot& slot = state.slots[slot_of(op.res)];
    if (slot.link) {
      slot.link->add(op.id, op.size_bytes, op_index);
    } else {
      slot.tasks.push_back({op.id, op.nominal_duration_us, op_index});
    }
    if (!slot.busy) emit(w, slot);
  }

  void maybe_finish_step(int w) {
    auto& state = workers_[w];
    for (const Slot& slot : state.slots) {
      if (slot.busy || !slot.queue_empty()) return;
    }
    if (state.instance.remaining_ops != 0) return;  // stalled; reported when the queue drains
    ++state.completed;
    trace_.step_completions.push_back(
        {w, state.instance.ordinal, now_, state.instance.profile_index});
    if (state.completed < config_.steps_per_worker) start_step(w);
  }

  void advance() {
    // Shares stay fixed between events; recompute them once per event.
    shares_.resize(queue_.size());
    std::size_t best = queue_.size();
    double best_ttf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < queue_.size(); ++i) {
      shares_[i] = share_of(queue_[i].chunk);
      const double ttf = shares_[i] > 0.0
                             ? queue_[i].chunk.remaining_us / shares_[i]
                             : std::numeric_limits<double>::infinity();
      if (best == queue_.size() || ttf < best_ttf ||
          (ttf == best_ttf && wins_tie(queue_[i].chunk, queue_[best].chunk))) {
        best = i;
        best_ttf = ttf;
      }
    }
    if (!std::isfinite(best_ttf)) {
      throw DeadlockError("no in-flight chunk can make progress");
    }

    if (audit_) sample_shares();

    const double duration = best_ttf;
    now_ += duration;
    for (std::size_t i = 0; i < queue_.size(); ++i) {
      const double work = duration * shares_[i];
      queue_[i].integrated_us += work;
      queue_[i].chunk.remaining_us = std::max(0.0, queue_[i].chunk.remaining_us - work);
    }

    Flight done = std::move(queue_[best]);
    if (best != queue_.size() - 1) queue_[best] = std::move(queue_.back());
    queue_.pop_back();

    const int w = done.chunk.worker;
    auto& state = workers_[w];
    trace_.events.push_back({w, done.chunk.res, done.chunk.main_op, done.chunk.emitted_at_us,
                             now_ - done.chunk.emitted_at_us, state.instance.ordinal});
    if (audit_) {
      audit_->chunk_work.push_back(
          {done.chunk.main_op, w, done.chunk.nominal_us, done.integrated_us});
    }

    Slot& slot = state.slots[slot_of(done.chunk.res)];
    slot.busy = false;

    if (done.chunk.is_last) {
      --state.instance.remaining_ops;
      for (int dep : state.instance.step->ops[done.chunk.tag].dependents) {
        if (--state.instance.unmet[dep] == 0) release(w, dep);
      }
    }

    if (!slot.busy) {  // a released dependent may have claimed the resource again
      if (!slot.queue_empty()) {
        emit(w, slot);
      } else {
        if (slot.res.is_link()) active_.link(slot.res.type, slot.res.ps_index).erase(w);
        maybe_finish_step(w);
      }
    }
  }

  static bool wins_tie(const Chunk& a, const Chunk& b) {
    if (a.worker != b.worker) return a.worker < b.worker;
    return a.main_op < b.main_op;
  }

  void sample_shares() {
    for (int dir = 0; dir < 2; ++dir) {
      const ResourceType type = dir == 0 ? ResourceType::kDownlink : ResourceType::kUplink;
      for (int ps = 0; ps < config_.num_ps; ++ps) {
        const auto& workers = active_.link(type, ps);
        if (workers.empty()) continue;
        double sum = 0.0;
        for (std::size_t i = 0; i < queue_.size(); ++i) {
          const Chunk& c = queue_[i].chunk;
          if (c.res.type == type && c.res.ps_index == ps) sum += shares_[i];
        }
        audit_->share_samples.push_back(
            {now_, type, ps, static_cast<int>(workers.size()), sum});
      }
    }
  }

  const SimProfile& profile_;
  const ClusterConfig& config_;
  SimAudit* audit_;
  ActiveSet active_;
  std::vector<WorkerState> workers_;
  std::vector<Flight> queue_;
  std::vector<double> shares_;
  SyntheticTrace trace_;
  double now_ = 0.0;
};

}  // namespace

SyntheticTrace generate_trace(const SimProfile& profile, const ClusterConfig& config,
                              SimAudit* audit) {
  Simulation sim(profile, config, audit);
  return sim.run();
}

}  // namespace asgdsim
