// Shared helpers for the test suites: step/profile builders, random profile
// generation, and the independent oracles (multiplex replay, critical path,
// reachability, Kahn's algorithm) the expected values are derived from.
#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "asgdsim/preprocess.hpp"
#include "asgdsim/sim_engine.hpp"
#include "asgdsim/trace_model.hpp"

namespace testutil {

using namespace asgdsim;

inline Operation comm_op(const std::string& id, ResourceKind res, std::int64_t size_bytes,
                         std::vector<std::string> deps = {}) {
  Operation op;
  op.id = id;
  op.res = res;
  op.kind = OpKind::kCommunication;
  op.size_bytes = size_bytes;
  op.waiting_for.insert(deps.begin(), deps.end());
  return op;
}

inline Operation comp_op(const std::string& id, ResourceKind res, std::int64_t duration_us,
                         std::vector<std::string> deps = {}) {
  Operation op;
  op.id = id;
  op.res = res;
  op.kind = OpKind::kComputation;
  op.duration_us = duration_us;
  op.waiting_for.insert(deps.begin(), deps.end());
  return op;
}

// Builds a step and fills in the reverse edges.
inline Step make_step(std::vector<Operation> ops, int index = 0) {
  Step step;
  step.ops = std::move(ops);
  step.step_index = index;
  std::map<std::string, Operation*> by_id;
  for (auto& op : step.ops) by_id[op.id] = &op;
  for (auto& op : step.ops) {
    for (const auto& dep : op.waiting_for) by_id.at(dep)->dependent_ops.insert(op.id);
  }
  return step;
}

inline ProfileBundle make_bundle(std::vector<Step> steps, std::int64_t bandwidth_bps,
                                 double alpha = 0.0, double beta = 0.0,
                                 std::int64_t win_bytes = 1 << 20, int num_ps = 1) {
  ProfileBundle bundle;
  bundle.steps = std::move(steps);
  for (std::size_t i = 0; i < bundle.steps.size(); ++i) {
    bundle.steps[i].step_index = static_cast<int>(i);
  }
  bundle.profile_bandwidth_bps = bandwidth_bps;
  bundle.alpha_us_per_byte = alpha;
  bundle.beta_us = beta;
  bundle.win_bytes = win_bytes;
  bundle.num_ps = num_ps;
  return bundle;
}

// ---------------------------------------------------------------------------
// Oracles.

// Literal transcription of the multiplexing rules: the first service of a
// stream may send at most `win` bytes, after which the stream waits at the
// tail; a stream whose remainder fits in the window, or that is being served
// for the second time, is consumed whole.
struct OracleChunk {
  std::string op;
  std::int64_t bytes = 0;
  bool is_last = true;

  friend bool operator==(const OracleChunk&, const OracleChunk&) = default;
};

class MultiplexReplayOracle {
 public:
  explicit MultiplexReplayOracle(std::int64_t win) : win_(win) {}

  void add(const std::string& id, std::int64_t bytes) { waiting_.push_back({id, bytes, false}); }
  bool empty() const { return waiting_.empty(); }

  OracleChunk remove() {
    Entry entry = waiting_.front();
    waiting_.pop_front();
    if (!entry.served_once && entry.bytes > win_) {
      waiting_.push_back({entry.id, entry.bytes - win_, true});
      return {entry.id, win_, false};
    }
    return {entry.id, entry.bytes, true};
  }

 private:
  struct Entry {
    std::string id;
    std::int64_t bytes;
    bool served_once;
  };
  std::int64_t win_;
  std::deque<Entry> waiting_;
};

// Longest finish time through a simulation-ready step, with exact fractional
// transfer times. Independent of the event loop.
inline double critical_path_us(const SimStep& step, std::int64_t bandwidth_bps) {
  const std::size_t n = step.ops.size();
  std::vector<int> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i) indegree[i] = static_cast<int>(step.ops[i].waiting_for.size());

  auto duration = [&](const SimOp& op) {
    return op.is_transmission
               ? static_cast<double>(op.size_bytes) * 8.0e6 / static_cast<double>(bandwidth_bps)
               : op.nominal_duration_us;
  };

  std::vector<double> finish(n, 0.0);
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::size_t processed = 0;
  double longest = 0.0;
  while (!ready.empty()) {
    const std::size_t i = ready.front();
    ready.pop_front();
    ++processed;
    double start = 0.0;
    for (int dep : step.ops[i].waiting_for) start = std::max(start, finish[dep]);
    finish[i] = start + duration(step.ops[i]);
    longest = std::max(longest, finish[i]);
    for (int dep : step.ops[i].dependents) {
      if (--indegree[dep] == 0) ready.push_back(dep);
    }
  }
  if (processed != n) throw std::logic_error("critical path oracle: step has a cycle");
  return longest;
}

// Kahn's algorithm over waiting_for edges; true iff a topological order exists.
inline bool has_topological_order(const Step& step) {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < step.ops.size(); ++i) index[step.ops[i].id] = static_cast<int>(i);
  std::vector<int> indegree(step.ops.size(), 0);
  std::vector<std::vector<int>> out(step.ops.size());
  for (std::size_t i = 0; i < step.ops.size(); ++i) {
    for (const auto& dep : step.ops[i].waiting_for) {
      auto it = index.find(dep);
      if (it == index.end()) return false;
      ++indegree[i];
      out[it->second].push_back(static_cast<int>(i));
    }
  }
  std::deque<int> ready;
  for (std::size_t i = 0; i < step.ops.size(); ++i) {
    if (indegree[i] == 0) ready.push_back(static_cast<int>(i));
  }
  std::size_t processed = 0;
  while (!ready.empty()) {
    const int i = ready.front();
    ready.pop_front();
    ++processed;
    for (int next : out[i]) {
      if (--indegree[next] == 0) ready.push_back(next);
    }
  }
  return processed == step.ops.size();
}

// Reachability over dependent edges (BFS), keyed by op id.
inline std::set<std::pair<std::string, std::string>> reachable_pairs(
    const std::vector<std::string>& ids, const std::map<std::string, std::vector<std::string>>& out) {
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& source : ids) {
    std::deque<std::string> frontier{source};
    std::set<std::string> seen{source};
    while (!frontier.empty()) {
      const std::string at = frontier.front();
      frontier.pop_front();
      auto it = out.find(at);
      if (it == out.end()) continue;
      for (const auto& next : it->second) {
        if (seen.insert(next).second) {
          pairs.emplace(source, next);
          frontier.push_back(next);
        }
      }
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Random profiles: layered DAGs where every op is reachable from a downlink
// source (downlinks all start the step, like real traces).

struct RandomProfileOptions {
  int num_ps = 1;
  int num_steps = 3;
  int max_downlinks = 3;
  int max_layers = 3;
  int max_width = 2;
  int max_uplinks = 3;
  std::int64_t max_size_bytes = 200000;
  std::int64_t max_duration_us = 5000;
  double alpha = 0.0;
  double beta = 0.0;
  std::int64_t bandwidth_bps = 8000000;  // 1 byte per microsecond
  std::int64_t win_bytes = 64000;
};

inline ProfileBundle random_profile(SplitMix64& rng, const RandomProfileOptions& opt) {
  const int downlinks = 1 + static_cast<int>(rng.next_below(opt.max_downlinks));
  const int layers = 1 + static_cast<int>(rng.next_below(opt.max_layers));
  const int uplinks = 1 + static_cast<int>(rng.next_below(opt.max_uplinks));

  struct Shape {
    std::string id;
    ResourceKind res;
    OpKind kind;
    std::vector<std::string> deps;
  };
  std::vector<Shape> shapes;
  std::vector<std::string> previous;

  for (int i = 0; i < downlinks; ++i) {
    const int ps = static_cast<int>(rng.next_below(opt.num_ps));
    shapes.push_back({"dl" + std::to_string(i), ResourceKind::downlink(ps),
                      OpKind::kCommunication, {}});
    previous.push_back(shapes.back().id);
  }
  for (int layer = 0; layer < layers; ++layer) {
    const int width = 1 + static_cast<int>(rng.next_below(opt.max_width));
    std::vector<std::string> current;
    for (int i = 0; i < width; ++i) {
      Shape shape{"c" + std::to_string(layer) + "_" + std::to_string(i), ResourceKind::worker(),
                  OpKind::kComputation, {}};
      shape.deps.push_back(previous[rng.next_below(previous.size())]);
      if (previous.size() > 1 && rng.next_below(2) == 0) {
        shape.deps.push_back(previous[rng.next_below(previous.size())]);
      }
      std::sort(shape.deps.begin(), shape.deps.end());
      shape.deps.erase(std::unique(shape.deps.begin(), shape.deps.end()), shape.deps.end());
      current.push_back(shape.id);
      shapes.push_back(std::move(shape));
    }
    previous = std::move(current);
  }
  for (int i = 0; i < uplinks; ++i) {
    const int ps = static_cast<int>(rng.next_below(opt.num_ps));
    Shape up{"ul" + std::to_string(i), ResourceKind::uplink(ps), OpKind::kCommunication, {}};
    up.deps.push_back(previous[rng.next_below(previous.size())]);
    shapes.push_back(up);
    shapes.push_back({"upd" + std::to_string(i), ResourceKind::ps(ps), OpKind::kComputation,
                      {up.id}});
  }

  ProfileBundle bundle;
  for (int s = 0; s < opt.num_steps; ++s) {
    std::vector<Operation> ops;
    for (const auto& shape : shapes) {
      if (shape.kind == OpKind::kCommunication) {
        ops.push_back(comm_op(shape.id, shape.res,
                              1 + static_cast<std::int64_t>(rng.next_below(opt.max_size_bytes)),
                              shape.deps));
      } else {
        ops.push_back(comp_op(shape.id, shape.res,
                              1 + static_cast<std::int64_t>(rng.next_below(opt.max_duration_us)),
                              shape.deps));
      }
    }
    bundle.steps.push_back(make_step(std::move(ops), s));
  }
  bundle.profile_bandwidth_bps = opt.bandwidth_bps;
  bundle.alpha_us_per_byte = opt.alpha;
  bundle.beta_us = opt.beta;
  bundle.win_bytes = opt.win_bytes;
  bundle.num_ps = opt.num_ps;
  return bundle;
}

}  // namespace testutil
