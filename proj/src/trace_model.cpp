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

#include "asgdsim/trace_model.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace asgdsim {

using nlohmann::json;

std::string to_string(const ResourceKind& res) {
  switch (res.type) {
    case ResourceType::kWorker:
      return "worker";
    case ResourceType::kDownlink:
      return "downlink:" + std::to_string(res.ps_index);
    case ResourceType::kUplink:
      return "uplink:" + std::to_string(res.ps_index);
    case ResourceType::kPs:
      return "ps:" + std::to_string(res.ps_index);
  }
  return "worker";
}

ResourceKind parse_resource(const std::string& text) {
  std::string name = text;
  int index = 0;
  if (auto colon = text.find(':'); colon != std::string::npos) {
    name = text.substr(0, colon);
    const std::string idx = text.substr(colon + 1);
    if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos) {
      throw SchemaError("bad resource index in '" + text + "'");
    }
    index = std::stoi(idx);
  }
  if (name == "worker") {
    if (index != 0) throw SchemaError("worker resource takes no index: '" + text + "'");
    return ResourceKind::worker();
  }
  if (name == "downlink") return ResourceKind::downlink(index);
  if (name == "uplink") return ResourceKind::uplink(index);
  if (name == "ps") return ResourceKind::ps(index);
  throw SchemaError("unknown resource '" + text + "'");
}

const Operation* Step::find(const std::string& id) const {
  for (const auto& op : ops) {
    if (op.id == id) return &op;
  }
  return nullptr;
}

CycleError::CycleError(const std::string& message, std::vector<std::string> cycle)
    : std::runtime_error(message), cycle_(std::move(cycle)) {}

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  return out;
}

// Iterative three-color DFS over the union of both edge directions;
// returns the node sequence of the first cycle found.
std::vector<std::string> find_cycle(const Step& step) {
  const std::size_t n = step.ops.size();
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < n; ++i) index[step.ops[i].id] = static_cast<int>(i);

  std::vector<std::vector<int>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& dep : step.ops[i].dependent_ops) {
      if (auto it = index.find(dep); it != index.end()) adj[i].push_back(it->second);
    }
    for (const auto& dep : step.ops[i].waiting_for) {
      if (auto it = index.find(dep); it != index.end()) adj[it->second].push_back(static_cast<int>(i));
    }
  }
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }

  enum { kWhite, kGray, kBlack };
  std::vector<int> color(n, kWhite);
  std::vector<int> parent(n, -1);

  for (std::size_t root = 0; root < n; ++root) {
    if (color[root] != kWhite) continue;
    std::vector<std::pair<int, std::size_t>> stack{{static_cast<int>(root), 0}};
    color[root] = kGray;
    while (!stack.empty()) {
      const int node = stack.back().first;
      std::size_t& edge = stack.back().second;
      if (edge < adj[node].size()) {
        const int next = adj[node][edge++];
        if (color[next] == kGray) {
          std::vector<std::string> cycle{step.ops[next].id};
          for (int at = node; at != next; at = parent[at]) cycle.push_back(step.ops[at].id);
          std::reverse(cycle.begin() + 1, cycle.end());
          return cycle;
        }
        if (color[next] == kWhite) {
          color[next] = kGray;
          parent[next] = node;
          stack.emplace_back(next, 0);
        }
      } else {
        color[node] = kBlack;
        stack.pop_back();
      }
    }
  }
  return {};
}

json require_field(const json& object, const char* key, const char* where) {
  if (!object.contains(key)) {
    throw SchemaError(std::string("missing field '") + key + "' in " + where);
  }
  return object.at(key);
}

std::int64_t require_nonneg_int(const json& value, const char* key, const char* where) {
  if (!value.is_number_integer() || value.get<std::int64_t>() < 0) {
    throw SchemaError(std::string("field '") + key + "' in " + where +
                      " must be a non-negative integer");
  }
  return value.get<std::int64_t>();
}

Operation parse_operation(const json& op_json, int step_index) {
  const std::string where = "step " + std::to_string(step_index);
  Operation op;
  op.id = require_field(op_json, "id", where.c_str()).get<std::string>();
  if (op.id.empty()) throw SchemaError("empty op id in " + where);
  op.res = parse_resource(require_field(op_json, "res", where.c_str()).get<std::string>());

  const std::string kind = require_field(op_json, "kind", where.c_str()).get<std::string>();
  const std::string ctx = "op '" + op.id + "' (" + where + ")";
  if (kind == "comm") {
    op.kind = OpKind::kCommunication;
    op.size_bytes = require_nonneg_int(require_field(op_json, "size_bytes", ctx.c_str()),
                                       "size_bytes", ctx.c_str());
    if (op_json.contains("duration_us")) {
      throw SchemaError("communication " + ctx + " must not carry duration_us");
    }
  } else if (kind == "comp") {
    op.kind = OpKind::kComputation;
    op.duration_us = require_nonneg_int(require_field(op_json, "duration_us", ctx.c_str()),
                                        "duration_us", ctx.c_str());
    if (op_json.contains("size_bytes")) {
      throw SchemaError("computation " + ctx + " must not carry size_bytes");
    }
  } else {
    throw SchemaError("unknown kind '" + kind + "' for " + ctx);
  }

  if (op_json.contains("deps")) {
    for (const auto& dep : op_json.at("deps")) op.waiting_for.insert(dep.get<std::string>());
  }
  if (op_json.contains("dependents")) {
    for (const auto& dep : op_json.at("dependents")) op.dependent_ops.insert(dep.get<std::string>());
  }
  return op;
}

void symmetrize_edges(Step& step) {
  std::unordered_map<std::string, Operation*> by_id;
  for (auto& op : step.ops) by_id[op.id] = &op;

  for (auto& op : step.ops) {
    for (const auto& dep : op.waiting_for) {
      auto it = by_id.find(dep);
      if (it == by_id.end()) {
        throw DanglingRefError("op '" + op.id + "' waits for unknown op '" + dep + "' in step " +
                               std::to_string(step.step_index));
      }
      it->second->dependent_ops.insert(op.id);
    }
    for (const auto& dep : op.dependent_ops) {
      auto it = by_id.find(dep);
      if (it == by_id.end()) {
        throw DanglingRefError("op '" + op.id + "' lists unknown dependent '" + dep +
                               "' in step " + std::to_string(step.step_index));
      }
    }
  }
  for (auto& op : step.ops) {
    for (const auto& dep : op.dependent_ops) by_id[dep]->waiting_for.insert(op.id);
  }
}

// Structural signature used to enforce one dependency structure per bundle:
// ids, resources, kinds and edges must match; durations and sizes may vary.
std::string structure_signature(const Step& step) {
  std::ostringstream out;
  for (const auto& op : step.ops) {
    out << op.id << '|' << to_string(op.res) << '|'
        << (op.kind == OpKind::kCommunication ? "comm" : "comp") << '|';
    for (const auto& dep : op.waiting_for) out << dep << ',';
    out << ';';
  }
  return out.str();
}

void check_step(const Step& step, int num_ps) {
  std::unordered_set<std::string> seen;
  for (const auto& op : step.ops) {
    if (!seen.insert(op.id).second) {
      throw SchemaError("duplicate op id '" + op.id + "' in step " +
                        std::to_string(step.step_index));
    }
    if (op.res.type != ResourceType::kWorker && op.res.ps_index >= num_ps) {
      throw SchemaError("op '" + op.id + "' uses " + to_string(op.res) + " but num_ps is " +
                        std::to_string(num_ps));
    }
    const bool on_link = op.res.is_link();
    if ((op.kind == OpKind::kCommunication) != on_link) {
      throw SchemaError("op '" + op.id + "' kind does not match resource " + to_string(op.res));
    }
  }
  if (auto cycle = find_cycle(step); !cycle.empty()) {
    throw CycleError("dependency cycle in step " + std::to_string(step.step_index) + ": {" +
                         join_ids(cycle) + "}",
                     cycle);
  }
}

}  // namespace

ProfileBundle parse_profile(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed profile document: ") + e.what());
  }

  ProfileBundle bundle;
  try {
    const json meta = require_field(doc, "meta", "profile");
    auto meta_int = [&](const char* key) {
      const json value = require_field(meta, key, "meta");
      if (!value.is_number_integer()) {
        throw SchemaError(std::string("meta field '") + key + "' must be an integer");
      }
      return value.get<std::int64_t>();
    };
    bundle.profile_bandwidth_bps = meta_int("profile_bandwidth_bps");
    bundle.alpha_us_per_byte = require_field(meta, "alpha_us_per_byte", "meta").get<double>();
    bundle.beta_us = require_field(meta, "beta_us", "meta").get<double>();
    bundle.win_bytes = meta_int("win_bytes");
    bundle.num_ps = static_cast<int>(meta_int("num_ps"));

    const json steps = require_field(doc, "steps", "profile");
    int index = 0;
    for (const auto& step_json : steps) {
      Step step;
      step.step_index = index++;
      for (const auto& op_json : require_field(step_json, "ops", "step")) {
        step.ops.push_back(parse_operation(op_json, step.step_index));
      }
      bundle.steps.push_back(std::move(step));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad field type: ") + e.what());
  }

  if (bundle.steps.empty()) throw SchemaError("profile has no steps");
  if (bundle.profile_bandwidth_bps <= 0) throw SchemaError("profile_bandwidth_bps must be > 0");
  if (bundle.win_bytes <= 0) throw SchemaError("win_bytes must be > 0");
  if (bundle.alpha_us_per_byte < 0) throw SchemaError("alpha_us_per_byte must be >= 0");
  if (bundle.beta_us < 0) throw SchemaError("beta_us must be >= 0");
  if (bundle.num_ps != 1 && bundle.num_ps != 2) throw SchemaError("num_ps must be 1 or 2");

  for (auto& step : bundle.steps) {
    if (step.ops.empty()) {
      throw SchemaError("step " + std::to_string(step.step_index) + " has no ops");
    }
    symmetrize_edges(step);
    check_step(step, bundle.num_ps);
  }

  const std::string signature = structure_signature(bundle.steps.front());
  for (const auto& step : bundle.steps) {
    if (structure_signature(step) != signature) {
      throw SchemaError("step " + std::to_string(step.step_index) +
                        " has a different dependency structure than step 0");
    }
  }
  return bundle;
}

ProfileBundle load_profile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open profile file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_profile(buffer.str());
}

std::string profile_to_json(const ProfileBundle& bundle) {
  json doc;
  doc["meta"] = {{"profile_bandwidth_bps", bundle.profile_bandwidth_bps},
                 {"alpha_us_per_byte", bundle.alpha_us_per_byte},
                 {"beta_us", bundle.beta_us},
                 {"win_bytes", bundle.win_bytes},
                 {"num_ps", bundle.num_ps}};
  doc["steps"] = json::array();
  for (const auto& step : bundle.steps) {
    json ops = json::array();
    for (const auto& op : step.ops) {
      json op_json;
      op_json["id"] = op.id;
      op_json["res"] = to_string(op.res);
      if (op.kind == OpKind::kCommunication) {
        op_json["kind"] = "comm";
        op_json["size_bytes"] = op.size_bytes.value_or(0);
      } else {
        op_json["kind"] = "comp";
        op_json["duration_us"] = op.duration_us.value_or(0);
      }
      op_json["deps"] = json(op.waiting_for);
      ops.push_back(std::move(op_json));
    }
    doc["steps"].push_back({{"ops", std::move(ops)}});
  }
  return doc.dump(2) + "\n";
}

void save_profile(const ProfileBundle& bundle, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write profile file '" + path + "'");
  out << profile_to_json(bundle);
}

std::vector<Violation> validate_step(const Step& step) {
  std::vector<Violation> violations;
  std::unordered_set<std::string> ids;

  for (const auto& op : step.ops) {
    if (!ids.insert(op.id).second) {
      violations.push_back({op.id, "duplicate-id", "op id defined more than once"});
    }
  }

  bool has_source = false;
  for (const auto& op : step.ops) {
    const bool comm = op.kind == OpKind::kCommunication;
    if (comm && (!op.size_bytes.has_value() || op.duration_us.has_value())) {
      violations.push_back(
          {op.id, "field-mismatch", "communication op must carry size_bytes only"});
    }
    if (!comm && (!op.duration_us.has_value() || op.size_bytes.has_value())) {
      violations.push_back(
          {op.id, "field-mismatch", "computation op must carry duration_us only"});
    }
    if (op.duration_us && *op.duration_us < 0) {
      violations.push_back({op.id, "negative-duration", "duration_us must be >= 0"});
    }
    if (op.size_bytes && *op.size_bytes < 0) {
      violations.push_back({op.id, "negative-size", "size_bytes must be >= 0"});
    }
    if (comm != op.res.is_link()) {
      violations.push_back({op.id, "kind-resource-mismatch",
                            "communication ops run on links, computation ops on compute"});
    }
    if (op.waiting_for.empty()) has_source = true;

    for (const auto& dep : op.waiting_for) {
      const Operation* other = step.find(dep);
      if (!other) {
        violations.push_back({op.id, "dangling-ref", "waits for unknown op '" + dep + "'"});
      } else if (!other->dependent_ops.count(op.id)) {
        violations.push_back(
            {op.id, "asymmetric-edge", "waits for '" + dep + "' which does not list it back"});
      }
    }
    for (const auto& dep : op.dependent_ops) {
      const Operation* other = step.find(dep);
      if (!other) {
        violations.push_back({op.id, "dangling-ref", "lists unknown dependent '" + dep + "'"});
      } else if (!other->waiting_for.count(op.id)) {
        violations.push_back(
            {op.id, "asymmetric-edge", "dependent '" + dep + "' does not wait for it"});
      }
    }
  }

  if (!has_source && !step.ops.empty()) {
    violations.push_back({"", "no-source", "no operation has an empty waiting_for set"});
  }
  if (step.ops.empty()) {
    violations.push_back({"", "empty-step", "step has no operations"});
  }
  if (auto cycle = find_cycle(step); !cycle.empty()) {
    violations.push_back({cycle.front(), "cycle", "dependency cycle {" + join_ids(cycle) + "}"});
  }
  return violations;
}

}  // namespace asgdsim
