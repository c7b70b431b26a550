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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "asgdsim/metrics.hpp"
#include "asgdsim/preprocess.hpp"
#include "asgdsim/sim_engine.hpp"
#include "asgdsim/trace_model.hpp"

namespace {

using namespace asgdsim;
using nlohmann::json;

constexpr const char* kToolVersion = "asgdsim 1.0.0";

std::string fixed6(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6f", value);
  return buffer;
}

std::string fnv1a64_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::uint64_t hash = 1469598103934665603ull;
  char byte;
  while (in.get(byte)) {
    hash ^= static_cast<unsigned char>(byte);
    hash *= 1099511628211ull;
  }
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

SchedulerPolicy parse_policy(const std::string& text) {
  if (text == "fifo") return SchedulerPolicy::whole_stream_fifo();
  if (text.rfind("http2:", 0) == 0) {
    return SchedulerPolicy::http2_multiplex(std::stoll(text.substr(6)));
  }
  if (text.rfind("order:", 0) == 0) {
    const std::string path = text.substr(6);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open order file '" + path + "'");
    std::vector<std::string> order;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) order.push_back(line);
    }
    return SchedulerPolicy::enforced_order(std::move(order));
  }
  throw std::invalid_argument("unknown link policy '" + text +
                              "'; expected http2:<win_bytes>, fifo, or order:<file>");
}

std::string policy_to_string(const SchedulerPolicy& policy) {
  switch (policy.kind) {
    case SchedulerPolicy::Kind::kHttp2Multiplex:
      return "http2:" + std::to_string(policy.win_bytes);
    case SchedulerPolicy::Kind::kWholeStreamFifo:
      return "fifo";
    case SchedulerPolicy::Kind::kEnforcedOrder:
      return "order(" + std::to_string(policy.order.size()) + " ops)";
  }
  return "fifo";
}

// Simulation parameters shared by simulate, sweep and export-trace.
// Precedence: command-line flag > config file > profile metadata > defaults.
struct SimArgs {
  std::string profile_path;
  int workers = 1;
  std::int64_t bandwidth_bps = 0;
  int num_ps = 0;
  std::string policy_text;
  int steps = 1000;
  std::uint64_t seed = 0;
  int warmup = 50;
  double batch_size = 1.0;
  double alpha = -1.0;
  double beta = -1.0;
  std::string config_file;
  std::string out_dir;
};

struct ResolvedSim {
  ProfileBundle bundle;
  OverheadModel model;
  ClusterConfig config;
  int warmup = 50;
  double batch_size = 1.0;
  std::string out_dir;
};

void add_sim_flags(CLI::App* cmd, SimArgs& args) {
  cmd->add_option("profile", args.profile_path, "profile file in the canonical format")
      ->required();
  cmd->add_option("--workers,-w", args.workers, "number of workers to simulate");
  cmd->add_option("--bandwidth,-b", args.bandwidth_bps,
                  "link bandwidth in bits/s (default: profile bandwidth)");
  cmd->add_option("--ps", args.num_ps,
                  "parameter servers; must match the profile (default: profile num_ps)");
  cmd->add_option("--link-policy,--policy", args.policy_text,
                  "http2:<win_bytes> | fifo | order:<file> (default: http2 with profile window)");
  cmd->add_option("--steps", args.steps, "simulated steps per worker");
  cmd->add_option("--seed", args.seed, "simulation seed");
  cmd->add_option("--warmup", args.warmup, "steps excluded from throughput averaging");
  cmd->add_option("--batch-size,-k", args.batch_size, "examples per step");
  cmd->add_option("--alpha", args.alpha, "overhead slope in us/byte (default: profile value)");
  cmd->add_option("--beta", args.beta, "overhead intercept in us (default: profile value)");
  cmd->add_option("--config", args.config_file, "JSON config file with the same keys");
  cmd->add_option("--out", args.out_dir,
                  "output directory for manifests (default: $ASGDSIM_OUT_DIR or .)");
}

// Applies config-file values underneath any explicitly passed flags.
void merge_config_file(const CLI::App* cmd, SimArgs& args) {
  if (args.config_file.empty()) return;
  std::ifstream in(args.config_file);
  if (!in) throw IoError("cannot open config file '" + args.config_file + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad config file: ") + e.what());
  }
  auto take = [&](const char* flag, const char* key, auto& slot) {
    if (cmd->count(flag) == 0 && doc.contains(key)) {
      slot = doc.at(key).get<std::decay_t<decltype(slot)>>();
    }
  };
  take("--workers", "workers", args.workers);
  take("--bandwidth", "bandwidth_bps", args.bandwidth_bps);
  take("--ps", "ps", args.num_ps);
  take("--link-policy", "link_policy", args.policy_text);
  take("--steps", "steps", args.steps);
  take("--seed", "seed", args.seed);
  take("--warmup", "warmup", args.warmup);
  take("--batch-size", "batch_size", args.batch_size);
  take("--alpha", "alpha", args.alpha);
  take("--beta", "beta", args.beta);
}

ResolvedSim resolve(const CLI::App* cmd, SimArgs args) {
  merge_config_file(cmd, args);

  // Unset numeric options fall back to the profile metadata; values the user
  // actually passed must be usable as-is.
  if (cmd->count("--alpha") && args.alpha < 0) {
    throw std::invalid_argument("--alpha must be >= 0");
  }
  if (cmd->count("--beta") && args.beta < 0) {
    throw std::invalid_argument("--beta must be >= 0");
  }
  if (cmd->count("--bandwidth") && args.bandwidth_bps <= 0) {
    throw std::invalid_argument("--bandwidth must be > 0");
  }
  if (cmd->count("--ps") && (args.num_ps < 1 || args.num_ps > 2)) {
    throw std::invalid_argument("--ps must be 1 or 2");
  }

  ResolvedSim resolved;
  resolved.bundle = load_profile(args.profile_path);

  const ProfileBundle& bundle = resolved.bundle;
  resolved.config.num_workers = args.workers;
  resolved.config.bandwidth_bps =
      args.bandwidth_bps > 0 ? args.bandwidth_bps : bundle.profile_bandwidth_bps;
  resolved.config.num_ps = args.num_ps > 0 ? args.num_ps : bundle.num_ps;
  resolved.config.steps_per_worker = args.steps;
  resolved.config.seed = args.seed;
  resolved.config.policy = args.policy_text.empty()
                               ? SchedulerPolicy::http2_multiplex(bundle.win_bytes)
                               : parse_policy(args.policy_text);
  resolved.model.alpha_us_per_byte = args.alpha >= 0 ? args.alpha : bundle.alpha_us_per_byte;
  resolved.model.beta_us = args.beta >= 0 ? args.beta : bundle.beta_us;
  resolved.warmup = args.warmup;
  resolved.batch_size = args.batch_size;

  if (!args.out_dir.empty()) {
    resolved.out_dir = args.out_dir;
  } else if (const char* env = std::getenv("ASGDSIM_OUT_DIR"); env && *env) {
    resolved.out_dir = env;
  } else {
    resolved.out_dir = ".";
  }
  return resolved;
}

void write_manifest(const std::string& command, const ResolvedSim& sim,
                    const std::string& profile_path, const json& extra = json::object()) {
  json doc;
  doc["command"] = command;
  doc["tool_version"] = kToolVersion;
  doc["seed"] = sim.config.seed;
  doc["config"] = {{"workers", sim.config.num_workers},
                   {"num_ps", sim.config.num_ps},
                   {"bandwidth_bps", sim.config.bandwidth_bps},
                   {"link_policy", policy_to_string(sim.config.policy)},
                   {"steps_per_worker", sim.config.steps_per_worker},
                   {"warmup", sim.warmup},
                   {"batch_size", sim.batch_size},
                   {"alpha_us_per_byte", sim.model.alpha_us_per_byte},
                   {"beta_us", sim.model.beta_us}};
  doc["inputs"] = {
      {"profile", {{"path", profile_path}, {"fnv1a64", fnv1a64_hex(profile_path)}}}};
  for (const auto& [key, value] : extra.items()) doc[key] = value;

  std::filesystem::create_directories(sim.out_dir);
  const auto path = std::filesystem::path(sim.out_dir) / (command + "_manifest.json");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << doc.dump(2) << "\n";
}

int cmd_fit_overhead(const std::string& samples_path) {
  std::ifstream in(samples_path);
  if (!in) throw IoError("cannot open samples file '" + samples_path + "'");
  std::vector<std::pair<std::int64_t, double>> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::int64_t size = 0;
    double latency = 0.0;
    if (row >> size >> latency) samples.emplace_back(size, latency);
  }
  const OverheadFit fit = fit_overhead(samples);  // throws InsufficientDataError
  if (fit.clamped) {
    std::cerr << "warning: least-squares fit was clamped at zero\n";
  }
  std::cout << "samples: " << samples.size() << "\n";
  std::cout << "alpha_us_per_byte: " << fixed6(fit.model.alpha_us_per_byte) << "\n";
  std::cout << "beta_us: " << fixed6(fit.model.beta_us) << "\n";
  return 0;
}

SyntheticTrace run_simulation(const ResolvedSim& sim) {
  const SimProfile profile =
      preprocess_profile(sim.bundle, sim.model, sim.config.bandwidth_bps);
  return generate_trace(profile, sim.config);
}

int cmd_simulate(const ResolvedSim& sim, const std::string& profile_path,
                 const std::string& trace_out, const std::string& report_json) {
  const SyntheticTrace trace = run_simulation(sim);
  const ThroughputReport report = throughput(trace, sim.batch_size, sim.warmup);
  std::cout << report_to_text(report);
  write_manifest("simulate", sim, profile_path);
  if (!trace_out.empty()) export_chrome_trace(trace, trace_out);
  if (!report_json.empty()) {
    std::ofstream out(report_json, std::ios::binary);
    if (!out) throw IoError("cannot write report '" + report_json + "'");
    out << report_to_json(report);
  }
  return 0;
}

int cmd_sweep(const ResolvedSim& base, const std::string& profile_path, int min_workers,
              int max_workers, int jobs, const BaselineModel* baseline) {
  if (max_workers < min_workers || min_workers < 1) {
    throw std::invalid_argument("worker range must satisfy 1 <= min <= max");
  }

  std::vector<double> predicted(static_cast<std::size_t>(max_workers - min_workers + 1), 0.0);
  std::vector<std::string> errors(predicted.size());

  // Preprocess once; the sweep points only read it. One simulation per worker
  // count; per-point seed = seed + W so each column is individually
  // reproducible.
  const SimProfile profile =
      preprocess_profile(base.bundle, base.model, base.config.bandwidth_bps);
  std::vector<int> worker_counts;
  for (int w = min_workers; w <= max_workers; ++w) worker_counts.push_back(w);
  std::size_t cursor = 0;
  std::mutex cursor_mutex;
  auto run_points = [&]() {
    for (;;) {
      std::size_t mine;
      {
        std::lock_guard<std::mutex> lock(cursor_mutex);
        if (cursor == worker_counts.size()) return;
        mine = cursor++;
      }
      try {
        ClusterConfig config = base.config;
        config.num_workers = worker_counts[mine];
        config.seed = base.config.seed + static_cast<std::uint64_t>(worker_counts[mine]);
        const SyntheticTrace trace = generate_trace(profile, config);
        predicted[mine] = throughput(trace, base.batch_size, base.warmup).examples_per_sec;
      } catch (const std::exception& e) {
        errors[mine] = e.what();
      }
    }
  };

  const int thread_count = std::max(1, std::min<int>(jobs, static_cast<int>(worker_counts.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < thread_count; ++i) pool.emplace_back(run_points);
  run_points();
  for (auto& thread : pool) thread.join();

  for (const auto& error : errors) {
    if (!error.empty()) throw std::runtime_error("sweep point failed: " + error);
  }

  std::cout << "W examples_per_sec";
  if (baseline) std::cout << " " << baseline->name() << "_examples_per_sec";
  std::cout << "\n";
  double best = 0.0;
  for (const double value : predicted) best = std::max(best, value);
  int saturation = max_workers;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int w = worker_counts[i];
    std::cout << w << " " << fixed6(predicted[i]);
    if (baseline) std::cout << " " << fixed6(baseline->predict(w));
    std::cout << "\n";
    if (predicted[i] >= 0.98 * best && w < saturation) saturation = w;
  }
  std::cout << "saturation_workers: " << saturation << "\n";

  json extra;
  extra["sweep"] = {{"min_workers", min_workers}, {"max_workers", max_workers}};
  write_manifest("sweep", base, profile_path, extra);
  return 0;
}

int cmd_validate_multiplex(const std::string& streams_path, std::int64_t win_bytes,
                           std::int64_t bandwidth_bps) {
  std::ifstream in(streams_path);
  if (!in) throw IoError("cannot open streams file '" + streams_path + "'");
  std::vector<StreamSpec> streams;
  std::vector<EndtimeSample> measured;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    StreamSpec spec;
    double measured_end = 0.0;
    if (row >> spec.op >> spec.start_us >> spec.size_bytes >> measured_end) {
      streams.push_back(spec);
      measured.push_back({spec.op, measured_end});
    }
  }
  if (streams.empty()) throw std::invalid_argument("streams file has no usable rows");

  const auto predictions = predict_stream_endtimes(streams, win_bytes, bandwidth_bps);
  std::vector<EndtimeSample> predicted;
  for (const auto& p : predictions) predicted.push_back({p.op, p.end_us});

  std::cout << "op predicted_end_us measured_end_us rel_error\n";
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double rel = std::abs(predictions[i].end_us - measured[i].end_us) / measured[i].end_us;
    std::cout << predictions[i].op << " " << fixed6(predictions[i].end_us) << " "
              << fixed6(measured[i].end_us) << " " << fixed6(rel) << "\n";
  }
  const ErrorStats stats = multiplex_error_stats(predicted, measured);
  std::cout << "average: " << fixed6(stats.average) << "\n";
  std::cout << "median: " << fixed6(stats.median) << "\n";
  std::cout << "p95: " << fixed6(stats.p95) << "\n";
  std::cout << "max: " << fixed6(stats.max) << "\n";
  return 0;
}

int cmd_partition(const std::string& sizes_path, int num_ps) {
  std::ifstream in(sizes_path);
  if (!in) throw IoError("cannot open sizes file '" + sizes_path + "'");
  std::vector<std::string> names;
  std::vector<std::int64_t> sizes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string first;
    row >> first;
    std::int64_t size = 0;
    if (row >> size) {
      names.push_back(first);
    } else {
      size = std::stoll(first);
      names.push_back("layer" + std::to_string(names.size()));
    }
    sizes.push_back(size);
  }

  const std::vector<int> assignment = partition_parameters(sizes, num_ps);
  std::vector<std::int64_t> totals(static_cast<std::size_t>(num_ps), 0);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    std::cout << names[i] << " " << sizes[i] << " -> ps:" << assignment[i] << "\n";
    totals[assignment[i]] += sizes[i];
  }
  for (int i = 0; i < num_ps; ++i) {
    std::cout << "ps:" << i << " total_bytes: " << totals[i] << "\n";
  }
  return 0;
}

int cmd_export_trace(const ResolvedSim& sim, const std::string& profile_path,
                     const std::string& out_path) {
  const SyntheticTrace trace = run_simulation(sim);
  export_chrome_trace(trace, out_path);
  json extra;
  extra["trace_out"] = out_path;
  write_manifest("export-trace", sim, profile_path, extra);
  std::cout << "events: " << trace.events.size() << "\n";
  std::cout << "trace: " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Throughput prediction for parameter-server training from single-worker profiles"};
  app.require_subcommand(1);

  std::string samples_path;
  auto* fit = app.add_subcommand("fit-overhead",
                                 "fit the linear parsing-overhead model from (size, latency) samples");
  fit->add_option("samples", samples_path, "two-column file: size_bytes latency_us")->required();

  SimArgs sim_args;
  std::string trace_out, report_json;
  auto* simulate = app.add_subcommand("simulate", "simulate a cluster and report throughput");
  add_sim_flags(simulate, sim_args);
  simulate->add_option("--trace-out", trace_out, "also write a browser trace file");
  simulate->add_option("--report-json", report_json, "also write the report as JSON");

  SimArgs sweep_args;
  int min_workers = 1, max_workers = 1, jobs = 1;
  bool with_cynthia = false;
  double tp_sec = 0.0, tc_sec = 0.0, u1 = 0.0;
  auto* sweep = app.add_subcommand("sweep", "simulate a range of worker counts");
  add_sim_flags(sweep, sweep_args);
  sweep->add_option("--min-workers", min_workers, "first worker count");
  sweep->add_option("--max-workers", max_workers, "last worker count")->required();
  sweep->add_option("--jobs,-j", jobs, "concurrent simulations");
  sweep->add_flag("--cynthia", with_cynthia, "add the Cynthia baseline column");
  sweep->add_option("--tp-sec", tp_sec, "Cynthia: batch processing time in seconds");
  sweep->add_option("--tc-sec", tc_sec, "Cynthia: transmission time in seconds");
  sweep->add_option("--u1", u1, "Cynthia: single-worker network utilization");

  std::string streams_path;
  std::int64_t win_bytes = 0, vm_bandwidth = 0;
  auto* validate = app.add_subcommand(
      "validate-multiplex", "predict stream end times and compare against measurements");
  validate->add_option("streams", streams_path,
                       "rows: op_id start_us size_bytes measured_end_us")
      ->required();
  validate->add_option("--win-bytes", win_bytes, "flow control window")->required();
  validate->add_option("--bandwidth", vm_bandwidth, "link bandwidth in bits/s")->required();

  std::string sizes_path;
  int partition_ps = 2;
  auto* partition = app.add_subcommand("partition", "greedy layer partition across servers");
  partition->add_option("sizes", sizes_path, "rows: [name] size_bytes")->required();
  partition->add_option("--ps", partition_ps, "number of parameter servers");

  SimArgs export_args;
  std::string export_out;
  auto* export_trace = app.add_subcommand("export-trace", "simulate and write a browser trace");
  add_sim_flags(export_trace, export_args);
  export_trace->add_option("--trace-file", export_out, "output trace path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return cmd_fit_overhead(samples_path);
    if (*simulate) {
      return cmd_simulate(resolve(simulate, sim_args), sim_args.profile_path, trace_out,
                          report_json);
    }
    if (*sweep) {
      const ResolvedSim resolved = resolve(sweep, sweep_args);
      std::unique_ptr<BaselineModel> baseline;
      if (with_cynthia) {
        baseline = std::make_unique<CynthiaBaseline>(resolved.batch_size, tp_sec, tc_sec, u1);
      }
      return cmd_sweep(resolved, sweep_args.profile_path, min_workers, max_workers, jobs,
                       baseline.get());
    }
    if (*validate) return cmd_validate_multiplex(streams_path, win_bytes, vm_bandwidth);
    if (*partition) return cmd_partition(sizes_path, partition_ps);
    if (*export_trace) {
      return cmd_export_trace(resolve(export_trace, export_args), export_args.profile_path,
                              export_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
