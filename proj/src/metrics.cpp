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

#include "asgdsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace asgdsim {

using nlohmann::json;

ThroughputReport throughput(const SyntheticTrace& trace, double batch_size, int warmup_steps) {
  if (batch_size <= 0) throw std::invalid_argument("batch size must be > 0");
  if (warmup_steps < 0) throw std::invalid_argument("warmup must be >= 0");

  std::map<int, std::vector<double>> completions;  // worker -> completion times, trace order
  for (const auto& c : trace.step_completions) completions[c.worker].push_back(c.completion_us);

  ThroughputReport report;
  report.workers = static_cast<int>(completions.size());
  report.warmup_excluded = warmup_steps * report.workers;

  for (auto& [worker, times] : completions) {
    (void)worker;
    const int total = static_cast<int>(times.size());
    if (total <= warmup_steps) {
      throw InsufficientStepsError("need more than " + std::to_string(warmup_steps) +
                                   " steps per worker, got " + std::to_string(total));
    }
    const double boundary_us = warmup_steps == 0 ? 0.0 : times[warmup_steps - 1];
    const double span_us = times.back() - boundary_us;
    if (span_us <= 0.0) {
      throw InsufficientStepsError("no simulated time elapsed after the warmup boundary");
    }
    const int counted = total - warmup_steps;
    report.per_worker_rates.push_back(counted * batch_size / (span_us * 1e-6));
    report.steps_counted += counted;
  }

  double sum = 0.0;
  for (const double rate : report.per_worker_rates) sum += rate;
  report.examples_per_sec = sum;
  return report;
}

double cynthia_throughput(int workers, double batch_size, double t_p_sec, double t_c_sec,
                          double u_1) {
  if (workers < 1 || batch_size <= 0 || t_p_sec <= 0 || t_c_sec < 0) {
    throw std::invalid_argument("cynthia inputs must be positive");
  }
  if (u_1 < 0 || u_1 > 1) throw std::invalid_argument("utilization must be in [0, 1]");
  const double w = static_cast<double>(workers);
  return w * batch_size / (t_p_sec * std::max(1.0, w * u_1) + 2.0 * t_c_sec);
}

ErrorStats multiplex_error_stats(const std::vector<EndtimeSample>& predicted,
                                 const std::vector<EndtimeSample>& measured) {
  auto key = [](const std::vector<EndtimeSample>& samples) {
    std::map<std::string, double> by_op;
    for (const auto& s : samples) by_op[s.op] = s.end_us;
    return by_op;
  };
  const auto pred = key(predicted);
  const auto meas = key(measured);
  if (pred.size() != predicted.size() || meas.size() != measured.size()) {
    throw MismatchedOpsError("duplicate op ids in end-time samples");
  }
  if (pred.size() != meas.size()) {
    throw MismatchedOpsError("predicted and measured op sets differ in size");
  }

  std::vector<double> errors;
  errors.reserve(pred.size());
  for (const auto& [op, p] : pred) {
    auto it = meas.find(op);
    if (it == meas.end()) throw MismatchedOpsError("op '" + op + "' missing from measured set");
    if (it->second <= 0.0) throw std::invalid_argument("measured end time must be > 0");
    errors.push_back(std::abs(p - it->second) / it->second);
  }
  if (errors.empty()) throw MismatchedOpsError("no end-time samples");

  std::sort(errors.begin(), errors.end());
  const std::size_t n = errors.size();

  ErrorStats stats;
  for (const double e : errors) stats.average += e;
  stats.average /= static_cast<double>(n);
  stats.median = errors[(n - 1) / 2];  // lower median for even counts
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  stats.p95 = errors[std::max<std::size_t>(rank, 1) - 1];  // nearest-rank
  stats.max = errors.back();
  return stats;
}

std::string chrome_trace_json(const SyntheticTrace& trace) {
  json doc;
  doc["traceEvents"] = json::array();
  for (const auto& event : trace.events) {
    doc["traceEvents"].push_back({{"name", event.op},
                                  {"ph", "X"},
                                  {"ts", event.start_us},
                                  {"dur", event.duration_us},
                                  {"pid", event.worker},
                                  {"tid", to_string(event.res)}});
  }
  return doc.dump(2) + "\n";
}

void export_chrome_trace(const SyntheticTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trace file '" + path + "'");
  out << chrome_trace_json(trace);
  if (!out) throw IoError("failed writing trace file '" + path + "'");
}

std::string trace_to_json(const SyntheticTrace& trace) {
  json doc;
  doc["events"] = json::array();
  for (const auto& e : trace.events) {
    doc["events"].push_back({{"worker", e.worker},
                             {"res", to_string(e.res)},
                             {"op", e.op},
                             {"start_us", e.start_us},
                             {"dur_us", e.duration_us},
                             {"step", e.step_ordinal}});
  }
  doc["completions"] = json::array();
  for (const auto& c : trace.step_completions) {
    doc["completions"].push_back({{"worker", c.worker},
                                  {"ordinal", c.ordinal},
                                  {"time_us", c.completion_us},
                                  {"profile_step", c.profile_step}});
  }
  return doc.dump(2) + "\n";
}

namespace {

std::string fixed6(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6f", value);
  return buffer;
}

}  // namespace

std::string report_to_text(const ThroughputReport& report) {
  std::ostringstream out;
  out << "workers: " << report.workers << "\n";
  out << "steps_counted: " << report.steps_counted << "\n";
  out << "warmup_excluded: " << report.warmup_excluded << "\n";
  out << "examples_per_sec: " << fixed6(report.examples_per_sec) << "\n";
  out << "per_worker_rates:";
  for (const double rate : report.per_worker_rates) out << " " << fixed6(rate);
  out << "\n";
  return out.str();
}

std::string report_to_json(const ThroughputReport& report) {
  json doc;
  doc["workers"] = report.workers;
  doc["steps_counted"] = report.steps_counted;
  doc["warmup_excluded"] = report.warmup_excluded;
  doc["examples_per_sec"] = report.examples_per_sec;
  doc["per_worker_rates"] = report.per_worker_rates;
  return doc.dump(2) + "\n";
}

}  // namespace asgdsim
