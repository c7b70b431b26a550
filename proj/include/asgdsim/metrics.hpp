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

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "asgdsim/link_scheduler.hpp"
#include "asgdsim/sim_engine.hpp"

namespace asgdsim {

struct ThroughputReport {
  double examples_per_sec = 0.0;
  int workers = 0;
  int steps_counted = 0;
  int warmup_excluded = 0;
  std::vector<double> per_worker_rates;
};

struct ErrorStats {
  double average = 0.0;
  double median = 0.0;  // lower median for even counts
  double p95 = 0.0;     // nearest-rank
  double max = 0.0;
};

class InsufficientStepsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MismatchedOpsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Time-averaged training throughput: per worker, completions after the
/// warmup boundary divided by the elapsed time since it, times the batch
/// size; the report sums workers. Throws InsufficientStepsError unless every
/// worker completed more than warmup_steps steps.
ThroughputReport throughput(const SyntheticTrace& trace, double batch_size, int warmup_steps);

/// Closed-form baseline: W*K / (T_P * max(1, W*U_1) + 2*T_C).
double cynthia_throughput(int workers, double batch_size, double t_p_sec, double t_c_sec,
                          double u_1);

struct EndtimeSample {
  std::string op;
  double end_us = 0.0;
};

/// Relative end-time errors |pred - meas| / meas, aggregated as
/// average / lower-median / nearest-rank p95 / max. Throws
/// MismatchedOpsError when the op sets differ.
ErrorStats multiplex_error_stats(const std::vector<EndtimeSample>& predicted,
                                 const std::vector<EndtimeSample>& measured);

/// Browser trace-event JSON: one complete ("ph":"X") event per segment,
/// pid = worker, tid = resource name, timestamps in microseconds.
std::string chrome_trace_json(const SyntheticTrace& trace);
void export_chrome_trace(const SyntheticTrace& trace, const std::string& path);

/// Full machine-readable trace (segments plus step completions).
std::string trace_to_json(const SyntheticTrace& trace);

std::string report_to_text(const ThroughputReport& report);
std::string report_to_json(const ThroughputReport& report);

/// Plug-in point for closed-form throughput baselines shown next to
/// simulation results (e.g. in sweep tables).
class BaselineModel {
 public:
  virtual ~BaselineModel() = default;
  virtual std::string name() const = 0;
  virtual double predict(int workers) const = 0;
};

class CynthiaBaseline : public BaselineModel {
 public:
  CynthiaBaseline(double batch_size, double t_p_sec, double t_c_sec, double u_1)
      : batch_size_(batch_size), t_p_sec_(t_p_sec), t_c_sec_(t_c_sec), u_1_(u_1) {}

  std::string name() const override { return "cynthia"; }
  double predict(int workers) const override {
    return cynthia_throughput(workers, batch_size_, t_p_sec_, t_c_sec_, u_1_);
  }

 private:
  double batch_size_;
  double t_p_sec_;
  double t_c_sec_;
  double u_1_;
};

}  // namespace asgdsim
