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
#include <deque>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "asgdsim/trace_model.hpp"

namespace asgdsim {

/// How a link serves its pending streams.
///
/// Http2Multiplex models gRPC's flow control: the first time a stream is
/// served it may transmit at most win_bytes; if more remains it is preempted
/// once and re-enqueued at the tail, and its second service always runs to
/// completion. Streams no larger than the window finish in one service.
/// WholeStreamFifo transmits each stream as a single chunk in arrival order
/// (flow control disabled). EnforcedOrder does the same but positions queued
/// streams by a configured op-id list; ops absent from the list go last, by
/// arrival.
struct SchedulerPolicy {
  enum class Kind { kHttp2Multiplex, kWholeStreamFifo, kEnforcedOrder };

  Kind kind = Kind::kWholeStreamFifo;
  std::int64_t win_bytes = 0;
  std::vector<std::string> order;

  static SchedulerPolicy http2_multiplex(std::int64_t win_bytes) {
    SchedulerPolicy p;
    p.kind = Kind::kHttp2Multiplex;
    p.win_bytes = win_bytes;
    return p;
  }
  static SchedulerPolicy whole_stream_fifo() { return SchedulerPolicy{}; }
  static SchedulerPolicy enforced_order(std::vector<std::string> order) {
    SchedulerPolicy p;
    p.kind = Kind::kEnforcedOrder;
    p.order = std::move(order);
    return p;
  }

  /// Throws std::invalid_argument on win_bytes <= 0 or duplicate order entries.
  void validate() const;
};

/// Nominal full-bandwidth work of a chunk, in fractional microseconds.
double chunk_duration_us(std::int64_t size_bytes, std::int64_t bandwidth_bps);

/// A schedulable slice of an operation: the unit the event loop advances.
/// remaining_us is the work left at nominal full-bandwidth rate; contention
/// stretching is the engine's job.
struct Chunk {
  std::string main_op;
  double remaining_us = 0.0;
  bool is_last = true;
  int worker = 0;
  ResourceKind res;
  std::int64_t size_bytes = 0;  // bytes carried by this chunk; 0 for compute chunks
  int tag = -1;                 // caller-defined handle (op index in the engine)
  double emitted_at_us = 0.0;   // set by the engine when the chunk enters service
  double nominal_us = 0.0;      // remaining_us at emission, kept for accounting
};

class DuplicateStreamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptySchedulerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stream scheduler for one (worker, link direction, ps) tuple.
class LinkScheduler {
 public:
  LinkScheduler(SchedulerPolicy policy, int worker, ResourceKind res,
                std::int64_t bandwidth_bps);

  /// Enqueues a stream. Throws DuplicateStreamError if the op is already queued.
  void add(const std::string& op_id, std::int64_t size_bytes, int tag = -1);

  bool empty() const { return queue_.empty(); }
  std::size_t queued() const { return queue_.size(); }

  /// Emits the next chunk per the policy. Throws EmptySchedulerError when empty.
  Chunk remove_chunk();

 private:
  struct StreamState {
    std::string op_id;
    std::int64_t remaining_bytes = 0;
    bool served_once = false;
    int tag = -1;
    std::uint64_t arrival = 0;
    std::size_t order_pos = 0;  // EnforcedOrder rank; SIZE_MAX when unlisted
  };

  SchedulerPolicy policy_;
  int worker_;
  ResourceKind res_;
  std::int64_t bandwidth_bps_;
  std::deque<StreamState> queue_;
  std::set<std::string> queued_ids_;
  std::uint64_t next_arrival_ = 0;
};

struct StreamSpec {
  std::string op;
  double start_us = 0.0;
  std::int64_t size_bytes = 0;
};

struct EndtimePrediction {
  std::string op;
  double end_us = 0.0;
};

/// Replays the Http2Multiplex policy over one fully available link,
/// activating each stream at its start time, and returns the predicted
/// completion time of every stream (in input order). This is the model used
/// to validate multiplexing against measured single-worker profiles.
std::vector<EndtimePrediction> predict_stream_endtimes(const std::vector<StreamSpec>& streams,
                                                       std::int64_t win_bytes,
                                                       std::int64_t bandwidth_bps);

}  // namespace asgdsim
