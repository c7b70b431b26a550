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

#include "asgdsim/link_scheduler.hpp"

#include <algorithm>
#include <limits>
#include <unordered_set>

namespace asgdsim {

void SchedulerPolicy::validate() const {
  if (kind == Kind::kHttp2Multiplex && win_bytes <= 0) {
    throw std::invalid_argument("http2 multiplex window must be > 0 bytes");
  }
  if (kind == Kind::kEnforcedOrder) {
    std::unordered_set<std::string> seen;
    for (const auto& id : order) {
      if (!seen.insert(id).second) {
        throw std::invalid_argument("enforced order lists op '" + id + "' twice");
      }
    }
  }
}

double chunk_duration_us(std::int64_t size_bytes, std::int64_t bandwidth_bps) {
  if (bandwidth_bps <= 0) throw std::invalid_argument("bandwidth must be > 0");
  return static_cast<double>(size_bytes) * 8.0e6 / static_cast<double>(bandwidth_bps);
}

LinkScheduler::LinkScheduler(SchedulerPolicy policy, int worker, ResourceKind res,
                             std::int64_t bandwidth_bps)
    : policy_(std::move(policy)), worker_(worker), res_(res), bandwidth_bps_(bandwidth_bps) {
  policy_.validate();
  if (bandwidth_bps_ <= 0) throw std::invalid_argument("bandwidth must be > 0");
}

void LinkScheduler::add(const std::string& op_id, std::int64_t size_bytes, int tag) {
  if (queued_ids_.count(op_id)) {
    throw DuplicateStreamError("stream '" + op_id + "' is already scheduled on " +
                               to_string(res_));
  }
  StreamState stream;
  stream.op_id = op_id;
  stream.remaining_bytes = size_bytes;
  stream.tag = tag;
  stream.arrival = next_arrival_++;
  stream.order_pos = std::numeric_limits<std::size_t>::max();

  if (policy_.kind == SchedulerPolicy::Kind::kEnforcedOrder) {
    for (std::size_t i = 0; i < policy_.order.size(); ++i) {
      if (policy_.order[i] == op_id) {
        stream.order_pos = i;
        break;
      }
    }
    auto pos = std::find_if(queue_.begin(), queue_.end(), [&](const StreamState& other) {
      return std::make_pair(other.order_pos, other.arrival) >
             std::make_pair(stream.order_pos, stream.arrival);
    });
    queue_.insert(pos, std::move(stream));
  } else {
    queue_.push_back(std::move(stream));
  }
  queued_ids_.insert(op_id);
}

Chunk LinkScheduler::remove_chunk() {
  if (queue_.empty()) {
    throw EmptySchedulerError("remove_chunk on empty scheduler for " + to_string(res_));
  }
  StreamState stream = std::move(queue_.front());
  queue_.pop_front();

  Chunk chunk;
  chunk.main_op = stream.op_id;
  chunk.worker = worker_;
  chunk.res = res_;
  chunk.tag = stream.tag;

  const bool preempt = policy_.kind == SchedulerPolicy::Kind::kHttp2Multiplex &&
                       !stream.served_once && stream.remaining_bytes > policy_.win_bytes;
  if (preempt) {
    chunk.size_bytes = policy_.win_bytes;
    chunk.is_last = false;
    stream.remaining_bytes -= policy_.win_bytes;
    stream.served_once = true;
    queue_.push_back(std::move(stream));  // wait at the tail for the second service
  } else {
    chunk.size_bytes = stream.remaining_bytes;
    chunk.is_last = true;
    queued_ids_.erase(stream.op_id);
  }
  chunk.remaining_us = chunk_duration_us(chunk.size_bytes, bandwidth_bps_);
  chunk.nominal_us = chunk.remaining_us;
  return chunk;
}

std::vector<EndtimePrediction> predict_stream_endtimes(const std::vector<StreamSpec>& streams,
                                                       std::int64_t win_bytes,
                                                       std::int64_t bandwidth_bps) {
  std::vector<std::size_t> order(streams.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return streams[a].start_us < streams[b].start_us;
  });

  LinkScheduler scheduler(SchedulerPolicy::http2_multiplex(win_bytes), 0,
                          ResourceKind::downlink(0), bandwidth_bps);
  std::vector<EndtimePrediction> result(streams.size());
  for (std::size_t i = 0; i < streams.size(); ++i) result[i].op = streams[i].op;

  double t = 0.0;
  std::size_t next = 0;
  while (next < order.size() || !scheduler.empty()) {
    while (next < order.size() && streams[order[next]].start_us <= t) {
      const auto& s = streams[order[next]];
      scheduler.add(s.op, s.size_bytes, static_cast<int>(order[next]));
      ++next;
    }
    if (scheduler.empty()) {
      t = streams[order[next]].start_us;
      continue;
    }
    Chunk chunk = scheduler.remove_chunk();
    t += chunk.remaining_us;  // sole worker: full bandwidth
    if (chunk.is_last) result[static_cast<std::size_t>(chunk.tag)].end_us = t;
  }
  return result;
}

}  // namespace asgdsim
