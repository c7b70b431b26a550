#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "asgdsim/metrics.hpp"

using namespace asgdsim;

namespace {

SyntheticTrace trace_with_completions(const std::vector<std::vector<double>>& per_worker) {
  SyntheticTrace trace;
  for (std::size_t w = 0; w < per_worker.size(); ++w) {
    for (std::size_t i = 0; i < per_worker[w].size(); ++i) {
      trace.step_completions.push_back(
          {static_cast<int>(w), static_cast<int>(i + 1), per_worker[w][i], 0});
    }
  }
  return trace;
}

std::vector<double> every_2s(int count) {
  std::vector<double> times;
  for (int i = 1; i <= count; ++i) times.push_back(i * 2e6);
  return times;
}

}  // namespace

TEST_CASE("steady steps give batch/period throughput") {
  const auto trace = trace_with_completions({every_2s(100)});
  const auto report = throughput(trace, 32.0, 50);
  CHECK(report.examples_per_sec == doctest::Approx(16.0));
  CHECK(report.workers == 1);
  CHECK(report.steps_counted == 50);
  CHECK(report.warmup_excluded == 50);
}

TEST_CASE("worker rates add up") {
  const auto trace = trace_with_completions({every_2s(100), every_2s(100)});
  const auto report = throughput(trace, 32.0, 50);
  CHECK(report.examples_per_sec == doctest::Approx(32.0));
  REQUIRE(report.per_worker_rates.size() == 2);
  CHECK(report.per_worker_rates[0] == doctest::Approx(16.0));

  double sum = 0.0;
  for (double rate : report.per_worker_rates) sum += rate;
  CHECK(report.examples_per_sec == doctest::Approx(sum).epsilon(1e-9));
}

TEST_CASE("warmup 50 on a 100-step trace uses the last 50 completions") {
  // First 50 steps run at a different cadence; only the last 50 count.
  std::vector<double> times;
  for (int i = 1; i <= 50; ++i) times.push_back(i * 5e6);        // slow start
  for (int i = 1; i <= 50; ++i) times.push_back(250e6 + i * 1e6);  // steady 1 s/step
  const auto report = throughput(trace_with_completions({times}), 10.0, 50);
  CHECK(report.steps_counted == 50);
  CHECK(report.examples_per_sec == doctest::Approx(10.0));
}

TEST_CASE("throughput is invariant under a uniform time shift") {
  auto base = trace_with_completions({every_2s(80)});
  auto shifted = base;
  for (auto& c : shifted.step_completions) c.completion_us += 12345678.0;
  const auto a = throughput(base, 16.0, 20);
  const auto b = throughput(shifted, 16.0, 20);
  CHECK(a.examples_per_sec == doctest::Approx(b.examples_per_sec).epsilon(1e-12));
}

TEST_CASE("too few steps per worker is an error") {
  const auto trace = trace_with_completions({every_2s(10)});
  CHECK_THROWS_AS(throughput(trace, 32.0, 10), InsufficientStepsError);
  CHECK_THROWS_AS(throughput(trace, 32.0, 50), InsufficientStepsError);
  CHECK_NOTHROW(throughput(trace, 32.0, 9));
}

TEST_CASE("cynthia closed form at the documented points") {
  CHECK(cynthia_throughput(4, 32.0, 1.0, 0.5, 0.2) == 64.0);
  CHECK(cynthia_throughput(1, 32.0, 1.0, 0.5, 0.9) ==
        doctest::Approx(32.0 / (1.0 + 2.0 * 0.5)).epsilon(1e-15));
  CHECK(cynthia_throughput(10, 32.0, 1.0, 0.5, 0.5) ==
        doctest::Approx(10.0 * 32.0 / (5.0 * 1.0 + 2.0 * 0.5)).epsilon(1e-15));
}

TEST_CASE("cynthia is non-decreasing and approaches K/(T_P U_1)") {
  const double k = 32.0, tp = 1.0, tc = 0.5, u1 = 0.2;
  double previous = 0.0;
  for (int w : {1, 2, 4, 8, 64, 1024}) {
    const double value = cynthia_throughput(w, k, tp, tc, u1);
    CHECK(value >= previous - 1e-12);
    previous = value;
  }
  const double limit = k / (tp * u1);
  // At W=1024 the deviation is 2 T_C / (1024 T_P U_1), below 1%.
  CHECK(cynthia_throughput(1024, k, tp, tc, u1) == doctest::Approx(limit).epsilon(0.01));
}

TEST_CASE("error stats conventions") {
  SUBCASE("identical lists are all zero") {
    const std::vector<EndtimeSample> ends = {{"a", 10.0}, {"b", 20.0}};
    const auto stats = multiplex_error_stats(ends, ends);
    CHECK(stats.average == 0.0);
    CHECK(stats.median == 0.0);
    CHECK(stats.p95 == 0.0);
    CHECK(stats.max == 0.0);
  }
  SUBCASE("documented median and nearest-rank percentile") {
    const std::vector<EndtimeSample> measured = {
        {"a", 100.0}, {"b", 100.0}, {"c", 100.0}, {"d", 100.0}};
    const std::vector<EndtimeSample> predicted = {
        {"a", 101.0}, {"b", 102.0}, {"c", 103.0}, {"d", 104.0}};
    const auto stats = multiplex_error_stats(predicted, measured);
    CHECK(stats.average == doctest::Approx(0.025));
    CHECK(stats.median == doctest::Approx(0.02));  // lower median
    CHECK(stats.p95 == doctest::Approx(0.04));     // nearest rank
    CHECK(stats.max == doctest::Approx(0.04));
  }
  SUBCASE("single op") {
    const auto stats = multiplex_error_stats({{"a", 110.0}}, {{"a", 100.0}});
    CHECK(stats.average == doctest::Approx(0.10));
    CHECK(stats.median == doctest::Approx(0.10));
    CHECK(stats.p95 == doctest::Approx(0.10));
    CHECK(stats.max == doctest::Approx(0.10));
  }
  SUBCASE("mismatched op sets") {
    CHECK_THROWS_AS(multiplex_error_stats({{"a", 1.0}}, {{"b", 1.0}}), MismatchedOpsError);
    CHECK_THROWS_AS(multiplex_error_stats({{"a", 1.0}, {"b", 1.0}}, {{"a", 1.0}}),
                    MismatchedOpsError);
  }
}

TEST_CASE("chrome trace export") {
  SUBCASE("empty trace serializes an empty event array") {
    const auto doc = nlohmann::json::parse(chrome_trace_json(SyntheticTrace{}));
    CHECK(doc.at("traceEvents").is_array());
    CHECK(doc.at("traceEvents").empty());
  }
  SUBCASE("segments map one-to-one onto complete events") {
    SyntheticTrace trace;
    trace.events.push_back({0, ResourceKind::downlink(0), "dl", 0.0, 10.0, 1});
    trace.events.push_back({0, ResourceKind::worker(), "fw", 10.0, 4.0, 1});
    trace.events.push_back({1, ResourceKind::downlink(0), "dl", 0.0, 20.0, 1});
    const auto doc = nlohmann::json::parse(chrome_trace_json(trace));
    const auto& events = doc.at("traceEvents");
    REQUIRE(events.size() == 3);
    CHECK(events[0].at("ph") == "X");
    CHECK(events[0].at("name") == "dl");
    CHECK(events[0].at("ts") == 0.0);
    CHECK(events[0].at("dur") == 10.0);
    CHECK(events[0].at("pid") == 0);
    CHECK(events[0].at("tid") == "downlink:0");

    std::set<int> pids;
    for (const auto& e : events) pids.insert(e.at("pid").get<int>());
    CHECK(pids == std::set<int>{0, 1});
  }
}
