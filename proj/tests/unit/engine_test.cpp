#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bpsim/engine.hpp>

#include "../support/oracles.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>

using namespace bpsim;

namespace {

const std::filesystem::path kFixtures = BPSIM_FIXTURE_DIR;

Topology desk10() {
  return load_topology(kFixtures / "desk10/nodes.csv", kFixtures / "desk10/links.csv", kFixtures / "desk10/as.csv",
                       kFixtures / "desk10/relations.txt");
}

// A -> B -> C on the equator, 150 km apart (0.5 ms per hop), 10 Gbps.
Topology three_in_line(std::uint64_t memory = kDefaultRouterMemory) {
  const double step_deg = 150'000.0 / kEarthRadius * 180.0 / std::numbers::pi;
  TopologyDraft d;
  for (int i = 0; i < 3; ++i) {
    auto id = std::to_string(i + 1);
    d.ases.push_back({id, "", ""});
    d.routers.push_back({"R" + id, id, {0.0, i * step_deg}, memory});
  }
  d.links = {{"L12", "R1", "R2", 10e9}, {"L21", "R2", "R1", 10e9}, {"L23", "R2", "R3", 10e9},
             {"L32", "R3", "R2", 10e9}};
  return Topology::build(d);
}

Batch batch_at(std::uint64_t id, double t, RouterIdx src, Commodity c) {
  Batch b;
  b.id = id;
  b.created_at = t;
  b.source = src;
  b.commodity = c;
  return b;
}

void check_accounting(const MetricsReport& m) {
  CHECK(m.generated_bytes == m.delivered_bytes + m.overflow_bytes + m.ttl_dropped_bytes + m.unroutable_bytes +
                                 m.queued_bytes + m.in_flight_bytes);
  CHECK(m.conservation_violations == 0);
  CHECK(m.queue_audit_violations == 0);
  CHECK(m.throughput_bps >= 0.0);
  CHECK(m.overflow_bps >= 0.0);
}

}  // namespace

TEST_CASE("queue_update") {
  CHECK(queue_update(0.0, 0.0, 0.0, 0.0) == 0.0);
  CHECK(queue_update(5.0, 7.0, 2.0, 1.0) == 3.0);
  CHECK(queue_update(5.0, 3.0, 2.0, 1.0) == 5.0);
  CHECK(queue_update(std::uint64_t{5}, std::uint64_t{7}, std::uint64_t{2}, std::uint64_t{1}) == 3);
}

TEST_CASE("stability metric") {
  std::vector<double> flat(17, 42.0), ramp{0.0, 10.0, 20.0};
  CHECK(stability_metric(flat) == 42.0);
  CHECK(stability_metric(ramp) == 10.0);
  CHECK_THROWS_AS(stability_metric(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("batch means half width") {
  // 20 segments alternating 9 and 11: sd = sqrt(20/19), t_{0.975,19} = 2.093024
  std::vector<double> v;
  for (int i = 0; i < 20; ++i) v.push_back(i % 2 ? 11.0 : 9.0);
  CHECK(batch_means_half_width(v) == doctest::Approx(2.093024054 * std::sqrt(20.0 / 19.0) / std::sqrt(20.0)));
  CHECK(batch_means_half_width(std::vector<double>{1.0}) == 0.0);
}

TEST_CASE("algorithm names") {
  for (auto a : {RunAlgorithm::dvr_only, RunAlgorithm::sbpr, RunAlgorithm::fbpr, RunAlgorithm::sbpr_nhops,
                 RunAlgorithm::fbpr_nhops, RunAlgorithm::sbpr_stitch, RunAlgorithm::fbpr_stitch})
    CHECK(parse_algorithm(to_string(a)) == a);
  CHECK(stitch_name(RunAlgorithm::fbpr_nhops) == "nhops");
  CHECK(stitch_name(RunAlgorithm::sbpr_stitch) == "stitch");
  CHECK(stitch_name(RunAlgorithm::fbpr) == "none");
  CHECK_FALSE(parse_algorithm("bpr"));
}

TEST_CASE("zero traffic") {
  auto t = desk10();
  TrafficScenario sc;
  sc.mean_router_load_bps = 0.0;
  RunConfig cfg;
  cfg.algorithm = RunAlgorithm::fbpr_nhops;
  cfg.duration_s = 100.0;
  auto m = run({t, sc, cfg, std::nullopt, nullptr});
  CHECK(m.throughput_bps == 0.0);
  CHECK(m.overflow_bps == 0.0);
  CHECK(m.batches_delivered == 0);
  CHECK(m.mean_latency_s == 0.0);
  CHECK(m.rules_installed == 0);
}

TEST_CASE("store-and-forward delivery time") {
  auto t = three_in_line();
  REQUIRE(t.link(*t.find_link("L12")).latency_s == doctest::Approx(0.5e-3).epsilon(1e-12));
  std::vector<Batch> one{batch_at(0, 1.0, RouterIdx{0}, Commodity{2})};
  std::vector<DeliveryRecord> log;
  RunConfig cfg;
  cfg.duration_s = 100.0;
  auto m = run({t, {}, cfg, one, &log});
  REQUIRE(log.size() == 1);
  const double expected = 2.0 * (50.0 * 1048576.0 * 8.0 / 10e9) + 1e-3;  // 84.886 ms
  CHECK(log[0].delivered_at - log[0].created_at == doctest::Approx(expected).epsilon(1e-12));
  CHECK(log[0].hops == 2);
  CHECK(m.mean_latency_s == doctest::Approx(expected).epsilon(1e-12));
  // throughput counts both peering traversals
  CHECK(m.throughput_bps == doctest::Approx(2.0 * 50.0 * 1048576.0 * 8.0 / 100.0));
  CHECK(m.per_as_bytes[0] == 50.0 * 1048576.0);
  CHECK(m.per_as_bytes[1] == 50.0 * 1048576.0);
  check_accounting(m);
}

TEST_CASE("back-to-back batches pipeline through the twin buffer") {
  auto t = three_in_line();
  std::vector<Batch> two{batch_at(0, 1.0, RouterIdx{0}, Commodity{2}), batch_at(1, 1.0, RouterIdx{0}, Commodity{2})};
  std::vector<DeliveryRecord> log;
  RunConfig cfg;
  cfg.duration_s = 100.0;
  run({t, {}, cfg, two, &log});
  REQUIRE(log.size() == 2);
  const double tx = 50.0 * 1048576.0 * 8.0 / 10e9;
  // the second batch trails the first by exactly one serialisation time
  CHECK(log[1].delivered_at - log[0].delivered_at == doctest::Approx(tx).epsilon(1e-12));
}

TEST_CASE("shared memory overflows by tail drop") {
  // Room for two waiting batches at each router.
  auto t = three_in_line(2 * kDefaultBatchBytes);
  std::vector<Batch> burst;
  for (std::uint64_t i = 0; i < 10; ++i) burst.push_back(batch_at(i, 1.0, RouterIdx{0}, Commodity{2}));
  RunConfig cfg;
  cfg.duration_s = 100.0;
  auto m = run({t, {}, cfg, burst, nullptr});
  CHECK(m.overflow_bytes > 0);
  CHECK(m.overflow_bytes % kDefaultBatchBytes == 0);
  CHECK(m.delivered_bytes + m.overflow_bytes == 10 * kDefaultBatchBytes);
  check_accounting(m);
}

TEST_CASE("hop limit drops batches") {
  auto t = three_in_line();
  std::vector<Batch> one{batch_at(0, 1.0, RouterIdx{0}, Commodity{2})};
  RunConfig cfg;
  cfg.duration_s = 100.0;
  cfg.max_hops = 1;
  auto m = run({t, {}, cfg, one, nullptr});
  CHECK(m.ttl_dropped_bytes == kDefaultBatchBytes);
  CHECK(m.batches_delivered == 0);
  check_accounting(m);
}

TEST_CASE("config errors are raised before simulating") {
  auto t = desk10();
  RunConfig cfg;
  cfg.duration_s = 50.0;
  CHECK_THROWS_AS(run({t, {}, cfg, std::nullopt, nullptr}), ConfigError);
  cfg.duration_s = 100.0;
  cfg.period_s = 0.0;
  CHECK_THROWS_AS(run({t, {}, cfg, std::nullopt, nullptr}), ConfigError);
  cfg.period_s = 10.0;
  TrafficScenario sc;
  sc.mode = TrafficMode::skewed;
  CHECK_THROWS_AS(run({t, sc, cfg, std::nullopt, nullptr}), ConfigError);
  auto lonely = oracle::graph(3, {{0, 1}});
  CHECK_THROWS_AS(run({lonely, {}, cfg, std::nullopt, nullptr}), ConfigError);
}

TEST_CASE("full runs: determinism and invariants") {
  auto t = randomize_capacities(desk10(), 5e9, 15e9, 3);
  for (auto alg : {RunAlgorithm::dvr_only, RunAlgorithm::sbpr, RunAlgorithm::fbpr, RunAlgorithm::fbpr_nhops,
                   RunAlgorithm::fbpr_stitch}) {
    CAPTURE(to_string(alg));
    TrafficScenario sc;
    sc.seed = 8;
    RunConfig cfg;
    cfg.algorithm = alg;
    cfg.duration_s = 100.0;
    auto a = run({t, sc, cfg, std::nullopt, nullptr});
    auto b = run({t, sc, cfg, std::nullopt, nullptr});
    CHECK(a == b);
    check_accounting(a);
    CHECK(a.queue_audit_checks > 0);
    CHECK(a.ordering_violations == 0);
    // ticks at T..9T; the tick at t = duration only audits
    CHECK(a.controller_ticks == (alg == RunAlgorithm::dvr_only ? 0 : 9));
    const double share_sum = std::accumulate(a.per_as_share.begin(), a.per_as_share.end(), 0.0);
    CHECK(std::abs(share_sum - 1.0) <= 1e-6);
    if (alg == RunAlgorithm::dvr_only) {
      CHECK(a.control_overhead_bytes == 0);
      CHECK(a.rules_installed == 0);
    } else {
      CHECK(a.rules_installed > 0);
      // Reports are full snapshots: one entry per foreign commodity, every AS, every tick.
      const std::size_t per_report = message_size(MessageKind::report, t.as_count() - 1);
      CHECK(a.report_bytes == a.controller_ticks * t.as_count() * per_report);
    }
    sc.seed = 9;
    CHECK_FALSE(run({t, sc, cfg, std::nullopt, nullptr}) == a);
  }
}

TEST_CASE("control traffic does not depend on data congestion") {
  auto t = desk10();
  RunConfig cfg;
  cfg.algorithm = RunAlgorithm::fbpr;
  cfg.duration_s = 100.0;
  TrafficScenario light, heavy;
  light.mean_router_load_bps = 1e9;
  heavy.mean_router_load_bps = 6.4e10;
  auto a = run({t, light, cfg, std::nullopt, nullptr});
  auto b = run({t, heavy, cfg, std::nullopt, nullptr});
  CHECK(b.overflow_bytes > 0);
  CHECK(a.controller_ticks == b.controller_ticks);
  CHECK(a.report_bytes == b.report_bytes);
}

TEST_CASE("prefix granularity scales report size") {
  auto t = with_prefixes(desk10(), 10);
  RunConfig cfg;
  cfg.algorithm = RunAlgorithm::fbpr;
  cfg.duration_s = 100.0;
  cfg.prefix_granularity = true;
  auto m = run({t, {}, cfg, std::nullopt, nullptr});
  const std::size_t per_report = message_size(MessageKind::report, (t.as_count() - 1) * 10);
  CHECK(m.report_bytes == m.controller_ticks * t.as_count() * per_report);
  check_accounting(m);
}

TEST_CASE("skewed traffic enters at the input AS") {
  auto t = desk10();
  TrafficScenario sc;
  sc.mode = TrafficMode::skewed;
  sc.input_as = AsIdx{4};
  RunConfig cfg;
  cfg.duration_s = 100.0;
  auto m = run({t, sc, cfg, std::nullopt, nullptr});
  check_accounting(m);
  CHECK(m.batches_generated > 0);
}
