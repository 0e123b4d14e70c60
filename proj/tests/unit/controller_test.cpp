#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bpsim/controller.hpp>

#include "../support/oracles.hpp"

#include <cmath>
#include <random>

using namespace bpsim;

namespace {

constexpr double GB = 1073741824.0;

CongestionReport report(const Topology& t, const std::string& as, std::initializer_list<std::pair<AsIdx, double>> loads,
                        double ts) {
  CongestionReport r;
  r.as_id = as;
  r.timestamp = ts;
  for (auto [host, gb] : loads) r.entries.push_back({t.aggregate_prefix(host), gb});
  return r;
}

}  // namespace

TEST_CASE("message sizes") {
  CHECK(message_size(MessageKind::report, 0) == 8);
  CHECK(message_size(MessageKind::report, 10) == 138);
  CHECK(message_size(MessageKind::rule, 100) == 1308);

  CongestionReport r{"64512", {}, 0.0};
  CHECK(encode(r).size() == 8);
  for (int i = 0; i < 10; ++i) r.entries.push_back({Ipv4Prefix{0x0A000000u + static_cast<unsigned>(i << 8), 24}, 1.5});
  CHECK(encode(r).size() == 138);
  RuleMessage m{"7", {}};
  for (int i = 0; i < 100; ++i) m.rules.push_back({Ipv4Prefix{static_cast<std::uint32_t>(i), 32}, "L" + std::to_string(i)});
  CHECK(encode(m).size() == 1308);
}

TEST_CASE("wire format golden bytes") {
  CongestionReport r{"AS1", {{Ipv4Prefix{0xC0A80100u, 24}, 2.0}}, 0.0};
  // 2.0 as IEEE-754 double is 0x4000000000000000
  const std::vector<std::uint8_t> want{'A', 'S', '1', 0, 0, 0, 0, 0, 0xC0, 0xA8, 0x01, 0x00, 24,
                                       0x40, 0, 0, 0, 0, 0, 0, 0};
  CHECK(encode(r) == want);
  auto back = decode_report(want);
  CHECK(back.as_id == "AS1");
  CHECK(back.entries == r.entries);

  RuleMessage m{"12345678", {{Ipv4Prefix{0x01020300u, 24}, "P0001a"}}};
  const std::vector<std::uint8_t> rule_bytes{'1', '2', '3', '4', '5', '6', '7', '8', 1, 2, 3, 0, 24,
                                             'P', '0', '0', '0', '1', 'a', 0, 0};
  CHECK(encode(m) == rule_bytes);
  auto mb = decode_rules(rule_bytes);
  CHECK(mb.as_id == m.as_id);
  CHECK(mb.rules == m.rules);
}

TEST_CASE("codec errors") {
  CHECK_THROWS_AS(encode(CongestionReport{"123456789", {}, 0.0}), CodecError);
  CHECK_THROWS_AS(encode(RuleMessage{"1", {{Ipv4Prefix{}, "way-too-long"}}}), CodecError);
  std::vector<std::uint8_t> short_msg(7, 0);
  CHECK_THROWS_AS(decode_report(short_msg), CodecError);
  std::vector<std::uint8_t> ragged(8 + 12, 0);
  CHECK_THROWS_AS(decode_rules(ragged), CodecError);
}

TEST_CASE("codec round trip on random messages") {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 200; ++i) {
    CongestionReport r;
    r.as_id = std::to_string(rng() % 100000000);
    std::size_t n = rng() % 40;
    for (std::size_t k = 0; k < n; ++k)
      r.entries.push_back({Ipv4Prefix{static_cast<std::uint32_t>(rng()), static_cast<std::uint8_t>(rng() % 33)},
                           std::ldexp(static_cast<double>(rng() % 1000000), -10)});
    auto bytes = encode(r);
    CHECK(bytes.size() == message_size(MessageKind::report, n));
    auto back = decode_report(bytes);
    CHECK(back.as_id == r.as_id);
    CHECK(back.entries == r.entries);
  }
}

TEST_CASE("drift bound algebra") {
  CHECK(drift_bound(0.0, {3.0, 7.0}) == 0.0);
  CHECK(max_acceptable_T({2.0, 1.0}, 4.0) == 2.0);
  CHECK_THROWS_AS(max_acceptable_T({0.0, 1.0}, 4.0), std::invalid_argument);
  CHECK_THROWS_AS(max_acceptable_T({1.0, 1.0}, 0.0), std::invalid_argument);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> exp10(-3.0, 6.0);
  for (int i = 0; i < 100; ++i) {
    DriftBoundParams p{std::pow(10.0, exp10(rng)), std::pow(10.0, exp10(rng))};
    const double rho2 = 2.0 * p.beta / p.alpha;
    // relative to the size of either term at the root
    CHECK(std::abs(drift_bound(rho2, p)) <= 1e-12 * (p.alpha * rho2 * rho2));
    const double l_max = std::pow(10.0, exp10(rng));
    const double T = max_acceptable_T(p, l_max);
    CHECK(std::abs(drift_bound(T, p) - l_max) <= 1e-12 * std::max(l_max, p.alpha * T * T));
    CHECK(drift_bound(T * (1 + 1e-6), p) > l_max);
  }
}

TEST_CASE("drift parameters on a two-AS fixture") {
  // A <-> B at 8 Gbps each way = 1e9 bytes/s; commodities: A, B.
  auto t = oracle::graph(2, {{0, 1}}, {{8e9, 8e9}});
  auto comm = CommoditySpace::as_level(t);
  BacklogView u(2, 2);
  u.set(AsIdx{0}, Commodity{1}, 100.0);
  ForecastView g(2, 2);
  g.set(AsIdx{0}, Commodity{1}, 50.0);  // lambda = 5 bytes/s over T = 10
  auto p = drift_params(t, comm, u, g, 10.0);
  const double mu = 1e9;
  CHECK(p.alpha == doctest::Approx(3 * (mu * mu + mu * mu) + (mu * mu + (mu + 5) * (mu + 5))).epsilon(1e-15));
  CHECK(p.beta == doctest::Approx(100.0 * (mu - mu - 5.0)));
}

TEST_CASE("rule lifecycle") {
  InstalledRule r{{AsIdx{0}, Commodity{1}, LinkIdx{0}, 1.0, 1.0}, 0.0, 5.0, 10.0, RuleState::active};
  BacklogView u(1, 2);
  SUBCASE("backlog below the safety level") {
    u.set(AsIdx{0}, Commodity{1}, 9.0);
    CHECK(rule_lifecycle(6.0, {r}, u, 10.0)[0].state == RuleState::expired);
  }
  SUBCASE("idle too long") {
    u.set(AsIdx{0}, Commodity{1}, 50.0);
    CHECK(rule_lifecycle(15.5, {r}, u, 10.0)[0].state == RuleState::expired);
  }
  SUBCASE("active, recently hit, above safety") {
    u.set(AsIdx{0}, Commodity{1}, 50.0);
    auto out = rule_lifecycle(14.0, {r}, u, 10.0);
    CHECK(out[0].state == RuleState::active);
    CHECK(out.size() == 1);
  }
}

TEST_CASE("controller tick") {
  // A - B - C line; A is congested towards C.
  auto t = oracle::graph(3, {{0, 1}, {1, 2}});
  auto comm = CommoditySpace::as_level(t);
  auto dvr = compute_dvr(t, Granularity::as_level);
  ControllerConfig cfg;
  cfg.algorithm = Algorithm::fbpr;
  Controller ctl(t, comm, dvr, cfg);

  SUBCASE("zero reports, zero messages") { CHECK(ctl.tick(10.0, {}).empty()); }

  SUBCASE("one congested AS, one beneficial neighbour") {
    std::vector<CongestionReport> reps{report(t, "1", {{AsIdx{2}, 3.0}}, 10.0), report(t, "2", {{AsIdx{2}, 1.0}}, 10.0)};
    // B's own report also says it sends to C, so B->C is a second rule; silence B to keep the trace single.
    reps.pop_back();
    auto msgs = ctl.tick(10.0, reps);
    REQUIRE(msgs.size() == 1);
    CHECK(msgs[0].as_id == "1");
    REQUIRE(msgs[0].rules.size() == 1);
    CHECK(msgs[0].rules[0].prefix == t.aggregate_prefix(AsIdx{2}));
    CHECK(msgs[0].rules[0].link_id == "L1-2");
    CHECK(ctl.backlogs().at(AsIdx{0}, Commodity{2}) == 3.0 * GB);
    auto resolved = resolve_rules(msgs[0], t, comm);
    REQUIRE(resolved.size() == 1);
    CHECK(resolved[0].first == Commodity{2});
  }

  SUBCASE("rejected links stay out until re-enabled") {
    std::vector<CongestionReport> reps{report(t, "1", {{AsIdx{2}, 3.0}}, 10.0)};
    const auto l12 = *t.find_link("L1-2");
    ctl.set_rejection_callback([&](AsIdx, Commodity, LinkIdx l) { return l == l12; });
    CHECK(ctl.tick(10.0, reps).empty());
    ctl.set_rejection_callback({});
    reps[0].timestamp = 20.0;
    CHECK(ctl.tick(20.0, reps).empty());
    CHECK_FALSE(ctl.usable_links()[idx(l12)]);
    ctl.reenable_link(l12);
    reps[0].timestamp = 30.0;
    CHECK(ctl.tick(30.0, reps).size() == 1);
  }

  SUBCASE("unknown AS is skipped") {
    std::vector<CongestionReport> reps{report(t, "1", {{AsIdx{2}, 3.0}}, 10.0)};
    reps.push_back({"999", {{t.aggregate_prefix(AsIdx{2}), 5.0}}, 10.0});
    CHECK(ctl.tick(10.0, reps).size() == 1);
    CHECK(ctl.skipped_reports() == 1);
  }

  SUBCASE("entries go stale after two periods") {
    std::vector<CongestionReport> first{report(t, "1", {{AsIdx{2}, 3.0}}, 10.0)};
    ctl.tick(10.0, first);
    std::vector<CongestionReport> other{report(t, "2", {{AsIdx{0}, 0.5}}, 30.0)};
    ctl.tick(30.0, other);
    CHECK(ctl.backlogs().at(AsIdx{0}, Commodity{2}) == 0.0);
  }
}

TEST_CASE("every controller algorithm emits loop-free or ordered output") {
  auto t = oracle::graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}});
  auto comm = CommoditySpace::as_level(t);
  auto dvr = compute_dvr(t, Granularity::as_level);
  for (auto alg : {Algorithm::sbpr, Algorithm::fbpr, Algorithm::nhops_stitch, Algorithm::bp_dv_stitch}) {
    ControllerConfig cfg;
    cfg.algorithm = alg;
    Controller ctl(t, comm, dvr, cfg);
    std::vector<CongestionReport> reps{report(t, "1", {{AsIdx{4}, 6.0}, {AsIdx{2}, 2.0}}, 10.0),
                                       report(t, "2", {{AsIdx{4}, 1.0}}, 10.0),
                                       report(t, "4", {{AsIdx{0}, 3.0}}, 10.0)};
    auto msgs = ctl.tick(10.0, reps);
    CHECK_FALSE(msgs.empty());
    if (alg == Algorithm::nhops_stitch || alg == Algorithm::bp_dv_stitch)
      CHECK(oracle::loops_under(t, comm, dvr, ctl.last_proposals()) == 0);
    for (std::size_t i = 1; i < msgs.size(); ++i) CHECK(id_less(msgs[i - 1].as_id, msgs[i].as_id));
  }
}
