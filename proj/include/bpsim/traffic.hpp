#pragma once

#include <bpsim/backpressure.hpp>
#include <bpsim/commodity.hpp>
#include <bpsim/topology.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace bpsim {

inline constexpr std::uint64_t kDefaultBatchBytes = 50ULL << 20;

struct PopularityMatrix {
  std::vector<double> p;    // p_i
  std::vector<double> pij;  // row-major n x n
  std::size_t size() const noexcept { return p.size(); }
  double at(std::size_t i, std::size_t j) const { return pij[i * p.size() + j]; }
};

/// p_i = d_i / sum d, p_ij = p_j / (1 - p_i), p_ii = 0. Needs >= 2 ASes with
/// positive degree (std::invalid_argument otherwise).
PopularityMatrix popularity(std::span<const std::size_t> degrees);
PopularityMatrix popularity(const Topology& t);

enum class TrafficMode : std::uint8_t { linear, skewed };

struct TrafficScenario {
  TrafficMode mode = TrafficMode::linear;
  std::optional<AsIdx> input_as;          // skewed mode only
  double mean_router_load_bps = 3.2e10;   // 4 GB/s
  std::uint64_t seed = 1;
  std::uint64_t batch_bytes = kDefaultBatchBytes;
};

struct Batch {
  std::uint64_t id = 0;
  std::uint64_t size = kDefaultBatchBytes;
  RouterIdx source{};
  Commodity commodity{};
  double created_at = 0.0;
  double delivered_at = -1.0;
  bool dropped = false;
};

/// Poisson batch arrivals on the external NIC of every router. Each router
/// owns an RNG stream derived from (seed, router), so the sequence at one
/// router does not depend on how the others are consumed. All routers of an
/// AS share the same rate and destination law.
class TrafficGenerator {
 public:
  TrafficGenerator(const Topology& t, const CommoditySpace& comm, const PopularityMatrix& pm,
                   const TrafficScenario& scenario);

  /// Batch arrival rate of a router, batches/s (0 for idle routers).
  double rate(RouterIdx r) const { return rates_[idx(r)]; }
  /// Time of the router's next arrival (+inf when idle).
  double peek(RouterIdx r) const { return next_[idx(r)]; }
  /// Consumes the router's next arrival.
  Batch pop(RouterIdx r);

  /// All arrivals in [t0, t1), ordered by time then router.
  std::vector<Batch> generate(double t0, double t1);

 private:
  const Topology& topo_;
  const CommoditySpace& comm_;
  TrafficScenario scenario_;
  std::vector<double> rates_;
  std::vector<double> next_;
  std::vector<std::mt19937_64> rng_;
  std::vector<std::discrete_distribution<std::size_t>> dest_;  // per AS
  std::uint64_t next_id_ = 0;
};

struct GenerationRecord {
  double time = 0.0;
  AsIdx as{};
  Commodity commodity{};
  double bytes = 0.0;
};

/// G_(n,c) = bytes generated in [now - window, now). Empty history gives zeros.
ForecastView forecast(std::span<const GenerationRecord> history, std::size_t as_count, std::size_t commodity_count,
                      double window, double now);

/// Streaming form of `forecast` for callers that only query at period ends.
class WindowForecaster {
 public:
  WindowForecaster(std::size_t as_count, std::size_t commodity_count)
      : commodities_(commodity_count), current_(as_count * commodity_count, 0.0), last_(as_count, commodity_count) {}
  void record(AsIdx a, Commodity c, double bytes) { current_[idx(a) * commodities_ + idx(c)] += bytes; }
  /// Closes the window: the forecast becomes what was recorded since the last roll.
  void roll();
  const ForecastView& forecast() const noexcept { return last_; }

 private:
  std::size_t commodities_;
  std::vector<double> current_;
  ForecastView last_;
};

}  // namespace bpsim
