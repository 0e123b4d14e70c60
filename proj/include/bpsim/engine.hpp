#pragma once

#include <bpsim/backpressure.hpp>
#include <bpsim/controller.hpp>
#include <bpsim/traffic.hpp>
#include <bpsim/topology.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bpsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// max{0, u - o} + i + g.
constexpr double queue_update(double u, double o, double i, double g) noexcept {
  return (u - o > 0.0 ? u - o : 0.0) + i + g;
}
constexpr std::uint64_t queue_update(std::uint64_t u, std::uint64_t o, std::uint64_t i, std::uint64_t g) noexcept {
  return (u > o ? u - o : 0) + i + g;
}

/// Time average of aggregate-backlog samples. Throws std::invalid_argument on
/// an empty series.
double stability_metric(std::span<const double> samples);

/// 95% half-width of the mean via batch means (Student t).
double batch_means_half_width(std::span<const double> segment_values);

enum class RunAlgorithm : std::uint8_t { dvr_only, sbpr, fbpr, sbpr_nhops, fbpr_nhops, sbpr_stitch, fbpr_stitch };

std::optional<RunAlgorithm> parse_algorithm(std::string_view name);
std::string_view to_string(RunAlgorithm a);
/// "none", "nhops" or "stitch".
std::string_view stitch_name(RunAlgorithm a);

struct RunConfig {
  RunAlgorithm algorithm = RunAlgorithm::dvr_only;
  double duration_s = 600.0;
  double period_s = 10.0;
  bool prefix_granularity = false;
  double alarm_level = 0.0;
  double safety_fraction = kDefaultSafetyFraction;
  std::optional<double> idle_timeout_s;  // default: one period
  std::uint32_t max_hops = 64;
  std::size_t confidence_segments = 20;
  std::chrono::nanoseconds stitch_timeout = std::chrono::seconds(5);
  PeeringPreferences preferences;
};

struct MetricsReport {
  double throughput_bps = 0.0;  // peering-link traversal volume / duration
  double overflow_bps = 0.0;    // memory tail drops / duration
  double mean_latency_s = 0.0;  // over delivered batches; 0 when none
  std::vector<double> per_as_bytes;  // bytes sent on peering links, by source AS
  std::vector<double> per_as_share;
  std::vector<double> per_link_bytes;  // by link index, peering and internal
  std::uint64_t control_overhead_bytes = 0;
  std::uint64_t report_bytes = 0;
  std::uint64_t rule_message_bytes = 0;
  double stability_avg_backlog = 0.0;  // bytes

  double throughput_half_width = 0.0;
  double overflow_half_width = 0.0;
  double latency_half_width = 0.0;

  std::uint64_t generated_bytes = 0;
  std::uint64_t delivered_bytes = 0;
  std::uint64_t overflow_bytes = 0;
  std::uint64_t ttl_dropped_bytes = 0;
  std::uint64_t unroutable_bytes = 0;
  std::uint64_t queued_bytes = 0;     // held at routers at the end
  std::uint64_t in_flight_bytes = 0;  // propagating at the end
  std::uint64_t batches_generated = 0;
  std::uint64_t batches_delivered = 0;
  std::uint64_t internal_link_bytes = 0;

  std::size_t controller_ticks = 0;
  std::size_t rules_installed = 0;
  std::size_t queue_audit_checks = 0;
  std::size_t queue_audit_violations = 0;
  std::size_t conservation_violations = 0;
  std::size_t ordering_checks = 0;
  std::size_t ordering_violations = 0;
  std::size_t partial_stitches = 0;
  std::uint64_t events = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Per-batch trace hook for tests.
struct DeliveryRecord {
  std::uint64_t batch = 0;
  Commodity commodity{};
  double created_at = 0.0;
  double delivered_at = 0.0;
  std::uint32_t hops = 0;
};

struct RunInputs {
  const Topology& topology;
  TrafficScenario scenario;
  RunConfig config;
  /// Optional explicit arrivals instead of the Poisson generator.
  std::optional<std::vector<Batch>> scripted_batches;
  std::vector<DeliveryRecord>* deliveries = nullptr;
};

/// Deterministic discrete-event run. Throws ConfigError before simulating when
/// the inputs are inconsistent.
MetricsReport run(const RunInputs& in);

}  // namespace bpsim
