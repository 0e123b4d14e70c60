#pragma once

#include <bpsim/engine.hpp>
#include <bpsim/topology.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bpsim {

/// Invalid plan. `what()` starts with "line N:" when the location is known.
class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Sweep : std::uint8_t { load, period_T, distribution, prefixes, topology_size };
enum class Preset : std::uint8_t { paper, desk };

std::optional<Sweep> parse_sweep(std::string_view s);
std::string_view to_string(Sweep s);

struct TopologySource {
  std::filesystem::path nodes, links, as_file;
  std::optional<std::filesystem::path> relations;
  std::optional<std::size_t> top_k;
  bool p2p_only = true;
};

struct ExperimentPlan {
  Sweep sweep = Sweep::load;
  std::vector<RunAlgorithm> algorithms;
  std::size_t repetitions = 1;
  std::vector<std::uint64_t> seeds;  // one per repetition
  TopologySource topology;
  double capacity_low_bps = 5e9;
  double capacity_high_bps = 15e9;
  double duration_s = 3600.0;
  double period_s = 10.0;
  TrafficMode traffic_mode = TrafficMode::linear;
  std::optional<std::string> input_as;  // skewed mode
  double mean_router_load_bps = 3.2e10;
  std::uint64_t traffic_seed = 1;
  std::uint64_t batch_bytes = kDefaultBatchBytes;
  /// Sweep values: bps (load), seconds (period_T), N_p (prefixes), top_k
  /// (topology_size). For the distribution sweep: "linear" or an input AS id.
  std::vector<std::string> points;
  std::vector<std::pair<std::string, std::string>> deny;  // preference pairs (from, to)
  double stitch_timeout_s = 5.0;
  std::filesystem::path base_dir;  // relative topology paths resolve against it

  static ExperimentPlan defaults(Preset p);
  /// Parses YAML over the preset defaults; throws PlanError.
  static ExperimentPlan from_yaml(const std::string& text, Preset p = Preset::paper,
                                  const std::filesystem::path& base_dir = {});
  static ExperimentPlan from_file(const std::filesystem::path& file, Preset p = Preset::paper);

  void validate() const;
  std::size_t run_count() const { return points.size() * algorithms.size() * repetitions; }
};

struct RunSpec {
  std::size_t run_id = 0;
  std::size_t point_index = 0;
  std::string point;
  RunAlgorithm algorithm = RunAlgorithm::dvr_only;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  double load_bps = 0.0;
  double period_s = 0.0;
  double duration_s = 0.0;
  std::size_t n_prefixes = 1;
  std::optional<std::size_t> top_k;
  TrafficMode mode = TrafficMode::linear;
  std::optional<std::string> input_as;
};

struct RunResult {
  RunSpec spec;
  std::size_t n_ases = 0;
  std::vector<std::string> as_ids;
  MetricsReport metrics;
  std::optional<std::string> error;
};

/// Points x algorithms x repetitions, in that nesting order.
std::vector<RunSpec> expand(const ExperimentPlan& plan);

/// Executes every run on `workers` threads; results come back in run_id order.
std::vector<RunResult> execute(const ExperimentPlan& plan, std::size_t workers,
                               const std::function<void(const RunResult&)>& on_done = {});

/// Per-AS peering shares of a run; in skewed runs the input AS is left out
/// and the rest renormalised.
std::vector<double> transit_shares(const RunResult& r);

/// Pearson correlation; NaN when either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// metrics.csv, shares.csv and summary.json.
void write_outputs(const std::filesystem::path& dir, const ExperimentPlan& plan, const std::vector<RunResult>& results);

inline constexpr const char* kMetricsHeader =
    "run_id,algorithm,stitch,T_s,load_bps,n_ases,n_prefixes,seed,throughput_bps,overflow_bps,mean_latency_s,"
    "overhead_bytes,stability_avg_backlog";
inline constexpr const char* kSharesHeader = "run_id,as_id,dvr_share,bpr_share";

}  // namespace bpsim
