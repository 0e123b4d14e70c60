#pragma once

#include <bpsim/commodity.hpp>
#include <bpsim/ids.hpp>
#include <bpsim/policy.hpp>
#include <bpsim/topology.hpp>

#include <chrono>
#include <iosfwd>
#include <memory>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace bpsim {

/// Sub-commodities covered by a super-prefix commodity.
struct CommodityHierarchy {
  std::vector<std::vector<Commodity>> children;  // indexed by commodity
};

/// U_(n,c)(t): queued bytes per (AS, commodity). An AS may track a
/// super-prefix as a single backlog while its neighbours track the
/// sub-prefixes; an untracked entry reads as the sum over its children.
class BacklogView {
 public:
  BacklogView() = default;
  BacklogView(std::size_t as_count, std::size_t commodity_count, double snapshot_time = 0.0);

  std::size_t as_count() const noexcept { return as_count_; }
  std::size_t commodity_count() const noexcept { return commodities_; }
  double snapshot_time() const noexcept { return snapshot_time_; }

  double at(AsIdx a, Commodity c) const;
  void set(AsIdx a, Commodity c, double bytes);
  void add(AsIdx a, Commodity c, double bytes) { set(a, c, raw(a, c) + bytes); }
  double raw(AsIdx a, Commodity c) const { return u_[idx(a) * commodities_ + idx(c)]; }

  bool tracked(AsIdx a, Commodity c) const { return tracked_[idx(a) * commodities_ + idx(c)] != 0; }
  void untrack(AsIdx a, Commodity c) { tracked_[idx(a) * commodities_ + idx(c)] = 0; }
  void set_hierarchy(std::shared_ptr<const CommodityHierarchy> h) { hierarchy_ = std::move(h); }

  double total() const;

 private:
  std::size_t as_count_ = 0;
  std::size_t commodities_ = 0;
  double snapshot_time_ = 0.0;
  std::vector<double> u_;
  std::vector<char> tracked_;
  std::shared_ptr<const CommodityHierarchy> hierarchy_;
};

/// G_(n,c)^{t->t+T}: bytes expected to be generated locally over the next period.
class ForecastView {
 public:
  ForecastView() = default;
  ForecastView(std::size_t as_count, std::size_t commodity_count)
      : commodities_(commodity_count), g_(as_count * commodity_count, 0.0) {}

  /// Mean-rate form, g = rate * T.
  static ForecastView from_rates(std::span<const double> rate_bytes_per_s, std::size_t commodity_count,
                                 double period_s);

  double at(AsIdx a, Commodity c) const { return g_[idx(a) * commodities_ + idx(c)]; }
  void set(AsIdx a, Commodity c, double bytes) { g_[idx(a) * commodities_ + idx(c)] = bytes; }
  std::size_t commodity_count() const noexcept { return commodities_; }

 private:
  std::size_t commodities_ = 0;
  std::vector<double> g_;
};

/// Directional routing preferences: (from, to) pairs that may not carry
/// priority rules.
struct PeeringPreferences {
  std::set<std::pair<AsIdx, AsIdx>> denied;
  bool permits(AsIdx from, AsIdx to) const { return !denied.contains({from, to}); }
};

/// Per (AS, commodity): the neighbour ASes a rule may point at.
class NeighborFilter {
 public:
  NeighborFilter() = default;
  NeighborFilter(std::size_t as_count, std::size_t commodity_count);

  /// Every adjacent peer that the preferences permit.
  static NeighborFilter all_peers(const Topology& t, const CommoditySpace& comm,
                                  const PeeringPreferences& prefs = {});

  std::span<const AsIdx> allowed(AsIdx a, Commodity c) const { return allowed_[slot(a, c)]; }
  bool allows(AsIdx a, Commodity c, AsIdx neighbor) const;
  void allow(AsIdx a, Commodity c, AsIdx neighbor);
  void deny(AsIdx a, Commodity c, AsIdx neighbor);

 private:
  std::size_t slot(AsIdx a, Commodity c) const { return idx(a) * commodities_ + idx(c); }
  std::size_t commodities_ = 0;
  std::vector<std::vector<AsIdx>> allowed_;
};

struct RuleProposal {
  AsIdx owner{};
  Commodity commodity{};
  LinkIdx via{};
  double potential = 0.0;        // ΔQ*_l = max{0, U_n - U_d}
  double foresight_delta = 0.0;  // Δ = U_n - U_d - G_d
  friend bool operator==(const RuleProposal&, const RuleProposal&) = default;
};

struct BpOptions {
  /// Commodities with U_(n,c) below this are left alone.
  double alarm_level = 0.0;
  /// Prefix granularity: each link takes up to ceil(N_p / N_L) rules, N_L
  /// being the source router's usable peering links. Otherwise one per link.
  bool prefix_rule_budget = false;
  /// Links the controller may use; empty means all.
  std::vector<bool> usable_links;
};

std::size_t prefix_rule_budget(std::size_t prefixes_per_as, std::size_t router_links);

/// Standard backpressure: per link, the commodity with the largest backlog
/// differential, one link per (node, commodity).
std::vector<RuleProposal> sbpr(const BacklogView& backlogs, const Topology& t, const CommoditySpace& comm,
                               const NeighborFilter& filter, const BpOptions& opts = {});

/// Foresight-enabled backpressure: the recipient's forecast G is subtracted
/// inside the argmax.
std::vector<RuleProposal> fbpr(const BacklogView& backlogs, const ForecastView& forecasts, const Topology& t,
                               const CommoditySpace& comm, const NeighborFilter& filter, const BpOptions& opts = {});

inline constexpr std::size_t kExhaustiveReorderLimit = 8;

/// Assignment of potentials to parallel links maximising sum(mu_l * dQ_l).
/// result[i] is the index into `potentials` placed on link i. Exhaustive up to
/// kExhaustiveReorderLimit links, greedy beyond that.
std::vector<std::size_t> multi_link_reorder(std::span<const double> capacities, std::span<const double> potentials);
double reorder_score(std::span<const double> capacities, std::span<const double> potentials,
                     std::span<const std::size_t> assignment);

/// allowed(n, c) = peers n' with hop(n', host c) < hop(n, host c).
NeighborFilter nhops_filter(const Topology& t, const CommoditySpace& comm, const RoutingTable& dvr,
                            const PeeringPreferences& prefs = {});

std::vector<RuleProposal> nhops_stitch(const BacklogView& backlogs, const ForecastView& forecasts, const Topology& t,
                                       const CommoditySpace& comm, const RoutingTable& dvr,
                                       const PeeringPreferences& prefs = {}, const BpOptions& opts = {});

struct StitchResult {
  std::vector<RuleProposal> proposals;
  bool partial = false;  // timed out; proposals are the loop-free subset found so far
  std::size_t iterations = 0;
  std::size_t excluded_neighbors = 0;
};

/// Exploratory stitching: rerun the derivation, excluding every neighbour
/// whose pathlet loops back under the combined policy, until no loop is left.
StitchResult bp_dv_stitch(const BacklogView& backlogs, const ForecastView& forecasts, const Topology& t,
                          const CommoditySpace& comm, const RoutingTable& dvr, std::chrono::nanoseconds timeout,
                          const PeeringPreferences& prefs = {}, const BpOptions& opts = {});

RuleSet to_rule_set(std::span<const RuleProposal> proposals, std::size_t as_count, std::size_t commodity_count);

/// Rules whose endpoints break the strict U+G descent (zero for FBPR output).
std::size_t ordering_violations(std::span<const RuleProposal> proposals, const Topology& t,
                                const BacklogView& backlogs, const ForecastView& forecasts);

/// Debug dump: `owner_as,commodity,via_link,potential_bytes`.
void write_proposals_csv(std::ostream& out, std::span<const RuleProposal> proposals, const Topology& t,
                         const CommoditySpace& comm);

}  // namespace bpsim
