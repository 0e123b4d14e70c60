#pragma once

#include <bpsim/commodity.hpp>
#include <bpsim/ids.hpp>
#include <bpsim/topology.hpp>

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace bpsim {

enum class Granularity : std::uint8_t { as_level, router_level };

/// Shortest-hop next hops between graph nodes (AS or router indices).
/// Unreachable pairs have no entry.
class RoutingTable {
 public:
  using Node = std::uint32_t;
  static constexpr Node kNone = std::numeric_limits<Node>::max();

  RoutingTable() = default;
  explicit RoutingTable(std::size_t nodes);

  std::size_t node_count() const noexcept { return nodes_; }
  bool reachable(Node from, Node dest) const { return hops_[from * nodes_ + dest] != kNone; }
  std::optional<Node> next_hop(Node from, Node dest) const;
  std::optional<std::size_t> hop_count(Node from, Node dest) const;

  void set(Node from, Node dest, Node next, std::size_t hops);

 private:
  std::size_t nodes_ = 0;
  std::vector<Node> next_;
  std::vector<Node> hops_;
};

/// Synchronous distance-vector relaxation with unit link weights. Each node
/// only reads its out-neighbours' previous-round vectors. Equal-cost next
/// hops resolve to the lowest neighbour index. `out_neighbors[n]` must be
/// sorted ascending.
RoutingTable bellman_ford(std::span<const std::vector<RoutingTable::Node>> out_neighbors);

RoutingTable compute_dvr(const Topology& t, Granularity granularity);

/// Installed priority rules: at most one via-link per (AS, commodity).
class RuleSet {
 public:
  RuleSet() = default;
  RuleSet(std::size_t as_count, std::size_t commodity_count);

  void install(AsIdx a, Commodity c, LinkIdx via);
  void remove(AsIdx a, Commodity c);
  void clear();
  std::optional<LinkIdx> find(AsIdx a, Commodity c) const;
  std::size_t size() const noexcept { return count_; }
  std::size_t commodity_count() const noexcept { return commodities_; }

 private:
  static constexpr std::uint32_t kEmpty = std::numeric_limits<std::uint32_t>::max();
  std::size_t commodities_ = 0;
  std::size_t count_ = 0;
  std::vector<std::uint32_t> via_;
};

/// Everything `apply_policy` reads. All references must outlive the view.
struct PolicyView {
  const Topology& topology;
  const RoutingTable& dvr;  // AS-level table
  const CommoditySpace& commodities;
  const RuleSet* rules = nullptr;
};

/// Next AS for data of `commodity` held at `node`: the node itself when it
/// hosts the commodity, the far end of an installed priority rule, else the
/// DV next hop. nullopt signals "no route".
std::optional<AsIdx> apply_policy(const PolicyView& view, AsIdx node, Commodity commodity);

struct TraversalSet {
  AsIdx origin{};
  Commodity commodity{};
  std::vector<AsIdx> visited;
  bool terminated_at_fixed_point = false;
  bool loop_detected = false;
  bool no_route = false;
};

/// Iterates apply_policy from `origin`; stops at a fixed point, after
/// `max_steps` moves, on a missing route, or when a node repeats. On a loop
/// the repeated node is appended so the cycle is visible.
TraversalSet traverse(const PolicyView& view, AsIdx origin, Commodity commodity, std::size_t max_steps);

/// True when walking the combined policy from the end of a freshly inserted
/// BP pathlet comes back to that end node within |nodes| steps.
bool loop_on_insert(const PolicyView& view, AsIdx pathlet_endpoint, Commodity commodity);

/// Traverses every (origin, commodity) pair and counts loops.
std::size_t count_loops(const PolicyView& view);

/// Debug dump: `origin,commodity,visited_sequence,loop_flag`.
void write_traversals_csv(std::ostream& out, const PolicyView& view, std::span<const TraversalSet> sets);

}  // namespace bpsim
