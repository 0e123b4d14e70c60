#include <bpsim/policy.hpp>

#include <algorithm>
#include <ostream>

namespace bpsim {

CommoditySpace CommoditySpace::as_level(const Topology& t) {
  CommoditySpace s;
  s.per_as_ = 1;
  for (std::size_t a = 0; a < t.as_count(); ++a) {
    auto as = id_cast<AsIdx>(a);
    s.hosts_.push_back(as);
    s.prefixes_.push_back(t.aggregate_prefix(as));
    s.by_prefix_.emplace(t.aggregate_prefix(as), id_cast<Commodity>(a));
  }
  return s;
}

CommoditySpace CommoditySpace::prefix_level(const Topology& t) {
  CommoditySpace s;
  s.per_as_ = t.prefixes_per_as();
  s.prefix_granularity_ = true;
  for (std::size_t a = 0; a < t.as_count(); ++a) {
    for (const auto& p : t.prefixes(id_cast<AsIdx>(a))) {
      s.by_prefix_.emplace(p, id_cast<Commodity>(s.hosts_.size()));
      s.hosts_.push_back(id_cast<AsIdx>(a));
      s.prefixes_.push_back(p);
    }
  }
  return s;
}

CommoditySpace CommoditySpace::custom(std::vector<AsIdx> hosts, std::vector<Ipv4Prefix> prefixes) {
  CommoditySpace s;
  s.prefix_granularity_ = true;
  s.hosts_ = std::move(hosts);
  s.prefixes_ = std::move(prefixes);
  s.prefixes_.resize(s.hosts_.size());
  for (std::size_t i = 0; i < s.prefixes_.size(); ++i) s.by_prefix_.emplace(s.prefixes_[i], id_cast<Commodity>(i));
  return s;
}

std::optional<Commodity> CommoditySpace::find(const Ipv4Prefix& p) const {
  if (auto it = by_prefix_.find(p); it != by_prefix_.end()) return it->second;
  return std::nullopt;
}

RoutingTable::RoutingTable(std::size_t nodes)
    : nodes_(nodes), next_(nodes * nodes, kNone), hops_(nodes * nodes, kNone) {}

std::optional<RoutingTable::Node> RoutingTable::next_hop(Node from, Node dest) const {
  auto n = next_[from * nodes_ + dest];
  if (n == kNone) return std::nullopt;
  return n;
}

std::optional<std::size_t> RoutingTable::hop_count(Node from, Node dest) const {
  auto h = hops_[from * nodes_ + dest];
  if (h == kNone) return std::nullopt;
  return h;
}

void RoutingTable::set(Node from, Node dest, Node next, std::size_t hops) {
  next_[from * nodes_ + dest] = next;
  hops_[from * nodes_ + dest] = static_cast<Node>(hops);
}

RoutingTable bellman_ford(std::span<const std::vector<RoutingTable::Node>> out_neighbors) {
  using Node = RoutingTable::Node;
  const std::size_t n = out_neighbors.size();
  constexpr Node inf = RoutingTable::kNone;

  // dist[v * n + d], next[v * n + d]
  std::vector<Node> dist(n * n, inf), next(n * n, inf);
  for (std::size_t v = 0; v < n; ++v) {
    dist[v * n + v] = 0;
    next[v * n + v] = static_cast<Node>(v);
  }
  std::vector<Node> fresh_dist(dist), fresh_next(next);
  // At most n-1 rounds on a graph with n nodes.
  for (std::size_t round = 0; round + 1 < std::max<std::size_t>(n, 2); ++round) {
    bool changed = false;
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t d = 0; d < n; ++d) {
        if (v == d) continue;
        Node best = inf, via = inf;
        for (Node k : out_neighbors[v]) {
          Node dk = dist[k * n + d];
          if (dk == inf) continue;
          if (dk + 1 < best) {  // neighbours ascending: first minimum is the lowest id
            best = dk + 1;
            via = k;
          }
        }
        fresh_dist[v * n + d] = best;
        fresh_next[v * n + d] = via;
        if (best != dist[v * n + d] || via != next[v * n + d]) changed = true;
      }
    }
    dist.swap(fresh_dist);
    next.swap(fresh_next);
    if (!changed) break;
  }

  RoutingTable table(n);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t d = 0; d < n; ++d)
      if (dist[v * n + d] != inf) table.set(static_cast<Node>(v), static_cast<Node>(d), next[v * n + d], dist[v * n + d]);
  return table;
}

RoutingTable compute_dvr(const Topology& t, Granularity granularity) {
  using Node = RoutingTable::Node;
  std::vector<std::vector<Node>> adj;
  if (granularity == Granularity::as_level) {
    adj.resize(t.as_count());
    for (std::size_t a = 0; a < t.as_count(); ++a)
      for (auto l : t.peering_links_from(id_cast<AsIdx>(a))) adj[a].push_back(static_cast<Node>(idx(t.dest_as(l))));
  } else {
    adj.resize(t.router_count());
    for (std::size_t r = 0; r < t.router_count(); ++r)
      for (auto l : t.out_links(id_cast<RouterIdx>(r))) adj[r].push_back(static_cast<Node>(idx(t.link(l).to)));
  }
  for (auto& v : adj) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return bellman_ford(adj);
}

RuleSet::RuleSet(std::size_t as_count, std::size_t commodity_count)
    : commodities_(commodity_count), via_(as_count * commodity_count, kEmpty) {}

void RuleSet::install(AsIdx a, Commodity c, LinkIdx via) {
  auto& slot = via_[idx(a) * commodities_ + idx(c)];
  if (slot == kEmpty) ++count_;
  slot = static_cast<std::uint32_t>(idx(via));
}

void RuleSet::remove(AsIdx a, Commodity c) {
  auto& slot = via_[idx(a) * commodities_ + idx(c)];
  if (slot != kEmpty) --count_;
  slot = kEmpty;
}

void RuleSet::clear() {
  std::fill(via_.begin(), via_.end(), kEmpty);
  count_ = 0;
}

std::optional<LinkIdx> RuleSet::find(AsIdx a, Commodity c) const {
  auto v = via_[idx(a) * commodities_ + idx(c)];
  if (v == kEmpty) return std::nullopt;
  return id_cast<LinkIdx>(v);
}

std::optional<AsIdx> apply_policy(const PolicyView& view, AsIdx node, Commodity commodity) {
  AsIdx host = view.commodities.host(commodity);
  if (node == host) return node;
  if (view.rules) {
    if (auto via = view.rules->find(node, commodity)) return view.topology.dest_as(*via);
  }
  auto next = view.dvr.next_hop(static_cast<RoutingTable::Node>(idx(node)), static_cast<RoutingTable::Node>(idx(host)));
  if (!next) return std::nullopt;
  return id_cast<AsIdx>(*next);
}

TraversalSet traverse(const PolicyView& view, AsIdx origin, Commodity commodity, std::size_t max_steps) {
  TraversalSet ts;
  ts.origin = origin;
  ts.commodity = commodity;
  ts.visited.push_back(origin);
  std::vector<bool> seen(view.topology.as_count(), false);
  seen[idx(origin)] = true;
  AsIdx cur = origin;
  for (std::size_t step = 0; step <= max_steps; ++step) {
    auto next = apply_policy(view, cur, commodity);
    if (!next) {
      ts.no_route = true;
      break;
    }
    if (*next == cur) {
      ts.terminated_at_fixed_point = true;
      break;
    }
    if (step == max_steps) break;
    if (seen[idx(*next)]) {
      ts.visited.push_back(*next);
      ts.loop_detected = true;
      break;
    }
    seen[idx(*next)] = true;
    ts.visited.push_back(*next);
    cur = *next;
  }
  return ts;
}

bool loop_on_insert(const PolicyView& view, AsIdx pathlet_endpoint, Commodity commodity) {
  const std::size_t bound = view.topology.as_count();
  AsIdx cur = pathlet_endpoint;
  for (std::size_t step = 0; step < bound; ++step) {
    auto next = apply_policy(view, cur, commodity);
    if (!next || *next == cur) return false;
    if (*next == pathlet_endpoint) return true;
    cur = *next;
  }
  return false;
}

std::size_t count_loops(const PolicyView& view) {
  std::size_t loops = 0;
  const std::size_t n = view.topology.as_count();
  for (std::size_t c = 0; c < view.commodities.size(); ++c)
    for (std::size_t a = 0; a < n; ++a)
      if (traverse(view, id_cast<AsIdx>(a), id_cast<Commodity>(c), n).loop_detected) ++loops;
  return loops;
}

void write_traversals_csv(std::ostream& out, const PolicyView& view, std::span<const TraversalSet> sets) {
  out << "origin,commodity,visited_sequence,loop_flag\n";
  for (const auto& s : sets) {
    out << view.topology.as(s.origin).as_id << ',' << to_string(view.commodities.prefix(s.commodity)) << ',';
    for (std::size_t i = 0; i < s.visited.size(); ++i) {
      if (i) out << ';';
      out << view.topology.as(s.visited[i]).as_id;
    }
    out << ',' << (s.loop_detected ? 1 : 0) << '\n';
  }
}

}  // namespace bpsim
