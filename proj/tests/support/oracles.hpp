#pragma once

// Independent reference implementations and small fixture builders. Nothing
// here calls the routine it is meant to check.

#include <bpsim/backpressure.hpp>
#include <bpsim/commodity.hpp>
#include <bpsim/policy.hpp>
#include <bpsim/topology.hpp>

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using namespace bpsim;

/// One router per AS, ASes named "1".."n" (so index i is AS "i+1"), a
/// bidirectional peering link per edge. `caps` (optional) gives the capacity
/// of each direction, a->b first.
inline Topology graph(std::size_t n, const std::vector<std::pair<int, int>>& edges,
                      const std::vector<std::pair<double, double>>& caps = {}) {
  TopologyDraft d;
  for (std::size_t i = 0; i < n; ++i) {
    auto id = std::to_string(i + 1);
    d.ases.push_back({id, "AS" + id, "XX"});
    d.routers.push_back({"R" + id, id, {45.0 + static_cast<double>(i), 7.0}, kDefaultRouterMemory});
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [a, b] = edges[e];
    auto sa = std::to_string(a + 1), sb = std::to_string(b + 1);
    std::optional<double> ab, ba;
    if (e < caps.size()) {
      ab = caps[e].first;
      ba = caps[e].second;
    } else {
      ab = ba = 10e9;
    }
    d.links.push_back({"L" + sa + "-" + sb, "R" + sa, "R" + sb, ab});
    d.links.push_back({"L" + sb + "-" + sa, "R" + sb, "R" + sa, ba});
  }
  return Topology::build(std::move(d));
}

/// Random connected graph: a random spanning tree plus extra edges.
inline std::vector<std::pair<int, int>> random_edges(std::mt19937_64& rng, int n, double extra_p) {
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<bool>> has(n, std::vector<bool>(n, false));
  for (int v = 1; v < n; ++v) {
    int u = std::uniform_int_distribution<int>(0, v - 1)(rng);
    edges.emplace_back(u, v);
    has[u][v] = has[v][u] = true;
  }
  std::bernoulli_distribution coin(extra_p);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (!has[a][b] && coin(rng)) {
        edges.emplace_back(a, b);
        has[a][b] = has[b][a] = true;
      }
  return edges;
}

/// BFS hop distances over AS adjacency (dist[from][to], -1 unreachable).
inline std::vector<std::vector<int>> bfs_hops(const Topology& t) {
  const std::size_t n = t.as_count();
  std::vector<std::vector<int>> adj(n);
  for (const auto& l : t.links())
    if (l.kind == LinkKind::peering) adj[idx(t.owner(l.from))].push_back(static_cast<int>(idx(t.owner(l.to))));
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  for (std::size_t s = 0; s < n; ++s) {
    std::deque<int> q{static_cast<int>(s)};
    dist[s][s] = 0;
    while (!q.empty()) {
      int v = q.front();
      q.pop_front();
      for (int w : adj[v])
        if (dist[s][w] < 0) {
          dist[s][w] = dist[s][v] + 1;
          q.push_back(w);
        }
    }
  }
  return dist;
}

struct WalkResult {
  bool loop = false;
  bool reached = false;
};

/// Follows "rule if present, else shortest-path next hop" from `origin`
/// towards the host of `c`, using only the BFS oracle and a plain
/// (owner, commodity) -> next AS map for rules.
inline WalkResult walk(const Topology& t, const std::vector<std::vector<int>>& dist,
                       const std::vector<std::vector<int>>& rule_next, std::size_t host, std::size_t c,
                       std::size_t origin, const RoutingTable& dvr) {
  const std::size_t n = t.as_count();
  std::vector<bool> seen(n, false);
  std::size_t cur = origin;
  seen[cur] = true;
  for (std::size_t step = 0; step <= n; ++step) {
    if (cur == host) return {false, true};
    std::size_t next;
    if (rule_next[cur][c] >= 0) {
      next = static_cast<std::size_t>(rule_next[cur][c]);
    } else {
      auto nh = dvr.next_hop(static_cast<RoutingTable::Node>(cur), static_cast<RoutingTable::Node>(host));
      if (!nh) return {false, false};
      next = *nh;
      // The DV step itself must make strict progress.
      if (dist[next][host] != dist[cur][host] - 1) return {true, false};
    }
    if (seen[next]) return {true, false};
    seen[next] = true;
    cur = next;
  }
  return {true, false};
}

/// Exhaustive loop check of a proposal subset over every (origin, commodity).
inline std::size_t loops_under(const Topology& t, const CommoditySpace& comm, const RoutingTable& dvr,
                               const std::vector<RuleProposal>& deployed) {
  const std::size_t n = t.as_count();
  auto dist = bfs_hops(t);
  std::vector<std::vector<int>> rule_next(n, std::vector<int>(comm.size(), -1));
  for (const auto& p : deployed) rule_next[idx(p.owner)][idx(p.commodity)] = static_cast<int>(idx(t.dest_as(p.via)));
  std::size_t loops = 0;
  for (std::size_t c = 0; c < comm.size(); ++c)
    for (std::size_t o = 0; o < n; ++o)
      if (walk(t, dist, rule_next, idx(comm.host(id_cast<Commodity>(c))), c, o, dvr).loop) ++loops;
  return loops;
}

/// Reference backpressure derivation by repeated global argmax: at every
/// node, pick the (link, commodity) pair with the largest positive
/// differential among free links and unassigned commodities, ties to the
/// lowest commodity then lowest link, until nothing positive remains.
/// `g` (optional) is subtracted at the receiving side.
inline std::vector<RuleProposal> argmax_bp(const Topology& t, const CommoditySpace& comm,
                                           const std::vector<std::vector<double>>& u,
                                           const std::vector<std::vector<double>>* g = nullptr) {
  std::vector<RuleProposal> out;
  for (std::size_t a = 0; a < t.as_count(); ++a) {
    std::vector<std::size_t> links;
    for (std::size_t l = 0; l < t.link_count(); ++l)
      if (t.link(id_cast<LinkIdx>(l)).kind == LinkKind::peering && idx(t.source_as(id_cast<LinkIdx>(l))) == a)
        links.push_back(l);
    std::vector<bool> link_used(t.link_count(), false), comm_used(comm.size(), false);
    while (true) {
      double best = 0.0;
      std::optional<std::pair<std::size_t, std::size_t>> pick;  // (c, l)
      for (std::size_t c = 0; c < comm.size(); ++c) {
        if (comm_used[c] || idx(comm.host(id_cast<Commodity>(c))) == a || u[a][c] <= 0.0) continue;
        for (auto l : links) {
          if (link_used[l]) continue;
          std::size_t d = idx(t.dest_as(id_cast<LinkIdx>(l)));
          double delta = u[a][c] - u[d][c] - (g ? (*g)[d][c] : 0.0);
          if (delta > best) {  // strict: earlier (lower c, lower l) wins ties
            best = delta;
            pick = {c, l};
          }
        }
      }
      if (!pick) break;
      auto [c, l] = *pick;
      comm_used[c] = true;
      link_used[l] = true;
      std::size_t d = idx(t.dest_as(id_cast<LinkIdx>(l)));
      out.push_back({id_cast<AsIdx>(a), id_cast<Commodity>(c), id_cast<LinkIdx>(l), std::max(0.0, u[a][c] - u[d][c]),
                     best});
    }
  }
  std::sort(out.begin(), out.end(), [](const RuleProposal& x, const RuleProposal& y) {
    if (x.owner != y.owner) return x.owner < y.owner;
    if (x.via != y.via) return x.via < y.via;
    return x.commodity < y.commodity;
  });
  return out;
}

/// Best score over all permutations, and the first permutation (in
/// lexicographic order) that reaches it.
inline std::pair<double, std::vector<std::size_t>> exhaustive_reorder(const std::vector<double>& mu,
                                                                      const std::vector<double>& dq) {
  std::vector<std::size_t> perm(mu.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> arg;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += mu[i] * dq[perm[i]];
    if (s > best) {
      best = s;
      arg = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best, arg};
}

inline BacklogView backlogs_from(const std::vector<std::vector<double>>& u) {
  BacklogView b(u.size(), u.empty() ? 0 : u[0].size());
  for (std::size_t a = 0; a < u.size(); ++a)
    for (std::size_t c = 0; c < u[a].size(); ++c) b.set(id_cast<AsIdx>(a), id_cast<Commodity>(c), u[a][c]);
  return b;
}

inline ForecastView forecasts_from(const std::vector<std::vector<double>>& g) {
  ForecastView f(g.size(), g.empty() ? 0 : g[0].size());
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t c = 0; c < g[a].size(); ++c) f.set(id_cast<AsIdx>(a), id_cast<Commodity>(c), g[a][c]);
  return f;
}

/// Random backlog matrix, hosts' own entries zero. Values are multiples of
/// 1/8 GB-ish units so ties occur now and then.
inline std::vector<std::vector<double>> random_matrix(std::mt19937_64& rng, std::size_t n, std::size_t comm,
                                                      const CommoditySpace& cs, int levels) {
  std::uniform_int_distribution<int> lvl(0, levels);
  std::vector<std::vector<double>> u(n, std::vector<double>(comm, 0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t c = 0; c < comm; ++c)
      if (idx(cs.host(id_cast<Commodity>(c))) != a) u[a][c] = static_cast<double>(lvl(rng)) * (1u << 27);
  return u;
}

}  // namespace oracle
