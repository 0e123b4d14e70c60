#include <bpsim/backpressure.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <ostream>

#include <spdlog/spdlog.h>

namespace bpsim {

BacklogView::BacklogView(std::size_t as_count, std::size_t commodity_count, double snapshot_time)
    : as_count_(as_count),
      commodities_(commodity_count),
      snapshot_time_(snapshot_time),
      u_(as_count * commodity_count, 0.0),
      tracked_(as_count * commodity_count, 1) {}

double BacklogView::at(AsIdx a, Commodity c) const {
  if (tracked(a, c) || !hierarchy_ || hierarchy_->children.size() <= idx(c) || hierarchy_->children[idx(c)].empty())
    return raw(a, c);
  double sum = 0.0;
  for (auto child : hierarchy_->children[idx(c)]) sum += at(a, child);
  return sum;
}

void BacklogView::set(AsIdx a, Commodity c, double bytes) {
  u_[idx(a) * commodities_ + idx(c)] = bytes < 0.0 ? 0.0 : bytes;
}

double BacklogView::total() const { return std::accumulate(u_.begin(), u_.end(), 0.0); }

ForecastView ForecastView::from_rates(std::span<const double> rate_bytes_per_s, std::size_t commodity_count,
                                      double period_s) {
  ForecastView f(rate_bytes_per_s.size() / std::max<std::size_t>(commodity_count, 1), commodity_count);
  for (std::size_t i = 0; i < rate_bytes_per_s.size(); ++i) f.g_[i] = rate_bytes_per_s[i] * period_s;
  return f;
}

NeighborFilter::NeighborFilter(std::size_t as_count, std::size_t commodity_count)
    : commodities_(commodity_count), allowed_(as_count * commodity_count) {}

NeighborFilter NeighborFilter::all_peers(const Topology& t, const CommoditySpace& comm,
                                         const PeeringPreferences& prefs) {
  NeighborFilter f(t.as_count(), comm.size());
  for (std::size_t a = 0; a < t.as_count(); ++a) {
    auto as = id_cast<AsIdx>(a);
    std::vector<AsIdx> peers;
    for (auto nb : t.as_neighbors(as))
      if (prefs.permits(as, nb)) peers.push_back(nb);
    for (std::size_t c = 0; c < comm.size(); ++c) f.allowed_[f.slot(as, id_cast<Commodity>(c))] = peers;
  }
  return f;
}

bool NeighborFilter::allows(AsIdx a, Commodity c, AsIdx neighbor) const {
  const auto& v = allowed_[slot(a, c)];
  return std::binary_search(v.begin(), v.end(), neighbor);
}

void NeighborFilter::allow(AsIdx a, Commodity c, AsIdx neighbor) {
  auto& v = allowed_[slot(a, c)];
  auto it = std::lower_bound(v.begin(), v.end(), neighbor);
  if (it == v.end() || *it != neighbor) v.insert(it, neighbor);
}

void NeighborFilter::deny(AsIdx a, Commodity c, AsIdx neighbor) {
  auto& v = allowed_[slot(a, c)];
  auto it = std::lower_bound(v.begin(), v.end(), neighbor);
  if (it != v.end() && *it == neighbor) v.erase(it);
}

std::size_t prefix_rule_budget(std::size_t prefixes_per_as, std::size_t router_links) {
  if (router_links == 0) return 0;
  return std::max<std::size_t>(1, (prefixes_per_as + router_links - 1) / router_links);
}

double reorder_score(std::span<const double> capacities, std::span<const double> potentials,
                     std::span<const std::size_t> assignment) {
  double s = 0.0;
  for (std::size_t i = 0; i < capacities.size(); ++i) s += capacities[i] * potentials[assignment[i]];
  return s;
}

std::vector<std::size_t> multi_link_reorder(std::span<const double> capacities, std::span<const double> potentials) {
  const std::size_t n = capacities.size();
  if (potentials.size() != n) throw std::invalid_argument("multi_link_reorder: one potential per link expected");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  if (n <= 1) return perm;

  if (n > kExhaustiveReorderLimit) {
    static std::once_flag noted;
    std::call_once(noted, [n] { spdlog::info("multi_link_reorder: {} parallel links, using greedy assignment", n); });
    std::vector<std::size_t> links(n), pots(n);
    std::iota(links.begin(), links.end(), 0);
    std::iota(pots.begin(), pots.end(), 0);
    std::stable_sort(links.begin(), links.end(), [&](auto x, auto y) { return capacities[x] > capacities[y]; });
    std::stable_sort(pots.begin(), pots.end(), [&](auto x, auto y) { return potentials[x] > potentials[y]; });
    for (std::size_t i = 0; i < n; ++i) perm[links[i]] = pots[i];
    return perm;
  }

  std::vector<std::size_t> best = perm;
  double best_score = reorder_score(capacities, potentials, perm);
  while (std::next_permutation(perm.begin(), perm.end())) {
    double s = reorder_score(capacities, potentials, perm);
    // Summation order differs per permutation; ignore rounding-level gains.
    if (s > best_score + 1e-12 * std::abs(best_score)) {
      best_score = s;
      best = perm;
    }
  }
  return best;
}

namespace {

struct Candidate {
  double delta;
  double potential;
  Commodity commodity;
  LinkIdx link;
};

std::vector<RuleProposal> derive(const BacklogView& backlogs, const ForecastView* forecasts, const Topology& t,
                                 const CommoditySpace& comm, const NeighborFilter& filter, const BpOptions& opts) {
  const std::size_t n_comm = comm.size();
  auto usable = [&](LinkIdx l) { return opts.usable_links.empty() || opts.usable_links[idx(l)]; };

  std::vector<RuleProposal> out;
  std::vector<Candidate> cands;
  std::vector<char> visited(n_comm);
  std::vector<std::size_t> budget(t.link_count(), 0);
  std::vector<std::vector<std::size_t>> per_link;  // indices into `out` for the node being processed

  for (std::size_t a = 0; a < t.as_count(); ++a) {
    const auto n = id_cast<AsIdx>(a);
    cands.clear();
    for (auto l : t.peering_links_from(n)) {
      if (!usable(l)) continue;
      const auto d = t.dest_as(l);
      for (std::size_t ci = 0; ci < n_comm; ++ci) {
        const auto c = id_cast<Commodity>(ci);
        if (comm.host(c) == n || !backlogs.tracked(n, c)) continue;
        const double u = backlogs.at(n, c);
        if (u <= 0.0 || u < opts.alarm_level) continue;
        if (!filter.allows(n, c, d)) continue;
        const double ud = backlogs.at(d, c);
        const double delta = forecasts ? u - ud - forecasts->at(d, c) : u - ud;
        if (!(delta > 0.0)) continue;
        cands.push_back({delta, std::max(0.0, u - ud), c, l});
      }
    }
    if (cands.empty()) continue;
    std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
      if (x.delta != y.delta) return x.delta > y.delta;
      if (x.commodity != y.commodity) return x.commodity < y.commodity;
      return x.link < y.link;
    });

    for (auto l : t.peering_links_from(n)) {
      if (!usable(l)) continue;
      if (!opts.prefix_rule_budget) {
        budget[idx(l)] = 1;
        continue;
      }
      std::size_t router_links = 0;
      for (auto rl : t.out_links(t.link(l).from))
        if (t.link(rl).kind == LinkKind::peering && usable(rl)) ++router_links;
      budget[idx(l)] = prefix_rule_budget(comm.per_as(), router_links);
    }

    std::fill(visited.begin(), visited.end(), 0);
    const std::size_t first = out.size();
    for (const auto& cand : cands) {
      if (visited[idx(cand.commodity)] || budget[idx(cand.link)] == 0) continue;
      visited[idx(cand.commodity)] = 1;
      --budget[idx(cand.link)];
      out.push_back({n, cand.commodity, cand.link, cand.potential, cand.delta});
    }

    // Multi-links: permute the per-link bundles across parallel links to the
    // same neighbour so the largest potentials ride the largest capacities.
    std::vector<LinkIdx> links(t.peering_links_from(n).begin(), t.peering_links_from(n).end());
    std::erase_if(links, [&](LinkIdx l) { return !usable(l); });
    std::vector<bool> grouped(links.size(), false);
    for (std::size_t i = 0; i < links.size(); ++i) {
      if (grouped[i]) continue;
      std::vector<LinkIdx> group;
      for (std::size_t j = i; j < links.size(); ++j) {
        if (t.dest_as(links[j]) == t.dest_as(links[i])) {
          group.push_back(links[j]);
          grouped[j] = true;
        }
      }
      if (group.size() < 2) continue;
      bool same_budget = true;
      std::vector<double> caps, pots;
      std::vector<std::vector<std::size_t>> bundles(group.size());
      for (std::size_t g = 0; g < group.size(); ++g) {
        caps.push_back(t.link(group[g]).capacity_bps);
        double p = 0.0;
        for (std::size_t k = first; k < out.size(); ++k) {
          if (out[k].via == group[g]) {
            bundles[g].push_back(k);
            p += out[k].potential;
          }
        }
        pots.push_back(p);
      }
      if (opts.prefix_rule_budget) {
        // Bundles only move between links with the same rule budget.
        std::size_t b0 = prefix_rule_budget(comm.per_as(), 1);
        for (std::size_t g = 0; g < group.size(); ++g) {
          std::size_t router_links = 0;
          for (auto rl : t.out_links(t.link(group[g]).from))
            if (t.link(rl).kind == LinkKind::peering && usable(rl)) ++router_links;
          std::size_t b = prefix_rule_budget(comm.per_as(), router_links);
          if (g == 0) b0 = b;
          if (b != b0) same_budget = false;
        }
      }
      if (!same_budget) continue;
      auto assignment = multi_link_reorder(caps, pots);
      for (std::size_t g = 0; g < group.size(); ++g)
        for (auto k : bundles[assignment[g]]) out[k].via = group[g];
    }
  }

  std::sort(out.begin(), out.end(), [](const RuleProposal& x, const RuleProposal& y) {
    if (x.owner != y.owner) return x.owner < y.owner;
    if (x.via != y.via) return x.via < y.via;
    return x.commodity < y.commodity;
  });
  return out;
}

std::vector<RuleProposal> loop_inducing(std::span<const RuleProposal> props, const Topology& t,
                                        const CommoditySpace& comm, const RoutingTable& dvr) {
  RuleSet rules = to_rule_set(props, t.as_count(), comm.size());
  PolicyView view{t, dvr, comm, &rules};
  std::vector<RuleProposal> bad;
  // props are sorted by owner, i.e. ascending pathlet start point
  for (const auto& p : props)
    if (loop_on_insert(view, t.dest_as(p.via), p.commodity)) bad.push_back(p);
  return bad;
}

}  // namespace

std::vector<RuleProposal> sbpr(const BacklogView& backlogs, const Topology& t, const CommoditySpace& comm,
                               const NeighborFilter& filter, const BpOptions& opts) {
  return derive(backlogs, nullptr, t, comm, filter, opts);
}

std::vector<RuleProposal> fbpr(const BacklogView& backlogs, const ForecastView& forecasts, const Topology& t,
                               const CommoditySpace& comm, const NeighborFilter& filter, const BpOptions& opts) {
  return derive(backlogs, &forecasts, t, comm, filter, opts);
}

NeighborFilter nhops_filter(const Topology& t, const CommoditySpace& comm, const RoutingTable& dvr,
                            const PeeringPreferences& prefs) {
  using Node = RoutingTable::Node;
  NeighborFilter f(t.as_count(), comm.size());
  for (std::size_t a = 0; a < t.as_count(); ++a) {
    auto n = id_cast<AsIdx>(a);
    for (std::size_t ci = 0; ci < comm.size(); ++ci) {
      auto c = id_cast<Commodity>(ci);
      auto host = static_cast<Node>(idx(comm.host(c)));
      auto own = dvr.hop_count(static_cast<Node>(a), host);
      if (!own) continue;
      for (auto nb : t.as_neighbors(n)) {
        if (!prefs.permits(n, nb)) continue;
        auto theirs = dvr.hop_count(static_cast<Node>(idx(nb)), host);
        if (theirs && *theirs < *own) f.allow(n, c, nb);
      }
    }
  }
  return f;
}

std::vector<RuleProposal> nhops_stitch(const BacklogView& backlogs, const ForecastView& forecasts, const Topology& t,
                                       const CommoditySpace& comm, const RoutingTable& dvr,
                                       const PeeringPreferences& prefs, const BpOptions& opts) {
  return fbpr(backlogs, forecasts, t, comm, nhops_filter(t, comm, dvr, prefs), opts);
}

StitchResult bp_dv_stitch(const BacklogView& backlogs, const ForecastView& forecasts, const Topology& t,
                          const CommoditySpace& comm, const RoutingTable& dvr, std::chrono::nanoseconds timeout,
                          const PeeringPreferences& prefs, const BpOptions& opts) {
  if (timeout <= std::chrono::nanoseconds::zero()) throw std::invalid_argument("bp_dv_stitch: timeout must be > 0");
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  NeighborFilter filter = NeighborFilter::all_peers(t, comm, prefs);
  StitchResult result;
  while (true) {
    ++result.iterations;
    auto props = fbpr(backlogs, forecasts, t, comm, filter, opts);
    auto bad = loop_inducing(props, t, comm, dvr);
    if (bad.empty()) {
      result.proposals = std::move(props);
      return result;
    }
    for (const auto& p : bad) {
      filter.deny(p.owner, p.commodity, t.dest_as(p.via));
      ++result.excluded_neighbors;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      // Drop loop-inducing rules until what is left is loop-free.
      while (!bad.empty()) {
        std::erase_if(props, [&](const RuleProposal& p) { return std::find(bad.begin(), bad.end(), p) != bad.end(); });
        bad = loop_inducing(props, t, comm, dvr);
      }
      result.proposals = std::move(props);
      result.partial = true;
      return result;
    }
  }
}

RuleSet to_rule_set(std::span<const RuleProposal> proposals, std::size_t as_count, std::size_t commodity_count) {
  RuleSet rules(as_count, commodity_count);
  for (const auto& p : proposals) rules.install(p.owner, p.commodity, p.via);
  return rules;
}

std::size_t ordering_violations(std::span<const RuleProposal> proposals, const Topology& t,
                                const BacklogView& backlogs, const ForecastView& forecasts) {
  std::size_t bad = 0;
  for (const auto& p : proposals) {
    auto d = t.dest_as(p.via);
    double here = backlogs.at(p.owner, p.commodity) + forecasts.at(p.owner, p.commodity);
    double there = backlogs.at(d, p.commodity) + forecasts.at(d, p.commodity);
    if (!(here > there)) ++bad;
  }
  return bad;
}

void write_proposals_csv(std::ostream& out, std::span<const RuleProposal> proposals, const Topology& t,
                         const CommoditySpace& comm) {
  out << "owner_as,commodity,via_link,potential_bytes\n";
  for (const auto& p : proposals)
    out << t.as(p.owner).as_id << ',' << to_string(comm.prefix(p.commodity)) << ',' << t.link(p.via).link_id << ','
        << p.potential << '\n';
}

}  // namespace bpsim
