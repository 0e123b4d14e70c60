#include <bpsim/topology.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "csv_lines.hpp"

namespace bpsim {

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : TopologyError(fmt::format("{}:{}: {}", file, line, what)), line_(line) {}

std::string to_string(const Ipv4Prefix& p) {
  return fmt::format("{}.{}.{}.{}/{}", (p.address >> 24) & 0xff, (p.address >> 16) & 0xff,
                     (p.address >> 8) & 0xff, p.address & 0xff, p.mask);
}

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::uint32_t fnv1a(std::string_view s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

// 16 bits that identify an AS inside the synthetic address plan.
std::uint32_t as_tag(std::string_view as_id) {
  if (all_digits(as_id) && as_id.size() <= 9) return static_cast<std::uint32_t>(std::stoul(std::string(as_id))) & 0xffff;
  return fnv1a(as_id) & 0xffff;
}

std::pair<std::string, std::string> ordered(std::string a, std::string b) {
  if (id_less(b, a)) std::swap(a, b);
  return {std::move(a), std::move(b)};
}

}  // namespace

bool id_less(std::string_view a, std::string_view b) {
  if (all_digits(a) && all_digits(b)) {
    // strip leading zeros for the numeric comparison
    auto strip = [](std::string_view s) {
      auto p = s.find_first_not_of('0');
      return p == std::string_view::npos ? std::string_view{} : s.substr(p);
    };
    auto sa = strip(a), sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
  }
  return a < b;
}

Topology Topology::build(TopologyDraft draft) {
  Topology t;
  t.prefixes_per_as_ = std::max<std::size_t>(1, draft.prefixes_per_as);
  if (t.prefixes_per_as_ > 256) throw TopologyError("at most 256 prefixes per AS are supported");

  auto by_id = [](const auto& x, const auto& y) { return id_less(x, y); };
  std::size_t warnings = 0;

  // ASes
  std::sort(draft.ases.begin(), draft.ases.end(),
            [&](const auto& a, const auto& b) { return by_id(a.as_id, b.as_id); });
  draft.ases.erase(std::unique(draft.ases.begin(), draft.ases.end(),
                               [](const auto& a, const auto& b) { return a.as_id == b.as_id; }),
                   draft.ases.end());
  std::map<std::string, std::size_t, std::less<>> as_pos;
  for (std::size_t i = 0; i < draft.ases.size(); ++i) as_pos.emplace(draft.ases[i].as_id, i);

  // Routers whose AS is unknown are dropped; links touching them go too.
  std::set<std::string, std::less<>> declared_routers;
  std::set<std::string, std::less<>> dropped_routers;
  std::vector<TopologyDraft::RouterEntry> routers;
  for (auto& r : draft.routers) {
    if (!declared_routers.insert(r.router_id).second)
      throw IntegrityError(fmt::format("duplicate router id '{}'", r.router_id));
    if (!as_pos.contains(r.as_id)) {
      dropped_routers.insert(r.router_id);
      ++warnings;
      continue;
    }
    routers.push_back(std::move(r));
  }
  std::sort(routers.begin(), routers.end(),
            [&](const auto& a, const auto& b) { return by_id(a.router_id, b.router_id); });

  // Drop ASes left without routers.
  std::vector<bool> has_router(draft.ases.size(), false);
  for (const auto& r : routers) has_router[as_pos.at(r.as_id)] = true;
  for (std::size_t i = 0; i < draft.ases.size(); ++i) {
    if (!has_router[i]) continue;
    AsNode node;
    node.as_id = draft.ases[i].as_id;
    node.name = draft.ases[i].name;
    node.country = draft.ases[i].country;
    t.as_by_id_.emplace(node.as_id, t.ases_.size());
    t.ases_.push_back(std::move(node));
  }
  for (std::size_t i = 0; i < routers.size(); ++i) {
    Router r;
    r.router_id = routers[i].router_id;
    r.owner = id_cast<AsIdx>(t.as_by_id_.at(routers[i].as_id));
    r.location = routers[i].location;
    r.memory_bytes = routers[i].memory_bytes;
    t.router_by_id_.emplace(r.router_id, i);
    t.ases_[idx(r.owner)].routers.push_back(id_cast<RouterIdx>(i));
    t.routers_.push_back(std::move(r));
  }

  // Peering links.
  std::sort(draft.links.begin(), draft.links.end(),
            [&](const auto& a, const auto& b) { return by_id(a.link_id, b.link_id); });
  for (const auto& e : draft.links) {
    auto resolve = [&](const std::string& rid) -> std::optional<std::size_t> {
      if (auto it = t.router_by_id_.find(rid); it != t.router_by_id_.end()) return it->second;
      if (dropped_routers.contains(rid)) return std::nullopt;
      throw IntegrityError(fmt::format("link '{}' references unknown router '{}'", e.link_id, rid));
    };
    auto from = resolve(e.from_router);
    auto to = resolve(e.to_router);
    if (!from || !to) {
      ++warnings;
      continue;
    }
    if (*from == *to) throw IntegrityError(fmt::format("link '{}' is a self-loop", e.link_id));
    if (t.routers_[*from].owner == t.routers_[*to].owner) continue;  // internal mesh is regenerated
    if (t.link_by_id_.contains(e.link_id))
      throw IntegrityError(fmt::format("duplicate link id '{}'", e.link_id));
    Link l;
    l.link_id = e.link_id;
    l.from = id_cast<RouterIdx>(*from);
    l.to = id_cast<RouterIdx>(*to);
    l.capacity_bps = e.capacity_bps.value_or(kDefaultLinkCapacity);
    if (!(l.capacity_bps > 0.0))
      throw IntegrityError(fmt::format("link '{}' has non-positive capacity", e.link_id));
    l.kind = LinkKind::peering;
    t.link_by_id_.emplace(l.link_id, t.links_.size());
    t.links_.push_back(std::move(l));
  }

  // Internal full mesh, capacity = the owning AS's largest peering capacity.
  std::vector<double> as_max_cap(t.ases_.size(), 0.0);
  for (const auto& l : t.links_) {
    for (auto r : {l.from, l.to}) {
      auto& m = as_max_cap[idx(t.routers_[idx(r)].owner)];
      m = std::max(m, l.capacity_bps);
    }
  }
  for (std::size_t a = 0; a < t.ases_.size(); ++a) {
    const auto& rs = t.ases_[a].routers;
    double cap = as_max_cap[a] > 0.0 ? as_max_cap[a] : kDefaultLinkCapacity;
    for (auto r1 : rs) {
      for (auto r2 : rs) {
        if (r1 == r2) continue;
        Link l;
        l.link_id = fmt::format("~int:{}>{}", t.routers_[idx(r1)].router_id, t.routers_[idx(r2)].router_id);
        l.from = r1;
        l.to = r2;
        l.capacity_bps = cap;
        l.kind = LinkKind::internal;
        t.link_by_id_.emplace(l.link_id, t.links_.size());
        t.links_.push_back(std::move(l));
      }
    }
  }

  for (auto& l : t.links_)
    l.latency_s = link_latency(t.routers_[idx(l.from)].location, t.routers_[idx(l.to)].location);

  // Adjacency.
  t.out_links_.assign(t.routers_.size(), {});
  t.in_links_.assign(t.routers_.size(), {});
  t.as_out_peering_.assign(t.ases_.size(), {});
  t.as_in_peering_.assign(t.ases_.size(), {});
  t.as_neighbors_.assign(t.ases_.size(), {});
  for (std::size_t i = 0; i < t.links_.size(); ++i) {
    const auto& l = t.links_[i];
    auto li = id_cast<LinkIdx>(i);
    t.out_links_[idx(l.from)].push_back(li);
    t.in_links_[idx(l.to)].push_back(li);
    if (l.kind == LinkKind::peering) {
      auto sa = t.owner(l.from), da = t.owner(l.to);
      t.as_out_peering_[idx(sa)].push_back(li);
      t.as_in_peering_[idx(da)].push_back(li);
      t.as_neighbors_[idx(sa)].push_back(da);
      t.as_neighbors_[idx(da)].push_back(sa);
    }
  }
  for (std::size_t a = 0; a < t.ases_.size(); ++a) {
    auto& n = t.as_neighbors_[a];
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
    t.ases_[a].degree = n.size();
  }

  // Relations between retained ASes; undeclared pairs count as peering.
  for (const auto& [key, rel] : draft.relations) {
    auto a = t.find_as(key.first), b = t.find_as(key.second);
    if (!a || !b) continue;
    std::pair<std::size_t, std::size_t> k = std::minmax(idx(*a), idx(*b));
    t.relations_[{k.first, k.second}] = rel;
  }

  // Synthetic address plan: 16-bit AS tag, then the prefix ordinal.
  t.prefix_table_.assign(t.ases_.size(), {});
  t.aggregates_.assign(t.ases_.size(), {});
  for (std::size_t a = 0; a < t.ases_.size(); ++a) {
    std::uint32_t tag = as_tag(t.ases_[a].as_id);
    t.aggregates_[a] = Ipv4Prefix{tag << 16, 16};
    for (std::size_t k = 0; k < t.prefixes_per_as_; ++k)
      t.prefix_table_[a].push_back(Ipv4Prefix{(tag << 16) | (static_cast<std::uint32_t>(k) << 8), 24});
  }

  t.load_warnings_ = warnings;
  if (warnings > 0) spdlog::warn("topology: dropped {} routers/links without a known AS", warnings);
  return t;
}

TopologyDraft Topology::to_draft() const {
  TopologyDraft d;
  d.prefixes_per_as = prefixes_per_as_;
  for (const auto& a : ases_) d.ases.push_back({a.as_id, a.name, a.country});
  for (const auto& r : routers_)
    d.routers.push_back({r.router_id, ases_[idx(r.owner)].as_id, r.location, r.memory_bytes});
  for (const auto& l : links_) {
    if (l.kind != LinkKind::peering) continue;
    d.links.push_back({l.link_id, routers_[idx(l.from)].router_id, routers_[idx(l.to)].router_id, l.capacity_bps});
  }
  for (const auto& [k, rel] : relations_)
    d.relations[ordered(ases_[k.first].as_id, ases_[k.second].as_id)] = rel;
  return d;
}

std::optional<LinkIdx> Topology::internal_link(RouterIdx from, RouterIdx to) const {
  for (auto l : out_links_[idx(from)])
    if (links_[idx(l)].to == to && links_[idx(l)].kind == LinkKind::internal) return l;
  return std::nullopt;
}

std::optional<AsIdx> Topology::find_as(std::string_view as_id) const {
  if (auto it = as_by_id_.find(as_id); it != as_by_id_.end()) return id_cast<AsIdx>(it->second);
  return std::nullopt;
}

std::optional<RouterIdx> Topology::find_router(std::string_view router_id) const {
  if (auto it = router_by_id_.find(router_id); it != router_by_id_.end()) return id_cast<RouterIdx>(it->second);
  return std::nullopt;
}

std::optional<LinkIdx> Topology::find_link(std::string_view link_id) const {
  if (auto it = link_by_id_.find(link_id); it != link_by_id_.end()) return id_cast<LinkIdx>(it->second);
  return std::nullopt;
}

AsRelation Topology::relation(AsIdx a, AsIdx b) const {
  std::pair<std::size_t, std::size_t> k = std::minmax(idx(a), idx(b));
  if (auto it = relations_.find({k.first, k.second}); it != relations_.end()) return it->second;
  return AsRelation::peer_to_peer;
}

std::size_t Topology::peering_relation_count() const {
  std::size_t n = 0;
  for (std::size_t a = 0; a < ases_.size(); ++a)
    for (auto b : as_neighbors_[a])
      if (a < idx(b)) ++n;
  return n;
}

std::size_t Topology::physical_peering_link_count() const {
  std::size_t directed = 0;
  for (const auto& out : as_out_peering_) directed += out.size();
  return directed / 2;
}

std::vector<std::string> Topology::validate() const {
  std::vector<std::string> errs;
  for (std::size_t a = 0; a < ases_.size(); ++a) {
    if (ases_[a].routers.empty()) errs.push_back(fmt::format("AS {} has no routers", ases_[a].as_id));
    if (ases_[a].degree != as_neighbors_[a].size())
      errs.push_back(fmt::format("AS {} degree mismatch", ases_[a].as_id));
  }
  for (const auto& r : routers_) {
    if (idx(r.owner) >= ases_.size()) errs.push_back(fmt::format("router {} has unknown AS", r.router_id));
    if (r.memory_bytes == 0) errs.push_back(fmt::format("router {} has no memory", r.router_id));
  }
  std::set<std::pair<std::size_t, std::size_t>> internal_pairs;
  std::map<std::pair<std::size_t, std::size_t>, int> peering_dirs;
  for (const auto& l : links_) {
    if (idx(l.from) >= routers_.size() || idx(l.to) >= routers_.size()) {
      errs.push_back(fmt::format("link {} has a dangling endpoint", l.link_id));
      continue;
    }
    if (!(l.capacity_bps > 0.0)) errs.push_back(fmt::format("link {} capacity <= 0", l.link_id));
    if (!(l.latency_s >= 0.0)) errs.push_back(fmt::format("link {} latency < 0", l.link_id));
    bool same_as = owner(l.from) == owner(l.to);
    if (l.kind == LinkKind::internal && !same_as)
      errs.push_back(fmt::format("internal link {} crosses ASes", l.link_id));
    if (l.kind == LinkKind::peering && same_as)
      errs.push_back(fmt::format("peering link {} stays inside an AS", l.link_id));
    if (l.kind == LinkKind::internal) internal_pairs.emplace(idx(l.from), idx(l.to));
  }
  for (const auto& a : ases_)
    for (auto r1 : a.routers)
      for (auto r2 : a.routers)
        if (r1 != r2 && !internal_pairs.contains({idx(r1), idx(r2)}))
          errs.push_back(fmt::format("AS {} lacks internal link {}->{}", a.as_id, routers_[idx(r1)].router_id,
                                     routers_[idx(r2)].router_id));
  std::set<Ipv4Prefix> seen;
  for (const auto& table : prefix_table_)
    for (const auto& p : table)
      if (!seen.insert(p).second) errs.push_back(fmt::format("prefix {} assigned twice", to_string(p)));
  return errs;
}

Topology load_topology(const std::filesystem::path& node_file, const std::filesystem::path& link_file,
                       const std::filesystem::path& as_assignment_file,
                       const std::optional<std::filesystem::path>& relation_file) {
  TopologyDraft draft;

  std::map<std::string, GeoPoint, std::less<>> locations;
  for_each_record(node_file, ',', [&](const Record& rec) {
    rec.expect_fields(3, 3);
    auto [it, fresh] = locations.emplace(rec.text(0), GeoPoint{rec.number(1), rec.number(2)});
    if (!fresh) rec.fail(fmt::format("duplicate router id '{}'", rec.text(0)));
    const auto& g = it->second;
    if (g.lat_deg < -90 || g.lat_deg > 90 || g.lon_deg < -180 || g.lon_deg > 180)
      rec.fail("coordinates out of range");
  });

  std::map<std::string, std::string, std::less<>> router_as;
  std::map<std::string, TopologyDraft::AsEntry, std::less<>> ases;
  for_each_record(as_assignment_file, ',', [&](const Record& rec) {
    rec.expect_fields(4, 4);
    if (!locations.contains(rec.text(0)))
      throw IntegrityError(fmt::format("{}:{}: AS assignment for unknown router '{}'",
                                       as_assignment_file.string(), rec.line(), rec.text(0)));
    router_as[std::string(rec.text(0))] = rec.text(1);
    auto& entry = ases[std::string(rec.text(1))];
    entry.as_id = rec.text(1);
    if (entry.name.empty()) entry.name = rec.text(2);
    if (entry.country.empty()) entry.country = rec.text(3);
  });

  for (const auto& [rid, loc] : locations) {
    TopologyDraft::RouterEntry r;
    r.router_id = rid;
    r.location = loc;
    if (auto it = router_as.find(rid); it != router_as.end()) r.as_id = it->second;
    draft.routers.push_back(std::move(r));
  }
  for (auto& [_, a] : ases) draft.ases.push_back(std::move(a));

  for_each_record(link_file, ',', [&](const Record& rec) {
    rec.expect_fields(3, 4);
    TopologyDraft::LinkEntry e;
    e.link_id = rec.text(0);
    e.from_router = rec.text(1);
    e.to_router = rec.text(2);
    for (const auto* rid : {&e.from_router, &e.to_router})
      if (!locations.contains(*rid))
        throw IntegrityError(fmt::format("{}:{}: link '{}' references unknown router '{}'", link_file.string(),
                                         rec.line(), e.link_id, *rid));
    if (rec.size() == 4) {
      double c = rec.number(3);
      if (!(c > 0.0)) rec.fail("capacity must be positive");
      e.capacity_bps = c;
    }
    draft.links.push_back(std::move(e));
  });

  if (relation_file) {
    for_each_record(*relation_file, '|', [&](const Record& rec) {
      rec.expect_fields(3, 4);
      auto code = rec.integer(2);
      if (code != 0 && code != -1) rec.fail("relationship must be 0 (peer) or -1 (provider-customer)");
      draft.relations[ordered(std::string(rec.text(0)), std::string(rec.text(1)))] =
          code == 0 ? AsRelation::peer_to_peer : AsRelation::customer_provider;
    });
  }

  return Topology::build(std::move(draft));
}

Topology filter_pipeline(const Topology& t, std::size_t top_k, bool keep_peer_to_peer_only) {
  if (top_k == 0) throw TopologyError("top_k must be at least 1");
  TopologyDraft d = t.to_draft();

  if (keep_peer_to_peer_only) {
    std::erase_if(d.links, [&](const TopologyDraft::LinkEntry& e) {
      auto a = t.owner(*t.find_router(e.from_router));
      auto b = t.owner(*t.find_router(e.to_router));
      return t.relation(a, b) != AsRelation::peer_to_peer;
    });
  }

  // Degrees over the surviving peering links.
  std::map<std::string, std::set<std::string>, std::less<>> peers;
  for (const auto& a : d.ases) peers[a.as_id];
  for (const auto& e : d.links) {
    const auto& fa = t.as(t.owner(*t.find_router(e.from_router))).as_id;
    const auto& ta = t.as(t.owner(*t.find_router(e.to_router))).as_id;
    peers[fa].insert(ta);
    peers[ta].insert(fa);
  }
  std::vector<std::string> order;
  for (const auto& a : d.ases) order.push_back(a.as_id);
  std::stable_sort(order.begin(), order.end(), [&](const std::string& x, const std::string& y) {
    auto dx = peers[x].size(), dy = peers[y].size();
    if (dx != dy) return dx > dy;
    return id_less(x, y);
  });
  if (order.size() > top_k) order.resize(top_k);
  std::set<std::string, std::less<>> keep(order.begin(), order.end());

  std::erase_if(d.ases, [&](const auto& a) { return !keep.contains(a.as_id); });
  std::set<std::string, std::less<>> kept_routers;
  std::erase_if(d.routers, [&](const auto& r) { return !keep.contains(r.as_id); });
  for (const auto& r : d.routers) kept_routers.insert(r.router_id);
  std::erase_if(d.links, [&](const auto& e) {
    return !kept_routers.contains(e.from_router) || !kept_routers.contains(e.to_router);
  });
  std::erase_if(d.relations, [&](const auto& kv) {
    return !keep.contains(kv.first.first) || !keep.contains(kv.first.second);
  });
  return Topology::build(std::move(d));
}

double great_circle_m(const GeoPoint& a, const GeoPoint& b) {
  constexpr double deg = std::numbers::pi / 180.0;
  double phi1 = a.lat_deg * deg, phi2 = b.lat_deg * deg;
  double dphi = phi2 - phi1, dlambda = (b.lon_deg - a.lon_deg) * deg;
  double h = std::sin(dphi / 2) * std::sin(dphi / 2) +
             std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadius * std::asin(std::sqrt(h));
}

double link_latency(const GeoPoint& from, const GeoPoint& to) { return great_circle_m(from, to) / kSpeedOfLight; }

Topology randomize_capacities(const Topology& t, double low_bps, double high_bps, std::uint64_t seed) {
  if (!(low_bps > 0.0) || !(low_bps <= high_bps)) throw TopologyError("capacity range must satisfy 0 < low <= high");
  TopologyDraft d = t.to_draft();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(low_bps, high_bps);
  // Links are in ascending id order in the draft, so draws are stable.
  for (auto& e : d.links) e.capacity_bps = low_bps == high_bps ? low_bps : draw(rng);
  Topology out = Topology::build(std::move(d));
  out.set_load_warnings(t.load_warnings());
  return out;
}

Topology with_prefixes(const Topology& t, std::size_t prefixes_per_as) {
  TopologyDraft d = t.to_draft();
  d.prefixes_per_as = prefixes_per_as;
  Topology out = Topology::build(std::move(d));
  out.set_load_warnings(t.load_warnings());
  return out;
}

}  // namespace bpsim
