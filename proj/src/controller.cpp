#include <bpsim/controller.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include <spdlog/spdlog.h>

namespace bpsim {

namespace {

void put_id(std::vector<std::uint8_t>& out, const std::string& id) {
  if (id.size() > 8) throw CodecError("identifier longer than 8 bytes: " + id);
  for (std::size_t i = 0; i < 8; ++i) out.push_back(i < id.size() ? static_cast<std::uint8_t>(id[i]) : 0);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {
    if (b.size() < 8 || (b.size() - 8) % 13 != 0)
      throw CodecError("message length " + std::to_string(b.size()) + " is not 8 + 13n");
  }
  std::size_t entries() const { return (b_.size() - 8) / 13; }
  std::string id() {
    std::string s;
    for (std::size_t i = 0; i < 8; ++i) {
      auto c = b_[pos_ + i];
      if (c == 0) break;
      s.push_back(static_cast<char>(c));
    }
    pos_ += 8;
    return s;
  }
  std::uint8_t u8() { return b_[pos_++]; }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | b_[pos_++];
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | b_[pos_++];
    return v;
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(const CongestionReport& r) {
  std::vector<std::uint8_t> out;
  out.reserve(message_size(MessageKind::report, r.entries.size()));
  put_id(out, r.as_id);
  for (const auto& e : r.entries) {
    put_u32(out, e.prefix.address);
    out.push_back(e.prefix.mask);
    put_u64(out, std::bit_cast<std::uint64_t>(e.load_gb));
  }
  return out;
}

std::vector<std::uint8_t> encode(const RuleMessage& m) {
  std::vector<std::uint8_t> out;
  out.reserve(message_size(MessageKind::rule, m.rules.size()));
  put_id(out, m.as_id);
  for (const auto& r : m.rules) {
    put_u32(out, r.prefix.address);
    out.push_back(r.prefix.mask);
    put_id(out, r.link_id);
  }
  return out;
}

CongestionReport decode_report(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  CongestionReport r;
  r.as_id = in.id();
  r.entries.resize(in.entries());
  for (auto& e : r.entries) {
    e.prefix.address = in.u32();
    e.prefix.mask = in.u8();
    e.load_gb = std::bit_cast<double>(in.u64());
  }
  return r;
}

RuleMessage decode_rules(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  RuleMessage m;
  m.as_id = in.id();
  m.rules.resize(in.entries());
  for (auto& r : m.rules) {
    r.prefix.address = in.u32();
    r.prefix.mask = in.u8();
    r.link_id = in.id();
  }
  return m;
}

double drift_bound(double T, const DriftBoundParams& p) { return p.alpha * T * T - 2.0 * p.beta * T; }

double max_acceptable_T(const DriftBoundParams& p, double l_max) {
  if (!(p.alpha > 0.0)) throw std::invalid_argument("drift bound: alpha must be > 0");
  if (!(l_max > 0.0)) throw std::invalid_argument("drift bound: L_max must be > 0");
  // Larger root of alpha*T^2 - 2*beta*T - l_max = 0.
  return (p.beta + std::sqrt(p.beta * p.beta + p.alpha * l_max)) / p.alpha;
}

DriftBoundParams drift_params(const Topology& t, const CommoditySpace& comm, const BacklogView& backlogs,
                              const ForecastView& forecasts, double period_s, const std::vector<bool>& usable_links) {
  auto usable = [&](LinkIdx l) { return usable_links.empty() || usable_links[idx(l)]; };
  DriftBoundParams p;
  for (std::size_t a = 0; a < t.as_count(); ++a) {
    auto n = id_cast<AsIdx>(a);
    double mu_out = 0.0, mu_in = 0.0;
    for (auto l : t.peering_links_from(n))
      if (usable(l)) mu_out += t.link(l).capacity_bps / 8.0;
    for (auto l : t.peering_links_into(n))
      if (usable(l)) mu_in += t.link(l).capacity_bps / 8.0;
    for (std::size_t ci = 0; ci < comm.size(); ++ci) {
      auto c = id_cast<Commodity>(ci);
      double lambda = period_s > 0.0 && forecasts.commodity_count() ? forecasts.at(n, c) / period_s : 0.0;
      p.alpha += mu_out * mu_out + (mu_in + lambda) * (mu_in + lambda);
      p.beta += backlogs.at(n, c) * (mu_out - mu_in - lambda);
    }
  }
  return p;
}

std::vector<InstalledRule> rule_lifecycle(double now, std::vector<InstalledRule> rules, const BacklogView& backlogs,
                                          double idle_timeout) {
  for (auto& r : rules) {
    if (r.state == RuleState::expired) continue;
    if (backlogs.at(r.proposal.owner, r.proposal.commodity) < r.safety_level || now - r.last_hit > idle_timeout)
      r.state = RuleState::expired;
  }
  return rules;
}

Controller::Controller(const Topology& t, const CommoditySpace& comm, const RoutingTable& dvr, ControllerConfig cfg)
    : topo_(t),
      comm_(comm),
      dvr_(dvr),
      cfg_(std::move(cfg)),
      backlogs_(t.as_count(), comm.size()),
      refreshed_at_(t.as_count() * comm.size(), -1e300),
      usable_(t.link_count(), true) {}

std::vector<RuleMessage> Controller::tick(double now, std::span<const CongestionReport> reports,
                                          const ForecastView& forecasts) {
  const std::size_t nc = comm_.size();
  for (const auto& r : reports) {
    auto a = topo_.find_as(r.as_id);
    if (!a) {
      spdlog::info("controller: report from unknown AS '{}' skipped", r.as_id);
      ++skipped_;
      continue;
    }
    for (const auto& e : r.entries) {
      auto c = comm_.find(e.prefix);
      if (!c) continue;
      backlogs_.set(*a, *c, e.load_gb * kBytesPerGb);
      refreshed_at_[idx(*a) * nc + idx(*c)] = r.timestamp;
    }
  }
  // Reports are only valid for a while: entries silent for two periods go to zero.
  const double stale = 2.0 * cfg_.period_s * (1.0 - 1e-9);
  for (std::size_t a = 0; a < topo_.as_count(); ++a)
    for (std::size_t c = 0; c < nc; ++c)
      if (now - refreshed_at_[a * nc + c] >= stale) backlogs_.set(id_cast<AsIdx>(a), id_cast<Commodity>(c), 0.0);

  if (reports.empty()) {
    last_.clear();
    return {};
  }

  BpOptions opts;
  opts.alarm_level = cfg_.alarm_level;
  opts.prefix_rule_budget = cfg_.prefix_rule_budget;
  opts.usable_links = usable_;
  const ForecastView zero(topo_.as_count(), nc);
  const ForecastView& g = forecasts.commodity_count() == nc ? forecasts : zero;

  last_partial_ = false;
  switch (cfg_.algorithm) {
    case Algorithm::sbpr:
      last_ = sbpr(backlogs_, topo_, comm_, NeighborFilter::all_peers(topo_, comm_, cfg_.preferences), opts);
      break;
    case Algorithm::fbpr:
      last_ = fbpr(backlogs_, g, topo_, comm_, NeighborFilter::all_peers(topo_, comm_, cfg_.preferences), opts);
      break;
    case Algorithm::nhops_stitch:
      last_ = nhops_stitch(backlogs_, g, topo_, comm_, dvr_, cfg_.preferences, opts);
      break;
    case Algorithm::bp_dv_stitch: {
      auto res = bp_dv_stitch(backlogs_, g, topo_, comm_, dvr_, cfg_.stitch_timeout, cfg_.preferences, opts);
      last_partial_ = res.partial;
      last_ = std::move(res.proposals);
      break;
    }
  }

  if (reject_cb_) {
    std::erase_if(last_, [&](const RuleProposal& p) {
      if (!reject_cb_(p.owner, p.commodity, p.via)) return false;
      usable_[idx(p.via)] = false;
      return true;
    });
  }

  std::vector<RuleMessage> out;
  for (const auto& p : last_) {  // sorted by owner
    const auto& id = topo_.as(p.owner).as_id;
    if (out.empty() || out.back().as_id != id) out.push_back({id, {}});
    out.back().rules.push_back({comm_.prefix(p.commodity), topo_.link(p.via).link_id});
  }
  return out;
}

std::vector<std::pair<Commodity, LinkIdx>> resolve_rules(const RuleMessage& m, const Topology& t,
                                                         const CommoditySpace& comm) {
  std::vector<std::pair<Commodity, LinkIdx>> out;
  for (const auto& r : m.rules) {
    auto c = comm.find(r.prefix);
    auto l = t.find_link(r.link_id);
    if (c && l) out.emplace_back(*c, *l);
  }
  return out;
}

}  // namespace bpsim
