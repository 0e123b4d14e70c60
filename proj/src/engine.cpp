#include <bpsim/engine.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <queue>

#include <boost/math/distributions/students_t.hpp>
#include <spdlog/spdlog.h>

namespace bpsim {

double stability_metric(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("stability_metric: empty series");
  return std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
}

double batch_means_half_width(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  boost::math::students_t dist(n - 1.0);
  return boost::math::quantile(dist, 0.975) * sd / std::sqrt(n);
}

namespace {

constexpr std::string_view kAlgorithmNames[] = {"dvr_only",   "sbpr",        "fbpr",       "sbpr+nhops",
                                                "fbpr+nhops", "sbpr+stitch", "fbpr+stitch"};

}  // namespace

std::optional<RunAlgorithm> parse_algorithm(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kAlgorithmNames); ++i)
    if (kAlgorithmNames[i] == name) return static_cast<RunAlgorithm>(i);
  return std::nullopt;
}

std::string_view to_string(RunAlgorithm a) { return kAlgorithmNames[static_cast<std::size_t>(a)]; }

std::string_view stitch_name(RunAlgorithm a) {
  switch (a) {
    case RunAlgorithm::sbpr_nhops:
    case RunAlgorithm::fbpr_nhops:
      return "nhops";
    case RunAlgorithm::sbpr_stitch:
    case RunAlgorithm::fbpr_stitch:
      return "stitch";
    default:
      return "none";
  }
}

namespace {

enum class EvKind : std::uint8_t { controller_tick, rule_expiry, generation, transmission_complete, batch_arrival };

struct Event {
  double time;
  std::uint8_t prio;
  std::uint64_t seq;
  EvKind kind;
  std::uint32_t a;  // router / link / scripted index
  std::uint32_t b;  // batch slot
};

struct Later {
  bool operator()(const Event& x, const Event& y) const {
    if (x.time != y.time) return x.time > y.time;
    if (x.prio != y.prio) return x.prio > y.prio;
    return x.seq > y.seq;
  }
};

constexpr std::uint32_t kNoSlot = std::numeric_limits<std::uint32_t>::max();

struct BatchRec {
  std::uint64_t id = 0;
  std::uint64_t size = 0;
  std::uint64_t seq = 0;  // admission order at the current router
  double created_at = 0.0;
  std::uint32_t commodity = 0;
  std::uint32_t router = 0;
  std::uint32_t hops = 0;
  std::size_t admit_period = 0;
  bool from_generation = false;
};

struct LinkState {
  std::deque<std::uint32_t> waiting;  // in the router's shared memory
  std::uint32_t tx = kNoSlot;         // twin buffer: half being serialised
  std::uint32_t staged = kNoSlot;     // and the half filled behind it
};

class Simulation {
 public:
  explicit Simulation(const RunInputs& in);
  MetricsReport run();

 private:
  void push(double t, EvKind k, std::uint32_t a, std::uint32_t b = 0) {
    std::uint8_t prio = k == EvKind::controller_tick ? 0 : k == EvKind::rule_expiry ? 1 : 2;
    events_.push({t, prio, seq_++, k, a, b});
  }

  std::optional<LinkIdx> route(std::size_t r, std::uint32_t c);
  void receive(std::uint32_t slot, std::size_t r, bool from_generation);
  void pump(LinkIdx l);
  void start_tx(LinkIdx l);
  void on_tx_complete(LinkIdx l);
  void depart(const BatchRec& b);
  void rebucket(std::size_t r);
  void controller_tick(double now, bool final_tick);
  void expiry_sweep(double now);
  void audit();
  std::uint32_t alloc(BatchRec b);
  void release(std::uint32_t slot) { free_.push_back(slot); }
  std::size_t segment(double t) const {
    auto s = static_cast<std::size_t>(t / seg_len_);
    return std::min(s, n_seg_ - 1);
  }
  std::size_t rc(std::size_t r, std::size_t c) const { return r * nc_ + c; }

  const Topology& t_;
  const RunInputs& in_;
  const RunConfig& cfg_;
  CommoditySpace comm_;
  RoutingTable dvr_;
  std::size_t nc_ = 0;
  std::optional<PopularityMatrix> pm_;
  std::optional<TrafficGenerator> gen_;
  std::optional<Controller> ctrl_;
  WindowForecaster forecaster_;
  RuleSet rules_;
  std::vector<double> rule_safety_;
  std::vector<double> rule_last_hit_;
  std::vector<double> rule_installed_at_;
  std::vector<std::uint32_t> egress_;  // [router * as_count + next AS] -> link, or kNoSlot

  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;

  std::vector<BatchRec> batches_;
  std::vector<std::uint32_t> free_;
  std::vector<LinkState> links_;
  std::vector<std::uint64_t> mem_used_;
  std::vector<std::uint64_t> admit_seq_;

  // Per (router, commodity) period accounting.
  std::size_t period_ = 0;
  std::vector<std::uint64_t> u_prev_, o_, i_, g_;
  std::vector<std::uint64_t> held_as_;  // per (AS, commodity), live
  std::uint64_t held_total_ = 0;

  double seg_len_ = 1.0;
  std::size_t n_seg_ = 1;
  std::vector<double> seg_peering_, seg_overflow_, seg_latency_sum_, seg_latency_n_;
  std::vector<double> stability_samples_;
  double latency_sum_ = 0.0;
  std::uint64_t peering_bytes_ = 0;

  MetricsReport m_;
};

ControllerConfig controller_config(const RunConfig& cfg) {
  ControllerConfig cc;
  cc.period_s = cfg.period_s;
  cc.alarm_level = cfg.alarm_level;
  cc.prefix_rule_budget = cfg.prefix_granularity;
  cc.stitch_timeout = cfg.stitch_timeout;
  cc.preferences = cfg.preferences;
  switch (cfg.algorithm) {
    case RunAlgorithm::sbpr: cc.algorithm = Algorithm::sbpr; break;
    case RunAlgorithm::fbpr: cc.algorithm = Algorithm::fbpr; break;
    case RunAlgorithm::sbpr_nhops:
    case RunAlgorithm::fbpr_nhops: cc.algorithm = Algorithm::nhops_stitch; break;
    case RunAlgorithm::sbpr_stitch:
    case RunAlgorithm::fbpr_stitch: cc.algorithm = Algorithm::bp_dv_stitch; break;
    case RunAlgorithm::dvr_only: break;
  }
  return cc;
}

bool uses_forecast(RunAlgorithm a) {
  return a == RunAlgorithm::fbpr || a == RunAlgorithm::fbpr_nhops || a == RunAlgorithm::fbpr_stitch;
}

Simulation::Simulation(const RunInputs& in)
    : t_(in.topology),
      in_(in),
      cfg_(in.config),
      comm_(cfg_.prefix_granularity ? CommoditySpace::prefix_level(t_) : CommoditySpace::as_level(t_)),
      dvr_(compute_dvr(t_, Granularity::as_level)),
      nc_(comm_.size()),
      forecaster_(t_.as_count(), comm_.size()),
      rules_(t_.as_count(), comm_.size()),
      rule_safety_(t_.as_count() * comm_.size(), 0.0),
      rule_last_hit_(t_.as_count() * comm_.size(), 0.0),
      rule_installed_at_(t_.as_count() * comm_.size(), 0.0),
      links_(t_.link_count()),
      mem_used_(t_.router_count(), 0),
      admit_seq_(t_.router_count(), 0),
      u_prev_(t_.router_count() * comm_.size(), 0),
      o_(u_prev_.size(), 0),
      i_(u_prev_.size(), 0),
      g_(u_prev_.size(), 0),
      held_as_(t_.as_count() * comm_.size(), 0) {
  if (!in.scripted_batches) {
    pm_ = popularity(t_);
    gen_.emplace(t_, comm_, *pm_, in.scenario);
  }
  if (cfg_.algorithm != RunAlgorithm::dvr_only) ctrl_.emplace(t_, comm_, dvr_, controller_config(cfg_));

  const std::size_t na = t_.as_count();
  egress_.assign(t_.router_count() * na, kNoSlot);
  for (std::size_t r = 0; r < t_.router_count(); ++r) {
    const auto ri = id_cast<RouterIdx>(r);
    const auto own = t_.owner(ri);
    for (auto l : t_.out_links(ri)) {
      if (t_.link(l).kind != LinkKind::peering) continue;
      auto& e = egress_[r * na + idx(t_.dest_as(l))];
      if (e == kNoSlot || idx(l) < e) e = static_cast<std::uint32_t>(idx(l));
    }
    for (auto m : t_.as_neighbors(own)) {
      auto& e = egress_[r * na + idx(m)];
      if (e != kNoSlot) continue;
      std::vector<RouterIdx> cand;
      for (auto rr : t_.as(own).routers)
        for (auto l : t_.out_links(rr))
          if (t_.link(l).kind == LinkKind::peering && t_.dest_as(l) == m) {
            cand.push_back(rr);
            break;
          }
      if (cand.empty()) continue;
      if (auto il = t_.internal_link(ri, cand[r % cand.size()])) e = static_cast<std::uint32_t>(idx(*il));
    }
  }

  n_seg_ = std::max<std::size_t>(cfg_.confidence_segments, 1);
  seg_len_ = cfg_.duration_s / static_cast<double>(n_seg_);
  seg_peering_.assign(n_seg_, 0.0);
  seg_overflow_.assign(n_seg_, 0.0);
  seg_latency_sum_.assign(n_seg_, 0.0);
  seg_latency_n_.assign(n_seg_, 0.0);
  m_.per_as_bytes.assign(na, 0.0);
  m_.per_link_bytes.assign(t_.link_count(), 0.0);
}

std::uint32_t Simulation::alloc(BatchRec b) {
  if (!free_.empty()) {
    auto s = free_.back();
    free_.pop_back();
    batches_[s] = b;
    return s;
  }
  batches_.push_back(b);
  return static_cast<std::uint32_t>(batches_.size() - 1);
}

std::optional<LinkIdx> Simulation::route(std::size_t r, std::uint32_t c) {
  const auto ri = id_cast<RouterIdx>(r);
  const auto n = t_.owner(ri);
  const auto com = id_cast<Commodity>(c);
  if (auto via = rules_.find(n, com)) {
    rule_last_hit_[idx(n) * nc_ + c] = now_;
    const auto s = t_.link(*via).from;
    if (s == ri) return via;
    // The rule holds for the whole AS: routers with their own link to the
    // rule's next AS use it, the others hand the batch to the rule's router.
    auto e = egress_[r * t_.as_count() + idx(t_.dest_as(*via))];
    if (e != kNoSlot && t_.link(id_cast<LinkIdx>(e)).kind == LinkKind::peering) return id_cast<LinkIdx>(e);
    return t_.internal_link(ri, s);
  }
  auto next = dvr_.next_hop(static_cast<RoutingTable::Node>(idx(n)),
                            static_cast<RoutingTable::Node>(idx(comm_.host(com))));
  if (!next) return std::nullopt;
  auto e = egress_[r * t_.as_count() + *next];
  if (e == kNoSlot) return std::nullopt;
  return id_cast<LinkIdx>(e);
}

void Simulation::receive(std::uint32_t slot, std::size_t r, bool from_generation) {
  auto& b = batches_[slot];
  const auto ri = id_cast<RouterIdx>(r);
  b.router = static_cast<std::uint32_t>(r);
  if (t_.owner(ri) == comm_.host(id_cast<Commodity>(b.commodity))) {
    const double lat = now_ - b.created_at;
    m_.delivered_bytes += b.size;
    ++m_.batches_delivered;
    latency_sum_ += lat;
    auto s = segment(now_);
    seg_latency_sum_[s] += lat;
    seg_latency_n_[s] += 1.0;
    if (in_.deliveries) in_.deliveries->push_back({b.id, id_cast<Commodity>(b.commodity), b.created_at, now_, b.hops});
    release(slot);
    return;
  }
  if (b.hops >= cfg_.max_hops) {
    m_.ttl_dropped_bytes += b.size;
    release(slot);
    return;
  }
  auto l = route(r, b.commodity);
  if (!l) {
    m_.unroutable_bytes += b.size;
    release(slot);
    return;
  }
  if (mem_used_[r] + b.size > t_.router(ri).memory_bytes) {
    m_.overflow_bytes += b.size;
    seg_overflow_[segment(now_)] += static_cast<double>(b.size);
    release(slot);
    return;
  }
  mem_used_[r] += b.size;
  b.seq = admit_seq_[r]++;
  b.admit_period = period_;
  b.from_generation = from_generation;
  (from_generation ? g_ : i_)[rc(r, b.commodity)] += b.size;
  held_as_[idx(t_.owner(ri)) * nc_ + b.commodity] += b.size;
  held_total_ += b.size;
  links_[idx(*l)].waiting.push_back(slot);
  pump(*l);
}

void Simulation::pump(LinkIdx l) {
  auto& ls = links_[idx(l)];
  const std::size_t r = idx(t_.link(l).from);
  while (!ls.waiting.empty() && (ls.tx == kNoSlot || ls.staged == kNoSlot)) {
    auto s = ls.waiting.front();
    ls.waiting.pop_front();
    mem_used_[r] -= batches_[s].size;
    if (ls.tx == kNoSlot && ls.staged == kNoSlot) {
      ls.staged = s;
      start_tx(l);
    } else {
      ls.staged = s;
    }
  }
  if (ls.tx == kNoSlot && ls.staged != kNoSlot) start_tx(l);
}

void Simulation::start_tx(LinkIdx l) {
  auto& ls = links_[idx(l)];
  ls.tx = ls.staged;
  ls.staged = kNoSlot;
  const auto& link = t_.link(l);
  const double dt = static_cast<double>(batches_[ls.tx].size) * 8.0 / link.capacity_bps;
  push(now_ + dt, EvKind::transmission_complete, static_cast<std::uint32_t>(idx(l)));
}

void Simulation::depart(const BatchRec& b) {
  const std::size_t k = rc(b.router, b.commodity);
  if (b.admit_period < period_) {
    o_[k] += b.size;
  } else {
    // Arrived and left within this period: net it out of the arrivals.
    (b.from_generation ? g_ : i_)[k] -= b.size;
  }
  held_as_[idx(t_.owner(id_cast<RouterIdx>(b.router))) * nc_ + b.commodity] -= b.size;
  held_total_ -= b.size;
}

void Simulation::on_tx_complete(LinkIdx l) {
  auto& ls = links_[idx(l)];
  const auto slot = ls.tx;
  ls.tx = kNoSlot;
  auto& b = batches_[slot];
  depart(b);
  const auto& link = t_.link(l);
  m_.per_link_bytes[idx(l)] += static_cast<double>(b.size);
  if (link.kind == LinkKind::peering) {
    peering_bytes_ += b.size;
    m_.per_as_bytes[idx(t_.source_as(l))] += static_cast<double>(b.size);
    seg_peering_[segment(now_)] += static_cast<double>(b.size);
  } else {
    m_.internal_link_bytes += b.size;
  }
  m_.in_flight_bytes += b.size;
  ++b.hops;
  push(now_ + link.latency_s, EvKind::batch_arrival, static_cast<std::uint32_t>(idx(link.to)), slot);
  if (ls.staged != kNoSlot) start_tx(l);
  pump(l);
}

void Simulation::rebucket(std::size_t r) {
  const auto ri = id_cast<RouterIdx>(r);
  std::vector<std::uint32_t> held;
  for (auto l : t_.out_links(ri)) {
    auto& w = links_[idx(l)].waiting;
    held.insert(held.end(), w.begin(), w.end());
    w.clear();
  }
  if (held.empty()) return;
  std::sort(held.begin(), held.end(), [&](auto x, auto y) { return batches_[x].seq < batches_[y].seq; });
  for (auto s : held) {
    auto l = route(r, batches_[s].commodity);
    if (!l) {
      // Cannot happen while the distance-vector fallback exists; accounted as a departure.
      mem_used_[r] -= batches_[s].size;
      depart(batches_[s]);
      m_.unroutable_bytes += batches_[s].size;
      release(s);
      continue;
    }
    links_[idx(*l)].waiting.push_back(s);
  }
  for (auto l : t_.out_links(ri)) pump(l);
}

void Simulation::audit() {
  std::vector<std::uint64_t> scan(u_prev_.size(), 0);
  std::uint64_t queued = 0;
  auto add = [&](std::uint32_t s) {
    if (s == kNoSlot) return;
    scan[rc(batches_[s].router, batches_[s].commodity)] += batches_[s].size;
    queued += batches_[s].size;
  };
  for (const auto& ls : links_) {
    for (auto s : ls.waiting) add(s);
    add(ls.tx);
    add(ls.staged);
  }
  for (std::size_t k = 0; k < scan.size(); ++k) {
    ++m_.queue_audit_checks;
    if (scan[k] != queue_update(u_prev_[k], o_[k], i_[k], g_[k])) ++m_.queue_audit_violations;
  }
  // The forecast tracks the G term of the queue dynamics: local arrivals still queued at period end.
  for (std::size_t k = 0; k < g_.size(); ++k)
    if (g_[k]) forecaster_.record(t_.owner(id_cast<RouterIdx>(k / nc_)), id_cast<Commodity>(k % nc_), static_cast<double>(g_[k]));
  u_prev_ = std::move(scan);
  std::fill(o_.begin(), o_.end(), 0);
  std::fill(i_.begin(), i_.end(), 0);
  std::fill(g_.begin(), g_.end(), 0);
  ++period_;

  const std::uint64_t accounted = m_.delivered_bytes + m_.overflow_bytes + m_.ttl_dropped_bytes +
                                  m_.unroutable_bytes + m_.in_flight_bytes + queued;
  if (accounted != m_.generated_bytes || queued != held_total_) ++m_.conservation_violations;
}

void Simulation::controller_tick(double now, bool final_tick) {
  audit();
  forecaster_.roll();
  if (!ctrl_ || final_tick) return;
  ++m_.controller_ticks;

  // Full reports: every AS lists every commodity it does not host.
  std::vector<CongestionReport> reports;
  for (std::size_t a = 0; a < t_.as_count(); ++a) {
    CongestionReport r;
    r.as_id = t_.as(id_cast<AsIdx>(a)).as_id;
    for (std::size_t c = 0; c < nc_; ++c) {
      if (idx(comm_.host(id_cast<Commodity>(c))) == a) continue;
      r.entries.push_back({comm_.prefix(id_cast<Commodity>(c)), static_cast<double>(held_as_[a * nc_ + c]) / kBytesPerGb});
    }
    auto wire = encode(r);
    m_.report_bytes += wire.size();
    auto back = decode_report(wire);
    back.timestamp = now;
    reports.push_back(std::move(back));
  }

  const bool fc = uses_forecast(cfg_.algorithm);
  const ForecastView none;
  auto messages = ctrl_->tick(now, reports, fc ? forecaster_.forecast() : none);
  if (ctrl_->last_partial()) ++m_.partial_stitches;

  const auto& props = ctrl_->last_proposals();
  m_.ordering_checks += props.size();
  m_.ordering_violations += ordering_violations(props, t_, ctrl_->backlogs(),
                                                fc ? forecaster_.forecast() : ForecastView(t_.as_count(), nc_));

  // Each tick's messages replace the previous rule set.
  rules_.clear();
  for (const auto& msg : messages) {
    auto wire = encode(msg);
    m_.rule_message_bytes += wire.size();
    auto back = decode_rules(wire);
    auto owner = t_.find_as(back.as_id);
    if (!owner) continue;
    for (auto [c, l] : resolve_rules(back, t_, comm_)) {
      rules_.install(*owner, c, l);
      const std::size_t k = idx(*owner) * nc_ + idx(c);
      rule_safety_[k] = cfg_.safety_fraction * ctrl_->backlogs().at(*owner, c);
      rule_last_hit_[k] = now;
      rule_installed_at_[k] = now;
      ++m_.rules_installed;
    }
  }
  for (std::size_t r = 0; r < t_.router_count(); ++r) rebucket(r);
}

void Simulation::expiry_sweep(double now) {
  stability_samples_.push_back(static_cast<double>(held_total_));
  if (rules_.size() == 0) return;
  std::vector<InstalledRule> live;
  BacklogView view(t_.as_count(), nc_, now);
  for (std::size_t a = 0; a < t_.as_count(); ++a) {
    for (std::size_t c = 0; c < nc_; ++c) {
      auto as = id_cast<AsIdx>(a);
      auto com = id_cast<Commodity>(c);
      view.set(as, com, static_cast<double>(held_as_[a * nc_ + c]));
      if (auto via = rules_.find(as, com)) {
        const std::size_t k = a * nc_ + c;
        live.push_back({{as, com, *via, 0.0, 0.0}, rule_installed_at_[k], rule_last_hit_[k], rule_safety_[k]});
      }
    }
  }
  const double idle = cfg_.idle_timeout_s.value_or(cfg_.period_s);
  bool changed = false;
  for (const auto& r : rule_lifecycle(now, std::move(live), view, idle)) {
    if (r.state != RuleState::expired) continue;
    rules_.remove(r.proposal.owner, r.proposal.commodity);
    changed = true;
  }
  if (changed)
    for (std::size_t r = 0; r < t_.router_count(); ++r) rebucket(r);
}

MetricsReport Simulation::run() {
  const double dur = cfg_.duration_s;
  const double T = cfg_.period_s;
  const auto n_ticks = static_cast<std::size_t>(std::floor(dur / T + 1e-9));
  for (std::size_t k = 1; k <= n_ticks; ++k) push(static_cast<double>(k) * T, EvKind::controller_tick, 0);
  if (static_cast<double>(n_ticks) * T < dur * (1.0 - 1e-12)) push(dur, EvKind::controller_tick, 0);
  const std::size_t sweeps = static_cast<std::size_t>(std::floor(dur / (T / 10.0) + 1e-9));
  for (std::size_t k = 1; k <= sweeps; ++k) push(static_cast<double>(k) * T / 10.0, EvKind::rule_expiry, 0);

  if (gen_) {
    for (std::size_t r = 0; r < t_.router_count(); ++r)
      if (gen_->peek(id_cast<RouterIdx>(r)) <= dur) push(gen_->peek(id_cast<RouterIdx>(r)), EvKind::generation, static_cast<std::uint32_t>(r));
  } else {
    const auto& sb = *in_.scripted_batches;
    for (std::size_t i = 0; i < sb.size(); ++i)
      if (sb[i].created_at <= dur) push(sb[i].created_at, EvKind::generation, kNoSlot, static_cast<std::uint32_t>(i));
  }

  while (!events_.empty()) {
    const Event ev = events_.top();
    if (ev.time > dur) break;
    events_.pop();
    now_ = ev.time;
    ++m_.events;
    switch (ev.kind) {
      case EvKind::controller_tick:
        controller_tick(now_, now_ >= dur * (1.0 - 1e-12));
        break;
      case EvKind::rule_expiry:
        expiry_sweep(now_);
        break;
      case EvKind::generation: {
        Batch b;
        if (ev.a != kNoSlot) {
          b = gen_->pop(id_cast<RouterIdx>(ev.a));
          if (gen_->peek(id_cast<RouterIdx>(ev.a)) <= dur) push(gen_->peek(id_cast<RouterIdx>(ev.a)), EvKind::generation, ev.a);
        } else {
          b = (*in_.scripted_batches)[ev.b];
        }
        m_.generated_bytes += b.size;
        ++m_.batches_generated;
        BatchRec rec;
        rec.id = b.id;
        rec.size = b.size;
        rec.created_at = b.created_at;
        rec.commodity = static_cast<std::uint32_t>(idx(b.commodity));
        auto slot = alloc(rec);
        receive(slot, idx(b.source), true);
        break;
      }
      case EvKind::transmission_complete:
        on_tx_complete(id_cast<LinkIdx>(ev.a));
        break;
      case EvKind::batch_arrival:
        m_.in_flight_bytes -= batches_[ev.b].size;
        receive(ev.b, ev.a, false);
        break;
    }
  }

  m_.queued_bytes = held_total_;
  m_.throughput_bps = static_cast<double>(peering_bytes_) * 8.0 / dur;
  m_.overflow_bps = static_cast<double>(m_.overflow_bytes) * 8.0 / dur;
  m_.mean_latency_s = m_.batches_delivered ? latency_sum_ / static_cast<double>(m_.batches_delivered) : 0.0;
  m_.control_overhead_bytes = m_.report_bytes + m_.rule_message_bytes;
  m_.stability_avg_backlog = stability_samples_.empty() ? 0.0 : stability_metric(stability_samples_);
  m_.per_as_share.assign(t_.as_count(), 0.0);
  if (peering_bytes_ > 0)
    for (std::size_t a = 0; a < t_.as_count(); ++a)
      m_.per_as_share[a] = m_.per_as_bytes[a] / static_cast<double>(peering_bytes_);

  std::vector<double> tp(n_seg_), of(n_seg_), lat;
  for (std::size_t s = 0; s < n_seg_; ++s) {
    tp[s] = seg_peering_[s] * 8.0 / seg_len_;
    of[s] = seg_overflow_[s] * 8.0 / seg_len_;
    if (seg_latency_n_[s] > 0) lat.push_back(seg_latency_sum_[s] / seg_latency_n_[s]);
  }
  m_.throughput_half_width = batch_means_half_width(tp);
  m_.overflow_half_width = batch_means_half_width(of);
  m_.latency_half_width = batch_means_half_width(lat);
  return m_;
}

}  // namespace

MetricsReport run(const RunInputs& in) {
  const auto& cfg = in.config;
  if (!(cfg.period_s > 0.0)) throw ConfigError("period T must be > 0");
  if (!(cfg.duration_s >= 10.0 * cfg.period_s * (1.0 - 1e-12)))
    throw ConfigError("duration must be at least 10 periods");
  if (cfg.max_hops == 0) throw ConfigError("max_hops must be >= 1");
  if (!(cfg.safety_fraction >= 0.0)) throw ConfigError("safety fraction must be >= 0");
  if (auto problems = in.topology.validate(); !problems.empty())
    throw ConfigError("invalid topology: " + problems.front());
  if (in.topology.as_count() < 2) throw ConfigError("need at least two ASes");
  if (in.scripted_batches) {
    for (const auto& b : *in.scripted_batches) {
      if (idx(b.source) >= in.topology.router_count()) throw ConfigError("scripted batch from unknown router");
      if (b.size == 0) throw ConfigError("scripted batch of size 0");
    }
  } else {
    const auto& s = in.scenario;
    if (s.batch_bytes == 0) throw ConfigError("traffic.batch_bytes must be > 0");
    if (!(s.mean_router_load_bps >= 0.0)) throw ConfigError("traffic.mean_router_load_bps must be >= 0");
    if (s.mode == TrafficMode::skewed && (!s.input_as || idx(*s.input_as) >= in.topology.as_count()))
      throw ConfigError("skewed traffic needs a valid input AS");
    for (const auto& a : in.topology.ases())
      if (a.degree == 0) throw ConfigError("AS " + a.as_id + " has no peers");
  }
  Simulation sim(in);
  return sim.run();
}

}  // namespace bpsim
