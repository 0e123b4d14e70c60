#include <bpsim/traffic.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace bpsim {

PopularityMatrix popularity(std::span<const std::size_t> degrees) {
  const std::size_t n = degrees.size();
  if (n < 2) throw std::invalid_argument("popularity: need at least two ASes");
  double total = 0.0;
  for (auto d : degrees) {
    if (d == 0) throw std::invalid_argument("popularity: every AS needs degree >= 1");
    total += static_cast<double>(d);
  }
  PopularityMatrix m;
  m.p.resize(n);
  m.pij.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m.p[i] = static_cast<double>(degrees[i]) / total;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) m.pij[i * n + j] = m.p[j] / (1.0 - m.p[i]);
  return m;
}

PopularityMatrix popularity(const Topology& t) {
  std::vector<std::size_t> d;
  for (const auto& a : t.ases()) d.push_back(a.degree);
  return popularity(d);
}

namespace {

// splitmix64 finaliser, to derive independent per-router seeds.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

TrafficGenerator::TrafficGenerator(const Topology& t, const CommoditySpace& comm, const PopularityMatrix& pm,
                                   const TrafficScenario& scenario)
    : topo_(t), comm_(comm), scenario_(scenario) {
  if (pm.size() != t.as_count()) throw std::invalid_argument("traffic: popularity matrix does not match topology");
  if (scenario.batch_bytes == 0) throw std::invalid_argument("traffic: batch size must be > 0");
  if (scenario.mean_router_load_bps < 0.0) throw std::invalid_argument("traffic: negative load");
  if (scenario.mode == TrafficMode::skewed && (!scenario.input_as || idx(*scenario.input_as) >= t.as_count()))
    throw std::invalid_argument("traffic: skewed mode needs a valid input AS");

  const double per_router = scenario.mean_router_load_bps / 8.0 / static_cast<double>(scenario.batch_bytes);
  rates_.assign(t.router_count(), 0.0);
  if (scenario.mode == TrafficMode::linear) {
    std::fill(rates_.begin(), rates_.end(), per_router);
  } else {
    // Same total load, all of it entering through the input AS.
    const auto& entry = t.as(*scenario.input_as).routers;
    const double scale = static_cast<double>(t.router_count()) / static_cast<double>(entry.size());
    for (auto r : entry) rates_[idx(r)] = per_router * scale;
  }

  for (std::size_t a = 0; a < t.as_count(); ++a)
    dest_.emplace_back(pm.pij.begin() + static_cast<std::ptrdiff_t>(a * pm.size()),
                       pm.pij.begin() + static_cast<std::ptrdiff_t>((a + 1) * pm.size()));

  next_.assign(t.router_count(), std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < t.router_count(); ++r) {
    rng_.emplace_back(mix(scenario.seed ^ mix(r + 1)));
    if (rates_[r] > 0.0) next_[r] = std::exponential_distribution<double>(rates_[r])(rng_[r]);
  }
}

Batch TrafficGenerator::pop(RouterIdx r) {
  const std::size_t i = idx(r);
  auto& rng = rng_[i];
  Batch b;
  b.id = next_id_++;
  b.size = scenario_.batch_bytes;
  b.source = r;
  b.created_at = next_[i];
  const auto src_as = topo_.owner(r);
  const std::size_t dest = dest_[idx(src_as)](rng);
  const std::size_t per = comm_.per_as();
  std::size_t k = 0;
  if (per > 1) k = std::uniform_int_distribution<std::size_t>(0, per - 1)(rng);
  b.commodity = id_cast<Commodity>(dest * per + k);
  next_[i] += std::exponential_distribution<double>(rates_[i])(rng);
  return b;
}

std::vector<Batch> TrafficGenerator::generate(double t0, double t1) {
  std::vector<Batch> out;
  for (std::size_t r = 0; r < rates_.size(); ++r) {
    auto ri = id_cast<RouterIdx>(r);
    while (next_[r] < t0) pop(ri);
    while (next_[r] < t1) out.push_back(pop(ri));
  }
  std::stable_sort(out.begin(), out.end(), [](const Batch& a, const Batch& b) {
    if (a.created_at != b.created_at) return a.created_at < b.created_at;
    return a.source < b.source;
  });
  return out;
}

ForecastView forecast(std::span<const GenerationRecord> history, std::size_t as_count, std::size_t commodity_count,
                      double window, double now) {
  ForecastView g(as_count, commodity_count);
  for (const auto& h : history)
    if (h.time >= now - window && h.time < now) g.set(h.as, h.commodity, g.at(h.as, h.commodity) + h.bytes);
  return g;
}

void WindowForecaster::roll() {
  for (std::size_t i = 0; i < current_.size(); ++i)
    last_.set(id_cast<AsIdx>(i / commodities_), id_cast<Commodity>(i % commodities_), current_[i]);
  std::fill(current_.begin(), current_.end(), 0.0);
}

}  // namespace bpsim
