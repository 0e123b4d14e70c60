#include <bpsim/plan.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

namespace bpsim {

namespace {

constexpr std::string_view kSweepNames[] = {"load", "period_T", "distribution", "prefixes", "topology_size"};

[[noreturn]] void fail(const YAML::Node& n, const std::string& msg) {
  if (n.Mark().line >= 0) throw PlanError(fmt::format("line {}: {}", n.Mark().line + 1, msg));
  throw PlanError(msg);
}

template <typename T>
T scalar(const YAML::Node& n, const char* key) {
  if (!n.IsScalar()) fail(n, fmt::format("'{}' must be a scalar", key));
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(n, fmt::format("'{}' has an invalid value '{}'", key, n.Scalar()));
  }
}

void check_keys(const YAML::Node& map, std::initializer_list<std::string_view> allowed, const char* where) {
  if (!map.IsMap()) fail(map, fmt::format("'{}' must be a mapping", where));
  for (const auto& kv : map) {
    auto k = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      fail(kv.first, fmt::format("unknown key '{}' in {}", k, where));
  }
}

std::string number_text(double v) { return fmt::format("{}", v); }

}  // namespace

std::optional<Sweep> parse_sweep(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kSweepNames); ++i)
    if (kSweepNames[i] == s) return static_cast<Sweep>(i);
  return std::nullopt;
}

std::string_view to_string(Sweep s) { return kSweepNames[static_cast<std::size_t>(s)]; }

ExperimentPlan ExperimentPlan::defaults(Preset p) {
  ExperimentPlan plan;
  plan.period_s = 10.0;
  plan.mean_router_load_bps = 3.2e10;
  if (p == Preset::desk) {
    plan.duration_s = 600.0;
    plan.repetitions = 10;
  } else {
    plan.duration_s = 3600.0;
    plan.repetitions = 100;
  }
  plan.seeds.resize(plan.repetitions);
  std::iota(plan.seeds.begin(), plan.seeds.end(), 1);
  return plan;
}

ExperimentPlan ExperimentPlan::from_file(const std::filesystem::path& file, Preset p) {
  std::ifstream in(file);
  if (!in) throw PlanError("cannot read plan file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_yaml(ss.str(), p, file.parent_path());
}

ExperimentPlan ExperimentPlan::from_yaml(const std::string& text, Preset p, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw PlanError(fmt::format("line {}: {}", e.mark.line + 1, e.msg));
  }
  ExperimentPlan plan = defaults(p);
  plan.base_dir = base_dir;
  check_keys(root, {"sweep", "algorithms", "repetitions", "seeds", "points", "topology", "capacity", "sim", "traffic",
                    "preferences"},
             "plan");

  if (auto n = root["sweep"]) {
    auto s = parse_sweep(scalar<std::string>(n, "sweep"));
    if (!s) fail(n, "unknown sweep '" + n.Scalar() + "'");
    plan.sweep = *s;
  }
  if (auto n = root["algorithms"]) {
    if (!n.IsSequence()) fail(n, "'algorithms' must be a list");
    plan.algorithms.clear();
    for (const auto& a : n) {
      auto alg = parse_algorithm(scalar<std::string>(a, "algorithms"));
      if (!alg) fail(a, "unknown algorithm '" + a.Scalar() + "'");
      plan.algorithms.push_back(*alg);
    }
  }
  bool explicit_seeds = false;
  if (auto n = root["repetitions"]) {
    auto r = scalar<long long>(n, "repetitions");
    if (r < 1) fail(n, "'repetitions' must be >= 1");
    plan.repetitions = static_cast<std::size_t>(r);
  }
  if (auto n = root["seeds"]) {
    if (!n.IsSequence()) fail(n, "'seeds' must be a list");
    plan.seeds.clear();
    for (const auto& s : n) plan.seeds.push_back(scalar<std::uint64_t>(s, "seeds"));
    explicit_seeds = true;
    if (!root["repetitions"]) plan.repetitions = plan.seeds.size();
    if (plan.seeds.size() != plan.repetitions) fail(n, "'seeds' must list one seed per repetition");
  }
  if (!explicit_seeds) {
    plan.seeds.resize(plan.repetitions);
    std::iota(plan.seeds.begin(), plan.seeds.end(), 1);
  }
  if (auto n = root["points"]) {
    if (!n.IsSequence()) fail(n, "'points' must be a list");
    for (const auto& v : n) plan.points.push_back(scalar<std::string>(v, "points"));
  }
  if (auto topo = root["topology"]) {
    check_keys(topo, {"nodes", "links", "as", "relations", "top_k", "p2p_only"}, "topology");
    if (auto n = topo["nodes"]) plan.topology.nodes = scalar<std::string>(n, "nodes");
    if (auto n = topo["links"]) plan.topology.links = scalar<std::string>(n, "links");
    if (auto n = topo["as"]) plan.topology.as_file = scalar<std::string>(n, "as");
    if (auto n = topo["relations"]) plan.topology.relations = scalar<std::string>(n, "relations");
    if (auto n = topo["top_k"]) {
      auto k = scalar<long long>(n, "top_k");
      if (k < 1) fail(n, "'top_k' must be >= 1");
      plan.topology.top_k = static_cast<std::size_t>(k);
    }
    if (auto n = topo["p2p_only"]) plan.topology.p2p_only = scalar<bool>(n, "p2p_only");
  }
  if (auto cap = root["capacity"]) {
    check_keys(cap, {"low_bps", "high_bps"}, "capacity");
    if (auto n = cap["low_bps"]) plan.capacity_low_bps = scalar<double>(n, "low_bps");
    if (auto n = cap["high_bps"]) plan.capacity_high_bps = scalar<double>(n, "high_bps");
    if (!(plan.capacity_low_bps > 0.0) || plan.capacity_high_bps < plan.capacity_low_bps)
      fail(cap, "capacity needs 0 < low_bps <= high_bps");
  }
  if (auto sim = root["sim"]) {
    check_keys(sim, {"duration_s", "T_s", "stitch_timeout_s"}, "sim");
    if (auto n = sim["duration_s"]) plan.duration_s = scalar<double>(n, "duration_s");
    if (auto n = sim["T_s"]) plan.period_s = scalar<double>(n, "T_s");
    if (auto n = sim["stitch_timeout_s"]) plan.stitch_timeout_s = scalar<double>(n, "stitch_timeout_s");
    if (!(plan.period_s > 0.0)) fail(sim, "'T_s' must be > 0");
    if (!(plan.duration_s > 0.0)) fail(sim, "'duration_s' must be > 0");
    if (!(plan.stitch_timeout_s > 0.0)) fail(sim, "'stitch_timeout_s' must be > 0");
  }
  if (auto tr = root["traffic"]) {
    check_keys(tr, {"mode", "input_as", "mean_router_load_bps", "seed", "batch_bytes"}, "traffic");
    if (auto n = tr["mode"]) {
      auto m = scalar<std::string>(n, "mode");
      if (m == "linear") plan.traffic_mode = TrafficMode::linear;
      else if (m == "skewed") plan.traffic_mode = TrafficMode::skewed;
      else fail(n, "traffic.mode must be 'linear' or 'skewed'");
    }
    if (auto n = tr["input_as"]) plan.input_as = scalar<std::string>(n, "input_as");
    if (auto n = tr["mean_router_load_bps"]) {
      plan.mean_router_load_bps = scalar<double>(n, "mean_router_load_bps");
      if (!(plan.mean_router_load_bps >= 0.0)) fail(n, "traffic.mean_router_load_bps must be >= 0");
    }
    if (auto n = tr["seed"]) plan.traffic_seed = scalar<std::uint64_t>(n, "seed");
    if (auto n = tr["batch_bytes"]) {
      plan.batch_bytes = scalar<std::uint64_t>(n, "batch_bytes");
      if (plan.batch_bytes == 0) fail(n, "traffic.batch_bytes must be > 0");
    }
    if (plan.traffic_mode == TrafficMode::skewed && !plan.input_as && plan.sweep != Sweep::distribution)
      fail(tr, "skewed traffic needs traffic.input_as");
  }
  if (auto pr = root["preferences"]) {
    check_keys(pr, {"deny"}, "preferences");
    if (auto d = pr["deny"]) {
      if (!d.IsSequence()) fail(d, "'preferences.deny' must be a list of [from, to] pairs");
      for (const auto& pair : d) {
        if (!pair.IsSequence() || pair.size() != 2) fail(pair, "deny entries are [from_as, to_as]");
        plan.deny.emplace_back(scalar<std::string>(pair[0], "deny"), scalar<std::string>(pair[1], "deny"));
      }
    }
  }

  if (plan.algorithms.empty()) fail(root, "'algorithms' is required");
  if (plan.topology.nodes.empty() || plan.topology.links.empty() || plan.topology.as_file.empty())
    fail(root, "'topology' needs nodes, links and as files");

  // Points checked per sweep so the diagnostics can point at the list.
  auto pts = root["points"];
  for (std::size_t i = 0; i < plan.points.size(); ++i) {
    const auto& v = plan.points[i];
    if (plan.sweep == Sweep::distribution) continue;
    double x = 0.0;
    try {
      std::size_t used = 0;
      x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      fail(pts[i], "sweep point '" + v + "' is not a number");
    }
    const bool integral = plan.sweep == Sweep::prefixes || plan.sweep == Sweep::topology_size;
    if (!(x > 0.0) && !(plan.sweep == Sweep::load && x == 0.0)) fail(pts[i], "sweep point must be > 0");
    if (integral && (x != std::floor(x) || x > 256.0 * 256.0)) fail(pts[i], "sweep point must be a positive integer");
    if (plan.sweep == Sweep::prefixes && x > 256.0) fail(pts[i], "at most 256 prefixes per AS");
  }
  if (plan.points.empty()) {
    switch (plan.sweep) {
      case Sweep::load: plan.points = {number_text(plan.mean_router_load_bps)}; break;
      case Sweep::period_T: plan.points = {number_text(plan.period_s)}; break;
      case Sweep::prefixes: plan.points = {"1"}; break;
      case Sweep::topology_size:
        plan.points = {std::to_string(plan.topology.top_k.value_or(std::numeric_limits<std::uint32_t>::max()))};
        break;
      case Sweep::distribution: plan.points = {"linear"}; break;
    }
  }
  plan.validate();
  return plan;
}

void ExperimentPlan::validate() const {
  if (repetitions < 1) throw PlanError("repetitions must be >= 1");
  if (seeds.size() != repetitions) throw PlanError("one seed per repetition required");
  if (algorithms.empty()) throw PlanError("no algorithms");
  if (points.empty()) throw PlanError("no sweep points");
  if (!(period_s > 0.0) || !(duration_s > 0.0)) throw PlanError("duration and T must be > 0");
  if (sweep != Sweep::period_T && duration_s < 10.0 * period_s)
    throw PlanError("sim.duration_s must be at least 10 * T_s");
}

std::vector<RunSpec> expand(const ExperimentPlan& plan) {
  std::vector<RunSpec> out;
  for (std::size_t p = 0; p < plan.points.size(); ++p) {
    for (auto alg : plan.algorithms) {
      for (std::size_t rep = 0; rep < plan.repetitions; ++rep) {
        RunSpec s;
        s.run_id = out.size();
        s.point_index = p;
        s.point = plan.points[p];
        s.algorithm = alg;
        s.repetition = rep;
        s.seed = plan.seeds[rep];
        s.load_bps = plan.mean_router_load_bps;
        s.period_s = plan.period_s;
        s.duration_s = plan.duration_s;
        s.top_k = plan.topology.top_k;
        s.mode = plan.traffic_mode;
        s.input_as = plan.input_as;
        switch (plan.sweep) {
          case Sweep::load: s.load_bps = std::stod(s.point); break;
          case Sweep::period_T:
            s.period_s = std::stod(s.point);
            // Long periods need proportionally long runs.
            s.duration_s = std::max(plan.duration_s, 10.0 * s.period_s);
            break;
          case Sweep::prefixes: s.n_prefixes = static_cast<std::size_t>(std::stoul(s.point)); break;
          case Sweep::topology_size: s.top_k = static_cast<std::size_t>(std::stoul(s.point)); break;
          case Sweep::distribution:
            if (s.point == "linear") {
              s.mode = TrafficMode::linear;
              s.input_as.reset();
            } else {
              s.mode = TrafficMode::skewed;
              s.input_as = s.point;
            }
            break;
        }
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

namespace {

std::uint64_t traffic_seed(std::uint64_t base, std::uint64_t rep_seed) { return base * 1000003ULL + rep_seed; }

struct TopologyCache {
  Topology base;
  std::map<std::optional<std::size_t>, Topology> filtered;
  const Topology& get(std::optional<std::size_t> k) const { return filtered.at(k); }
};

RunResult execute_one(const ExperimentPlan& plan, const RunSpec& spec, const TopologyCache& cache) {
  RunResult r;
  r.spec = spec;
  try {
    Topology t = randomize_capacities(cache.get(spec.top_k), plan.capacity_low_bps, plan.capacity_high_bps, spec.seed);
    if (spec.n_prefixes != 1 || plan.sweep == Sweep::prefixes) t = with_prefixes(t, spec.n_prefixes);
    r.n_ases = t.as_count();
    for (const auto& a : t.ases()) r.as_ids.push_back(a.as_id);

    TrafficScenario sc;
    sc.mode = spec.mode;
    sc.mean_router_load_bps = spec.load_bps;
    sc.seed = traffic_seed(plan.traffic_seed, spec.seed);
    sc.batch_bytes = plan.batch_bytes;
    if (spec.mode == TrafficMode::skewed) {
      if (!spec.input_as) throw ConfigError("skewed run without input AS");
      auto a = t.find_as(*spec.input_as);
      if (!a) throw ConfigError("input AS '" + *spec.input_as + "' is not in the topology");
      sc.input_as = *a;
    }

    RunConfig cfg;
    cfg.algorithm = spec.algorithm;
    cfg.duration_s = spec.duration_s;
    cfg.period_s = spec.period_s;
    cfg.prefix_granularity = plan.sweep == Sweep::prefixes;
    cfg.stitch_timeout = std::chrono::duration_cast<std::chrono::nanoseconds>(
        std::chrono::duration<double>(plan.stitch_timeout_s));
    for (const auto& [from, to] : plan.deny) {
      auto a = t.find_as(from);
      auto b = t.find_as(to);
      if (a && b) cfg.preferences.denied.insert({*a, *b});
    }
    r.metrics = run({t, sc, cfg, std::nullopt, nullptr});
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

}  // namespace

std::vector<RunResult> execute(const ExperimentPlan& plan, std::size_t workers,
                               const std::function<void(const RunResult&)>& on_done) {
  plan.validate();
  auto specs = expand(plan);
  auto resolve = [&](const std::filesystem::path& p) { return p.is_absolute() ? p : plan.base_dir / p; };

  TopologyCache cache;
  std::optional<std::filesystem::path> rel;
  if (plan.topology.relations) rel = resolve(*plan.topology.relations);
  cache.base = load_topology(resolve(plan.topology.nodes), resolve(plan.topology.links),
                             resolve(plan.topology.as_file), rel);
  for (const auto& s : specs) {
    if (cache.filtered.contains(s.top_k)) continue;
    std::size_t k = s.top_k.value_or(cache.base.as_count());
    cache.filtered.emplace(s.top_k, filter_pipeline(cache.base, k, plan.topology.p2p_only));
  }

  std::vector<RunResult> results(specs.size());
  std::atomic<std::size_t> next{0};
  std::mutex done_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      results[i] = execute_one(plan, specs[i], cache);
      if (on_done) {
        std::lock_guard lock(done_mu);
        on_done(results[i]);
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(specs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return results;
}

std::vector<double> transit_shares(const RunResult& r) {
  std::vector<double> shares = r.metrics.per_as_bytes;
  if (r.spec.mode == TrafficMode::skewed && r.spec.input_as) {
    for (std::size_t a = 0; a < r.as_ids.size(); ++a)
      if (r.as_ids[a] == *r.spec.input_as) shares[a] = 0.0;
  }
  const double total = std::accumulate(shares.begin(), shares.end(), 0.0);
  if (total > 0.0)
    for (auto& s : shares) s /= total;
  return shares;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

void write_outputs(const std::filesystem::path& dir, const ExperimentPlan& plan,
                   const std::vector<RunResult>& results) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "metrics.csv", std::ios::binary);
    out << kMetricsHeader << '\n';
    for (const auto& r : results) {
      const auto& s = r.spec;
      const auto& m = r.metrics;
      const bool ok = !r.error;
      auto val = [&](double v) { return ok ? fmt::format("{}", v) : std::string("nan"); };
      out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", s.run_id, to_string(s.algorithm),
                         stitch_name(s.algorithm), s.period_s, s.load_bps, r.n_ases, s.n_prefixes, s.seed,
                         val(m.throughput_bps), val(m.overflow_bps), val(m.mean_latency_s),
                         ok ? fmt::format("{}", m.control_overhead_bytes) : std::string("nan"),
                         val(m.stability_avg_backlog));
    }
  }
  {
    std::ofstream out(dir / "shares.csv", std::ios::binary);
    out << kSharesHeader << '\n';
    std::map<std::pair<std::size_t, std::size_t>, const RunResult*> dvr;
    for (const auto& r : results)
      if (r.spec.algorithm == RunAlgorithm::dvr_only && !r.error) dvr[{r.spec.point_index, r.spec.repetition}] = &r;
    for (const auto& r : results) {
      if (r.spec.algorithm == RunAlgorithm::dvr_only || r.error) continue;
      auto it = dvr.find({r.spec.point_index, r.spec.repetition});
      if (it == dvr.end()) continue;
      auto base = transit_shares(*it->second);
      auto mine = transit_shares(r);
      for (std::size_t a = 0; a < r.as_ids.size(); ++a) {
        if (r.spec.mode == TrafficMode::skewed && r.spec.input_as && r.as_ids[a] == *r.spec.input_as) continue;
        out << fmt::format("{},{},{},{}\n", r.spec.run_id, r.as_ids[a], base[a], mine[a]);
      }
    }
  }
  {
    using nlohmann::json;
    json doc;
    doc["sweep"] = std::string(to_string(plan.sweep));
    doc["runs"] = results.size();
    json groups = json::array();
    for (std::size_t p = 0; p < plan.points.size(); ++p) {
      for (auto alg : plan.algorithms) {
        std::vector<const MetricsReport*> ms;
        for (const auto& r : results)
          if (r.spec.point_index == p && r.spec.algorithm == alg && !r.error) ms.push_back(&r.metrics);
        json g;
        g["point"] = plan.points[p];
        g["algorithm"] = std::string(to_string(alg));
        g["runs"] = ms.size();
        auto stat = [&](auto get) {
          json s;
          if (ms.empty()) return s;
          double lo = get(*ms[0]), hi = lo, sum = 0.0;
          for (auto* m : ms) {
            double v = get(*m);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            sum += v;
          }
          s["mean"] = sum / static_cast<double>(ms.size());
          s["min"] = lo;
          s["max"] = hi;
          return s;
        };
        g["throughput_bps"] = stat([](const MetricsReport& m) { return m.throughput_bps; });
        g["overflow_bps"] = stat([](const MetricsReport& m) { return m.overflow_bps; });
        g["mean_latency_s"] = stat([](const MetricsReport& m) { return m.mean_latency_s; });
        g["overhead_bytes"] = stat([](const MetricsReport& m) { return static_cast<double>(m.control_overhead_bytes); });
        g["stability_avg_backlog"] = stat([](const MetricsReport& m) { return m.stability_avg_backlog; });
        groups.push_back(std::move(g));
      }
    }
    doc["groups"] = std::move(groups);
    json failures = json::array();
    for (const auto& r : results)
      if (r.error) failures.push_back({{"run_id", r.spec.run_id}, {"error", *r.error}});
    doc["failures"] = std::move(failures);
    std::ofstream(dir / "summary.json", std::ios::binary) << doc.dump(2) << '\n';
  }
}

}  // namespace bpsim
