// Synthetic AS/router topology files in the loader's formats.
#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const char* kCountries[] = {"CH", "DE", "FR", "IT", "AT", "NL", "BE", "ES", "PL", "CZ", "SE", "DK", "NO",
                            "FI", "PT", "IE", "GB", "HU", "SK", "SI", "HR", "RO", "BG", "GR", "LU"};

struct Spec {
  int ases = 25;
  int relations = 66;
  int routers = 351;
  int links = 273;
  int first_asn = 65001;
  std::uint64_t seed = 2015;
};

}  // namespace

int main(int argc, char** argv) {
  Spec s;
  std::string out;
  CLI::App app{"Writes nodes.csv, links.csv, as.csv and relations.txt for a synthetic peering cluster"};
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--ases", s.ases)->check(CLI::Range(2, 1000));
  app.add_option("--relations", s.relations, "AS-level peer relations");
  app.add_option("--routers", s.routers);
  app.add_option("--links", s.links, "physical peering links");
  app.add_option("--first-asn", s.first_asn);
  app.add_option("--seed", s.seed);
  CLI11_PARSE(app, argc, argv);

  const int max_rel = s.ases * (s.ases - 1) / 2;
  if (s.relations < s.ases - 1 || s.relations > max_rel) {
    std::cerr << "relations must lie in [ases-1, ases*(ases-1)/2]\n";
    return 2;
  }
  if (s.routers < s.ases || s.links < s.relations) {
    std::cerr << "need at least one router per AS and one link per relation\n";
    return 2;
  }

  std::mt19937_64 rng(s.seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  // AS graph: random tree, then preferential extra edges for a skewed degree law.
  std::set<std::pair<int, int>> rel;
  std::vector<int> degree(s.ases, 0);
  auto add = [&](int a, int b) {
    if (a == b) return false;
    auto key = std::minmax(a, b);
    if (!rel.insert(key).second) return false;
    ++degree[a];
    ++degree[b];
    return true;
  };
  for (int v = 1; v < s.ases; ++v) add(v, uniform(0, v - 1));
  while (static_cast<int>(rel.size()) < s.relations) {
    std::vector<double> w(degree.begin(), degree.end());
    for (auto& x : w) x += 1.0;
    std::discrete_distribution<int> pick(w.begin(), w.end());
    add(pick(rng), pick(rng));
  }

  // Routers: two per AS, the rest roughly in proportion to degree.
  std::vector<int> routers(s.ases, 1);
  int left = s.routers - s.ases;
  if (s.routers >= 2 * s.ases) {
    std::fill(routers.begin(), routers.end(), 2);
    left = s.routers - 2 * s.ases;
  }
  {
    std::discrete_distribution<int> pick(degree.begin(), degree.end());
    for (; left > 0; --left) ++routers[pick(rng)];
  }

  std::vector<std::pair<double, double>> centre(s.ases);
  for (auto& c : centre)
    c = {std::uniform_real_distribution<double>(38.0, 58.0)(rng), std::uniform_real_distribution<double>(-8.0, 26.0)(rng)};

  fs::create_directories(out);
  std::ofstream nodes(fs::path(out) / "nodes.csv"), as_file(fs::path(out) / "as.csv"),
      links(fs::path(out) / "links.csv"), rels(fs::path(out) / "relations.txt");
  nodes << "# router_id,lat,lon\n";
  as_file << "# router_id,as_id,as_name,country\n";
  links << "# link_id,from_router,to_router[,capacity_bps]\n";
  rels << "# as1|as2|rel (0 = peer, -1 = provider-customer)\n";

  std::vector<std::vector<std::string>> names(s.ases);
  int rid = 0;
  for (int a = 0; a < s.ases; ++a) {
    for (int k = 0; k < routers[a]; ++k) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "R%04d", ++rid);
      names[a].push_back(buf);
      double lat = centre[a].first + std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
      double lon = centre[a].second + std::uniform_real_distribution<double>(-1.5, 1.5)(rng);
      nodes << buf << ',' << lat << ',' << lon << '\n';
      as_file << buf << ',' << s.first_asn + a << ",AS-" << s.first_asn + a << ','
              << kCountries[a % std::size(kCountries)] << '\n';
    }
  }

  // Physical links: one per relation, the rest spread over relations.
  std::vector<std::pair<int, int>> rel_list(rel.begin(), rel.end());
  std::vector<int> per_rel(rel_list.size(), 1);
  for (int k = static_cast<int>(rel_list.size()); k < s.links; ++k) ++per_rel[uniform(0, static_cast<int>(rel_list.size()) - 1)];
  std::vector<int> cursor(s.ases, 0);
  int lid = 0;
  for (std::size_t i = 0; i < rel_list.size(); ++i) {
    auto [a, b] = rel_list[i];
    rels << s.first_asn + a << '|' << s.first_asn + b << "|0\n";
    for (int k = 0; k < per_rel[i]; ++k) {
      // Round-robin over each AS's routers so the links are spread out.
      const auto& ra = names[a][cursor[a]++ % names[a].size()];
      const auto& rb = names[b][cursor[b]++ % names[b].size()];
      ++lid;
      char fwd[16], rev[16];
      std::snprintf(fwd, sizeof fwd, "P%04da", lid);
      std::snprintf(rev, sizeof rev, "P%04db", lid);
      links << fwd << ',' << ra << ',' << rb << '\n' << rev << ',' << rb << ',' << ra << '\n';
    }
  }
  std::cout << s.ases << " ASes, " << rel.size() << " relations, " << rid << " routers, " << lid
            << " physical peering links -> " << out << '\n';
  return 0;
}
