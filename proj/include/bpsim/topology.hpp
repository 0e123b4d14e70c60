#pragma once

#include <bpsim/ids.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bpsim {

inline constexpr std::uint64_t kDefaultRouterMemory = 4ULL << 30;
inline constexpr double kSpeedOfLight = 3.0e8;       // m/s
inline constexpr double kEarthRadius = 6'371'000.0;  // m
inline constexpr double kDefaultLinkCapacity = 10e9; // bps, used when a link file omits it

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input line. The message names the file and the 1-based line.
class ParseError : public TopologyError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A reference that does not resolve (link endpoint, AS of a router, ...).
class IntegrityError : public TopologyError {
 public:
  using TopologyError::TopologyError;
};

enum class LinkKind : std::uint8_t { peering, internal, external };
enum class AsRelation : std::uint8_t { peer_to_peer, customer_provider };

struct GeoPoint {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
};

struct Ipv4Prefix {
  std::uint32_t address = 0;
  std::uint8_t mask = 0;
  friend bool operator==(const Ipv4Prefix&, const Ipv4Prefix&) = default;
  friend auto operator<=>(const Ipv4Prefix&, const Ipv4Prefix&) = default;
};

std::string to_string(const Ipv4Prefix& p);

struct AsNode {
  std::string as_id;
  std::string name;
  std::string country;
  std::vector<RouterIdx> routers;
  std::size_t degree = 0;  // distinct peer ASes
};

struct Router {
  std::string router_id;
  AsIdx owner{};
  GeoPoint location;
  std::uint64_t memory_bytes = kDefaultRouterMemory;
};

struct Link {
  std::string link_id;
  RouterIdx from{};
  RouterIdx to{};
  double capacity_bps = 0.0;
  double latency_s = 0.0;
  LinkKind kind = LinkKind::peering;
};

/// Id-keyed description of a topology. Everything that edits a topology goes
/// through a draft and `Topology::build`, which re-derives indices, degrees,
/// internal meshes and prefixes.
struct TopologyDraft {
  struct AsEntry {
    std::string as_id;
    std::string name;
    std::string country;
  };
  struct RouterEntry {
    std::string router_id;
    std::string as_id;
    GeoPoint location;
    std::uint64_t memory_bytes = kDefaultRouterMemory;
  };
  struct LinkEntry {
    std::string link_id;
    std::string from_router;
    std::string to_router;
    std::optional<double> capacity_bps;
  };

  std::vector<AsEntry> ases;
  std::vector<RouterEntry> routers;
  std::vector<LinkEntry> links;  // inter-AS only; intra-AS entries are ignored
  // Keyed by the (lexicographically) ordered AS id pair.
  std::map<std::pair<std::string, std::string>, AsRelation> relations;
  std::size_t prefixes_per_as = 1;
};

/// Natural ordering for ids: numeric when both parse as integers.
bool id_less(std::string_view a, std::string_view b);

class Topology {
 public:
  Topology() = default;

  static Topology build(TopologyDraft draft);
  TopologyDraft to_draft() const;

  std::span<const AsNode> ases() const noexcept { return ases_; }
  std::span<const Router> routers() const noexcept { return routers_; }
  std::span<const Link> links() const noexcept { return links_; }

  std::size_t as_count() const noexcept { return ases_.size(); }
  std::size_t router_count() const noexcept { return routers_.size(); }
  std::size_t link_count() const noexcept { return links_.size(); }

  const AsNode& as(AsIdx a) const { return ases_.at(idx(a)); }
  const Router& router(RouterIdx r) const { return routers_.at(idx(r)); }
  const Link& link(LinkIdx l) const { return links_.at(idx(l)); }

  AsIdx owner(RouterIdx r) const { return routers_[idx(r)].owner; }
  AsIdx source_as(LinkIdx l) const { return owner(links_[idx(l)].from); }
  AsIdx dest_as(LinkIdx l) const { return owner(links_[idx(l)].to); }

  std::span<const LinkIdx> out_links(RouterIdx r) const { return out_links_[idx(r)]; }
  std::span<const LinkIdx> in_links(RouterIdx r) const { return in_links_[idx(r)]; }
  /// Peering links leaving any router of `a`, ascending link index.
  std::span<const LinkIdx> peering_links_from(AsIdx a) const { return as_out_peering_[idx(a)]; }
  std::span<const LinkIdx> peering_links_into(AsIdx a) const { return as_in_peering_[idx(a)]; }
  /// Peer ASes of `a`, ascending.
  std::span<const AsIdx> as_neighbors(AsIdx a) const { return as_neighbors_[idx(a)]; }
  std::optional<LinkIdx> internal_link(RouterIdx from, RouterIdx to) const;

  std::optional<AsIdx> find_as(std::string_view as_id) const;
  std::optional<RouterIdx> find_router(std::string_view router_id) const;
  std::optional<LinkIdx> find_link(std::string_view link_id) const;

  std::size_t prefixes_per_as() const noexcept { return prefixes_per_as_; }
  std::span<const Ipv4Prefix> prefixes(AsIdx a) const { return prefix_table_[idx(a)]; }
  /// Covering prefix announced for an AS as a whole (AS-granularity routing).
  Ipv4Prefix aggregate_prefix(AsIdx a) const { return aggregates_[idx(a)]; }

  AsRelation relation(AsIdx a, AsIdx b) const;
  std::size_t peering_relation_count() const;
  std::size_t physical_peering_link_count() const;

  /// Describes every violated invariant; empty when the topology is valid.
  std::vector<std::string> validate() const;

  std::size_t load_warnings() const noexcept { return load_warnings_; }
  void set_load_warnings(std::size_t n) noexcept { load_warnings_ = n; }

 private:
  std::vector<AsNode> ases_;
  std::vector<Router> routers_;
  std::vector<Link> links_;
  std::vector<std::vector<LinkIdx>> out_links_;
  std::vector<std::vector<LinkIdx>> in_links_;
  std::vector<std::vector<LinkIdx>> as_out_peering_;
  std::vector<std::vector<LinkIdx>> as_in_peering_;
  std::vector<std::vector<AsIdx>> as_neighbors_;
  std::vector<std::vector<Ipv4Prefix>> prefix_table_;
  std::vector<Ipv4Prefix> aggregates_;
  std::map<std::pair<std::size_t, std::size_t>, AsRelation> relations_;
  std::map<std::string, std::size_t, std::less<>> as_by_id_;
  std::map<std::string, std::size_t, std::less<>> router_by_id_;
  std::map<std::string, std::size_t, std::less<>> link_by_id_;
  std::size_t prefixes_per_as_ = 1;
  std::size_t load_warnings_ = 0;
};

/// Reads the node, link and AS-assignment files, plus an optional CAIDA
/// serial-1 style relationship file (`as1|as2|rel`, rel 0 = peer, -1 =
/// provider-to-customer). Without it every inter-AS link counts as peering.
Topology load_topology(const std::filesystem::path& node_file,
                       const std::filesystem::path& link_file,
                       const std::filesystem::path& as_assignment_file,
                       const std::optional<std::filesystem::path>& relation_file = std::nullopt);

/// Keeps the `top_k` ASes by degree (ties: ascending as_id). With
/// `keep_peer_to_peer_only`, non peer-to-peer links are removed before
/// degrees are ranked.
Topology filter_pipeline(const Topology& t, std::size_t top_k, bool keep_peer_to_peer_only);

/// Great-circle distance over the speed of light.
double link_latency(const GeoPoint& from, const GeoPoint& to);
double great_circle_m(const GeoPoint& a, const GeoPoint& b);

/// Independent uniform draw per peering-link direction; internal links follow
/// the owning AS's largest peering capacity.
Topology randomize_capacities(const Topology& t, double low_bps, double high_bps, std::uint64_t seed);

Topology with_prefixes(const Topology& t, std::size_t prefixes_per_as);

}  // namespace bpsim
