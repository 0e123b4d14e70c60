#pragma once

#include <bpsim/ids.hpp>
#include <bpsim/topology.hpp>

#include <map>
#include <optional>
#include <vector>

namespace bpsim {

/// Routing destinations. At AS granularity commodity i is AS i; at prefix
/// granularity AS a hosts commodities [a*N_p, (a+1)*N_p).
class CommoditySpace {
 public:
  static CommoditySpace as_level(const Topology& t);
  static CommoditySpace prefix_level(const Topology& t);
  /// Arbitrary commodity list, e.g. one that adds super-prefixes.
  static CommoditySpace custom(std::vector<AsIdx> hosts, std::vector<Ipv4Prefix> prefixes);

  std::size_t size() const noexcept { return hosts_.size(); }
  std::size_t per_as() const noexcept { return per_as_; }
  bool prefix_granularity() const noexcept { return prefix_granularity_; }

  AsIdx host(Commodity c) const { return hosts_[idx(c)]; }
  const Ipv4Prefix& prefix(Commodity c) const { return prefixes_[idx(c)]; }
  std::optional<Commodity> find(const Ipv4Prefix& p) const;

 private:
  std::vector<AsIdx> hosts_;
  std::vector<Ipv4Prefix> prefixes_;
  std::map<Ipv4Prefix, Commodity> by_prefix_;
  std::size_t per_as_ = 1;
  bool prefix_granularity_ = false;
};

}  // namespace bpsim
