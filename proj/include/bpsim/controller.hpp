#pragma once

#include <bpsim/backpressure.hpp>
#include <bpsim/commodity.hpp>
#include <bpsim/policy.hpp>
#include <bpsim/topology.hpp>

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bpsim {

inline constexpr double kBytesPerGb = 1073741824.0;  // reports carry GB = 2^30 bytes

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CongestionReport {
  struct Entry {
    Ipv4Prefix prefix;
    double load_gb = 0.0;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  std::string as_id;  // at most 8 ASCII bytes on the wire
  std::vector<Entry> entries;
  double timestamp = 0.0;  // not serialized
};

struct RuleMessage {
  struct Rule {
    Ipv4Prefix prefix;
    std::string link_id;  // at most 8 ASCII bytes
    friend bool operator==(const Rule&, const Rule&) = default;
  };
  std::string as_id;
  std::vector<Rule> rules;
};

enum class MessageKind : std::uint8_t { report, rule };

/// 8-byte AS header plus 13 bytes per entry, for both kinds.
constexpr std::size_t message_size(MessageKind, std::size_t n_entries) noexcept { return 8 + 13 * n_entries; }

// Big-endian wire format; ids are NUL padded to 8 bytes.
std::vector<std::uint8_t> encode(const CongestionReport& r);
std::vector<std::uint8_t> encode(const RuleMessage& m);
CongestionReport decode_report(std::span<const std::uint8_t> bytes);
RuleMessage decode_rules(std::span<const std::uint8_t> bytes);

struct DriftBoundParams {
  double alpha = 0.0;
  double beta = 0.0;
};

/// alpha*T^2 - 2*beta*T.
double drift_bound(double T, const DriftBoundParams& p);
/// Largest T with drift_bound(T) <= l_max. Throws std::invalid_argument for
/// alpha <= 0 or l_max <= 0.
double max_acceptable_T(const DriftBoundParams& p, double l_max);

/// alpha = sum_(n,c) [mu_out(n)^2 + (mu_in(n) + lambda_(n,c))^2],
/// beta  = sum_(n,c) U_(n,c) [mu_out(n) - mu_in(n) - lambda_(n,c)],
/// with mu_out/mu_in the usable peering capacity leaving/entering n in
/// bytes/s and lambda the forecast rate in bytes/s.
DriftBoundParams drift_params(const Topology& t, const CommoditySpace& comm, const BacklogView& backlogs,
                              const ForecastView& forecasts, double period_s,
                              const std::vector<bool>& usable_links = {});

enum class RuleState : std::uint8_t { active, expired };

struct InstalledRule {
  RuleProposal proposal;
  double installed_at = 0.0;
  double last_hit = 0.0;
  double safety_level = 0.0;  // bytes; the rule dies when the local backlog falls below it
  RuleState state = RuleState::active;
};

inline constexpr double kDefaultSafetyFraction = 0.10;

/// Marks rules expired when the owner's backlog for the commodity dropped
/// below the rule's safety level, or when the rule has been idle for longer
/// than `idle_timeout`. Expired rules are kept (state changes only).
std::vector<InstalledRule> rule_lifecycle(double now, std::vector<InstalledRule> rules, const BacklogView& backlogs,
                                          double idle_timeout);

enum class Algorithm : std::uint8_t { sbpr, fbpr, bp_dv_stitch, nhops_stitch };

struct ControllerConfig {
  Algorithm algorithm = Algorithm::fbpr;
  double period_s = 10.0;
  double alarm_level = 0.0;
  bool prefix_rule_budget = false;
  std::chrono::nanoseconds stitch_timeout = std::chrono::seconds(5);
  PeeringPreferences preferences;
};

class Controller {
 public:
  Controller(const Topology& t, const CommoditySpace& comm, const RoutingTable& dvr, ControllerConfig cfg);

  /// Ingests reports, derives proposals and returns one message per AS with
  /// at least one accepted rule (ascending AS).
  std::vector<RuleMessage> tick(double now, std::span<const CongestionReport> reports,
                                const ForecastView& forecasts = {});

  /// Return true to reject the rule; the link is then withheld until re-enabled.
  void set_rejection_callback(std::function<bool(AsIdx, Commodity, LinkIdx)> cb) { reject_cb_ = std::move(cb); }
  void reject_link(LinkIdx l) { usable_[idx(l)] = false; }
  void reenable_link(LinkIdx l) { usable_[idx(l)] = true; }
  const std::vector<bool>& usable_links() const noexcept { return usable_; }

  const BacklogView& backlogs() const noexcept { return backlogs_; }
  const std::vector<RuleProposal>& last_proposals() const noexcept { return last_; }
  bool last_partial() const noexcept { return last_partial_; }
  std::size_t skipped_reports() const noexcept { return skipped_; }

 private:
  const Topology& topo_;
  const CommoditySpace& comm_;
  const RoutingTable& dvr_;
  ControllerConfig cfg_;
  BacklogView backlogs_;
  std::vector<double> refreshed_at_;
  std::vector<bool> usable_;
  std::vector<RuleProposal> last_;
  bool last_partial_ = false;
  std::size_t skipped_ = 0;
  std::function<bool(AsIdx, Commodity, LinkIdx)> reject_cb_;
};

/// Resolves a rule message against the topology; unknown entries are dropped.
std::vector<std::pair<Commodity, LinkIdx>> resolve_rules(const RuleMessage& m, const Topology& t,
                                                         const CommoditySpace& comm);

}  // namespace bpsim
