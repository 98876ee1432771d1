// Preference-pair construction for DPO. A SUBSET rule splits a group into a
// positive and a negative pool by correctness label; a SUPERVISION method
// picks one sample from each pool, either by DRM reward (best positive, worst
// negative) or uniformly at random (answer-only supervision).
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drm/core.hpp"

namespace drm {

enum class SubsetRule { kAny, kTrueTrue, kTrueFalse, kFalseFalse };

/// Accepts any, t+t, t+f, f+f (case-insensitive).
SubsetRule parse_subset_rule(std::string_view text);
/// "any", "T+T", "T+F", "F+F".
std::string to_string(SubsetRule rule);

struct SupervisionMethod {
  enum class Kind { kDrm, kRlvr };
  Kind kind = Kind::kDrm;
  std::optional<std::uint64_t> seed;  // set iff kind == kRlvr

  static SupervisionMethod drm() { return {Kind::kDrm, std::nullopt}; }
  static SupervisionMethod rlvr(std::uint64_t seed) { return {Kind::kRlvr, seed}; }

  bool operator==(const SupervisionMethod&) const = default;
};

SupervisionMethod parse_supervision(std::string_view text, std::uint64_t seed);
/// "DRM" or "RLVR".
std::string to_string(const SupervisionMethod& method);
/// The SUPERVISION@SUBSET name, e.g. "DRM@T+F".
std::string construction_name(const SupervisionMethod& method, SubsetRule rule);

struct Pools {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
};

struct PreferencePair {
  std::string instance_id;
  std::size_t pos_index = 0;
  std::size_t neg_index = 0;
  double pos_reward = 0.0;
  double neg_reward = 0.0;
  SubsetRule rule = SubsetRule::kAny;
  SupervisionMethod method;

  bool operator==(const PreferencePair&) const = default;
};

/// Index pools in ascending order. ANY ignores labels; the other rules throw
/// kPrecondition when any label is missing.
Pools build_subsets(const SampleGroup& group, SubsetRule rule);

/// Up to `max_pairs` pairs from the pools, never pairing a sample with
/// itself.
///
/// DRM ranks every admissible (pos, neg) by higher pos reward, then lower neg
/// reward, then lower pos index, then lower neg index, and takes the head of
/// that order. For one pair this is the pool argmax paired with the pool
/// argmin, falling back to the lowest-reward distinct negative on collision.
///
/// RLVR draws a positive uniformly, then a negative uniformly from the
/// negative pool minus that positive, from a counter-based stream keyed by
/// (seed, instance_id); results do not depend on processing order.
///
/// `rewards` must have one entry per sample (kValidation otherwise).
std::vector<PreferencePair> select_pairs(const SampleGroup& group, SubsetRule rule,
                                         const Pools& pools, const SupervisionMethod& method,
                                         std::span<const double> rewards,
                                         std::size_t max_pairs = 1);

std::optional<PreferencePair> select_pair(const SampleGroup& group, SubsetRule rule,
                                          const Pools& pools, const SupervisionMethod& method,
                                          std::span<const double> rewards);

/// Deterministic stream of 64-bit values; element k depends only on (key, k).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view stream_name);
  std::uint64_t next();
  /// Uniform in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Text layout of a DPO record.
std::string dpo_prompt(const Quadruple& q);
std::string dpo_response(const Quadruple& q);

/// One line per pair: prompt, chosen, rejected plus pair metadata. Pairs whose
/// instance or indices do not resolve in `groups` throw kIntegrity.
std::size_t emit_dpo_dataset(std::span<const PreferencePair> pairs,
                             std::span<const SampleGroup> groups, std::ostream& out);

}  // namespace drm
