// Group-normalized DRM reward: each dimension is min-max scaled within the
// group and the three are combined with simplex weights.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "drm/dimensions.hpp"

namespace drm {

/// Weights for (confidence, relevance, coherence). Each in [0, 1], summing to
/// 1 within 1e-9.
struct DrmWeights {
  double w_conf = 0.1;
  double w_rel = 0.2;
  double w_coh = 0.7;

  bool operator==(const DrmWeights&) const = default;

  /// Throws kValidation if the simplex constraint does not hold.
  void validate() const;
  /// Rescales nonnegative weights to sum to 1. Only used on explicit request.
  DrmWeights renormalized() const;
  std::string str() const;
};

/// The weighting used throughout the reference experiments.
inline constexpr DrmWeights kDefaultWeights{0.1, 0.2, 0.7};

/// Parses "a,b,c" and validates it.
DrmWeights parse_weights(const std::string& text);

struct RewardRecord {
  std::string instance_id;
  std::size_t index = 0;
  DimensionScores dims_raw;
  DimensionScores dims_norm;
  double drm_reward = 0.0;
};

json to_json(const RewardRecord& r);

inline std::vector<double> normalize_within_group(std::span<const double> values) {
  return min_max_normalize(values);
}

/// Dimension-wise min-max normalization of a group's raw scores.
std::vector<DimensionScores> normalize_dimensions(std::span<const DimensionScores> raw);

double weighted_sum(const DimensionScores& normalized, const DrmWeights& w);

std::vector<RewardRecord> drm_reward(std::span<const DimensionScores> group_scores,
                                     const DrmWeights& weights,
                                     const std::string& instance_id = {});

/// Convenience: rewards only, in sample order.
std::vector<double> drm_reward_values(std::span<const DimensionScores> group_scores,
                                      const DrmWeights& weights);

/// Index of the largest value, lowest index on ties. Empty input throws.
std::size_t argmax_lowest(std::span<const double> values);

}  // namespace drm
