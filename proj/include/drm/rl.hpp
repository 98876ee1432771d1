// Policy-gradient numerics: verifier rewards, group z-scored advantages
// (answer-only, DRM, and their sum), the clipped surrogate, a per-token KL
// estimate, and the DPO loss with an SFT term.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drm/reward.hpp"

namespace drm {

enum class AdvantageMode { kRlvr, kDrm, kCombined };

AdvantageMode parse_advantage_mode(std::string_view text);
/// "RLVR", "DRM", "COMBINED".
std::string to_string(AdvantageMode mode);

inline constexpr double kStdGuard = 1e-8;

struct AdvantageRecord {
  std::string instance_id;
  std::size_t index = 0;
  std::optional<double> rlvr_adv;
  std::optional<double> drm_adv;
  double combined_adv = 0.0;
  AdvantageMode mode = AdvantageMode::kRlvr;
};

json to_json(const AdvantageRecord& r);

inline double verifier_reward(bool correct) { return correct ? 1.0 : 0.0; }

/// (r - mean) / std with the population std; all zeros when std < 1e-8.
std::vector<double> group_advantage(std::span<const double> rewards);

/// Sum over dimensions of w^D times the z-score of the raw dimension scores.
std::vector<double> drm_advantage(std::span<const DimensionScores> group_scores,
                                  const DrmWeights& weights);

/// `labels` is required for kRlvr and kCombined, `group_scores` for kDrm and
/// kCombined (kPrecondition otherwise). Advantages are per sample; the
/// trainer applies them to every token of that sample.
std::vector<AdvantageRecord> combined_advantage(
    AdvantageMode mode, const std::optional<std::vector<bool>>& labels,
    std::span<const DimensionScores> group_scores, const DrmWeights& weights,
    const std::string& instance_id = {});

struct SurrogateInputs {
  double ratio = 1.0;
  double advantage = 0.0;
  double clip_eps = 0.2;
  double kl = 0.0;
  double beta = 0.0;
};

/// min(r*A, clip(r, 1-eps, 1+eps)*A) - beta*kl.
double surrogate_term(const SurrogateInputs& in);

/// exp(d) - d - 1 with d = logp_ref - logp_policy. Never negative.
double kl_estimate(double logp_policy, double logp_ref);

/// -log sigmoid(beta * margin) + lambda_sft * (-logp_pos_policy), where margin
/// is the policy-vs-reference log-ratio of the chosen output minus that of the
/// rejected one.
double dpo_sft_loss(double logp_pos_policy, double logp_pos_ref, double logp_neg_policy,
                    double logp_neg_ref, double beta, double lambda_sft);

/// Numerically stable -log(sigmoid(x)).
double neg_log_sigmoid(double x);

}  // namespace drm
