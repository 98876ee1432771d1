#include "drm/rl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace drm {

AdvantageMode parse_advantage_mode(std::string_view text) {
  std::string t(text);
  for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "rlvr") return AdvantageMode::kRlvr;
  if (t == "drm") return AdvantageMode::kDrm;
  if (t == "combined") return AdvantageMode::kCombined;
  throw Error(ErrorKind::kValidation, "unknown advantage mode '" + std::string(text) + "'");
}

std::string to_string(AdvantageMode mode) {
  switch (mode) {
    case AdvantageMode::kRlvr: return "RLVR";
    case AdvantageMode::kDrm: return "DRM";
    case AdvantageMode::kCombined: return "COMBINED";
  }
  return "?";
}

json to_json(const AdvantageRecord& r) {
  return json{{"instance_id", r.instance_id},
              {"index", r.index},
              {"mode", to_string(r.mode)},
              {"rlvr_adv", r.rlvr_adv ? json(*r.rlvr_adv) : json(nullptr)},
              {"drm_adv", r.drm_adv ? json(*r.drm_adv) : json(nullptr)},
              {"combined_adv", r.combined_adv}};
}

std::vector<double> group_advantage(std::span<const double> rewards) {
  if (rewards.empty()) throw Error(ErrorKind::kValidation, "advantage of an empty group");
  for (std::size_t i = 0; i < rewards.size(); ++i)
    if (!std::isfinite(rewards[i]))
      throw Error(ErrorKind::kValidation, "non-finite reward at index " + std::to_string(i));

  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double std = std::sqrt(var / n);

  std::vector<double> out(rewards.size(), 0.0);
  if (std < kStdGuard) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / std;
  return out;
}

std::vector<double> drm_advantage(std::span<const DimensionScores> group_scores,
                                  const DrmWeights& weights) {
  weights.validate();
  const std::size_t n = group_scores.size();
  std::vector<double> conf(n), rel(n), coh(n);
  for (std::size_t i = 0; i < n; ++i) {
    conf[i] = group_scores[i].conf;
    rel[i] = group_scores[i].rel;
    coh[i] = group_scores[i].coh;
  }
  const auto zc = group_advantage(conf);
  const auto zr = group_advantage(rel);
  const auto zh = group_advantage(coh);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = weights.w_conf * zc[i] + weights.w_rel * zr[i] + weights.w_coh * zh[i];
  return out;
}

std::vector<AdvantageRecord> combined_advantage(
    AdvantageMode mode, const std::optional<std::vector<bool>>& labels,
    std::span<const DimensionScores> group_scores, const DrmWeights& weights,
    const std::string& instance_id) {
  const bool need_labels = mode != AdvantageMode::kDrm;
  const bool need_scores = mode != AdvantageMode::kRlvr;

  std::optional<std::vector<double>> rlvr, drm;
  std::size_t n = 0;
  if (need_labels) {
    if (!labels)
      throw Error(ErrorKind::kPrecondition,
                  "mode " + to_string(mode) + " needs correctness labels for '" + instance_id + "'");
    std::vector<double> rewards;
    for (bool l : *labels) rewards.push_back(verifier_reward(l));
    rlvr = group_advantage(rewards);
    n = rewards.size();
  }
  if (need_scores) {
    if (group_scores.empty())
      throw Error(ErrorKind::kPrecondition,
                  "mode " + to_string(mode) + " needs dimension scores for '" + instance_id + "'");
    drm = drm_advantage(group_scores, weights);
    if (need_labels && drm->size() != n)
      throw Error(ErrorKind::kValidation, "label and score counts differ for '" + instance_id + "'");
    n = drm->size();
  }

  std::vector<AdvantageRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = out[i];
    r.instance_id = instance_id;
    r.index = i;
    r.mode = mode;
    if (rlvr) r.rlvr_adv = (*rlvr)[i];
    if (drm) r.drm_adv = (*drm)[i];
    switch (mode) {
      case AdvantageMode::kRlvr: r.combined_adv = *r.rlvr_adv; break;
      case AdvantageMode::kDrm: r.combined_adv = *r.drm_adv; break;
      case AdvantageMode::kCombined: r.combined_adv = *r.rlvr_adv + *r.drm_adv; break;
    }
  }
  return out;
}

double surrogate_term(const SurrogateInputs& in) {
  if (!(in.ratio > 0.0) || !std::isfinite(in.ratio))
    throw Error(ErrorKind::kValidation, "probability ratio must be positive and finite");
  if (!(in.clip_eps > 0.0 && in.clip_eps < 1.0))
    throw Error(ErrorKind::kValidation, "clip epsilon must lie in (0, 1)");
  if (in.beta < 0.0 || in.kl < 0.0)
    throw Error(ErrorKind::kValidation, "beta and kl must be nonnegative");
  const double clipped = std::clamp(in.ratio, 1.0 - in.clip_eps, 1.0 + in.clip_eps);
  return std::min(in.ratio * in.advantage, clipped * in.advantage) - in.beta * in.kl;
}

double kl_estimate(double logp_policy, double logp_ref) {
  if (!std::isfinite(logp_policy) || !std::isfinite(logp_ref))
    throw Error(ErrorKind::kValidation, "kl_estimate needs finite log-probabilities");
  const double d = logp_ref - logp_policy;
  // expm1(d) - d avoids cancellation near d = 0.
  return std::max(0.0, std::expm1(d) - d);
}

double neg_log_sigmoid(double x) {
  // -log(1/(1+e^-x)) = log1p(e^-x), rewritten for large |x|.
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double dpo_sft_loss(double logp_pos_policy, double logp_pos_ref, double logp_neg_policy,
                    double logp_neg_ref, double beta, double lambda_sft) {
  for (double v : {logp_pos_policy, logp_pos_ref, logp_neg_policy, logp_neg_ref})
    if (!std::isfinite(v)) throw Error(ErrorKind::kValidation, "dpo_sft_loss needs finite inputs");
  if (!(beta > 0.0)) throw Error(ErrorKind::kValidation, "DPO beta must be positive");
  if (!(lambda_sft >= 0.0)) throw Error(ErrorKind::kValidation, "SFT weight must be nonnegative");
  const double margin = (logp_pos_policy - logp_pos_ref) - (logp_neg_policy - logp_neg_ref);
  return neg_log_sigmoid(beta * margin) + lambda_sft * (-logp_pos_policy);
}

}  // namespace drm
