#include "drm/reward.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace drm {

void DrmWeights::validate() const {
  for (double w : {w_conf, w_rel, w_coh})
    if (!std::isfinite(w) || w < 0.0 || w > 1.0)
      throw Error(ErrorKind::kValidation, "weight outside [0,1] in " + str());
  if (std::abs(w_conf + w_rel + w_coh - 1.0) > 1e-9)
    throw Error(ErrorKind::kValidation, "weights " + str() + " do not sum to 1");
}

DrmWeights DrmWeights::renormalized() const {
  const double total = w_conf + w_rel + w_coh;
  if (!(total > 0.0) || w_conf < 0.0 || w_rel < 0.0 || w_coh < 0.0)
    throw Error(ErrorKind::kValidation, "cannot renormalize weights " + str());
  return DrmWeights{w_conf / total, w_rel / total, w_coh / total};
}

std::string DrmWeights::str() const {
  std::ostringstream os;
  os << '(' << w_conf << ',' << w_rel << ',' << w_coh << ')';
  return os.str();
}

DrmWeights parse_weights(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kValidation, "bad weight '" + item + "'");
    }
  }
  if (parts.size() != 3)
    throw Error(ErrorKind::kValidation, "expected three comma-separated weights, got '" + text + "'");
  DrmWeights w{parts[0], parts[1], parts[2]};
  w.validate();
  return w;
}

json to_json(const RewardRecord& r) {
  return json{{"instance_id", r.instance_id},
              {"index", r.index},
              {"dims_raw", to_json(r.dims_raw)},
              {"dims_norm", to_json(r.dims_norm)},
              {"drm_reward", r.drm_reward}};
}

std::vector<DimensionScores> normalize_dimensions(std::span<const DimensionScores> raw) {
  const std::size_t n = raw.size();
  std::vector<double> conf(n), rel(n), coh(n);
  for (std::size_t i = 0; i < n; ++i) {
    conf[i] = raw[i].conf;
    rel[i] = raw[i].rel;
    coh[i] = raw[i].coh;
  }
  const auto cn = normalize_within_group(conf);
  const auto rn = normalize_within_group(rel);
  const auto hn = normalize_within_group(coh);
  std::vector<DimensionScores> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {cn[i], rn[i], hn[i]};
  return out;
}

double weighted_sum(const DimensionScores& normalized, const DrmWeights& w) {
  // Weights may miss 1 by up to 1e-9; keep the result inside [0, 1].
  return std::clamp(w.w_conf * normalized.conf + w.w_rel * normalized.rel + w.w_coh * normalized.coh,
                    0.0, 1.0);
}

std::vector<RewardRecord> drm_reward(std::span<const DimensionScores> group_scores,
                                     const DrmWeights& weights,
                                     const std::string& instance_id) {
  weights.validate();
  const auto norm = normalize_dimensions(group_scores);
  std::vector<RewardRecord> out(group_scores.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = RewardRecord{instance_id, i, group_scores[i], norm[i], weighted_sum(norm[i], weights)};
  return out;
}

std::vector<double> drm_reward_values(std::span<const DimensionScores> group_scores,
                                      const DrmWeights& weights) {
  std::vector<double> out;
  for (const auto& r : drm_reward(group_scores, weights)) out.push_back(r.drm_reward);
  return out;
}

std::size_t argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::kPrecondition, "argmax of an empty group");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace drm
