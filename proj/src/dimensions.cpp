#include "drm/dimensions.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace drm {

json to_json(const DimensionScores& d) {
  return json{{"conf", d.conf}, {"rel", d.rel}, {"coh", d.coh}};
}

std::vector<double> min_max_normalize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::kValidation, "cannot normalize an empty group");
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw Error(ErrorKind::kValidation, "non-finite value at index " + std::to_string(i));

  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo;
  const double range = *hi - min;
  std::vector<double> out(values.size(), 0.5);
  if (range < 1e-12) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - min) / range;
  return out;
}

namespace {

void check_logprobs(std::span<const double> lp, const char* part) {
  if (lp.empty())
    throw Error(ErrorKind::kPrecondition, std::string(part) + " log-probabilities are empty");
  for (std::size_t i = 0; i < lp.size(); ++i) {
    if (!std::isfinite(lp[i]) || lp[i] > 0.0)
      throw Error(ErrorKind::kValidation, std::string(part) + " log-probability at index " +
                                              std::to_string(i) + " is not a finite value <= 0");
  }
}

const JudgeScores& judge_of(const Sample& s, std::size_t index) {
  if (!s.judge)
    throw Error(ErrorKind::kPrecondition,
                "sample " + std::to_string(index) + " has no judge scores");
  return *s.judge;
}

}  // namespace

double confidence_score(std::span<const double> reasoning_logprobs,
                        std::span<const double> answer_logprobs) {
  check_logprobs(reasoning_logprobs, "reasoning");
  check_logprobs(answer_logprobs, "answer");
  double reasoning_sum = 0.0;
  for (double v : reasoning_logprobs) reasoning_sum += v;
  double answer_sum = 0.0;
  for (double v : answer_logprobs) answer_sum += v;
  return reasoning_sum / static_cast<double>(reasoning_logprobs.size()) + answer_sum;
}

std::vector<double> relevance_scores(const SampleGroup& group) {
  const std::size_t n = group.size();
  std::vector<double> q(n), d(n), a(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& j = judge_of(group.samples[i], i);
    q[i] = j.q_entail;
    d[i] = j.d_relevance;
    a[i] = j.a_entail;
  }
  const auto qn = min_max_normalize(q);
  const auto dn = min_max_normalize(d);
  const auto an = min_max_normalize(a);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (qn[i] + dn[i] + an[i]) / 3.0;
  return out;
}

double coherence_score(const Sample& sample) {
  if (!sample.judge) throw Error(ErrorKind::kPrecondition, "sample has no judge scores");
  if (!std::isfinite(sample.judge->coherence))
    throw Error(ErrorKind::kValidation, "coherence score is not finite");
  return sample.judge->coherence;
}

std::vector<DimensionScores> score_group(const SampleGroup& group) {
  const auto rel = relevance_scores(group);
  std::vector<DimensionScores> out(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& s = group.samples[i];
    try {
      out[i] = DimensionScores{
          confidence_score(s.quad.reasoning_logprobs, s.quad.answer_logprobs), rel[i],
          coherence_score(s)};
    } catch (const Error& e) {
      throw Error(e.kind(), "sample " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace drm
