// Raw per-sample dimension scores: confidence from token log-probabilities,
// relevance from the three judge metrics ranked within the group, coherence
// straight from the outcome judge.
#pragma once

#include <span>
#include <vector>

#include "drm/core.hpp"

namespace drm {

/// Raw (un-normalized) scores for one sample.
struct DimensionScores {
  double conf = 0.0;
  double rel = 0.0;
  double coh = 0.0;

  bool operator==(const DimensionScores&) const = default;
};

json to_json(const DimensionScores& d);

/// Min-max scaling to [0, 1]. A spread below 1e-12 (including a singleton)
/// maps every value to 0.5. Throws kValidation on non-finite input or an
/// empty sequence.
std::vector<double> min_max_normalize(std::span<const double> values);

/// mean(reasoning_logprobs) + sum(answer_logprobs). Both sequences must be
/// nonempty (kPrecondition) with finite entries <= 0 (kValidation, naming the
/// offending index).
double confidence_score(std::span<const double> reasoning_logprobs,
                        std::span<const double> answer_logprobs);

/// Per-sample relevance: each of q_entail, d_relevance, a_entail is min-max
/// normalized across the group, then the three are averaged.
std::vector<double> relevance_scores(const SampleGroup& group);

double coherence_score(const Sample& sample);

std::vector<DimensionScores> score_group(const SampleGroup& group);

}  // namespace drm
