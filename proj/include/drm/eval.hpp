// Best-of-N selection by DRM reward and the weight grid search over the
// probability simplex.
#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "drm/reward.hpp"

namespace drm {

struct WeightAccuracy {
  DrmWeights weights;
  double accuracy = 0.0;
};

struct SelectionReport {
  std::size_t n_instances = 0;
  DrmWeights weights;
  double accuracy = 0.0;
  std::vector<WeightAccuracy> per_weighting;
  /// Expected accuracy of picking a sample uniformly: mean over groups of the
  /// fraction labeled correct.
  double baseline_random = 0.0;
};

struct GridSearchResult {
  DrmWeights best_weights;
  double best_accuracy = 0.0;
  std::vector<WeightAccuracy> table;
  std::size_t n_instances = 0;
  double baseline_random = 0.0;
};

json to_json(const SelectionReport& r);
json to_json(const GridSearchResult& r);
/// Header "w_conf,w_rel,w_coh,accuracy" and one row per weighting.
void write_accuracy_csv(std::span<const WeightAccuracy> rows, std::ostream& out);

/// Highest-reward index, lowest index on ties.
std::size_t select_best(std::span<const DimensionScores> group_scores, const DrmWeights& weights);
std::size_t select_best(const SampleGroup& group, const DrmWeights& weights);

/// Groups reduced to what selection needs: normalized dimensions and labels.
struct LabeledScores {
  std::vector<DimensionScores> normalized;
  std::vector<bool> labels;
};

/// Scores and normalizes every group. Missing labels throw kPrecondition.
std::vector<LabeledScores> prepare_for_selection(std::span<const SampleGroup> groups,
                                                 std::size_t workers = 1);

SelectionReport selection_accuracy(std::span<const SampleGroup> groups, const DrmWeights& weights,
                                   std::size_t workers = 1);
SelectionReport selection_accuracy(std::span<const LabeledScores> prepared,
                                   const DrmWeights& weights);

/// Every nonnegative (w_conf, w_rel, w_coh) on the simplex with resolution
/// `step`, in order of increasing w_conf then w_rel. 1/step must be integral.
std::vector<DrmWeights> simplex_grid(double step);

/// Best accuracy over simplex_grid(step). Ties prefer higher w_coh, then
/// higher w_rel, then higher w_conf.
GridSearchResult grid_search(std::span<const SampleGroup> groups, double step,
                             std::size_t workers = 1);
GridSearchResult grid_search(std::span<const LabeledScores> prepared, double step);

}  // namespace drm
