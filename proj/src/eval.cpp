#include "drm/eval.hpp"

#include <cmath>
#include <ostream>

#include "drm/parallel.hpp"

namespace drm {

namespace {

json weights_json(const DrmWeights& w) {
  return json{{"w_conf", w.w_conf}, {"w_rel", w.w_rel}, {"w_coh", w.w_coh}};
}

json table_json(std::span<const WeightAccuracy> rows) {
  json out = json::array();
  for (const auto& row : rows) {
    json j = weights_json(row.weights);
    j["accuracy"] = row.accuracy;
    out.push_back(std::move(j));
  }
  return out;
}

std::size_t best_normalized(std::span<const DimensionScores> normalized, const DrmWeights& w) {
  if (normalized.empty()) throw Error(ErrorKind::kPrecondition, "cannot select from an empty group");
  std::vector<double> rewards(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) rewards[i] = weighted_sum(normalized[i], w);
  return argmax_lowest(rewards);
}

double baseline(std::span<const LabeledScores> prepared) {
  if (prepared.empty()) return 0.0;
  double total = 0.0;
  for (const auto& g : prepared) {
    std::size_t correct = 0;
    for (bool l : g.labels) correct += l;
    total += static_cast<double>(correct) / static_cast<double>(g.labels.size());
  }
  return total / static_cast<double>(prepared.size());
}

double accuracy_at(std::span<const LabeledScores> prepared, const DrmWeights& w) {
  if (prepared.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& g : prepared) hits += g.labels[best_normalized(g.normalized, w)];
  return static_cast<double>(hits) / static_cast<double>(prepared.size());
}

}  // namespace

json to_json(const SelectionReport& r) {
  return json{{"n_instances", r.n_instances},
              {"weights", weights_json(r.weights)},
              {"accuracy", r.accuracy},
              {"baseline_random", r.baseline_random},
              {"per_weighting", table_json(r.per_weighting)}};
}

json to_json(const GridSearchResult& r) {
  return json{{"n_instances", r.n_instances},
              {"best_weights", weights_json(r.best_weights)},
              {"best_accuracy", r.best_accuracy},
              {"baseline_random", r.baseline_random},
              {"per_weighting", table_json(r.table)}};
}

void write_accuracy_csv(std::span<const WeightAccuracy> rows, std::ostream& out) {
  out << "w_conf,w_rel,w_coh,accuracy\n";
  for (const auto& row : rows)
    out << json(row.weights.w_conf).dump() << ',' << json(row.weights.w_rel).dump() << ','
        << json(row.weights.w_coh).dump() << ',' << json(row.accuracy).dump() << '\n';
  if (!out) throw Error(ErrorKind::kIo, "failed writing CSV");
}

std::size_t select_best(std::span<const DimensionScores> group_scores, const DrmWeights& weights) {
  weights.validate();
  if (group_scores.empty()) throw Error(ErrorKind::kPrecondition, "cannot select from an empty group");
  return best_normalized(normalize_dimensions(group_scores), weights);
}

std::size_t select_best(const SampleGroup& group, const DrmWeights& weights) {
  if (group.samples.empty())
    throw Error(ErrorKind::kPrecondition, "instance '" + group.instance_id + "' is empty");
  return select_best(score_group(group), weights);
}

std::vector<LabeledScores> prepare_for_selection(std::span<const SampleGroup> groups,
                                                 std::size_t workers) {
  std::vector<LabeledScores> out(groups.size());
  parallel_for(groups.size(), workers, [&](std::size_t i) {
    const auto& g = groups[i];
    if (g.samples.empty())
      throw Error(ErrorKind::kPrecondition, "instance '" + g.instance_id + "' is empty");
    auto labels = labels_of(g);
    if (!labels)
      throw Error(ErrorKind::kPrecondition,
                  "instance '" + g.instance_id + "' has samples without correctness labels");
    try {
      out[i] = LabeledScores{normalize_dimensions(score_group(g)), std::move(*labels)};
    } catch (const Error& e) {
      throw Error(e.kind(), "instance '" + g.instance_id + "': " + e.what());
    }
  });
  return out;
}

SelectionReport selection_accuracy(std::span<const LabeledScores> prepared,
                                   const DrmWeights& weights) {
  weights.validate();
  SelectionReport r;
  r.n_instances = prepared.size();
  r.weights = weights;
  r.accuracy = accuracy_at(prepared, weights);
  r.per_weighting = {WeightAccuracy{weights, r.accuracy}};
  r.baseline_random = baseline(prepared);
  return r;
}

SelectionReport selection_accuracy(std::span<const SampleGroup> groups, const DrmWeights& weights,
                                   std::size_t workers) {
  const auto prepared = prepare_for_selection(groups, workers);
  return selection_accuracy(prepared, weights);
}

std::vector<DrmWeights> simplex_grid(double step) {
  if (!std::isfinite(step) || step <= 0.0 || step > 1.0)
    throw Error(ErrorKind::kValidation, "grid step must lie in (0, 1]");
  const double inv = 1.0 / step;
  const long n = std::lround(inv);
  if (std::abs(inv - static_cast<double>(n)) > 1e-9 || n > 10000)
    throw Error(ErrorKind::kValidation, "1/step must be an integer (got step " + json(step).dump() + ")");
  std::vector<DrmWeights> out;
  const double dn = static_cast<double>(n);
  for (long i = 0; i <= n; ++i)
    for (long j = 0; i + j <= n; ++j)
      out.push_back(DrmWeights{static_cast<double>(i) / dn, static_cast<double>(j) / dn,
                               static_cast<double>(n - i - j) / dn});
  return out;
}

GridSearchResult grid_search(std::span<const LabeledScores> prepared, double step) {
  GridSearchResult r;
  r.n_instances = prepared.size();
  r.baseline_random = baseline(prepared);
  bool have_best = false;
  for (const auto& w : simplex_grid(step)) {
    const double acc = accuracy_at(prepared, w);
    r.table.push_back({w, acc});
    const auto& b = r.best_weights;
    const bool better =
        !have_best || acc > r.best_accuracy ||
        (acc == r.best_accuracy &&
         (w.w_coh > b.w_coh || (w.w_coh == b.w_coh && (w.w_rel > b.w_rel ||
                                                        (w.w_rel == b.w_rel && w.w_conf > b.w_conf)))));
    if (better) {
      r.best_weights = w;
      r.best_accuracy = acc;
      have_best = true;
    }
  }
  return r;
}

GridSearchResult grid_search(std::span<const SampleGroup> groups, double step,
                             std::size_t workers) {
  simplex_grid(step);  // reject a bad step before scoring anything
  const auto prepared = prepare_for_selection(groups, workers);
  return grid_search(prepared, step);
}

}  // namespace drm
