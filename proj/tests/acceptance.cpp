// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "cli_support.hpp"
#include "drm/dimensions.hpp"
#include "drm/eval.hpp"
#include "drm/judges.hpp"
#include "drm/pairs.hpp"
#include "drm/rl.hpp"
#include "stub_judge.hpp"
#include "test_support.hpp"

using namespace drm;
using namespace drm::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
  void expect(bool cond, const std::string& why) {
    if (!cond) fail(why);
  }
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Outcome confidence_formula() {
  Outcome o;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> lp(-20.0, 0.0);
  std::uniform_int_distribution<int> len(1, 64);
  const auto t0 = Clock::now();
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> r(len(rng)), a(len(rng));
    for (auto& x : r) x = lp(rng);
    for (auto& x : a) x = lp(rng);
    const double want = std::accumulate(r.begin(), r.end(), 0.0) / r.size() + std::accumulate(a.begin(), a.end(), 0.0);
    worst = std::max(worst, std::abs(confidence_score(r, a) - want));
  }
  const double secs = seconds_since(t0);
  o.expect(worst <= 1e-12, "max error " + sci(worst));
  o.expect(secs < 1.0, "took " + sci(secs) + " s");
  if (o.ok) o.detail = "1000 cases, max error " + sci(worst);
  return o;
}

// Literal reading of the selection box: best positive by reward, then the
// worst negative other than it. Ties go to the lower index; if the best
// positive is the only negative, the next-best positive is tried.
std::optional<std::pair<std::size_t, std::size_t>> literal_drm(const Pools& pools, const std::vector<double>& r) {
  std::vector<std::size_t> pos = pools.pos;
  std::stable_sort(pos.begin(), pos.end(), [&](auto a, auto b) { return r[a] > r[b]; });
  for (std::size_t p : pos) {
    std::optional<std::size_t> n;
    for (std::size_t c : pools.neg)
      if (c != p && (!n || r[c] < r[*n])) n = c;
    if (n) return std::make_pair(p, *n);
  }
  return std::nullopt;
}

std::optional<std::pair<std::size_t, std::size_t>> literal_rlvr(const Pools& pools, std::uint64_t seed,
                                                                const std::string& id) {
  if (pools.pos.empty() || pools.neg.empty()) return std::nullopt;
  if (pools.pos.size() == 1 && pools.neg.size() == 1 && pools.pos[0] == pools.neg[0]) return std::nullopt;
  CounterRng rng(seed, id);
  for (;;) {
    const std::size_t p = pools.pos[rng.below(pools.pos.size())];
    std::vector<std::size_t> rest;
    for (std::size_t n : pools.neg)
      if (n != p) rest.push_back(n);
    if (!rest.empty()) return std::make_pair(p, rest[rng.below(rest.size())]);
  }
}

Outcome pair_oracle() {
  Outcome o;
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> coarse(0, 3);
  std::uniform_real_distribution<double> fine(0.0, 1.0);
  const SubsetRule rules[] = {SubsetRule::kAny, SubsetRule::kTrueTrue, SubsetRule::kTrueFalse, SubsetRule::kFalseFalse};
  const auto t0 = Clock::now();
  std::size_t cases = 0, mismatches = 0;
  for (std::size_t n = 1; n <= 6; ++n)
    for (unsigned mask = 0; mask < (1u << n); ++mask)
      for (int trial = 0; trial < 12; ++trial) {
        SampleGroup g{"case-" + std::to_string(n) + "-" + std::to_string(mask) + "-" + std::to_string(trial), {}};
        for (std::size_t i = 0; i < n; ++i) g.samples.push_back(make_sample({-1}, {-1}, std::nullopt, ((mask >> i) & 1) != 0));
        std::vector<double> r(n);
        for (auto& v : r) v = trial % 2 ? fine(rng) : coarse(rng) / 3.0;
        for (auto rule : rules) {
          const auto pools = build_subsets(g, rule);
          std::vector<std::size_t> want_pos, want_neg;
          for (std::size_t i = 0; i < n; ++i) {
            const bool c = (mask >> i) & 1;
            if (rule == SubsetRule::kAny || (rule == SubsetRule::kTrueTrue && c) || (rule == SubsetRule::kTrueFalse && c)) want_pos.push_back(i);
            if (rule == SubsetRule::kAny || (rule == SubsetRule::kTrueTrue && c) || (rule == SubsetRule::kTrueFalse && !c) ||
                (rule == SubsetRule::kFalseFalse && !c))
              want_neg.push_back(i);
            if (rule == SubsetRule::kFalseFalse && !c) want_pos.push_back(i);
          }
          if (pools.pos != want_pos || pools.neg != want_neg) ++mismatches;

          const auto drm = select_pair(g, rule, pools, SupervisionMethod::drm(), r);
          const auto want = literal_drm(pools, r);
          if (drm.has_value() != want.has_value() || (drm && (drm->pos_index != want->first || drm->neg_index != want->second)))
            ++mismatches;
          ++cases;

          const std::uint64_t seed = 1000 + trial;
          const auto a = select_pair(g, rule, pools, SupervisionMethod::rlvr(seed), r);
          const auto b = select_pair(g, rule, pools, SupervisionMethod::rlvr(seed), r);
          const auto lit = literal_rlvr(pools, seed, g.instance_id);
          if (a.has_value() != lit.has_value() || !(a == b) || (a && (a->pos_index != lit->first || a->neg_index != lit->second)))
            ++mismatches;
          ++cases;
        }
      }
  const double secs = seconds_since(t0);
  o.expect(cases >= 10000, "only " + std::to_string(cases) + " cases");
  o.expect(mismatches == 0, std::to_string(mismatches) + " mismatches");
  o.expect(secs < 10.0, "took " + sci(secs) + " s");
  if (o.ok) o.detail = std::to_string(cases) + " cases, 0 mismatches";
  return o;
}

Outcome advantage_normalization() {
  Outcome o;
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> size(2, 32);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> r(size(rng));
    for (auto& x : r) x = u(rng);
    r[0] = r[1] + 1.0;  // guarantees non-constant
    const auto a = group_advantage(r);
    const double m = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
    double var = 0;
    for (double x : a) var += (x - m) * (x - m);
    const double s = std::sqrt(var / a.size());
    o.expect(std::abs(m) < 1e-9, "mean " + sci(m));
    o.expect(std::abs(s - 1.0) < 1e-6, "std " + sci(s));
  }
  for (double c : {0.0, 1.0, -3.5, 1e6})
    for (double x : group_advantage(std::vector<double>(7, c))) o.expect(x == 0.0, "constant vector not zeroed");
  o.expect(group_advantage(std::vector<double>{1, 0, 0, 1}) == std::vector<double>{1, -1, -1, 1}, "[1,0,0,1] case");
  if (o.ok) o.detail = "1000 vectors, constant and worked cases exact";
  return o;
}

Outcome combined_identity() {
  Outcome o;
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> size(2, 16);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto g = random_group(rng, size(rng), "g" + std::to_string(t));
    const auto labels = labels_of(g);
    const auto dims = score_group(g);
    const auto rl = combined_advantage(AdvantageMode::kRlvr, labels, dims, kDefaultWeights);
    const auto dr = combined_advantage(AdvantageMode::kDrm, labels, dims, kDefaultWeights);
    const auto co = combined_advantage(AdvantageMode::kCombined, labels, dims, kDefaultWeights);
    for (std::size_t i = 0; i < g.size(); ++i)
      worst = std::max(worst, std::abs(co[i].combined_adv - (rl[i].combined_adv + dr[i].combined_adv)));
  }
  o.expect(worst <= 1e-12, "max error " + sci(worst));
  if (o.ok) o.detail = "1000 groups, max error " + sci(worst);
  return o;
}

double DimensionScores::*dim_member(int d) {
  return d == 0 ? &DimensionScores::conf : d == 1 ? &DimensionScores::rel : &DimensionScores::coh;
}

Outcome affine_invariance() {
  Outcome o;
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> size(2, 16), which(0, 2);
  std::uniform_real_distribution<double> scale(0.01, 100.0), shift(-100.0, 100.0), w(0.0, 1.0);
  double worst = 0;
  for (int t = 0; t < 500; ++t) {
    auto raw = random_dims(rng, size(rng));
    double a = w(rng), b = w(rng) * (1 - a);
    const DrmWeights weights{a, b, 1.0 - a - b};
    const auto m = dim_member(which(rng));
    auto moved = raw;
    const double sa = scale(rng), sb = shift(rng);
    for (auto& d : moved) d.*m = sa * (d.*m) + sb;
    o.expect(select_best(normalize_dimensions(raw), weights) == select_best(normalize_dimensions(moved), weights),
             "select_best changed at trial " + std::to_string(t));
    const auto before = drm_advantage(raw, weights), after = drm_advantage(moved, weights);
    for (std::size_t i = 0; i < raw.size(); ++i) worst = std::max(worst, std::abs(before[i] - after[i]));
  }
  o.expect(worst <= 1e-9, "advantage drift " + sci(worst));
  if (o.ok) o.detail = "500 trials, max advantage drift " + sci(worst);
  return o;
}

Outcome loss_spot_values() {
  Outcome o;
  const double beta = 0.1, lambda = 1.0;
  const double at_zero = dpo_sft_loss(-1.3, -0.4, -2.2, -1.3, beta, 0.0);
  o.expect(std::abs(at_zero - 0.6931471805599453) <= 1e-12, "zero-margin loss " + std::to_string(at_zero));
  // margin = (lp_pos - ref_pos) - (lp_neg - ref_neg); vary lp_pos.
  double worst = 0;
  for (double margin : {-8.0, -1.5, 0.0, 2.0, 10.0}) {
    const double h = 1e-5;
    auto loss = [&](double m) { return dpo_sft_loss(m, 0.0, 0.0, 0.0, beta, 0.0); };
    const double fd = (loss(margin + h) - loss(margin - h)) / (2 * h);
    const double want = -beta / (1.0 + std::exp(beta * margin));
    worst = std::max(worst, std::abs(fd - want));
  }
  o.expect(worst <= 1e-5, "derivative error " + sci(worst));
  for (double lp : {-0.5, -3.0, -12.25}) {
    const double base = dpo_sft_loss(lp, -1.0, -2.0, -1.5, beta, 0.0);
    const double with = dpo_sft_loss(lp, -1.0, -2.0, -1.5, beta, lambda);
    o.expect(with == base + lambda * -lp, "SFT additivity at logp " + std::to_string(lp));
  }
  if (o.ok) o.detail = "ln 2 exact, derivative error " + sci(worst);
  return o;
}

std::vector<SampleGroup> coherence_oracle_fixture(std::size_t n_groups, double* planted_fraction) {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> noise(-5.0, 5.0), lp(-4.0, -0.01);
  std::uniform_int_distribution<int> size(2, 8);
  std::vector<SampleGroup> groups;
  double fraction = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    const int n = size(rng);
    const int n_correct = 1 + static_cast<int>(g % static_cast<std::size_t>(n));
    SampleGroup group{"fx-" + std::to_string(g), {}};
    for (int i = 0; i < n; ++i) {
      const bool ok = i < n_correct;
      const double coh = ok ? 10.0 + noise(rng) : -10.0 + noise(rng);
      group.samples.push_back(make_sample({lp(rng), lp(rng)}, {lp(rng)}, JudgeScores{noise(rng), noise(rng), noise(rng), coh}, ok));
    }
    std::shuffle(group.samples.begin(), group.samples.end(), rng);
    fraction += static_cast<double>(n_correct) / n;
    groups.push_back(std::move(group));
  }
  *planted_fraction = fraction / n_groups;
  return groups;
}

Outcome selection_fixture() {
  Outcome o;
  double planted = 0;
  const auto groups = coherence_oracle_fixture(200, &planted);
  const auto t0 = Clock::now();
  const auto res = grid_search(groups, 0.1);
  const double secs = seconds_since(t0);
  o.expect(res.best_weights.w_coh >= 0.8, "best weights " + res.best_weights.str());
  o.expect(res.best_accuracy == 1.0, "accuracy " + std::to_string(res.best_accuracy));
  o.expect(std::abs(res.baseline_random - planted) <= 1e-9, "baseline " + std::to_string(res.baseline_random));
  o.expect(res.table.size() == 66, "grid size " + std::to_string(res.table.size()));
  o.expect(secs < 30.0, "took " + sci(secs) + " s");
  if (o.ok) o.detail = "best " + res.best_weights.str() + " accuracy 1.0, baseline " + std::to_string(planted);
  return o;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

Outcome pipeline_determinism() {
  Outcome o;
  std::vector<std::uint64_t> runs[2];
  for (auto& hashes : runs) {
    TempDir dir;
    auto s = run({"score", "-i", data_path("golden_input.jsonl"), "-o", dir / "scored.jsonl", "--workers", "4"});
    auto p = run({"build-pairs", "-i", dir / "scored.jsonl", "-o", dir / "pairs.jsonl", "--rule", "t+f", "--method",
                  "drm", "--manifest", dir / "manifest.json"});
    auto a = run({"advantages", "-i", dir / "scored.jsonl", "-o", dir / "advantages.jsonl", "--mode", "combined"});
    o.expect(s.code == 0 && p.code == 0 && a.code == 0, "a pipeline stage failed");
    for (const char* f : {"scored.jsonl", "pairs.jsonl", "manifest.json", "advantages.jsonl"}) hashes.push_back(fnv1a(slurp(dir / f)));
  }
  o.expect(runs[0] == runs[1], "two runs differ");
  std::vector<std::uint64_t> golden;
  for (const char* f : {"golden/scored.jsonl", "golden/pairs.jsonl", "golden/pairs.manifest.json", "golden/advantages.jsonl"})
    golden.push_back(fnv1a(slurp(data_path(f))));
  o.expect(runs[0] == golden, "output differs from committed golden files");
  if (o.ok) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(runs[0][0] ^ runs[0][1] ^ runs[0][3]));
    o.detail = std::string("hashes match golden files (combined ") + buf + ")";
  }
  return o;
}

std::vector<SampleGroup> stub_groups(std::size_t n_groups, std::size_t per_group) {
  std::vector<SampleGroup> groups;
  int k = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    SampleGroup group{"stub-" + std::to_string(g), {}};
    for (std::size_t i = 0; i < per_group; ++i) {
      auto s = make_sample({-1}, {-1}, std::nullopt, i % 2 == 0);
      s.quad.reasoning = "sample-" + std::to_string(k++);
      group.samples.push_back(std::move(s));
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

JudgeEndpointConfig stub_endpoint(const StubJudge& stub) {
  JudgeEndpointConfig cfg;
  cfg.base_url = stub.url();
  cfg.timeout = std::chrono::milliseconds{2000};
  cfg.backoff_initial = std::chrono::milliseconds{1};
  cfg.backoff_cap = std::chrono::milliseconds{5};
  cfg.batch_size = 1;
  cfg.max_in_flight = 8;
  cfg.max_retries = 3;
  return cfg;
}

Outcome judge_contract() {
  Outcome o;
  try {
    {
      StubJudge rel(StubJudge::Kind::kRelevance), coh(StubJudge::Kind::kCoherence);
      rel.reverse_latency(true);
      coh.reverse_latency(true);
      const auto out = fetch_judge_scores(stub_groups(5, 4), stub_endpoint(rel), stub_endpoint(coh));
      int k = 0;
      for (const auto& g : out)
        for (const auto& s : g.samples) {
          o.expect(s.judge && *s.judge == JudgeScores{double(k), k + 0.25, k + 0.5, 2.0 * k}, "order not preserved");
          ++k;
        }

      const int before = rel.requests() + coh.requests();
      const auto again = fetch_judge_scores(out, stub_endpoint(rel), stub_endpoint(coh));
      o.expect(again == out, "re-scoring changed scored input");
      o.expect(rel.requests() + coh.requests() == before, "pre-scored input triggered requests");
    }
    {
      StubJudge rel(StubJudge::Kind::kRelevance), coh(StubJudge::Kind::kCoherence);
      rel.fail_first(2);
      coh.fail_first(3);
      auto rc = stub_endpoint(rel), cc = stub_endpoint(coh);
      rc.max_in_flight = cc.max_in_flight = 1;
      const auto out = fetch_judge_scores(stub_groups(1, 1), rc, cc);
      o.expect(out[0].samples[0].judge.has_value(), "retry did not recover");
      o.expect(rel.requests() == 3 && coh.requests() == 4, "unexpected request counts after retries");
    }
    {
      StubJudge rel(StubJudge::Kind::kRelevance), coh(StubJudge::Kind::kCoherence);
      rel.fail_always();
      std::string input;
      for (const auto& g : stub_groups(2, 2))
        for (const auto& s : g.samples) input += sample_to_json(g.instance_id, s).dump() + "\n";
      auto r = run({"score", "--relevance-url", rel.url(), "--coherence-url", coh.url(), "--judge-retries", "2",
                    "--judge-backoff-ms", "1"},
                   input);
      o.expect(r.code == 4, "exhausted retries exited with " + std::to_string(r.code));
      o.expect(rel.requests() >= 3, "retries not attempted");
    }
  } catch (const std::exception& e) {
    o.fail(std::string("unexpected exception: ") + e.what());
  }
  if (o.ok) o.detail = "order, idempotence, retry recovery, exit 4 on exhaustion";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"confidence formula", confidence_formula},
      {"pair construction oracle", pair_oracle},
      {"advantage normalization", advantage_normalization},
      {"combined advantage identity", combined_identity},
      {"affine invariance", affine_invariance},
      {"loss spot values", loss_spot_values},
      {"selection fixture", selection_fixture},
      {"pipeline determinism", pipeline_determinism},
      {"judge client contract", judge_contract},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::printf("[%s] %zu. %s: %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    failed += !o.ok;
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
