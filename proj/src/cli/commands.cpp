#include "drm/cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "drm/eval.hpp"
#include "drm/parallel.hpp"

namespace drm::cli {

namespace {

std::vector<SampleGroup> load_groups(const RunConfig& cfg, Streams io) {
  if (cfg.input == "-") return read_groups(io.stdin_);
  std::ifstream in(cfg.input);
  if (!in) throw Error(ErrorKind::kIo, "cannot open input '" + cfg.input + "'");
  return read_groups(in);
}

bool all_judged(const std::vector<SampleGroup>& groups) {
  return std::all_of(groups.begin(), groups.end(), fully_judged);
}

bool judge_source_configured(const RunConfig& cfg) {
  return cfg.offline_scores || cfg.relevance || cfg.coherence;
}

// Fills missing judge scores from the configured source. With `required`,
// unscored samples and no source is an error; otherwise groups pass through.
std::vector<SampleGroup> ensure_judged(std::vector<SampleGroup> groups, const RunConfig& cfg,
                                       bool required) {
  if (all_judged(groups)) return groups;
  const bool endpoints = cfg.relevance || cfg.coherence;
  if (cfg.offline_scores && endpoints)
    throw Error(ErrorKind::kValidation, "configure either judge endpoints or an offline score file, not both");
  if (cfg.offline_scores) {
    std::ifstream in(*cfg.offline_scores);
    if (!in) throw Error(ErrorKind::kIo, "cannot open score file '" + *cfg.offline_scores + "'");
    return load_offline_scores(std::move(groups), in);
  }
  if (endpoints) {
    if (!cfg.relevance || !cfg.coherence)
      throw Error(ErrorKind::kValidation, "both relevance and coherence endpoints are required");
    return fetch_judge_scores(std::move(groups), *cfg.relevance, *cfg.coherence, cfg.judge_options);
  }
  if (required)
    throw Error(ErrorKind::kValidation,
                "samples lack judge scores and no judge endpoint or offline score file is configured");
  return groups;
}

void sort_groups(std::vector<SampleGroup>& groups) {
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return a.instance_id < b.instance_id; });
}

// Writes via `body` to the output path (or stdout for "-").
void write_output(const std::string& path, Streams io,
                  const std::function<void(std::ostream&)>& body) {
  if (path == "-") {
    body(io.stdout_);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open output '" + path + "'");
  body(out);
  out.close();
  if (!out) throw Error(ErrorKind::kIo, "failed writing '" + path + "'");
}

void write_json_document(const std::string& path, Streams io, const json& doc) {
  write_output(path, io, [&](std::ostream& os) {
    os << doc.dump() << '\n';
    if (!os) throw Error(ErrorKind::kIo, "failed writing report");
  });
}

template <typename Fn>
int guarded(const char* name, Streams io, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    io.log << name << ": " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    io.log << name << ": error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int cmd_score(const RunConfig& cfg, Streams io) {
  return guarded("score", io, [&] {
    cfg.weights.validate();
    auto groups = ensure_judged(load_groups(cfg, io), cfg, true);
    sort_groups(groups);

    std::vector<std::vector<json>> per_group(groups.size());
    std::vector<std::optional<Error>> failures(groups.size());
    parallel_for(groups.size(), cfg.workers, [&](std::size_t g) {
      const auto& group = groups[g];
      try {
        const auto rewards = drm_reward(score_group(group), cfg.weights, group.instance_id);
        for (const auto& r : rewards) {
          json rec = sample_to_json(group.instance_id, group.samples[r.index], r.index);
          rec.update(to_json(r));
          per_group[g].push_back(std::move(rec));
        }
      } catch (const Error& e) {
        failures[g].emplace(e.kind(), "instance '" + group.instance_id + "': " + e.what());
      }
    });

    std::vector<json> records;
    std::size_t failed = 0;
    std::optional<ErrorKind> first_failure;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (failures[g]) {
        io.log << "score: " << failures[g]->what() << '\n';
        if (!first_failure) first_failure = failures[g]->kind();
        ++failed;
        continue;
      }
      for (auto& r : per_group[g]) records.push_back(std::move(r));
    }
    write_output(cfg.output, io, [&](std::ostream& os) { write_records(records, os); });
    io.log << "score: groups=" << groups.size() << " samples=" << records.size()
           << " failures=" << failed << '\n';
    return first_failure ? exit_code(*first_failure) : 0;
  });
}

int cmd_build_pairs(const RunConfig& cfg, Streams io) {
  return guarded("build-pairs", io, [&] {
    cfg.weights.validate();
    const SupervisionMethod method = cfg.supervision();
    const bool drm = method.kind == SupervisionMethod::Kind::kDrm;
    auto groups = load_groups(cfg, io);
    if (drm || judge_source_configured(cfg)) groups = ensure_judged(std::move(groups), cfg, drm);
    sort_groups(groups);
    const bool have_scores = all_judged(groups);

    std::vector<std::vector<PreferencePair>> per_group(groups.size());
    parallel_for(groups.size(), cfg.workers, [&](std::size_t g) {
      const auto& group = groups[g];
      try {
        std::vector<double> rewards(group.size(), 0.0);
        if (have_scores) {
          rewards = drm_reward_values(score_group(group), cfg.weights);
        } else {
          // Answer-only supervision without judge data: record verifier rewards.
          for (std::size_t i = 0; i < group.size(); ++i)
            if (group.samples[i].correct) rewards[i] = verifier_reward(*group.samples[i].correct);
        }
        const Pools pools = build_subsets(group, cfg.rule);
        per_group[g] = select_pairs(group, cfg.rule, pools, method, rewards, cfg.pairs_per_instance);
      } catch (const Error& e) {
        throw Error(e.kind(), "instance '" + group.instance_id + "': " + e.what());
      }
    });

    std::vector<PreferencePair> pairs;
    std::size_t without_pair = 0;
    for (auto& ps : per_group) {
      without_pair += ps.empty();
      for (auto& p : ps) pairs.push_back(std::move(p));
    }
    std::size_t written = 0;
    write_output(cfg.output, io,
                 [&](std::ostream& os) { written = emit_dpo_dataset(pairs, groups, os); });

    const std::string name = construction_name(method, cfg.rule);
    json manifest{{"construction", name},
                  {"counts", json{{name, written}}},
                  {"pairs", written},
                  {"groups", groups.size()},
                  {"groups_without_pair", without_pair},
                  {"pairs_per_instance", cfg.pairs_per_instance},
                  {"seed", method.seed ? json(*method.seed) : json(nullptr)}};
    if (cfg.manifest) {
      write_json_document(*cfg.manifest, io, manifest);
    } else if (cfg.output != "-") {
      write_json_document(cfg.output + ".manifest.json", io, manifest);
    } else {
      io.log << manifest.dump() << '\n';
    }
    if (written == 0) io.log << "build-pairs: warning: " << name << " produced no pairs\n";
    io.log << "build-pairs: " << name << " groups=" << groups.size() << " pairs=" << written << '\n';
    return 0;
  });
}

int cmd_advantages(const RunConfig& cfg, Streams io) {
  return guarded("advantages", io, [&] {
    cfg.weights.validate();
    const bool need_scores = cfg.mode != AdvantageMode::kRlvr;
    auto groups = load_groups(cfg, io);
    if (need_scores) groups = ensure_judged(std::move(groups), cfg, true);
    sort_groups(groups);

    std::vector<std::vector<AdvantageRecord>> per_group(groups.size());
    parallel_for(groups.size(), cfg.workers, [&](std::size_t g) {
      const auto& group = groups[g];
      try {
        std::vector<DimensionScores> dims;
        if (need_scores) dims = score_group(group);
        const auto labels = cfg.mode == AdvantageMode::kDrm ? std::nullopt : labels_of(group);
        per_group[g] = combined_advantage(cfg.mode, labels, dims, cfg.weights, group.instance_id);
      } catch (const Error& e) {
        throw Error(e.kind(), "instance '" + group.instance_id + "': " + e.what());
      }
    });

    std::vector<json> records;
    for (const auto& rs : per_group)
      for (const auto& r : rs) records.push_back(to_json(r));
    write_output(cfg.output, io, [&](std::ostream& os) { write_records(records, os); });
    io.log << "advantages: mode=" << to_string(cfg.mode) << " groups=" << groups.size()
           << " records=" << records.size() << '\n';
    return 0;
  });
}

int cmd_grid_search(const RunConfig& cfg, Streams io) {
  return guarded("grid-search", io, [&] {
    simplex_grid(cfg.step);
    auto groups = ensure_judged(load_groups(cfg, io), cfg, true);
    sort_groups(groups);
    const auto result = grid_search(groups, cfg.step, cfg.workers);
    write_json_document(cfg.output, io, to_json(result));
    if (cfg.csv) write_output(*cfg.csv, io, [&](std::ostream& os) { write_accuracy_csv(result.table, os); });
    io.log << "grid-search: candidates=" << result.table.size()
           << " best=" << result.best_weights.str() << " accuracy=" << result.best_accuracy << '\n';
    return 0;
  });
}

int cmd_eval_select(const RunConfig& cfg, Streams io) {
  return guarded("eval-select", io, [&] {
    cfg.weights.validate();
    auto groups = ensure_judged(load_groups(cfg, io), cfg, true);
    sort_groups(groups);
    const auto report = selection_accuracy(groups, cfg.weights, cfg.workers);
    write_json_document(cfg.output, io, to_json(report));
    if (cfg.csv)
      write_output(*cfg.csv, io, [&](std::ostream& os) { write_accuracy_csv(report.per_weighting, os); });
    io.log << "eval-select: weights=" << cfg.weights.str() << " accuracy=" << report.accuracy
           << " random=" << report.baseline_random << '\n';
    return 0;
  });
}

namespace {

// Raw flag values; unset means "fall back to the config file or default".
struct Flags {
  std::optional<std::string> input, output, config, weights, rule, method, mode, offline_scores,
      manifest, csv, relevance_url, coherence_url;
  std::optional<std::size_t> workers, pairs_per_instance, judge_retries, judge_batch, judge_in_flight;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> judge_timeout_ms, judge_backoff_ms;
  std::optional<double> step;
  bool renormalize = false;
  bool coherence_with_reference = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("-i,--input", f.input, "Input JSONL (\"-\" for stdin)");
  sub->add_option("-o,--output", f.output, "Output path (\"-\" for stdout)");
  sub->add_option("--config", f.config, "Config file");
  sub->add_option("--workers", f.workers, "Parallel workers over groups")->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "Seed for random pair selection");
  sub->add_option("--weights", f.weights, "Confidence,relevance,coherence weights");
  sub->add_flag("--renormalize-weights", f.renormalize, "Scale --weights to sum to 1");
  sub->add_option("--offline-scores", f.offline_scores, "JSONL of precomputed judge scores");
  sub->add_option("--relevance-url", f.relevance_url, "Relevance judge base URL");
  sub->add_option("--coherence-url", f.coherence_url, "Coherence judge base URL");
  sub->add_option("--judge-timeout-ms", f.judge_timeout_ms, "Per-request judge timeout");
  sub->add_option("--judge-retries", f.judge_retries, "Judge retries after the first attempt");
  sub->add_option("--judge-batch-size", f.judge_batch, "Samples per judge request");
  sub->add_option("--judge-in-flight", f.judge_in_flight, "Concurrent judge requests");
  sub->add_option("--judge-backoff-ms", f.judge_backoff_ms, "Initial retry backoff");
  sub->add_flag("--coherence-with-reference", f.coherence_with_reference,
                "Append reference_answer to the reasoning sent to the coherence judge");
}

RunConfig resolve(const Flags& f) {
  RunConfig cfg;
  if (f.config) {
    std::ifstream in(*f.config);
    if (!in) throw Error(ErrorKind::kIo, "cannot open config '" + *f.config + "'");
    apply_config(parse_config_text(in), cfg);
  }
  if (f.input) cfg.input = *f.input;
  if (f.output) cfg.output = *f.output;
  if (f.workers) cfg.workers = *f.workers;
  if (f.seed) cfg.seed = *f.seed;
  if (f.weights) cfg.weights = parse_weight_list(*f.weights, f.renormalize);
  else if (f.renormalize) cfg.weights = cfg.weights.renormalized();
  if (f.rule) cfg.rule = parse_subset_rule(*f.rule);
  if (f.method) {
    parse_supervision(*f.method, 0);
    cfg.method = *f.method;
  }
  if (f.mode) cfg.mode = parse_advantage_mode(*f.mode);
  if (f.step) cfg.step = *f.step;
  if (f.pairs_per_instance) cfg.pairs_per_instance = *f.pairs_per_instance;
  if (f.offline_scores) cfg.offline_scores = *f.offline_scores;
  if (f.manifest) cfg.manifest = *f.manifest;
  if (f.csv) cfg.csv = *f.csv;
  if (f.coherence_with_reference) cfg.judge_options.coherence_with_reference = true;
  if (f.relevance_url) {
    if (!cfg.relevance) cfg.relevance.emplace();
    cfg.relevance->base_url = *f.relevance_url;
  }
  if (f.coherence_url) {
    if (!cfg.coherence) cfg.coherence.emplace();
    cfg.coherence->base_url = *f.coherence_url;
  }
  for (auto* ep : {&cfg.relevance, &cfg.coherence}) {
    if (!*ep) continue;
    auto& e = **ep;
    if (f.judge_timeout_ms) e.timeout = std::chrono::milliseconds{*f.judge_timeout_ms};
    if (f.judge_retries) e.max_retries = *f.judge_retries;
    if (f.judge_batch) e.batch_size = *f.judge_batch;
    if (f.judge_in_flight) e.max_in_flight = *f.judge_in_flight;
    if (f.judge_backoff_ms) e.backoff_initial = std::chrono::milliseconds{*f.judge_backoff_ms};
  }
  return cfg;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, Streams io) {
  CLI::App app{"Dimension-level reward scoring, preference pairs and advantages", "drm"};
  app.require_subcommand(1);
  Flags f;

  auto* score = app.add_subcommand("score", "Compute DRM rewards for every sample");
  auto* pairs = app.add_subcommand("build-pairs", "Build a DPO preference dataset");
  auto* adv = app.add_subcommand("advantages", "Group-normalized GRPO advantages");
  auto* grid = app.add_subcommand("grid-search", "Best-of-N accuracy over the weight simplex");
  auto* eval = app.add_subcommand("eval-select", "Best-of-N accuracy at fixed weights");
  for (auto* sub : {score, pairs, adv, grid, eval}) add_common(sub, f);
  pairs->add_option("--rule", f.rule, "Subset rule: any, t+t, t+f, f+f");
  pairs->add_option("--method", f.method, "Supervision: drm or rlvr");
  pairs->add_option("--pairs-per-instance", f.pairs_per_instance, "Pairs emitted per instance");
  pairs->add_option("--manifest", f.manifest, "Manifest path (default <output>.manifest.json)");
  adv->add_option("--mode", f.mode, "rlvr, drm or combined");
  grid->add_option("--step", f.step, "Grid resolution; 1/step must be an integer");
  grid->add_option("--csv", f.csv, "Also write weights/accuracy CSV here");
  eval->add_option("--csv", f.csv, "Also write weights/accuracy CSV here");

  std::vector<std::string> argv_storage{"drm"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, io.stdout_, io.log);
    return rc == 0 ? 0 : 1;
  }

  RunConfig cfg;
  try {
    cfg = resolve(f);
  } catch (const Error& e) {
    io.log << "drm: " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code(e.kind());
  }

  if (score->parsed()) return cmd_score(cfg, io);
  if (pairs->parsed()) return cmd_build_pairs(cfg, io);
  if (adv->parsed()) return cmd_advantages(cfg, io);
  if (grid->parsed()) return cmd_grid_search(cfg, io);
  return cmd_eval_select(cfg, io);
}

}  // namespace drm::cli
