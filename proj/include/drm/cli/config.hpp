// Run configuration for the drm command-line tool. Values come from built-in
// defaults, then an optional config file, then command-line flags.
//
// Config file syntax is a TOML subset: `key = value` lines, `#` comments,
// and [relevance] / [coherence] sections for the judge endpoints.
//
//   weights = "0.1,0.2,0.7"
//   rule = "t+f"
//   seed = 7
//   [relevance]
//   base_url = "http://localhost:8001"
//   timeout_ms = 30000
#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>

#include "drm/judges.hpp"
#include "drm/pairs.hpp"
#include "drm/reward.hpp"
#include "drm/rl.hpp"

namespace drm::cli {

struct RunConfig {
  std::string input = "-";
  std::string output = "-";
  DrmWeights weights = kDefaultWeights;
  SubsetRule rule = SubsetRule::kAny;
  std::string method = "drm";
  std::uint64_t seed = 0;
  AdvantageMode mode = AdvantageMode::kCombined;
  double step = 0.1;
  std::size_t workers = 1;
  std::size_t pairs_per_instance = 1;

  std::optional<JudgeEndpointConfig> relevance;
  std::optional<JudgeEndpointConfig> coherence;
  std::optional<std::string> offline_scores;
  JudgeOptions judge_options;

  std::optional<std::string> manifest;
  std::optional<std::string> csv;

  SupervisionMethod supervision() const { return parse_supervision(method, seed); }
};

/// Flattened key/value pairs; section keys are prefixed, e.g.
/// "relevance.base_url". Throws kSchema on malformed lines.
std::map<std::string, std::string> parse_config_text(std::istream& in);

/// Applies recognised keys onto `cfg`. Unknown keys throw kValidation.
void apply_config(const std::map<std::string, std::string>& values, RunConfig& cfg);

/// "a,b,c" or "[a, b, c]". With `renormalize`, nonnegative weights are scaled
/// to sum to 1 before validation.
DrmWeights parse_weight_list(std::string text, bool renormalize);

}  // namespace drm::cli
