// Obtains judge scores for samples that lack them, either from HTTP scoring
// services or from an offline score file.
//
// Wire protocol, shared by both services:
//
//   POST {base_url}/score
//   {"items": [{"question": s, "context": [s], "reasoning": s, "answer": s}, ...]}
//
// The relevance service answers {"scores": [{"q_entail": x, "d_relevance": x,
// "a_entail": x}, ...]} and the coherence service {"scores": [{"coherence": x},
// ...]}, one entry per item in request order.
#pragma once

#include <chrono>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "drm/core.hpp"

namespace drm {

struct JudgeEndpointConfig {
  std::string base_url;
  std::chrono::milliseconds timeout{30000};
  std::size_t max_in_flight = 4;
  std::size_t max_retries = 3;
  std::size_t batch_size = 16;
  // Full-jitter exponential backoff: sleep U(0, min(cap, initial * 2^attempt)).
  std::chrono::milliseconds backoff_initial{200};
  std::chrono::milliseconds backoff_cap{10000};

  void validate() const;
};

struct JudgeOptions {
  /// Append the sample's reference_answer to the reasoning text sent to the
  /// coherence judge, when one is present.
  bool coherence_with_reference = false;
};

/// Fills in judge scores for every sample that has none. Samples that already
/// carry scores are left untouched and cost no requests. Order is preserved
/// regardless of request completion order.
///
/// Throws JudgeError (instance id and sample index of the first sample in the
/// failing batch) once retries are exhausted, or Error(kSchema) when a
/// response is malformed or has the wrong number of entries.
std::vector<SampleGroup> fetch_judge_scores(std::vector<SampleGroup> groups,
                                            const JudgeEndpointConfig& relevance,
                                            const JudgeEndpointConfig& coherence,
                                            const JudgeOptions& options = {});

/// Joins a JSONL file of {"instance_id", "index", "judge"} onto the samples.
/// Every sample needs exactly one entry (kJoin when missing, kDuplicate when a
/// key appears twice). Entries for unknown samples are ignored.
std::vector<SampleGroup> load_offline_scores(std::vector<SampleGroup> groups,
                                             std::istream& score_file);

}  // namespace drm
