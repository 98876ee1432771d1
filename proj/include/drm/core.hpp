// Domain types, error taxonomy and JSONL record I/O shared by every stage of
// the reward pipeline.
//
// Input records carry one sample per line:
//
//   {"instance_id": "...", "question": "...", "context": ["..."],
//    "reasoning": "...", "answer": "...",
//    "reasoning_logprobs": [...], "answer_logprobs": [...],
//    "judge": {"q_entail": x, "d_relevance": x, "a_entail": x, "coherence": x} | null,
//    "correct": true | false | null}
//
// Lines belonging to one instance must be contiguous. Extra keys are ignored,
// which lets scored output be fed back in unchanged.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

namespace drm {

using json = nlohmann::json;

enum class ErrorKind {
  kIo,
  kSchema,
  kGrouping,
  kJudge,
  kValidation,
  kPrecondition,
  kJoin,
  kDuplicate,
  kIntegrity,
};

const char* to_string(ErrorKind kind);

/// Process exit status for an error category: 2 I/O, 3 schema/data shape,
/// 4 judge, 5 validation.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// A judge call for one sample that could not be completed.
class JudgeError : public Error {
 public:
  JudgeError(std::string instance_id, std::size_t index, const std::string& what)
      : Error(ErrorKind::kJudge, what),
        instance_id_(std::move(instance_id)),
        index_(index) {}
  const std::string& instance_id() const noexcept { return instance_id_; }
  std::size_t index() const noexcept { return index_; }

 private:
  std::string instance_id_;
  std::size_t index_;
};

/// One sampled output split into question, context, reasoning and answer,
/// with natural-log token probabilities for the two generated parts.
struct Quadruple {
  std::string question;
  std::vector<std::string> context;
  std::string reasoning;
  std::string answer;
  std::vector<double> reasoning_logprobs;
  std::vector<double> answer_logprobs;

  bool operator==(const Quadruple&) const = default;
};

/// Raw external-judge measurements. Scale is whatever the judge emits; the
/// reward stage normalizes within the group.
struct JudgeScores {
  double q_entail = 0.0;     // question -> reasoning entailment
  double d_relevance = 0.0;  // reasoning <-> context relevance
  double a_entail = 0.0;     // reasoning -> answer entailment
  double coherence = 0.0;    // outcome-judge score of the reasoning

  bool operator==(const JudgeScores&) const = default;
};

struct Sample {
  Quadruple quad;
  std::optional<JudgeScores> judge;
  std::optional<bool> correct;
  // Gold answer text, only used when the coherence judge is asked to see it.
  std::optional<std::string> reference_answer;

  bool operator==(const Sample&) const = default;
};

struct SampleGroup {
  std::string instance_id;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  bool operator==(const SampleGroup&) const = default;
};

/// Correctness labels in sample order, or nullopt if any label is missing.
std::optional<std::vector<bool>> labels_of(const SampleGroup& group);

bool fully_judged(const SampleGroup& group);

// JSON mapping for the sample record schema. `index` is included when given.
json sample_to_json(const std::string& instance_id, const Sample& sample,
                    std::optional<std::size_t> index = std::nullopt);
json to_json(const JudgeScores& scores);
JudgeScores judge_scores_from_json(const json& j);

/// Streams groups out of a JSONL source, one group per call to next().
class GroupReader {
 public:
  explicit GroupReader(std::istream& in) : in_(in) {}

  /// Next complete group, or nullopt at end of stream. Throws Error with
  /// kSchema (bad line, carrying the line number) or kGrouping (an instance
  /// id reappears after another id).
  std::optional<SampleGroup> next();

  std::size_t line_number() const noexcept { return line_no_; }

 private:
  std::optional<std::pair<std::string, Sample>> read_sample();

  std::istream& in_;
  std::size_t line_no_ = 0;
  std::optional<std::pair<std::string, Sample>> pending_;
  std::unordered_set<std::string> finished_ids_;
};

std::vector<SampleGroup> read_groups(std::istream& in);

/// Writes one compact JSON object per line with sorted keys. Returns the
/// number of records written.
std::size_t write_records(std::span<const json> records, std::ostream& out);

/// Flattens groups back to the input schema, one line per sample.
std::vector<json> groups_to_records(std::span<const SampleGroup> groups);

}  // namespace drm
