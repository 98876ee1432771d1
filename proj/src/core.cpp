#include "drm/core.hpp"

#include <istream>
#include <ostream>

namespace drm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kGrouping: return "grouping";
    case ErrorKind::kJudge: return "judge";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kJoin: return "join";
    case ErrorKind::kDuplicate: return "duplicate";
    case ErrorKind::kIntegrity: return "integrity";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
      return 2;
    case ErrorKind::kSchema:
    case ErrorKind::kGrouping:
    case ErrorKind::kJoin:
    case ErrorKind::kDuplicate:
      return 3;
    case ErrorKind::kJudge:
      return 4;
    case ErrorKind::kValidation:
    case ErrorKind::kPrecondition:
    case ErrorKind::kIntegrity:
      return 5;
  }
  return 1;
}

std::optional<std::vector<bool>> labels_of(const SampleGroup& group) {
  std::vector<bool> labels;
  labels.reserve(group.size());
  for (const auto& s : group.samples) {
    if (!s.correct) return std::nullopt;
    labels.push_back(*s.correct);
  }
  return labels;
}

bool fully_judged(const SampleGroup& group) {
  for (const auto& s : group.samples)
    if (!s.judge) return false;
  return true;
}

json to_json(const JudgeScores& scores) {
  return json{{"q_entail", scores.q_entail},
              {"d_relevance", scores.d_relevance},
              {"a_entail", scores.a_entail},
              {"coherence", scores.coherence}};
}

namespace {

double number_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number())
    throw Error(ErrorKind::kSchema, std::string("missing or non-numeric field '") + key + "'");
  return it->get<double>();
}

std::string string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw Error(ErrorKind::kSchema, std::string("missing or non-string field '") + key + "'");
  return it->get<std::string>();
}

std::vector<double> number_array(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array())
    throw Error(ErrorKind::kSchema, std::string("missing or non-array field '") + key + "'");
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number())
      throw Error(ErrorKind::kSchema, std::string("non-numeric entry in '") + key + "'");
    out.push_back(v.get<double>());
  }
  return out;
}

Sample sample_from_json(const json& j) {
  Sample s;
  s.quad.question = string_field(j, "question");
  if (auto it = j.find("context"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw Error(ErrorKind::kSchema, "field 'context' must be an array");
    for (const auto& c : *it) {
      if (!c.is_string()) throw Error(ErrorKind::kSchema, "non-string entry in 'context'");
      s.quad.context.push_back(c.get<std::string>());
    }
  }
  s.quad.reasoning = string_field(j, "reasoning");
  s.quad.answer = string_field(j, "answer");
  s.quad.reasoning_logprobs = number_array(j, "reasoning_logprobs");
  s.quad.answer_logprobs = number_array(j, "answer_logprobs");
  if (auto it = j.find("judge"); it != j.end() && !it->is_null())
    s.judge = judge_scores_from_json(*it);
  if (auto it = j.find("correct"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw Error(ErrorKind::kSchema, "field 'correct' must be boolean or null");
    s.correct = it->get<bool>();
  }
  if (auto it = j.find("reference_answer"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw Error(ErrorKind::kSchema, "field 'reference_answer' must be a string");
    s.reference_answer = it->get<std::string>();
  }
  return s;
}

}  // namespace

JudgeScores judge_scores_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kSchema, "judge scores must be an object");
  return JudgeScores{number_field(j, "q_entail"), number_field(j, "d_relevance"),
                     number_field(j, "a_entail"), number_field(j, "coherence")};
}

json sample_to_json(const std::string& instance_id, const Sample& sample,
                    std::optional<std::size_t> index) {
  const auto& q = sample.quad;
  json j{{"instance_id", instance_id},
         {"question", q.question},
         {"context", q.context},
         {"reasoning", q.reasoning},
         {"answer", q.answer},
         {"reasoning_logprobs", q.reasoning_logprobs},
         {"answer_logprobs", q.answer_logprobs},
         {"judge", sample.judge ? to_json(*sample.judge) : json(nullptr)},
         {"correct", sample.correct ? json(*sample.correct) : json(nullptr)}};
  if (sample.reference_answer) j["reference_answer"] = *sample.reference_answer;
  if (index) j["index"] = *index;
  return j;
}

std::optional<std::pair<std::string, Sample>> GroupReader::read_sample() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      if (!j.is_object()) throw Error(ErrorKind::kSchema, "record is not a JSON object");
      std::string id = string_field(j, "instance_id");
      return std::make_pair(std::move(id), sample_from_json(j));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kSchema, "line " + std::to_string(line_no_) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no_) + ": " + e.what());
    }
  }
  if (in_.bad()) throw Error(ErrorKind::kIo, "read failure after line " + std::to_string(line_no_));
  return std::nullopt;
}

std::optional<SampleGroup> GroupReader::next() {
  if (!pending_) pending_ = read_sample();
  if (!pending_) return std::nullopt;

  SampleGroup group;
  group.instance_id = pending_->first;
  if (finished_ids_.contains(group.instance_id))
    throw Error(ErrorKind::kGrouping, "line " + std::to_string(line_no_) + ": instance_id '" +
                                          group.instance_id + "' is not contiguous");
  group.samples.push_back(std::move(pending_->second));
  pending_.reset();

  while (auto rec = read_sample()) {
    if (rec->first != group.instance_id) {
      pending_ = std::move(rec);
      break;
    }
    group.samples.push_back(std::move(rec->second));
  }
  finished_ids_.insert(group.instance_id);
  return group;
}

std::vector<SampleGroup> read_groups(std::istream& in) {
  GroupReader reader(in);
  std::vector<SampleGroup> groups;
  while (auto g = reader.next()) groups.push_back(std::move(*g));
  return groups;
}

std::size_t write_records(std::span<const json> records, std::ostream& out) {
  std::size_t count = 0;
  for (const auto& rec : records) {
    std::string line;
    try {
      line = rec.dump();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kSchema, "record " + std::to_string(count) + ": " + e.what());
    }
    line.push_back('\n');
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    if (!out) throw Error(ErrorKind::kIo, "write failed at record " + std::to_string(count));
    ++count;
  }
  out.flush();
  if (!out) throw Error(ErrorKind::kIo, "flush failed after record " + std::to_string(count));
  return count;
}

std::vector<json> groups_to_records(std::span<const SampleGroup> groups) {
  std::vector<json> out;
  for (const auto& g : groups)
    for (const auto& s : g.samples) out.push_back(sample_to_json(g.instance_id, s));
  return out;
}

}  // namespace drm
