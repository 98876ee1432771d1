#include "drm/judges.hpp"

#include <istream>
#include <map>
#include <random>
#include <thread>

#include "drm/parallel.hpp"
#include "httplib.h"

namespace drm {

void JudgeEndpointConfig::validate() const {
  if (base_url.empty()) throw Error(ErrorKind::kValidation, "judge base_url is empty");
  if (max_in_flight < 1) throw Error(ErrorKind::kValidation, "judge max_in_flight must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::kValidation, "judge batch_size must be >= 1");
  if (timeout.count() <= 0) throw Error(ErrorKind::kValidation, "judge timeout must be positive");
}

namespace {

struct SampleRef {
  std::size_t group;
  std::size_t sample;
};

// "http://host:port/prefix" -> ("http://host:port", "/prefix/score").
std::pair<std::string, std::string> split_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  const auto path_start =
      base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  std::string host = base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {host, prefix + "/score"};
}

std::chrono::milliseconds backoff_delay(const JudgeEndpointConfig& cfg, std::size_t attempt) {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  const auto shift = std::min<std::size_t>(attempt, 30);
  const auto ceiling =
      std::min<std::int64_t>(cfg.backoff_cap.count(), cfg.backoff_initial.count() << shift);
  if (ceiling <= 0) return std::chrono::milliseconds{0};
  std::uniform_int_distribution<std::int64_t> dist(0, ceiling);
  return std::chrono::milliseconds{dist(rng)};
}

bool retriable_status(int status) { return status == 408 || status == 429 || status >= 500; }

// Returns the "scores" array of a successful response.
json post_with_retries(const JudgeEndpointConfig& cfg, const json& body, std::size_t expected,
                       const SampleGroup& first_group, std::size_t first_index) {
  const auto [host, path] = split_url(cfg.base_url);
  const std::string payload = body.dump();
  std::string last_failure;

  for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(backoff_delay(cfg, attempt - 1));

    httplib::Client client(host);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      last_failure = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_failure = "HTTP " + std::to_string(res->status);
      if (retriable_status(res->status)) continue;
      break;
    }

    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kSchema, cfg.base_url + ": unparseable judge response: " + e.what());
    }
    auto it = parsed.find("scores");
    if (!parsed.is_object() || it == parsed.end() || !it->is_array())
      throw Error(ErrorKind::kSchema, cfg.base_url + ": judge response has no 'scores' array");
    if (it->size() != expected)
      throw Error(ErrorKind::kSchema, cfg.base_url + ": judge returned " +
                                          std::to_string(it->size()) + " scores for " +
                                          std::to_string(expected) + " items");
    return *it;
  }
  throw JudgeError(first_group.instance_id, first_index,
                   cfg.base_url + ": judge request for instance '" + first_group.instance_id +
                       "' sample " + std::to_string(first_index) + " failed after " +
                       std::to_string(cfg.max_retries + 1) + " attempt(s): " + last_failure);
}

double score_field(const json& entry, const char* key, const std::string& url) {
  auto it = entry.is_object() ? entry.find(key) : entry.end();
  if (!entry.is_object() || it == entry.end() || !it->is_number())
    throw Error(ErrorKind::kSchema, url + ": judge score entry missing '" + key + "'");
  return it->get<double>();
}

json request_item(const Sample& s, bool with_reference) {
  std::string reasoning = s.quad.reasoning;
  if (with_reference && s.reference_answer) reasoning += "\n\n" + *s.reference_answer;
  return json{{"question", s.quad.question},
              {"context", s.quad.context},
              {"reasoning", std::move(reasoning)},
              {"answer", s.quad.answer}};
}

// Scores every referenced sample against one endpoint. `write(k, entry)`
// receives the response entry for refs[k].
template <typename Write>
void run_endpoint(const std::vector<SampleGroup>& groups, std::span<const SampleRef> refs,
                  const JudgeEndpointConfig& cfg, bool with_reference, Write&& write) {
  const std::size_t n_batches = (refs.size() + cfg.batch_size - 1) / cfg.batch_size;
  parallel_for(n_batches, cfg.max_in_flight, [&](std::size_t b) {
    const auto batch = refs.subspan(b * cfg.batch_size,
                                    std::min(cfg.batch_size, refs.size() - b * cfg.batch_size));
    json items = json::array();
    for (const auto& r : batch)
      items.push_back(request_item(groups[r.group].samples[r.sample], with_reference));
    const json scores = post_with_retries(cfg, json{{"items", std::move(items)}}, batch.size(),
                                          groups[batch[0].group], batch[0].sample);
    for (std::size_t k = 0; k < batch.size(); ++k) write(b * cfg.batch_size + k, scores[k]);
  });
}

}  // namespace

std::vector<SampleGroup> fetch_judge_scores(std::vector<SampleGroup> groups,
                                            const JudgeEndpointConfig& relevance,
                                            const JudgeEndpointConfig& coherence,
                                            const JudgeOptions& options) {
  std::vector<SampleRef> missing;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t s = 0; s < groups[g].size(); ++s)
      if (!groups[g].samples[s].judge) missing.push_back({g, s});
  if (missing.empty()) return groups;

  relevance.validate();
  coherence.validate();

  // Each batch writes only its own slots, so no locking is needed.
  std::vector<JudgeScores> fetched(missing.size());

  run_endpoint(groups, missing, relevance, false, [&](std::size_t k, const json& e) {
    auto& js = fetched[k];
    js.q_entail = score_field(e, "q_entail", relevance.base_url);
    js.d_relevance = score_field(e, "d_relevance", relevance.base_url);
    js.a_entail = score_field(e, "a_entail", relevance.base_url);
  });
  run_endpoint(groups, missing, coherence, options.coherence_with_reference,
               [&](std::size_t k, const json& e) {
                 fetched[k].coherence = score_field(e, "coherence", coherence.base_url);
               });

  for (std::size_t k = 0; k < missing.size(); ++k)
    groups[missing[k].group].samples[missing[k].sample].judge = fetched[k];
  return groups;
}

std::vector<SampleGroup> load_offline_scores(std::vector<SampleGroup> groups,
                                             std::istream& score_file) {
  std::map<std::pair<std::string, std::size_t>, JudgeScores> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(score_file, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::pair<std::string, std::size_t> key;
    JudgeScores scores;
    try {
      const json j = json::parse(line);
      if (!j.is_object() || !j.contains("instance_id") || !j["instance_id"].is_string() ||
          !j.contains("index") || !j["index"].is_number_unsigned() || !j.contains("judge"))
        throw Error(ErrorKind::kSchema, "expected {instance_id, index, judge}");
      key = {j["instance_id"].get<std::string>(), j["index"].get<std::size_t>()};
      scores = judge_scores_from_json(j["judge"]);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kSchema, "score file line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), "score file line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!table.emplace(key, scores).second)
      throw Error(ErrorKind::kDuplicate, "score file line " + std::to_string(line_no) +
                                             ": duplicate key (" + key.first + ", " +
                                             std::to_string(key.second) + ")");
  }
  if (score_file.bad()) throw Error(ErrorKind::kIo, "failed reading score file");

  for (auto& g : groups) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto it = table.find({g.instance_id, i});
      if (it == table.end())
        throw Error(ErrorKind::kJoin, "no offline score for (" + g.instance_id + ", " +
                                          std::to_string(i) + ")");
      g.samples[i].judge = it->second;
    }
  }
  return groups;
}

}  // namespace drm
