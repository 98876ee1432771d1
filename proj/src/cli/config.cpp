#include "drm/cli/config.hpp"

#include <algorithm>
#include <sstream>

namespace drm::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (!is || !is.eof() || (std::is_unsigned_v<T> && v.find('-') != std::string::npos))
    throw Error(ErrorKind::kValidation, "config key '" + key + "': bad number '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw Error(ErrorKind::kValidation, "config key '" + key + "': expected true or false");
}

void apply_endpoint(const std::string& field, const std::string& key, const std::string& v,
                    JudgeEndpointConfig& ep) {
  using std::chrono::milliseconds;
  if (field == "base_url") ep.base_url = v;
  else if (field == "timeout_ms") ep.timeout = milliseconds{parse_number<std::int64_t>(key, v)};
  else if (field == "max_in_flight") ep.max_in_flight = parse_number<std::size_t>(key, v);
  else if (field == "max_retries") ep.max_retries = parse_number<std::size_t>(key, v);
  else if (field == "batch_size") ep.batch_size = parse_number<std::size_t>(key, v);
  else if (field == "backoff_initial_ms") ep.backoff_initial = milliseconds{parse_number<std::int64_t>(key, v)};
  else if (field == "backoff_cap_ms") ep.backoff_cap = milliseconds{parse_number<std::int64_t>(key, v)};
  else throw Error(ErrorKind::kValidation, "unknown config key '" + key + "'");
}

}  // namespace

std::map<std::string, std::string> parse_config_text(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::kSchema, "config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    if (key.empty())
      throw Error(ErrorKind::kSchema, "config line " + std::to_string(line_no) + ": empty key");
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

DrmWeights parse_weight_list(std::string text, bool renormalize) {
  text.erase(std::remove_if(text.begin(), text.end(),
                            [](char c) { return c == '[' || c == ']' || c == ' '; }),
             text.end());
  if (!renormalize) return parse_weights(text);
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      parts.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kValidation, "bad weight '" + item + "'");
    }
  }
  if (parts.size() != 3) throw Error(ErrorKind::kValidation, "expected three weights");
  DrmWeights w = DrmWeights{parts[0], parts[1], parts[2]}.renormalized();
  w.validate();
  return w;
}

void apply_config(const std::map<std::string, std::string>& values, RunConfig& cfg) {
  for (const auto& [key, v] : values) {
    const auto dot = key.find('.');
    if (dot != std::string::npos) {
      const std::string section = key.substr(0, dot);
      const std::string field = key.substr(dot + 1);
      if (section == "relevance") {
        if (!cfg.relevance) cfg.relevance.emplace();
        apply_endpoint(field, key, v, *cfg.relevance);
      } else if (section == "coherence") {
        if (!cfg.coherence) cfg.coherence.emplace();
        apply_endpoint(field, key, v, *cfg.coherence);
      } else {
        throw Error(ErrorKind::kValidation, "unknown config section '" + section + "'");
      }
      continue;
    }
    if (key == "input") cfg.input = v;
    else if (key == "output") cfg.output = v;
    else if (key == "weights") cfg.weights = parse_weight_list(v, false);
    else if (key == "rule") cfg.rule = parse_subset_rule(v);
    else if (key == "method") { parse_supervision(v, 0); cfg.method = v; }
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "mode") cfg.mode = parse_advantage_mode(v);
    else if (key == "step") cfg.step = parse_number<double>(key, v);
    else if (key == "workers") cfg.workers = parse_number<std::size_t>(key, v);
    else if (key == "pairs_per_instance") cfg.pairs_per_instance = parse_number<std::size_t>(key, v);
    else if (key == "offline_scores") cfg.offline_scores = v;
    else if (key == "coherence_with_reference") cfg.judge_options.coherence_with_reference = parse_bool(key, v);
    else if (key == "manifest") cfg.manifest = v;
    else if (key == "csv") cfg.csv = v;
    else throw Error(ErrorKind::kValidation, "unknown config key '" + key + "'");
  }
}

}  // namespace drm::cli
