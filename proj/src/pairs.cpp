#include "drm/pairs.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <ostream>
#include <set>

namespace drm {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

SubsetRule parse_subset_rule(std::string_view text) {
  const auto t = lower(text);
  if (t == "any") return SubsetRule::kAny;
  if (t == "t+t") return SubsetRule::kTrueTrue;
  if (t == "t+f") return SubsetRule::kTrueFalse;
  if (t == "f+f") return SubsetRule::kFalseFalse;
  throw Error(ErrorKind::kValidation, "unknown subset rule '" + std::string(text) + "'");
}

std::string to_string(SubsetRule rule) {
  switch (rule) {
    case SubsetRule::kAny: return "any";
    case SubsetRule::kTrueTrue: return "T+T";
    case SubsetRule::kTrueFalse: return "T+F";
    case SubsetRule::kFalseFalse: return "F+F";
  }
  return "?";
}

SupervisionMethod parse_supervision(std::string_view text, std::uint64_t seed) {
  const auto t = lower(text);
  if (t == "drm") return SupervisionMethod::drm();
  if (t == "rlvr") return SupervisionMethod::rlvr(seed);
  throw Error(ErrorKind::kValidation, "unknown supervision method '" + std::string(text) + "'");
}

std::string to_string(const SupervisionMethod& method) {
  return method.kind == SupervisionMethod::Kind::kDrm ? "DRM" : "RLVR";
}

std::string construction_name(const SupervisionMethod& method, SubsetRule rule) {
  return to_string(method) + "@" + to_string(rule);
}

CounterRng::CounterRng(std::uint64_t seed, std::string_view stream_name)
    : key_(splitmix64(splitmix64(seed) ^ fnv1a64(stream_name))) {}

std::uint64_t CounterRng::next() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * counter_++); }

std::uint64_t CounterRng::below(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorKind::kValidation, "empty range for random draw");
  // Largest multiple of bound that fits; values at or above it are rejected.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    const std::uint64_t v = next();
    if (v < limit) return v % bound;
  }
}

Pools build_subsets(const SampleGroup& group, SubsetRule rule) {
  Pools pools;
  const std::size_t n = group.size();
  if (rule == SubsetRule::kAny) {
    for (std::size_t i = 0; i < n; ++i) pools.pos.push_back(i);
    pools.neg = pools.pos;
    return pools;
  }
  std::vector<std::size_t> correct, wrong;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& label = group.samples[i].correct;
    if (!label)
      throw Error(ErrorKind::kPrecondition, "instance '" + group.instance_id + "' sample " +
                                                std::to_string(i) + " has no correctness label");
    (*label ? correct : wrong).push_back(i);
  }
  switch (rule) {
    case SubsetRule::kTrueTrue: pools.pos = pools.neg = correct; break;
    case SubsetRule::kTrueFalse: pools.pos = correct; pools.neg = wrong; break;
    case SubsetRule::kFalseFalse: pools.pos = pools.neg = wrong; break;
    case SubsetRule::kAny: break;
  }
  return pools;
}

namespace {

void check_pools(const Pools& pools, std::size_t n) {
  for (const auto* pool : {&pools.pos, &pools.neg})
    for (std::size_t i : *pool)
      if (i >= n)
        throw Error(ErrorKind::kValidation, "pool index " + std::to_string(i) + " out of range");
}

std::vector<std::pair<std::size_t, std::size_t>> drm_order(const Pools& pools,
                                                           std::span<const double> r,
                                                           std::size_t max_pairs) {
  if (max_pairs == 1) {
    // Walk positives best-first; the first one with a distinct negative wins.
    std::vector<std::size_t> pos(pools.pos);
    std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
      return r[a] > r[b] || (r[a] == r[b] && a < b);
    });
    for (std::size_t p : pos) {
      std::optional<std::size_t> best;
      for (std::size_t n : pools.neg) {
        if (n == p) continue;
        if (!best || r[n] < r[*best] || (r[n] == r[*best] && n < *best)) best = n;
      }
      if (best) return {{p, *best}};
    }
    return {};
  }
  std::vector<std::pair<std::size_t, std::size_t>> all;
  std::set<std::size_t> neg(pools.neg.begin(), pools.neg.end());
  std::set<std::size_t> pos(pools.pos.begin(), pools.pos.end());
  for (std::size_t p : pos)
    for (std::size_t n : neg)
      if (p != n) all.emplace_back(p, n);
  std::stable_sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
    if (r[a.first] != r[b.first]) return r[a.first] > r[b.first];
    if (r[a.second] != r[b.second]) return r[a.second] < r[b.second];
    return a < b;
  });
  if (all.size() > max_pairs) all.resize(max_pairs);
  return all;
}

std::optional<std::pair<std::size_t, std::size_t>> rlvr_draw(const Pools& pools,
                                                             CounterRng& rng) {
  if (pools.pos.empty() || pools.neg.empty()) return std::nullopt;
  if (pools.pos.size() == 1 && pools.neg.size() == 1 && pools.pos[0] == pools.neg[0])
    return std::nullopt;
  for (;;) {
    const std::size_t p = pools.pos[rng.below(pools.pos.size())];
    std::vector<std::size_t> candidates;
    for (std::size_t n : pools.neg)
      if (n != p) candidates.push_back(n);
    // Only reachable when p is the sole negative but other positives exist.
    if (candidates.empty()) continue;
    return std::make_pair(p, candidates[rng.below(candidates.size())]);
  }
}

std::vector<std::pair<std::size_t, std::size_t>> rlvr_order(const SampleGroup& group,
                                                            const Pools& pools,
                                                            std::uint64_t seed,
                                                            std::size_t max_pairs) {
  std::set<std::pair<std::size_t, std::size_t>> admissible;
  for (std::size_t p : pools.pos)
    for (std::size_t n : pools.neg)
      if (p != n) admissible.emplace(p, n);
  const std::size_t target = std::min(max_pairs, admissible.size());

  CounterRng rng(seed, group.instance_id);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  while (out.size() < target) {
    auto pick = rlvr_draw(pools, rng);
    if (!pick) break;
    if (seen.insert(*pick).second) out.push_back(*pick);
  }
  return out;
}

}  // namespace

std::vector<PreferencePair> select_pairs(const SampleGroup& group, SubsetRule rule,
                                         const Pools& pools, const SupervisionMethod& method,
                                         std::span<const double> rewards,
                                         std::size_t max_pairs) {
  if (rewards.size() != group.size())
    throw Error(ErrorKind::kValidation, "instance '" + group.instance_id + "': " +
                                            std::to_string(rewards.size()) + " rewards for " +
                                            std::to_string(group.size()) + " samples");
  check_pools(pools, group.size());
  if (max_pairs == 0) return {};

  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  if (method.kind == SupervisionMethod::Kind::kDrm) {
    chosen = drm_order(pools, rewards, max_pairs);
  } else {
    if (!method.seed) throw Error(ErrorKind::kValidation, "RLVR supervision requires a seed");
    chosen = rlvr_order(group, pools, *method.seed, max_pairs);
  }

  std::vector<PreferencePair> out;
  for (auto [p, n] : chosen)
    out.push_back(PreferencePair{group.instance_id, p, n, rewards[p], rewards[n], rule, method});
  return out;
}

std::optional<PreferencePair> select_pair(const SampleGroup& group, SubsetRule rule,
                                          const Pools& pools, const SupervisionMethod& method,
                                          std::span<const double> rewards) {
  auto pairs = select_pairs(group, rule, pools, method, rewards, 1);
  if (pairs.empty()) return std::nullopt;
  return pairs.front();
}

std::string dpo_prompt(const Quadruple& q) {
  std::string out = q.question;
  for (const auto& c : q.context) {
    out += "\n\n";
    out += c;
  }
  return out;
}

std::string dpo_response(const Quadruple& q) { return q.reasoning + "\n\n" + q.answer; }

std::size_t emit_dpo_dataset(std::span<const PreferencePair> pairs,
                             std::span<const SampleGroup> groups, std::ostream& out) {
  std::map<std::string_view, const SampleGroup*> by_id;
  for (const auto& g : groups) by_id.emplace(g.instance_id, &g);

  std::vector<json> records;
  records.reserve(pairs.size());
  for (const auto& pair : pairs) {
    auto it = by_id.find(pair.instance_id);
    if (it == by_id.end())
      throw Error(ErrorKind::kIntegrity, "pair refers to unknown instance '" + pair.instance_id + "'");
    const SampleGroup& g = *it->second;
    if (pair.pos_index >= g.size() || pair.neg_index >= g.size())
      throw Error(ErrorKind::kIntegrity, "pair indices (" + std::to_string(pair.pos_index) + ", " +
                                             std::to_string(pair.neg_index) +
                                             ") out of range for instance '" + pair.instance_id + "'");
    const auto& pos = g.samples[pair.pos_index].quad;
    const auto& neg = g.samples[pair.neg_index].quad;
    json rec{{"prompt", dpo_prompt(pos)},
             {"chosen", dpo_response(pos)},
             {"rejected", dpo_response(neg)},
             {"instance_id", pair.instance_id},
             {"pos_index", pair.pos_index},
             {"neg_index", pair.neg_index},
             {"pos_reward", pair.pos_reward},
             {"neg_reward", pair.neg_reward},
             {"method", construction_name(pair.method, pair.rule)}};
    if (pair.method.seed) rec["seed"] = *pair.method.seed;
    records.push_back(std::move(rec));
  }
  return write_records(records, out);
}

}  // namespace drm
