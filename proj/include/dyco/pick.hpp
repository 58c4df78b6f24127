#pragma once

// Criterion-wise selection over a pool of candidate images: resolve the criteria, run a
// round-robin tournament per criterion with any judge, report one winner per criterion.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dyco/core.hpp"
#include "dyco/errors.hpp"
#include "dyco/parallel.hpp"
#include "dyco/records.hpp"
#include "dyco/scorers.hpp"

namespace dyco {

struct CandidateSet {
  Prompt prompt;
  std::vector<ImageRef> candidates;

  void validate() const {
    if (candidates.size() < 2) throw DomainError("candidate set needs at least 2 candidates");
    std::set<std::string> ids;
    for (const auto& c : candidates) {
      if (!ids.insert(c.id).second) throw DomainError("duplicate candidate id '" + c.id + "'");
    }
  }
};

inline constexpr std::string_view kDefaultCriteriaInstruction =
    "List up to five fine-grained, task-relevant criteria for judging images generated for this prompt. "
    "Each criterion names one observable aspect of the image.";

struct CriteriaProviderRequest {
  Prompt prompt;
  std::vector<ImageRef> reference_candidates;
  std::string instruction{kDefaultCriteriaInstruction};
};

/// External criterion generator.
class CriteriaProvider {
 public:
  virtual ~CriteriaProvider() = default;
  virtual std::vector<Criterion> generate(const CriteriaProviderRequest& req) = 0;
};

class ResolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string normalized_text(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (u == ' ' || u == '\t' || u == '\n' || u == '\r') {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back((u >= 'A' && u <= 'Z') ? static_cast<char>(u - 'A' + 'a') : c);
  }
  return out;
}

}  // namespace detail

/// User criteria are used as given with OVERALL appended when missing. Without user
/// criteria the provider is asked; its output is deduplicated (by id and by
/// case/whitespace-normalized text), stripped of any OVERALL entry, capped at five and
/// followed by OVERALL.
inline std::vector<Criterion> resolve_criteria(const std::optional<std::vector<Criterion>>& user_criteria,
                                               const CriteriaProviderRequest& req, CriteriaProvider* provider) {
  if (user_criteria) {
    auto out = *user_criteria;
    for (std::size_t i = 0; i < out.size(); ++i) validate_criterion(out[i], "criteria[" + std::to_string(i) + "]");
    const bool has_overall = std::any_of(out.begin(), out.end(), [](const Criterion& c) { return c.is_overall(); });
    if (!has_overall) out.push_back(overall_criterion());
    return out;
  }
  if (provider == nullptr) throw ResolutionError("no user criteria and no criteria provider");
  std::vector<Criterion> generated;
  try {
    generated = provider->generate(req);
  } catch (const std::exception& e) {
    throw ResolutionError(std::string("criteria provider failed: ") + e.what());
  }
  std::vector<Criterion> out;
  std::set<std::string> ids, texts;
  for (const auto& c : generated) {
    if (c.id.empty() || c.text.empty() || c.is_overall()) continue;
    const auto norm = detail::normalized_text(c.text);
    if (ids.contains(c.id) || texts.contains(norm)) continue;
    ids.insert(c.id);
    texts.insert(norm);
    out.push_back(c);
    if (out.size() == kMaxCriteria) break;
  }
  out.push_back(overall_criterion());
  return out;
}

struct MatchRecord {
  std::string criterion_id;
  std::string a;  // lower id of the pair
  std::string b;
  PreferenceLabel label = PreferenceLabel::kTie;
  std::optional<std::string> error;  // judge failure; the match counts as a tie
};

struct Standing {
  std::string candidate_id;
  double wins = 0.0;
};

enum class TieBreak {
  kHeadToHeadThenIndex,  // mini-tournament among the tied leaders, then lowest input index
  kIndexOnly,
};

struct TournamentResult {
  std::vector<Standing> standings;  // input order
  std::string winner;
  std::vector<MatchRecord> matches;  // canonical (a, b) order
};

struct TournamentOptions {
  double tie_band = 0.0;
  TieBreak tie_break = TieBreak::kHeadToHeadThenIndex;
  std::size_t jobs = 1;
};

inline ScoreRequest tournament_request(const CandidateSet& set, const ImageRef& a, const ImageRef& b,
                                       const Criterion& crit) {
  ScoreRequest req;
  req.prompt = set.prompt;
  req.image_a = a;
  req.image_b = b;
  if (crit.is_overall()) {
    req.condition = Condition::overall();
  } else {
    req.condition = Condition::single(crit.id);
    req.criteria_text = {crit.text};
  }
  req.instruction = render_instruction(PromptTemplate::kStructured, req);
  return req;
}

/// Round robin over all unordered pairs; each pair is judged once with the lower id as
/// image A. A win is worth 1 and a tie 0.5 to each side. The winner has the most wins;
/// ties go to the tie-break rule.
inline TournamentResult run_tournament(const CandidateSet& set, const Criterion& criterion, const Scorer& scorer,
                                       const TournamentOptions& opt = {}) {
  set.validate();
  const std::size_t n = set.candidates.size();
  std::vector<std::size_t> by_id(n);
  for (std::size_t i = 0; i < n; ++i) by_id[i] = i;
  std::sort(by_id.begin(), by_id.end(),
            [&](std::size_t x, std::size_t y) { return set.candidates[x].id < set.candidates[y].id; });

  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // input indices, canonical order
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(by_id[i], by_id[j]);
  }
  std::vector<MatchRecord> matches(pairs.size());
  parallel_shards(pairs.size(), opt.jobs, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const auto& ca = set.candidates[pairs[k].first];
      const auto& cb = set.candidates[pairs[k].second];
      MatchRecord m{criterion.id, ca.id, cb.id, PreferenceLabel::kTie, std::nullopt};
      try {
        m.label = to_prediction(scorer.score(tournament_request(set, ca, cb, criterion)), opt.tie_band);
      } catch (const std::exception& ex) {
        m.error = ex.what();
      }
      matches[k] = std::move(m);
    }
  });

  // outcome[i][j] = points i took from its match against j.
  std::vector<std::vector<double>> outcome(n, std::vector<double>(n, 0.0));
  std::vector<double> wins(n, 0.0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [ia, ib] = pairs[k];
    const double pa = matches[k].label == PreferenceLabel::kAWins ? 1.0
                      : matches[k].label == PreferenceLabel::kBWins ? 0.0
                                                                     : 0.5;
    outcome[ia][ib] = pa;
    outcome[ib][ia] = 1.0 - pa;
    wins[ia] += pa;
    wins[ib] += 1.0 - pa;
  }

  TournamentResult res;
  for (std::size_t i = 0; i < n; ++i) res.standings.push_back({set.candidates[i].id, wins[i]});
  const double best = *std::max_element(wins.begin(), wins.end());
  std::vector<std::size_t> leaders;
  for (std::size_t i = 0; i < n; ++i) {
    if (wins[i] == best) leaders.push_back(i);
  }
  if (leaders.size() > 1 && opt.tie_break == TieBreak::kHeadToHeadThenIndex) {
    std::vector<double> h2h(leaders.size(), 0.0);
    for (std::size_t x = 0; x < leaders.size(); ++x) {
      for (std::size_t y = 0; y < leaders.size(); ++y) {
        if (x != y) h2h[x] += outcome[leaders[x]][leaders[y]];
      }
    }
    const double top = *std::max_element(h2h.begin(), h2h.end());
    std::vector<std::size_t> kept;
    for (std::size_t x = 0; x < leaders.size(); ++x) {
      if (h2h[x] == top) kept.push_back(leaders[x]);
    }
    leaders = std::move(kept);
  }
  res.winner = set.candidates[leaders.front()].id;  // leaders are in input order
  res.matches = std::move(matches);
  return res;
}

struct CriterionSelection {
  Criterion criterion;
  std::string winner;
  std::vector<Standing> standings;
};

struct SelectionReport {
  std::vector<CriterionSelection> per_criterion;  // resolved-criteria order
  std::vector<MatchRecord> match_log;             // criterion order, then canonical pair order

  const CriterionSelection* find(std::string_view criterion_id) const {
    for (const auto& c : per_criterion) {
      if (c.criterion.id == criterion_id) return &c;
    }
    return nullptr;
  }

  nlohmann::json to_json() const {
    nlohmann::json per = nlohmann::json::object();
    nlohmann::json order = nlohmann::json::array();
    for (const auto& c : per_criterion) {
      nlohmann::json st = nlohmann::json::array();
      for (const auto& s : c.standings) st.push_back({{"candidate", s.candidate_id}, {"wins", s.wins}});
      per[c.criterion.id] = {{"criterion", dyco::to_json(c.criterion)}, {"winner", c.winner}, {"standings", st}};
      order.push_back(c.criterion.id);
    }
    nlohmann::json log = nlohmann::json::array();
    for (const auto& m : match_log) {
      nlohmann::json e{{"criterion", m.criterion_id}, {"a", m.a}, {"b", m.b}, {"label", std::string(label_code(m.label))}};
      if (m.error) e["error"] = *m.error;
      log.push_back(e);
    }
    return nlohmann::json{{"criteria", order}, {"per_criterion", per}, {"match_log", log}};
  }
};

inline SelectionReport pick(const CandidateSet& set, const std::vector<Criterion>& criteria, const Scorer& scorer,
                            const TournamentOptions& opt = {}) {
  set.validate();
  if (criteria.empty()) throw DomainError("pick: no criteria");
  std::set<std::string> seen;
  for (const auto& c : criteria) {
    if (!seen.insert(c.id).second) throw DomainError("pick: duplicate criterion id '" + c.id + "'");
  }
  SelectionReport rep;
  for (const auto& c : criteria) {
    auto t = run_tournament(set, c, scorer, opt);
    rep.per_criterion.push_back({c, t.winner, std::move(t.standings)});
    rep.match_log.insert(rep.match_log.end(), t.matches.begin(), t.matches.end());
  }
  const std::size_t n = set.candidates.size();
  if (rep.match_log.size() != criteria.size() * n * (n - 1) / 2) {
    throw std::logic_error("pick: match count does not equal criteria x C(n,2)");
  }
  return rep;
}

inline nlohmann::json to_json(const CandidateSet& set) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : set.candidates) cands.push_back(to_json(c));
  return nlohmann::json{{"prompt", to_json(set.prompt)}, {"candidates", cands}};
}

/// Candidate file: {"prompt": {...}, "candidates": [ImageRef...], "criteria": [optional]}.
struct CandidateFile {
  CandidateSet set;
  std::optional<std::vector<Criterion>> criteria;
};

inline CandidateFile candidate_file_from_json(const nlohmann::json& j, ParseMode mode = ParseMode::kStrict) {
  detail::check_keys(j, {"prompt", "candidates"}, {"criteria"}, "", mode);
  CandidateFile f;
  f.set.prompt = prompt_from_json(j["prompt"], "prompt", mode);
  if (!j["candidates"].is_array()) throw SchemaError("candidates", "expected an array");
  for (std::size_t i = 0; i < j["candidates"].size(); ++i) {
    f.set.candidates.push_back(image_from_json(j["candidates"][i], "candidates[" + std::to_string(i) + "]", mode));
  }
  if (j.contains("criteria") && !j["criteria"].is_null()) {
    std::vector<Criterion> cs;
    for (std::size_t i = 0; i < j["criteria"].size(); ++i) {
      cs.push_back(criterion_from_json(j["criteria"][i], "criteria[" + std::to_string(i) + "]", mode));
    }
    f.criteria = std::move(cs);
  }
  f.set.validate();
  return f;
}

}  // namespace dyco
