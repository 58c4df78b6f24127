#pragma once

// Benchmark construction: evaluation-instance derivation, reversal detection, stratified
// subset selection and corpus statistics.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyco/core.hpp"
#include "dyco/errors.hpp"
#include "dyco/rng.hpp"

namespace dyco {

/// True when one criterion favours A and another favours B.
inline bool detect_reversal(const Sample& s) {
  if (s.criterion_labels.size() < 2) return false;
  bool a = false, b = false;
  for (const auto& [cid, l] : s.criterion_labels) {
    a = a || l == PreferenceLabel::kAWins;
    b = b || l == PreferenceLabel::kBWins;
  }
  return a && b;
}

/// Ids of the sample's criteria that carry a retained label, in criteria order.
inline std::vector<std::string> labeled_criteria(const Sample& s) {
  std::vector<std::string> ids;
  for (const auto& c : s.criteria) {
    if (s.criterion_labels.contains(c.id)) ids.push_back(c.id);
  }
  return ids;
}

/// Multi-criteria instances over subsets of the labeled criteria with sizes
/// 2..min(max_subset, M). Subsets are enumerated by size, then lexicographically by
/// criteria position; gold is majority_label over the subset. When max_instances > 0
/// and the enumeration is larger, a seeded subset (substream "multi" mixed with the
/// sample id) of that many instances is kept, still in enumeration order.
inline std::vector<EvalInstance> derive_multi_instances(const Sample& s, int max_subset, std::uint64_t seed,
                                                        std::size_t max_instances = 0) {
  const auto ids = labeled_criteria(s);
  const int m = static_cast<int>(ids.size());
  std::vector<EvalInstance> out;
  if (m < 2) return out;
  const int top = std::min(max_subset, m);
  for (int k = 2; k <= top; ++k) {
    std::vector<int> pick(static_cast<std::size_t>(k));
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
      Condition c{Setting::kMulti, {}};
      std::vector<PreferenceLabel> labels;
      for (int i : pick) {
        c.criterion_ids.push_back(ids[static_cast<std::size_t>(i)]);
        labels.push_back(s.criterion_labels.at(ids[static_cast<std::size_t>(i)]));
      }
      out.push_back(EvalInstance{s.id, std::move(c), majority_label(labels)});
      int i = k - 1;
      while (i >= 0 && pick[static_cast<std::size_t>(i)] == m - k + i) --i;
      if (i < 0) break;
      ++pick[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  if (max_instances > 0 && out.size() > max_instances) {
    Rng rng(substream_seed(seed, "multi") ^ fnv1a64(s.id));
    std::vector<std::size_t> idx(out.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    idx.resize(max_instances);
    std::sort(idx.begin(), idx.end());
    std::vector<EvalInstance> kept;
    for (auto i : idx) kept.push_back(out[i]);
    out = std::move(kept);
  }
  return out;
}

struct InstanceOptions {
  int max_subset = 5;
  std::size_t max_multi_per_sample = 0;  // 0 = all subsets
  std::uint64_t seed = 0;
};

/// Evaluation instances of one setting for a list of samples, in sample order.
inline std::vector<EvalInstance> build_instances(const std::vector<Sample>& samples, Setting setting,
                                                 const InstanceOptions& opt = {}) {
  std::vector<EvalInstance> out;
  for (const auto& s : samples) {
    switch (setting) {
      case Setting::kOverall: out.push_back({s.id, Condition::overall(), s.overall_label}); break;
      case Setting::kSingle:
        for (const auto& id : labeled_criteria(s)) out.push_back({s.id, Condition::single(id), s.criterion_labels.at(id)});
        break;
      case Setting::kMulti: {
        auto multi = derive_multi_instances(s, opt.max_subset, opt.seed, opt.max_multi_per_sample);
        out.insert(out.end(), std::make_move_iterator(multi.begin()), std::make_move_iterator(multi.end()));
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------

struct CurationConfig {
  std::size_t target_pairs = 1000;
  std::array<double, 3> difficulty_mix = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double reversal_share = 0.354;
  double ambiguous_share = 0.047;
  double retention_threshold = 0.8;
  std::uint64_t seed = 0;
  double tolerance = 0.05;

  void validate() const {
    double sum = 0.0;
    for (double x : difficulty_mix) {
      if (!(x >= 0.0)) throw DomainError("difficulty_mix entries must be >= 0");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DomainError("difficulty_mix must sum to 1");
    if (!(reversal_share >= 0.0 && reversal_share <= 1.0)) throw DomainError("reversal_share must be in [0,1]");
    if (!(ambiguous_share >= 0.0 && ambiguous_share <= 1.0)) throw DomainError("ambiguous_share must be in [0,1]");
    if (!(retention_threshold > 0.0 && retention_threshold < 1.0)) throw DomainError("retention_threshold must be in (0,1)");
    if (target_pairs == 0) throw DomainError("target_pairs must be > 0");
  }
};

/// Every retained label (each criterion label and the overall label) has agreement
/// above the threshold. Samples without agreement metadata are not eligible.
inline bool meets_retention(const Sample& s, double threshold) {
  auto above = [&](const std::string& key) {
    auto it = s.agreement.find(key);
    return it != s.agreement.end() && it->second > threshold;
  };
  if (!above(std::string(kOverallId))) return false;
  for (const auto& [cid, l] : s.criterion_labels) {
    if (!above(cid)) return false;
  }
  return true;
}

/// A close case: the overall winning-vote fraction lies in (threshold, threshold + 0.1].
inline bool is_ambiguous(const Sample& s, double threshold) {
  auto it = s.agreement.find(std::string(kOverallId));
  if (it == s.agreement.end()) return false;
  return it->second > threshold && it->second <= threshold + 0.1 + 1e-12;
}

namespace detail {

// Largest-remainder split of n into parts proportional to weights.
inline std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& w) {
  std::array<std::size_t, 3> q{};
  std::array<double, 3> rem{};
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = w[static_cast<std::size_t>(i)] * static_cast<double>(n);
    q[static_cast<std::size_t>(i)] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[static_cast<std::size_t>(i)] = exact - static_cast<double>(q[static_cast<std::size_t>(i)]);
    used += q[static_cast<std::size_t>(i)];
  }
  while (used < n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
      if (rem[i] > rem[best] + 1e-12) best = i;
    }
    ++q[best];
    rem[best] = -1.0;
    ++used;
  }
  return q;
}

}  // namespace detail

/// Greedy stratified selection.
///
/// 1. Keep samples whose every retained label clears retention_threshold; order them by
///    id, then apply a seeded shuffle (substream "curation").
/// 2. n = min(target_pairs, eligible), shrunk until each difficulty stratum can fill its
///    largest-remainder quota of n.
/// 3. Fill slots one at a time: the stratum with the most unfilled quota (ties: easy,
///    medium, hard) takes its first candidate in shuffled order whose reversal/ambiguous
///    flags best match what the running totals still need.
/// 4. Verify the difficulty histogram and both shares within cfg.tolerance; a violation
///    throws CurationError naming the constraint.
/// Output keeps the input order.
inline std::vector<Sample> curate(const std::vector<Sample>& samples, const CurationConfig& cfg) {
  cfg.validate();
  std::vector<const Sample*> pool;
  for (const auto& s : samples) {
    if (meets_retention(s, cfg.retention_threshold)) pool.push_back(&s);
  }
  if (pool.empty()) throw CurationError("retention_threshold", "no sample clears the agreement threshold");
  std::sort(pool.begin(), pool.end(), [](const Sample* a, const Sample* b) { return a->id < b->id; });
  Rng rng(cfg.seed, "curation");
  rng.shuffle(pool);

  std::array<std::vector<const Sample*>, 3> strata;
  for (const auto* s : pool) strata[static_cast<std::size_t>(s->difficulty)].push_back(s);

  std::size_t n = std::min(cfg.target_pairs, pool.size());
  auto quota = detail::apportion(n, cfg.difficulty_mix);
  while (n > 0) {
    bool ok = true;
    for (std::size_t d = 0; d < 3; ++d) ok = ok && quota[d] <= strata[d].size();
    if (ok) break;
    --n;
    quota = detail::apportion(n, cfg.difficulty_mix);
  }
  if (n == 0) throw CurationError("difficulty_mix", "pool cannot fill any difficulty quota");

  const auto want_rev = static_cast<long>(std::llround(cfg.reversal_share * static_cast<double>(n)));
  const auto want_amb = static_cast<long>(std::llround(cfg.ambiguous_share * static_cast<double>(n)));
  long have_rev = 0, have_amb = 0;
  std::array<std::size_t, 3> filled{};
  std::array<std::vector<bool>, 3> used;
  for (std::size_t d = 0; d < 3; ++d) used[d].assign(strata[d].size(), false);
  std::set<std::string> chosen;

  for (std::size_t slot = 0; slot < n; ++slot) {
    std::size_t d = 3;
    for (std::size_t k = 0; k < 3; ++k) {
      if (filled[k] >= quota[k]) continue;
      if (d == 3 || quota[k] - filled[k] > quota[d] - filled[d]) d = k;
    }
    const bool need_rev = have_rev < want_rev;
    const bool need_amb = have_amb < want_amb;
    std::size_t best = strata[d].size();
    int best_score = -1;
    for (std::size_t i = 0; i < strata[d].size(); ++i) {
      if (used[d][i]) continue;
      const bool rev = detect_reversal(*strata[d][i]);
      const bool amb = is_ambiguous(*strata[d][i], cfg.retention_threshold);
      const int score = 2 * (rev == need_rev) + (amb == need_amb);
      if (score > best_score) {
        best_score = score;
        best = i;
        if (score == 3) break;
      }
    }
    used[d][best] = true;
    ++filled[d];
    const auto* s = strata[d][best];
    have_rev += detect_reversal(*s);
    have_amb += is_ambiguous(*s, cfg.retention_threshold);
    chosen.insert(s->id);
  }

  const double nn = static_cast<double>(n);
  for (std::size_t d = 0; d < 3; ++d) {
    if (std::abs(static_cast<double>(filled[d]) / nn - cfg.difficulty_mix[d]) > cfg.tolerance + 1e-12) {
      throw CurationError("difficulty_mix", "stratum " + std::string(to_string(static_cast<Difficulty>(d))) +
                                                " off target by more than the tolerance");
    }
  }
  const double rev_share = static_cast<double>(have_rev) / nn;
  if (std::abs(rev_share - cfg.reversal_share) > cfg.tolerance + 1e-12) {
    throw CurationError("reversal_share", "achieved " + std::to_string(rev_share) + ", target " +
                                              std::to_string(cfg.reversal_share));
  }
  const double amb_share = static_cast<double>(have_amb) / nn;
  if (std::abs(amb_share - cfg.ambiguous_share) > cfg.tolerance + 1e-12) {
    throw CurationError("ambiguous_share", "achieved " + std::to_string(amb_share) + ", target " +
                                               std::to_string(cfg.ambiguous_share));
  }

  std::vector<Sample> out;
  for (const auto& s : samples) {
    if (chosen.contains(s.id)) out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------------------

struct CorpusStats {
  std::size_t n_samples = 0;
  double avg_prompt_length = 0.0;  // whitespace-delimited tokens
  std::array<double, 3> difficulty_ratio{};
  std::size_t topic_count = 0;
  std::size_t source_model_count = 0;
  double avg_criteria_per_sample = 0.0;
  std::size_t max_criteria = 0;
  double multi_criterion_share = 0.0;
  double reversal_share = 0.0;
  std::size_t theme_count = 0;

  nlohmann::json to_json() const {
    return nlohmann::json{{"n_samples", n_samples},
                          {"avg_prompt_length", avg_prompt_length},
                          {"difficulty_ratio", difficulty_ratio},
                          {"topic_count", topic_count},
                          {"source_model_count", source_model_count},
                          {"avg_criteria_per_sample", avg_criteria_per_sample},
                          {"max_criteria", max_criteria},
                          {"multi_criterion_share", multi_criterion_share},
                          {"reversal_share", reversal_share},
                          {"theme_count", theme_count}};
  }
};

inline std::size_t whitespace_tokens(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!ws && !in_word) ++n;
    in_word = !ws;
  }
  return n;
}

inline CorpusStats corpus_stats(const std::vector<Sample>& samples) {
  if (samples.empty()) throw DomainError("corpus_stats: empty corpus");
  CorpusStats st;
  st.n_samples = samples.size();
  std::size_t tokens = 0, criteria = 0, multi = 0, reversals = 0;
  std::array<std::size_t, 3> diff{};
  std::set<std::string> topics, models;
  std::set<CriterionTheme> themes;
  for (const auto& s : samples) {
    tokens += whitespace_tokens(s.prompt.text);
    ++diff[static_cast<std::size_t>(s.difficulty)];
    topics.insert(s.prompt.topic);
    models.insert(s.image_a.source_model);
    models.insert(s.image_b.source_model);
    criteria += s.criteria.size();
    st.max_criteria = std::max(st.max_criteria, s.criteria.size());
    multi += s.criteria.size() >= 2;
    reversals += detect_reversal(s);
    for (const auto& c : s.criteria) {
      if (c.theme) themes.insert(*c.theme);
    }
  }
  const double n = static_cast<double>(samples.size());
  st.avg_prompt_length = static_cast<double>(tokens) / n;
  for (std::size_t d = 0; d < 3; ++d) st.difficulty_ratio[d] = static_cast<double>(diff[d]) / n;
  st.topic_count = topics.size();
  st.source_model_count = models.size();
  st.avg_criteria_per_sample = static_cast<double>(criteria) / n;
  st.multi_criterion_share = static_cast<double>(multi) / n;
  st.reversal_share = static_cast<double>(reversals) / n;
  st.theme_count = themes.size();
  return st;
}

inline std::string stats_table(const CorpusStats& st) {
  std::ostringstream os;
  auto row = [&](std::string_view k, const std::string& v) {
    os << k;
    for (std::size_t i = k.size(); i < 28; ++i) os << ' ';
    os << v << '\n';
  };
  auto fmt = [](double x, int prec = 3) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(prec);
    s << x;
    return s.str();
  };
  row("samples", std::to_string(st.n_samples));
  row("avg prompt length", fmt(st.avg_prompt_length, 2));
  row("easy / medium / hard", fmt(st.difficulty_ratio[0]) + " / " + fmt(st.difficulty_ratio[1]) + " / " +
                                  fmt(st.difficulty_ratio[2]));
  row("topic groups", std::to_string(st.topic_count));
  row("source models", std::to_string(st.source_model_count));
  row("avg criteria per sample", fmt(st.avg_criteria_per_sample, 2));
  row("max criteria per sample", std::to_string(st.max_criteria));
  row("multi-criterion share", fmt(st.multi_criterion_share));
  row("reversal share", fmt(st.reversal_share));
  row("criterion themes", std::to_string(st.theme_count));
  return os.str();
}

}  // namespace dyco
