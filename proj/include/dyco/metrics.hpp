#pragma once

// Agreement metrics over 3x3 confusion matrices and Bradley-Terry processing of human
// pairwise preferences.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dyco/core.hpp"
#include "dyco/errors.hpp"
#include "dyco/numeric.hpp"

namespace dyco {

/// Rows are gold labels, columns are predictions, both in (A wins, B wins, tie) order.
struct ConfusionMatrix3 {
  std::array<std::array<std::uint64_t, 3>, 3> counts{};

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (const auto& row : counts) {
      for (auto c : row) n += c;
    }
    return n;
  }

  std::uint64_t row_sum(int i) const {
    const auto& r = counts[static_cast<std::size_t>(i)];
    return r[0] + r[1] + r[2];
  }
  std::uint64_t col_sum(int j) const {
    const auto k = static_cast<std::size_t>(j);
    return counts[0][k] + counts[1][k] + counts[2][k];
  }
  std::uint64_t diagonal() const { return counts[0][0] + counts[1][1] + counts[2][2]; }

  ConfusionMatrix3& operator+=(const ConfusionMatrix3& o) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) counts[i][j] += o.counts[i][j];
    }
    return *this;
  }

  friend bool operator==(const ConfusionMatrix3&, const ConfusionMatrix3&) = default;
};

inline ConfusionMatrix3 accumulate(PreferenceLabel gold, PreferenceLabel pred, ConfusionMatrix3 cm) {
  ++cm.counts[static_cast<std::size_t>(index_of(gold))][static_cast<std::size_t>(index_of(pred))];
  return cm;
}

struct LabelAccuracy {
  std::array<std::optional<double>, 3> per_label;  // undefined for empty gold rows
  double average = 0.0;                            // instance-weighted: diagonal / N
  double macro = 0.0;                              // mean over defined per-label values
};

inline LabelAccuracy per_label_accuracy(const ConfusionMatrix3& cm) {
  LabelAccuracy acc;
  double macro_sum = 0.0;
  int defined = 0;
  for (int i = 0; i < 3; ++i) {
    const auto rs = cm.row_sum(i);
    if (rs == 0) continue;
    const double a = static_cast<double>(cm.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)]) /
                     static_cast<double>(rs);
    acc.per_label[static_cast<std::size_t>(i)] = a;
    macro_sum += a;
    ++defined;
  }
  const auto n = cm.total();
  acc.average = n ? static_cast<double>(cm.diagonal()) / static_cast<double>(n) : 0.0;
  acc.macro = defined ? macro_sum / defined : 0.0;
  return acc;
}

/// Cohen's kappa as the exact ratio (N * sum n_ii - sum R_i C_i) / (N^2 - sum R_i C_i),
/// which equals (P_o - P_e) / (1 - P_e) with P_o = sum n_ii / N and
/// P_e = sum R_i C_i / N^2. A single division keeps rational inputs exact.
struct KappaRatio {
  long double numerator = 0;
  long double denominator = 0;
};

inline KappaRatio kappa_ratio(const ConfusionMatrix3& cm) {
  const auto n = cm.total();
  if (n == 0) throw DomainError("kappa: empty confusion matrix");
  // Integer path while N^2 fits in 64 bits.
  if (n <= 3'000'000'000ULL) {
    const auto nn = static_cast<std::int64_t>(n);
    std::int64_t expected = 0;
    for (int i = 0; i < 3; ++i) {
      expected += static_cast<std::int64_t>(cm.row_sum(i)) * static_cast<std::int64_t>(cm.col_sum(i));
    }
    const std::int64_t num = nn * static_cast<std::int64_t>(cm.diagonal()) - expected;
    const std::int64_t den = nn * nn - expected;
    return {static_cast<long double>(num), static_cast<long double>(den)};
  }
  const long double nn = static_cast<long double>(n);
  long double expected = 0;
  for (int i = 0; i < 3; ++i) {
    expected += static_cast<long double>(cm.row_sum(i)) * static_cast<long double>(cm.col_sum(i));
  }
  return {nn * static_cast<long double>(cm.diagonal()) - expected, nn * nn - expected};
}

inline double cohens_kappa(const ConfusionMatrix3& cm) {
  const auto r = kappa_ratio(cm);
  if (r.denominator == 0) throw DomainError("kappa undefined: expected agreement P_e = 1");
  return static_cast<double>(r.numerator / r.denominator);
}

/// P(ours beats base) = exp(s_ours) / (exp(s_ours) + exp(s_base)) = sigmoid(s_ours - s_base).
inline double bt_win_rate(double s_ours, double s_base) {
  if (!std::isfinite(s_ours) || !std::isfinite(s_base)) throw DomainError("bt_win_rate: non-finite score");
  return sigmoid(s_ours - s_base);
}

enum class TiePolicy { kHalf, kDrop };

struct BtFit {
  double gap = 0.0;       // s_ours - s_base
  double win_rate = 0.5;  // sigmoid(gap)
  double wins_eff = 0.0;
  double losses_eff = 0.0;
  bool clamped = false;   // a shutout; gap clamped to +-log(n_eff + 1)
};

/// Two-player Bradley-Terry maximum likelihood. The MLE is gap = log(w/l) and
/// win_rate = w / (w + l). With HALF each tie adds 0.5 to both sides; with DROP ties are
/// ignored. Shutouts have no finite MLE and are clamped to gap = +-log(n_eff + 1).
inline BtFit bt_fit_two(std::uint64_t wins_ours, std::uint64_t wins_base, std::uint64_t ties,
                        TiePolicy policy = TiePolicy::kHalf) {
  BtFit f;
  const double half_ties = policy == TiePolicy::kHalf ? 0.5 * static_cast<double>(ties) : 0.0;
  f.wins_eff = static_cast<double>(wins_ours) + half_ties;
  f.losses_eff = static_cast<double>(wins_base) + half_ties;
  const double n = f.wins_eff + f.losses_eff;
  if (n <= 0.0) throw DomainError("bt_fit_two: no effective comparisons");
  if (f.losses_eff == 0.0 || f.wins_eff == 0.0) {
    f.clamped = true;
    const double c = std::log(n + 1.0);
    f.gap = f.losses_eff == 0.0 ? c : -c;
    f.win_rate = sigmoid(f.gap);
    return f;
  }
  f.gap = std::log(f.wins_eff / f.losses_eff);
  f.win_rate = f.wins_eff / n;
  return f;
}

struct PairOutcomes {
  std::vector<std::pair<std::string, std::string>> decisive;  // (winner, loser)
  std::vector<std::pair<std::string, std::string>> ties;
};

inline constexpr int kStudyCandidates = 4;

/// Expands a four-way ranking (1 = best, ties allowed) into all six pairwise outcomes,
/// visiting pairs in input order. Candidates that show the same image must share a rank.
inline PairOutcomes rankings_to_pairwise(const std::vector<std::pair<std::string, int>>& ranking,
                                         const std::vector<std::pair<std::string, std::string>>& duplicates = {}) {
  if (ranking.size() != kStudyCandidates) throw DomainError("ranking must cover exactly 4 candidates");
  std::map<std::string, int> rank_of;
  for (const auto& [cand, rank] : ranking) {
    if (rank < 1 || rank > kStudyCandidates) {
      throw SchemaError("rank", "rank of " + cand + " must be in [1,4], got " + std::to_string(rank));
    }
    if (!rank_of.emplace(cand, rank).second) throw DomainError("candidate " + cand + " ranked twice");
  }
  for (const auto& [x, y] : duplicates) {
    auto ix = rank_of.find(x), iy = rank_of.find(y);
    if (ix == rank_of.end() || iy == rank_of.end()) throw DomainError("duplicate pair names an unknown candidate");
    if (ix->second != iy->second) {
      throw ProtocolError("candidates " + x + " and " + y + " show the same image but were ranked " +
                          std::to_string(ix->second) + " and " + std::to_string(iy->second));
    }
  }
  PairOutcomes out;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    for (std::size_t j = i + 1; j < ranking.size(); ++j) {
      const auto& [ci, ri] = ranking[i];
      const auto& [cj, rj] = ranking[j];
      if (ri < rj) out.decisive.emplace_back(ci, cj);
      else if (rj < ri) out.decisive.emplace_back(cj, ci);
      else out.ties.emplace_back(ci, cj);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------

struct EvalReport {
  Setting setting = Setting::kOverall;
  std::size_t n_instances = 0;  // instances in the setting
  std::size_t n_errors = 0;     // scorer failures, excluded from the matrix
  ConfusionMatrix3 confusion;
  LabelAccuracy accuracy;
  std::optional<double> kappa;  // nullopt when undefined

  static EvalReport from_confusion(Setting setting, const ConfusionMatrix3& cm, std::size_t n_instances,
                                   std::size_t n_errors) {
    EvalReport r;
    r.setting = setting;
    r.n_instances = n_instances;
    r.n_errors = n_errors;
    r.confusion = cm;
    r.accuracy = per_label_accuracy(cm);
    if (cm.total() > 0) {
      const auto k = kappa_ratio(cm);
      if (k.denominator != 0) r.kappa = static_cast<double>(k.numerator / k.denominator);
    }
    return r;
  }

  nlohmann::json to_json() const {
    nlohmann::json per = nlohmann::json::object();
    for (auto l : kAllLabels) {
      const auto& a = accuracy.per_label[static_cast<std::size_t>(index_of(l))];
      if (a) per[std::string(label_code(l))] = *a;
    }
    nlohmann::json cm = nlohmann::json::array();
    for (const auto& row : confusion.counts) cm.push_back(row);
    return nlohmann::json{{"setting", std::string(to_string(setting))},
                          {"n_instances", n_instances},
                          {"n_errors", n_errors},
                          {"per_label_accuracy", per},
                          {"avg_accuracy", accuracy.average},
                          {"macro_accuracy", accuracy.macro},
                          {"kappa", kappa ? nlohmann::json(*kappa) : nlohmann::json(nullptr)},
                          {"confusion", cm}};
  }
};

/// Renders reports as one block per setting with the columns A>B, A<B, A=B, Avg., kappa.
inline std::string reports_table(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("   -  ");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(3);
    s << *v;
    std::string out = s.str();
    while (out.size() < 6) out = " " + out;
    return out;
  };
  os << "setting   n       A>B     A<B     A=B     Avg.    kappa\n";
  for (const auto& r : reports) {
    std::string name(to_string(r.setting));
    name.resize(10, ' ');
    std::string n = std::to_string(r.n_instances - r.n_errors);
    n.resize(8, ' ');
    os << name << n;
    for (std::size_t i = 0; i < 3; ++i) os << cell(r.accuracy.per_label[i]) << "  ";
    const auto avg = r.confusion.total() ? std::optional<double>(r.accuracy.average) : std::nullopt;
    os << cell(avg) << "  " << cell(r.kappa) << '\n';
  }
  return os.str();
}

}  // namespace dyco
