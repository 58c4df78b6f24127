#include <gtest/gtest.h>

#include <cmath>

#include "dyco/metrics.hpp"
#include "dyco/rng.hpp"
#include "reference.hpp"
#include "support.hpp"

namespace dyco {
namespace {

using L = PreferenceLabel;

ConfusionMatrix3 matrix(std::array<std::array<std::uint64_t, 3>, 3> c) {
  ConfusionMatrix3 cm;
  cm.counts = c;
  return cm;
}

const ConfusionMatrix3 kSixty = matrix({{{30, 10, 10}, {10, 30, 10}, {10, 10, 30}}});

TEST(Accumulate, IncrementsOneCell) {
  auto cm = accumulate(L::kAWins, L::kAWins, {});
  EXPECT_EQ(cm.counts[0][0], 1u);
  cm = accumulate(L::kTie, L::kBWins, cm);
  EXPECT_EQ(cm.counts[2][1], 1u);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) cm = accumulate(test::label_at(rng.below(3)), test::label_at(rng.below(3)), cm);
  EXPECT_EQ(cm.total(), 1002u);
}

TEST(PerLabelAccuracy, Examples) {
  const auto diag = per_label_accuracy(matrix({{{4, 0, 0}, {0, 2, 0}, {0, 0, 9}}}));
  for (const auto& a : diag.per_label) EXPECT_EQ(a, 1.0);
  EXPECT_EQ(diag.average, 1.0);

  const auto sixty = per_label_accuracy(kSixty);
  for (const auto& a : sixty.per_label) EXPECT_DOUBLE_EQ(*a, 0.6);
  EXPECT_DOUBLE_EQ(sixty.average, 0.6);
  EXPECT_DOUBLE_EQ(sixty.macro, 0.6);

  const auto half = per_label_accuracy(matrix({{{5, 3, 2}, {0, 0, 0}, {0, 0, 0}}}));
  EXPECT_EQ(half.per_label[0], 0.5);
  EXPECT_FALSE(half.per_label[1].has_value());
  EXPECT_FALSE(half.per_label[2].has_value());
  EXPECT_EQ(half.average, 0.5);
}

TEST(PerLabelAccuracy, AverageIsInstanceWeighted) {
  const auto a = per_label_accuracy(matrix({{{90, 10, 0}, {0, 0, 0}, {5, 0, 5}}}));
  EXPECT_DOUBLE_EQ(a.average, 95.0 / 110.0);
  EXPECT_DOUBLE_EQ(a.macro, (0.9 + 0.5) / 2.0);
}

TEST(Kappa, ExactRationalForSixtyPercent) {
  const auto r = kappa_ratio(kSixty);
  // N = 150, sum n_ii = 90, sum R_i C_i = 3 * 50 * 50.
  EXPECT_EQ(r.numerator, 150.0L * 90 - 7500);
  EXPECT_EQ(r.denominator, 150.0L * 150 - 7500);
  EXPECT_EQ(r.numerator * 5, r.denominator * 2);
  EXPECT_DOUBLE_EQ(cohens_kappa(kSixty), 0.4);
}

TEST(Kappa, Examples) {
  EXPECT_EQ(cohens_kappa(matrix({{{3, 0, 0}, {0, 4, 0}, {0, 0, 5}}})), 1.0);
  EXPECT_NEAR(cohens_kappa(matrix({{{2, 2, 2}, {3, 3, 3}, {7, 7, 7}}})), 0.0, 1e-12);
  EXPECT_THROW(cohens_kappa(matrix({{{5, 0, 0}, {0, 0, 0}, {0, 0, 0}}})), DomainError);
  EXPECT_THROW(cohens_kappa(ConfusionMatrix3{}), DomainError);
}

TEST(Kappa, MatchesTextbookOnRandomMatrices) {
  Rng rng(2, "kappa");
  int checked = 0;
  while (checked < 1000) {
    std::array<std::array<std::uint64_t, 3>, 3> c{};
    const auto scale = 1 + rng.below(rng.below(2) ? 10 : 5000);
    for (auto& row : c) {
      for (auto& x : row) x = rng.below(scale + 1);
    }
    const auto cm = matrix(c);
    if (cm.total() == 0 || kappa_ratio(cm).denominator == 0) continue;
    const double k = cohens_kappa(cm);
    EXPECT_NEAR(k, reference::kappa(c), 1e-10);
    EXPECT_GE(k, -1.0);
    EXPECT_LE(k, 1.0);
    auto scaled = cm;
    const auto f = 1 + rng.below(50);
    for (auto& row : scaled.counts) {
      for (auto& x : row) x *= f;
    }
    EXPECT_NEAR(cohens_kappa(scaled), k, 1e-12);
    ++checked;
  }
}

TEST(Kappa, LargeCountsUseWidePath) {
  auto big = kSixty;
  for (auto& row : big.counts) {
    for (auto& x : row) x *= 100'000'000;
  }
  EXPECT_NEAR(cohens_kappa(big), 0.4, 1e-15);
}

TEST(BtWinRate, Examples) {
  EXPECT_EQ(bt_win_rate(0, 0), 0.5);
  EXPECT_NEAR(bt_win_rate(std::log(3.0), 0.0), 0.75, 1e-12);
  Rng rng(3, "bt.shift");
  for (int i = 0; i < 200; ++i) {
    const double s = rng.uniform(-5, 5), d = rng.uniform(-5, 5), c = rng.uniform(-50, 50);
    EXPECT_NEAR(bt_win_rate(s, s + d), bt_win_rate(s + c, s + d + c), 1e-12);
    EXPECT_DOUBLE_EQ(bt_win_rate(s, d) + bt_win_rate(d, s), 1.0);
  }
  EXPECT_THROW(bt_win_rate(INFINITY, 0), DomainError);
}

TEST(BtFitTwo, Examples) {
  auto f = bt_fit_two(75, 25, 0, TiePolicy::kDrop);
  EXPECT_DOUBLE_EQ(f.win_rate, 0.75);
  EXPECT_DOUBLE_EQ(f.gap, std::log(3.0));
  EXPECT_NEAR(f.gap, reference::bt_gap_numeric(75, 25), 1e-6);

  f = bt_fit_two(10, 10, 0, TiePolicy::kDrop);
  EXPECT_EQ(f.win_rate, 0.5);
  EXPECT_EQ(f.gap, 0.0);

  f = bt_fit_two(6, 2, 4, TiePolicy::kHalf);
  EXPECT_EQ(f.wins_eff, 8.0);
  EXPECT_EQ(f.losses_eff, 4.0);
  EXPECT_DOUBLE_EQ(f.win_rate, 2.0 / 3.0);
  EXPECT_NEAR(f.gap, reference::bt_gap_numeric(8, 4), 1e-6);

  f = bt_fit_two(6, 2, 4, TiePolicy::kDrop);
  EXPECT_DOUBLE_EQ(f.win_rate, 0.75);
}

TEST(BtFitTwo, MatchesNumericLikelihoodMaximization) {
  Rng rng(4, "bt.fit");
  for (int i = 0; i < 200; ++i) {
    const auto w = rng.below(60), l = rng.below(60), t = rng.below(20);
    for (auto policy : {TiePolicy::kHalf, TiePolicy::kDrop}) {
      const double half = policy == TiePolicy::kHalf ? 0.5 * static_cast<double>(t) : 0.0;
      const double we = static_cast<double>(w) + half, le = static_cast<double>(l) + half;
      if (we == 0.0 || le == 0.0) continue;
      const auto f = bt_fit_two(w, l, t, policy);
      const double gap = reference::bt_gap_numeric(we, le);
      EXPECT_NEAR(f.gap, gap, 1e-6);
      EXPECT_NEAR(f.win_rate, 1.0 / (1.0 + std::exp(-gap)), 1e-6);
      EXPECT_FALSE(f.clamped);
    }
  }
}

TEST(BtFitTwo, ShutoutsAreClamped) {
  auto f = bt_fit_two(7, 0, 0, TiePolicy::kDrop);
  EXPECT_TRUE(f.clamped);
  EXPECT_DOUBLE_EQ(f.gap, std::log(8.0));
  f = bt_fit_two(0, 3, 0, TiePolicy::kHalf);
  EXPECT_TRUE(f.clamped);
  EXPECT_DOUBLE_EQ(f.gap, -std::log(4.0));
  EXPECT_THROW(bt_fit_two(0, 0, 5, TiePolicy::kDrop), DomainError);
  EXPECT_THROW(bt_fit_two(0, 0, 0, TiePolicy::kHalf), DomainError);
}

using Ranking = std::vector<std::pair<std::string, int>>;

TEST(RankingsToPairwise, Examples) {
  auto out = rankings_to_pairwise({{"A", 1}, {"B", 2}, {"C", 3}, {"D", 4}});
  EXPECT_EQ(out.decisive.size(), 6u);
  EXPECT_TRUE(out.ties.empty());
  int a_wins = 0;
  for (const auto& [w, l] : out.decisive) a_wins += w == "A";
  EXPECT_EQ(a_wins, 3);

  out = rankings_to_pairwise({{"A", 1}, {"B", 1}, {"C", 3}, {"D", 3}});
  EXPECT_EQ(out.decisive.size(), 4u);
  ASSERT_EQ(out.ties.size(), 2u);
  EXPECT_EQ(out.ties[0], std::make_pair(std::string("A"), std::string("B")));
  EXPECT_EQ(out.ties[1], std::make_pair(std::string("C"), std::string("D")));

  EXPECT_THROW(rankings_to_pairwise({{"A", 1}, {"B", 2}, {"C", 3}, {"D", 4}}, {{"B", "C"}}), ProtocolError);
  EXPECT_NO_THROW(rankings_to_pairwise({{"A", 1}, {"B", 2}, {"C", 2}, {"D", 4}}, {{"B", "C"}}));
  try {
    rankings_to_pairwise({{"A", 1}, {"B", 5}, {"C", 3}, {"D", 4}});
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field(), "rank");
  }
  EXPECT_THROW(rankings_to_pairwise({{"A", 0}, {"B", 2}, {"C", 3}, {"D", 4}}), DomainError);
  EXPECT_THROW(rankings_to_pairwise({{"A", 1}, {"B", 2}, {"C", 3}}), DomainError);
  EXPECT_THROW(rankings_to_pairwise({{"A", 1}, {"A", 2}, {"C", 3}, {"D", 4}}), DomainError);
}

TEST(RankingsToPairwise, EveryValidRankingGivesSixOutcomes) {
  for (int code = 0; code < 256; ++code) {
    Ranking r;
    for (int k = 0; k < 4; ++k) r.emplace_back(std::string(1, static_cast<char>('A' + k)), 1 + ((code >> (2 * k)) & 3));
    const auto out = rankings_to_pairwise(r);
    EXPECT_EQ(out.decisive.size() + out.ties.size(), 6u);
    for (const auto& [w, l] : out.decisive) {
      auto rank = [&](const std::string& c) {
        for (const auto& [x, v] : r) {
          if (x == c) return v;
        }
        return 0;
      };
      EXPECT_LT(rank(w), rank(l));
    }
  }
}

TEST(EvalReport, JsonAndTable) {
  const auto r = EvalReport::from_confusion(Setting::kSingle, kSixty, 152, 2);
  const auto j = r.to_json();
  EXPECT_EQ(j["setting"], "single");
  EXPECT_EQ(j["n_instances"], 152);
  EXPECT_EQ(j["n_errors"], 2);
  EXPECT_DOUBLE_EQ(j["kappa"].get<double>(), 0.4);
  EXPECT_DOUBLE_EQ(j["per_label_accuracy"]["T"].get<double>(), 0.6);
  EXPECT_EQ(j["confusion"][0][1], 10);
  const auto table = reports_table({r});
  EXPECT_NE(table.find("single    150      0.600   0.600   0.600   0.600   0.400"), std::string::npos) << table;

  const auto undefined = EvalReport::from_confusion(Setting::kOverall, matrix({{{4, 0, 0}, {0, 0, 0}, {0, 0, 0}}}), 4, 0);
  EXPECT_FALSE(undefined.kappa.has_value());
  EXPECT_TRUE(undefined.to_json()["kappa"].is_null());
}

}  // namespace
}  // namespace dyco
