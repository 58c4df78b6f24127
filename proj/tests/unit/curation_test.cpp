#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "dyco/curation.hpp"
#include "dyco/synth.hpp"
#include "support.hpp"

namespace dyco {
namespace {

using L = PreferenceLabel;

TEST(DetectReversal, Examples) {
  EXPECT_TRUE(detect_reversal(test::sample("s", {L::kAWins, L::kBWins, L::kTie})));
  EXPECT_FALSE(detect_reversal(test::sample("s", {L::kAWins, L::kAWins, L::kTie})));
  EXPECT_FALSE(detect_reversal(test::sample("s", {L::kTie, L::kTie})));
  EXPECT_FALSE(detect_reversal(test::sample("s", {L::kAWins})));
}

TEST(DetectReversal, SymmetricUnderGlobalSwap) {
  for (std::size_t k = 1; k <= 5; ++k) {
    for (const auto& v : test::all_label_vectors(k)) {
      std::vector<L> w;
      for (auto l : v) w.push_back(swapped(l));
      EXPECT_EQ(detect_reversal(test::sample("s", v)), detect_reversal(test::sample("s", w)));
    }
  }
}

TEST(DeriveMulti, Examples) {
  auto gold_of = [](std::vector<L> labels) {
    const auto inst = derive_multi_instances(test::sample("s", labels), static_cast<int>(labels.size()), 0);
    return inst.back().gold;  // the full set is enumerated last
  };
  EXPECT_EQ(gold_of({L::kAWins, L::kAWins}), L::kAWins);
  EXPECT_EQ(gold_of({L::kAWins, L::kBWins}), L::kTie);
  EXPECT_EQ(gold_of({L::kAWins, L::kBWins, L::kAWins}), L::kAWins);
}

std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

TEST(DeriveMulti, ExhaustiveAgainstVoteOracle) {
  for (std::size_t m = 2; m <= 5; ++m) {
    for (const auto& v : test::all_label_vectors(m)) {
      const auto s = test::sample("s", v);
      for (int max_subset = 2; max_subset <= 6; ++max_subset) {
        const auto inst = derive_multi_instances(s, max_subset, 0);
        std::uint64_t expected = 0;
        for (std::uint64_t k = 2; k <= std::min<std::uint64_t>(m, max_subset); ++k) expected += choose(m, k);
        ASSERT_EQ(inst.size(), expected);
        std::set<std::vector<std::string>> distinct;
        for (const auto& e : inst) {
          EXPECT_EQ(e.condition.setting, Setting::kMulti);
          std::vector<L> sub;
          for (const auto& id : e.condition.criterion_ids) sub.push_back(s.criterion_labels.at(id));
          EXPECT_EQ(e.gold, test::vote_oracle(sub));
          EXPECT_NO_THROW(validate_condition(s, e.condition));
          distinct.insert(e.condition.criterion_ids);
        }
        EXPECT_EQ(distinct.size(), inst.size());
      }
    }
  }
}

TEST(DeriveMulti, CapIsSeededSubsetInEnumerationOrder) {
  const auto s = test::sample("s", {L::kAWins, L::kBWins, L::kTie, L::kAWins, L::kBWins});
  const auto all = derive_multi_instances(s, 5, 3);
  ASSERT_EQ(all.size(), 26u);
  const auto a = derive_multi_instances(s, 5, 3, 7), b = derive_multi_instances(s, 5, 3, 7);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 7u);
  std::size_t pos = 0;
  for (const auto& e : a) {
    while (pos < all.size() && !(all[pos] == e)) ++pos;
    ASSERT_LT(pos, all.size()) << "not an ordered subset";
    ++pos;
  }
  EXPECT_TRUE(derive_multi_instances(test::sample("s", {L::kAWins}), 5, 0).empty());
}

TEST(BuildInstances, CountsReconcileWithInputs) {
  const auto pool = synth::random_pool({.n = 50, .d_img = 2, .seed = 9});
  std::size_t criteria = 0, multi = 0;
  for (const auto& s : pool) {
    criteria += s.criterion_labels.size();
    const auto m = s.criterion_labels.size();
    for (std::size_t k = 2; k <= m; ++k) multi += choose(m, k);
  }
  EXPECT_EQ(build_instances(pool, Setting::kOverall).size(), pool.size());
  EXPECT_EQ(build_instances(pool, Setting::kSingle).size(), criteria);
  EXPECT_EQ(build_instances(pool, Setting::kMulti).size(), multi);
}

TEST(CorpusStats, Examples) {
  const std::vector<Sample> three = {test::sample("x", {L::kAWins, L::kAWins}),
                                     test::sample("y", {L::kAWins, L::kAWins, L::kAWins}),
                                     test::sample("z", {L::kAWins, L::kAWins, L::kTie, L::kTie})};
  const auto st = corpus_stats(three);
  EXPECT_EQ(st.avg_criteria_per_sample, 3.0);
  EXPECT_EQ(st.max_criteria, 4u);
  EXPECT_EQ(st.multi_criterion_share, 1.0);
  EXPECT_EQ(st.avg_prompt_length, 6.0);
  EXPECT_EQ(st.source_model_count, 2u);

  const auto one = corpus_stats({test::sample("r", {L::kAWins, L::kBWins, L::kTie, L::kTie, L::kAWins})});
  EXPECT_EQ(one.reversal_share, 1.0);
  EXPECT_EQ(one.max_criteria, 5u);
  EXPECT_THROW(corpus_stats({}), DomainError);
}

TEST(CorpusStats, BenchmarkProfileIsExact) {
  const auto pool = synth::benchmark_profile_pool(11);
  ASSERT_EQ(pool.size(), 3000u);
  const auto st = corpus_stats(pool);
  EXPECT_EQ(st.avg_criteria_per_sample, 3.0);
  EXPECT_EQ(st.max_criteria, 5u);
  EXPECT_EQ(st.multi_criterion_share, 2397.0 / 3000.0);
  EXPECT_NEAR(st.multi_criterion_share, 0.799, 1e-15);
  for (double r : st.difficulty_ratio) EXPECT_EQ(r, 1.0 / 3.0);
  EXPECT_NE(stats_table(st).find("avg criteria per sample     3.00"), std::string::npos) << stats_table(st);
  EXPECT_NE(stats_table(st).find("multi-criterion share       0.799"), std::string::npos);
}

std::vector<Sample> balanced_pool(std::uint64_t seed) {
  synth::PoolOptions o;
  o.n = 300;
  o.seed = seed;
  o.low_agreement_rate = 0.0;
  return synth::random_pool(o);
}

TEST(Curate, BalancedPoolGivesExactSplit) {
  const auto pool = balanced_pool(1);
  CurationConfig cfg;
  cfg.target_pairs = 90;
  cfg.seed = 7;
  const auto out = curate(pool, cfg);
  ASSERT_EQ(out.size(), 90u);
  std::array<int, 3> hist{};
  for (const auto& s : out) ++hist[static_cast<std::size_t>(s.difficulty)];
  EXPECT_EQ(hist, (std::array<int, 3>{30, 30, 30}));
}

TEST(Curate, OutputIsDeterministicSubsetAboveThreshold) {
  const auto pool = synth::random_pool({.n = 400, .d_img = 4, .seed = 2});
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    CurationConfig cfg;
    cfg.target_pairs = 120;
    cfg.seed = seed;
    const auto a = curate(pool, cfg), b = curate(pool, cfg);
    EXPECT_EQ(a, b);
    std::set<std::string> ids;
    for (const auto& s : pool) ids.insert(s.id);
    std::size_t rev = 0, amb = 0;
    std::array<std::size_t, 3> hist{};
    for (const auto& s : a) {
      EXPECT_TRUE(ids.contains(s.id));
      for (const auto& [k, frac] : s.agreement) {
        if (k == kOverallId || s.criterion_labels.contains(k)) EXPECT_GT(frac, cfg.retention_threshold);
      }
      rev += detect_reversal(s);
      amb += is_ambiguous(s, cfg.retention_threshold);
      ++hist[static_cast<std::size_t>(s.difficulty)];
    }
    const double n = static_cast<double>(a.size());
    for (std::size_t d = 0; d < 3; ++d) EXPECT_LE(std::abs(hist[d] / n - 1.0 / 3.0), 0.05);
    EXPECT_LE(std::abs(rev / n - cfg.reversal_share), 0.05);
    EXPECT_LE(std::abs(amb / n - cfg.ambiguous_share), 0.05);
  }
  CurationConfig c1, c2;
  c1.target_pairs = c2.target_pairs = 120;
  c2.seed = 99;
  EXPECT_NE(curate(pool, c1), curate(pool, c2));
}

TEST(Curate, NoReversalsIsInfeasible) {
  auto pool = balanced_pool(3);
  for (auto& s : pool) {
    for (auto& [cid, l] : s.criterion_labels) {
      if (l == L::kBWins) l = L::kAWins;
    }
  }
  CurationConfig cfg;
  cfg.target_pairs = 90;
  try {
    curate(pool, cfg);
    FAIL();
  } catch (const CurationError& e) {
    EXPECT_EQ(e.constraint(), "reversal_share");
  }
}

TEST(Curate, MissingAgreementMakesSamplesIneligible) {
  auto pool = balanced_pool(4);
  for (auto& s : pool) s.agreement.clear();
  CurationConfig cfg;
  cfg.target_pairs = 30;
  try {
    curate(pool, cfg);
    FAIL();
  } catch (const CurationError& e) {
    EXPECT_EQ(e.constraint(), "retention_threshold");
  }
}

TEST(Curate, ConfigValidation) {
  CurationConfig cfg;
  cfg.difficulty_mix = {0.5, 0.5, 0.5};
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.reversal_share = 1.5;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.target_pairs = 0;
  EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(Curate, AmbiguityBand) {
  auto s = test::sample("s", {L::kAWins});
  s.agreement["overall"] = 0.85;
  EXPECT_TRUE(is_ambiguous(s, 0.8));
  s.agreement["overall"] = 0.9;
  EXPECT_TRUE(is_ambiguous(s, 0.8));
  s.agreement["overall"] = 0.95;
  EXPECT_FALSE(is_ambiguous(s, 0.8));
  s.agreement["overall"] = 0.8;
  EXPECT_FALSE(is_ambiguous(s, 0.8));
}

}  // namespace
}  // namespace dyco
