#include <gtest/gtest.h>

#include <set>

#include "dyco/core.hpp"
#include "dyco/hashing.hpp"
#include "dyco/numeric.hpp"
#include "dyco/rng.hpp"
#include "support.hpp"

namespace dyco {
namespace {

TEST(DifficultyOf, MapsComponentCountsToLevels) {
  EXPECT_EQ(difficulty_of(2), Difficulty::kEasy);
  EXPECT_EQ(difficulty_of(4), Difficulty::kMedium);
  EXPECT_EQ(difficulty_of(6), Difficulty::kHard);
  EXPECT_EQ(difficulty_of(1), Difficulty::kEasy);
  EXPECT_EQ(difficulty_of(3), Difficulty::kMedium);
  EXPECT_EQ(difficulty_of(5), Difficulty::kHard);
}

TEST(DifficultyOf, RejectsOutOfRange) {
  EXPECT_THROW(difficulty_of(0), DomainError);
  EXPECT_THROW(difficulty_of(7), DomainError);
  EXPECT_THROW(difficulty_of(-3), DomainError);
}

TEST(DifficultyOf, MonotoneOverDomain) {
  for (int c = 1; c < 6; ++c) EXPECT_LE(static_cast<int>(difficulty_of(c)), static_cast<int>(difficulty_of(c + 1)));
}

TEST(LabelToTarget, Values) {
  EXPECT_EQ(label_to_target(PreferenceLabel::kAWins), 1.0);
  EXPECT_EQ(label_to_target(PreferenceLabel::kBWins), 0.0);
  EXPECT_EQ(label_to_target(PreferenceLabel::kTie), 0.5);
}

TEST(LabelToTarget, IsBijection) {
  std::set<double> seen;
  for (auto l : kAllLabels) seen.insert(label_to_target(l));
  EXPECT_EQ(seen, (std::set<double>{0.0, 0.5, 1.0}));
}

TEST(LabelCodes, RoundTripAndSwap) {
  for (auto l : kAllLabels) {
    EXPECT_EQ(parse_label_code(label_code(l)), l);
    EXPECT_EQ(swapped(swapped(l)), l);
  }
  EXPECT_EQ(swapped(PreferenceLabel::kAWins), PreferenceLabel::kBWins);
  EXPECT_EQ(swapped(PreferenceLabel::kTie), PreferenceLabel::kTie);
  EXPECT_FALSE(parse_label_code("a").has_value());
}

TEST(MajorityLabel, MatchesVoteOracleExhaustively) {
  for (std::size_t k = 1; k <= 5; ++k) {
    for (const auto& v : test::all_label_vectors(k)) EXPECT_EQ(majority_label(v), test::vote_oracle(v));
  }
}

TEST(MajorityLabel, Examples) {
  using L = PreferenceLabel;
  EXPECT_EQ(majority_label({L::kAWins, L::kAWins}), L::kAWins);
  EXPECT_EQ(majority_label({L::kAWins, L::kBWins}), L::kTie);
  EXPECT_EQ(majority_label({L::kAWins, L::kBWins, L::kAWins}), L::kAWins);
  EXPECT_EQ(majority_label({L::kTie, L::kTie, L::kAWins}), L::kTie);
}

TEST(ValidateSample, AcceptsWellFormed) { EXPECT_NO_THROW(validate_sample(test::sample("s1", {PreferenceLabel::kAWins}))); }

TEST(ValidateSample, ReportsFieldPaths) {
  auto bad = [](auto mutate, const std::string& field) {
    auto s = test::sample("s1", {PreferenceLabel::kAWins, PreferenceLabel::kBWins});
    mutate(s);
    try {
      validate_sample(s);
      ADD_FAILURE() << "expected SchemaError for " << field;
    } catch (const SchemaError& e) {
      EXPECT_EQ(e.field(), field);
    }
  };
  bad([](Sample& s) { s.image_b.id = s.image_a.id; }, "image_b.id");
  bad([](Sample& s) { s.image_a.features[1] = std::nan(""); }, "image_a.features[1]");
  bad([](Sample& s) { s.image_b.features.pop_back(); }, "image_b.features");
  bad([](Sample& s) { s.criteria.clear(); }, "criteria");
  bad([](Sample& s) { s.criteria[1].id = "overall"; }, "criteria[1].id");
  bad([](Sample& s) { s.criteria[1].id = "c1"; }, "criteria[1].id");
  bad([](Sample& s) { s.criterion_labels["zz"] = PreferenceLabel::kTie; }, "criterion_labels.zz");
  bad([](Sample& s) { s.difficulty = Difficulty::kHard; }, "difficulty");
  bad([](Sample& s) { s.prompt.text.clear(); }, "prompt.text");
  bad([](Sample& s) { s.prompt.components.clear(); }, "prompt.components");
  bad([](Sample& s) { s.agreement["overall"] = 1.5; }, "agreement.overall");
  bad([](Sample& s) {
    for (int i = 3; i <= 6; ++i) s.criteria.push_back(Criterion{"c" + std::to_string(i), "x", std::nullopt});
  }, "criteria");
}

TEST(Conditions, ValidationAndGold) {
  using L = PreferenceLabel;
  const auto s = test::sample("s1", {L::kAWins, L::kBWins, L::kAWins}, L::kBWins);
  EXPECT_EQ(gold_label(s, Condition::overall()), L::kBWins);
  EXPECT_EQ(gold_label(s, Condition::single("c2")), L::kBWins);
  EXPECT_EQ(gold_label(s, Condition::multi({"c1", "c2"})), L::kTie);
  EXPECT_EQ(gold_label(s, Condition::multi({"c1", "c2", "c3"})), L::kAWins);
  EXPECT_THROW(gold_label(s, Condition::single("c9")), DomainError);
  EXPECT_THROW(gold_label(s, Condition::multi({"c1"})), DomainError);
  EXPECT_THROW(gold_label(s, Condition::multi({"c1", "c1"})), DomainError);
  EXPECT_THROW(gold_label(s, Condition{Setting::kOverall, {"c1"}}), DomainError);
}

TEST(HashEmbed, EmptyTextIsZero) {
  const auto v = hash_embed("", 8);
  ASSERT_EQ(v.size(), 8u);
  for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(HashEmbed, TokenMultiplicityScalesBucket) {
  const auto sharp = fnv1a64("sharp"), text = fnv1a64("text");
  if (sharp % 8 == text % 8) GTEST_SKIP() << "tokens share a bucket";
  const auto v = hash_embed("sharp text sharp", 8);
  EXPECT_NEAR(std::abs(v[sharp % 8]), 2.0 * std::abs(v[text % 8]), 1e-15);
  EXPECT_NEAR(std::abs(v[text % 8]), 1.0 / std::sqrt(5.0), 1e-15);
}

TEST(HashEmbed, CaseAndPunctuationInvariant) { EXPECT_EQ(hash_embed("Sharp, TEXT!", 8), hash_embed("sharp text", 8)); }

TEST(HashEmbed, RejectsNonPositiveDim) {
  EXPECT_THROW(hash_embed("x", 0), DomainError);
  EXPECT_THROW(hash_embed("x", -2), DomainError);
}

TEST(HashEmbed, UnitNormWhenAnyToken) {
  Rng rng(5, "hash");
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    for (int w = 0; w < 1 + static_cast<int>(rng.below(10)); ++w) text += "w" + std::to_string(rng.below(30)) + " ";
    const int dim = 1 + static_cast<int>(rng.below(32));
    const auto v = hash_embed(text, dim);
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    // Signed buckets can cancel exactly, which leaves the zero vector.
    if (n2 != 0.0) EXPECT_NEAR(n2, 1.0, 1e-12);
  }
}

TEST(Fnv1a64, PublishedTestVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Rng, SubstreamsAreDeterministicAndDistinct) {
  Rng a(42, "x"), b(42, "x"), c(42, "y");
  for (int i = 0; i < 10; ++i) {
    const auto va = a.next();
    EXPECT_EQ(va, b.next());
    EXPECT_NE(va, c.next());
  }
}

TEST(Rng, BelowStaysInRange) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(r.below(7), 7u);
}

TEST(Numeric, SigmoidSymmetryAndRange) {
  for (double x : {-800.0, -30.0, -1.0, 0.0, 0.5, 30.0, 800.0}) {
    EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-15);
    EXPECT_GE(sigmoid(x), 0.0);
    EXPECT_LE(sigmoid(x), 1.0);
  }
  EXPECT_EQ(sigmoid(0.0), 0.5);
}

TEST(Numeric, PairwiseSumMatchesNaiveOnIntegers) {
  std::vector<double> xs;
  double naive = 0.0;
  for (int i = 0; i < 1001; ++i) {
    xs.push_back(i);
    naive += i;
  }
  EXPECT_EQ(pairwise_sum(xs), naive);
}

}  // namespace
}  // namespace dyco
