#include <gtest/gtest.h>

#include "dyco/curation.hpp"
#include "dyco/scorers.hpp"
#include "dyco/synth.hpp"
#include "dyco/training.hpp"
#include "support.hpp"

namespace dyco {
namespace {

ScoreRequest request(std::vector<double> a, std::vector<double> b, std::string text = "a cat") {
  ScoreRequest r;
  r.prompt = test::prompt("p", 1, std::move(text));
  r.image_a = test::image("a", std::move(a));
  r.image_b = test::image("b", std::move(b));
  r.condition = Condition::overall();
  return r;
}

ScoreRequest swap_images(ScoreRequest r) {
  std::swap(r.image_a, r.image_b);
  return r;
}

TEST(AssembleFeatures, BlockLayout) {
  const auto r = request({1, 2, 3}, {0.5, -1, 4});
  const auto f = assemble_features(r, 4);
  ASSERT_EQ(f.size(), 2 * 3 + 4u);
  const std::vector<double> diff{0.5, 3, -1}, sum{1.5, 1, 7};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(f[i], diff[i]);
    EXPECT_EQ(f[3 + i], sum[i]);
  }
  const auto t = hash_embed("a cat | overall", 4);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(f[6 + i], t[i]);
}

TEST(AssembleFeatures, IdenticalImagesZeroFirstBlock) {
  const auto f = assemble_features(request({1, 2}, {1, 2}), 3);
  EXPECT_EQ(f[0], 0.0);
  EXPECT_EQ(f[1], 0.0);
}

TEST(AssembleFeatures, SwapNegatesDifferenceKeepsSum) {
  Rng rng(1, "swap");
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = request(synth::gaussian_vector(rng, 5), synth::gaussian_vector(rng, 5));
    const auto f = assemble_features(r, 6), g = assemble_features(swap_images(r), 6);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(f[i], -g[i]);
      EXPECT_EQ(f[5 + i], g[5 + i]);
    }
    for (std::size_t i = 10; i < 16; ++i) EXPECT_EQ(f[i], g[i]);
  }
}

TEST(AssembleFeatures, LengthMismatchIsDomainError) {
  EXPECT_THROW(assemble_features(request({1, 2}, {1}), 2), DomainError);
}

TEST(ScorePairwise, ZeroWeightsGiveHalfProbability) {
  const auto out = score_pairwise(LinearScorer::zeros(2, 3), request({1, 2}, {3, 4}));
  EXPECT_EQ(out.s, 0.0);
  EXPECT_EQ(preference_probability(out), 0.5);
}

TEST(ScorePairwise, AlignedWeightsFavourDominantImage) {
  auto w = LinearScorer::zeros(3, 0);
  w.weights = {1, 1, 1, 0, 0, 0};
  EXPECT_GT(score_pairwise(w, request({2, 2, 2}, {1, 1, 1})).s, 0.0);
}

TEST(ScorePairwise, TextDimZeroWithEqualImagesUsesOnlySymmetricBlockAndBias) {
  auto w = LinearScorer::zeros(2, 0);
  w.weights = {5, -7, 0.25, 0.5};
  w.bias = 0.1;
  const auto s1 = score_pairwise(w, request({1, 3}, {1, 3}, "anything")).s;
  EXPECT_DOUBLE_EQ(s1, 0.25 * 2 + 0.5 * 6 + 0.1);
  EXPECT_EQ(score_pairwise(w, request({1, 3}, {1, 3}, "something else")).s, s1);
}

TEST(ScorePairwise, ProbabilityInOpenInterval) {
  Rng rng(2, "range");
  for (int trial = 0; trial < 200; ++trial) {
    auto w = random_init(4, 4, trial, 1.0);
    const double p = preference_probability(
        score_pairwise(w, request(synth::gaussian_vector(rng, 4), synth::gaussian_vector(rng, 4))));
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(ScorePairwise, AntisymmetricWhenSymmetricAndTextWeightsVanish) {
  Rng rng(3, "anti");
  for (int trial = 0; trial < 200; ++trial) {
    auto w = random_init(4, 3, static_cast<std::uint64_t>(trial), 1.0);
    for (std::size_t i = 4; i < w.weights.size(); ++i) w.weights[i] = 0.0;
    const auto r = request(synth::gaussian_vector(rng, 4), synth::gaussian_vector(rng, 4));
    const auto s = score_pairwise(w, r), t = score_pairwise(w, swap_images(r));
    EXPECT_EQ(s.s, -t.s);
    const auto p = to_prediction(s, 0.05), q = to_prediction(t, 0.05);
    EXPECT_EQ(p, swapped(q));
  }
}

TEST(ScorePairwise, BitIdenticalOnRepeat) {
  Rng rng(4, "rep");
  const auto w = random_init(6, 8, 11, 1.0);
  const auto r = request(synth::gaussian_vector(rng, 6), synth::gaussian_vector(rng, 6), "Some words here");
  const double a = score_pairwise(w, r).s;
  for (int i = 0; i < 20; ++i) EXPECT_EQ(score_pairwise(w, r).s, a);
}

TEST(ScorePointwise, MarginUsesOnlyDifferenceWeights) {
  auto w = random_init(3, 4, 5, 1.0);
  const auto r = request({1, 2, 3}, {0, 1, -1});
  const auto out = score_pointwise(w, r);
  const double expected = w.weights[0] * 1 + w.weights[1] * 1 + w.weights[2] * 4;
  EXPECT_NEAR(out.margin(), expected, 1e-12);
}

TEST(ScorerCompat, RejectsWrongDimensions) {
  EXPECT_THROW(score_pairwise(LinearScorer::zeros(3, 0), request({1, 2}, {1, 2})), DomainError);
}

TEST(ToPrediction, Examples) {
  EXPECT_EQ(to_prediction(ScorerOutput::pointwise(0.9, 0.2), 0.0), PreferenceLabel::kAWins);
  EXPECT_EQ(to_prediction(ScorerOutput::pairwise(0.0), 0.05), PreferenceLabel::kTie);
  EXPECT_EQ(to_prediction(ScorerOutput::pairwise(-0.2), 0.05), PreferenceLabel::kBWins);
  EXPECT_EQ(to_prediction(ScorerOutput::pointwise(0.4, 0.4), 0.0), PreferenceLabel::kTie);
  EXPECT_EQ(to_prediction(ScorerOutput::pairwise(0.05), 0.05), PreferenceLabel::kTie);
  EXPECT_THROW(to_prediction(ScorerOutput::pairwise(0.0), -1.0), DomainError);
}

TEST(Oracle, Examples) {
  using L = PreferenceLabel;
  const auto s = test::sample("s", {L::kTie, L::kAWins}, L::kAWins);
  EXPECT_EQ(oracle_score(s, Condition::overall()).s, 1.0);
  EXPECT_EQ(oracle_score(s, Condition::single("c1")).s, 0.0);
  EXPECT_THROW(oracle_score(s, Condition::single("c_missing")), DomainError);
}

TEST(Oracle, ReproducesGoldOnEveryInstance) {
  const auto pool = synth::random_pool({.n = 120, .d_img = 3, .seed = 8});
  const OracleJudge judge(pool);
  for (auto setting : {Setting::kSingle, Setting::kMulti, Setting::kOverall}) {
    std::map<std::string, const Sample*> by_id;
    for (const auto& s : pool) by_id[s.id] = &s;
    for (const auto& inst : build_instances(pool, setting)) {
      const auto out = judge.score(make_request(*by_id[inst.sample_id], inst.condition));
      for (double band : {0.01, 0.5, 0.99}) EXPECT_EQ(to_prediction(out, band), inst.gold);
    }
  }
}

TEST(Oracle, UnknownSampleIsScorerError) {
  const OracleJudge judge({});
  EXPECT_THROW(judge.score(request({1}, {2})), ScorerError);
}

TEST(Templates, LegacyAppendsCriticalConsiderations) {
  auto s = test::sample("s", {PreferenceLabel::kAWins, PreferenceLabel::kBWins});
  const auto r = make_request(s, Condition::multi({"c1", "c2"}), PromptTemplate::kLegacy);
  EXPECT_EQ(r.instruction, "Prompt: a red fox in the snow. Critical Considerations: criterion c1; criterion c2.");
  const auto o = make_request(s, Condition::overall(), PromptTemplate::kLegacy);
  EXPECT_EQ(o.instruction, "Prompt: a red fox in the snow.");
}

TEST(Templates, StructuredNamesImagesAndCriterion) {
  auto s = test::sample("s", {PreferenceLabel::kAWins});
  s.image_a.uri = "file://a.png";
  const auto r = make_request(s, Condition::single("c1"));
  EXPECT_NE(r.instruction.find("the image A is: file://a.png"), std::string::npos);
  EXPECT_NE(r.instruction.find("the image B is: s-b"), std::string::npos);
  EXPECT_NE(r.instruction.find("under the specified criterion: criterion c1."), std::string::npos);
}

}  // namespace
}  // namespace dyco
