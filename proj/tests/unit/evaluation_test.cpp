#include <gtest/gtest.h>

#include "dyco/evaluation.hpp"
#include "dyco/synth.hpp"
#include "dyco/training.hpp"

namespace dyco {
namespace {

TEST(Evaluate, OracleIsPerfectInEverySetting) {
  const auto pool = synth::random_pool({.n = 120, .d_img = 3, .seed = 31});
  const OracleJudge oracle(pool);
  for (auto setting : {Setting::kOverall, Setting::kSingle, Setting::kMulti}) {
    const auto out = evaluate_setting(pool, oracle, setting);
    EXPECT_TRUE(out.errors.empty());
    EXPECT_EQ(out.report.n_instances, build_instances(pool, setting).size());
    EXPECT_EQ(out.report.confusion.total(), out.report.n_instances);
    EXPECT_EQ(out.report.accuracy.average, 1.0);
    ASSERT_TRUE(out.report.kappa.has_value());
    EXPECT_EQ(*out.report.kappa, 1.0);
  }
}

TEST(Evaluate, ReportDoesNotDependOnJobs) {
  const auto pool = synth::random_pool({.n = 90, .d_img = 4, .seed = 32});
  const LinearJudge judge(random_init(4, 16, 5));
  for (auto setting : {Setting::kOverall, Setting::kMulti}) {
    EvalOptions one, four;
    four.jobs = 4;
    const auto a = evaluate_setting(pool, judge, setting, one).report;
    const auto b = evaluate_setting(pool, judge, setting, four).report;
    EXPECT_EQ(a.confusion.counts, b.confusion.counts);
    EXPECT_EQ(a.to_json(), b.to_json());
  }
}

class FlakyJudge final : public Scorer {
 public:
  ScorerOutput score(const ScoreRequest& req) const override {
    if (req.sample_id.back() == '3') throw ScorerError("unavailable");
    return ScorerOutput::pairwise(0.0);
  }
  std::string name() const override { return "flaky"; }
};

TEST(Evaluate, ScorerFailuresAreCountedNotFatal) {
  const auto pool = synth::random_pool({.n = 40, .d_img = 2, .seed = 33});
  const auto out = evaluate_setting(pool, FlakyJudge{}, Setting::kOverall);
  EXPECT_EQ(out.report.n_errors, 4u);
  EXPECT_EQ(out.errors.size(), 4u);
  EXPECT_EQ(out.report.confusion.total(), 36u);
  for (const auto& e : out.errors) EXPECT_EQ(e.sample_id.back(), '3');
}

TEST(Evaluate, TieBandTurnsSmallMarginsIntoTies) {
  const auto pool = synth::random_pool({.n = 30, .d_img = 2, .seed = 34});
  EvalOptions opt;
  opt.tie_band = 0.5;
  const auto out = evaluate_setting(pool, FlakyJudge{}, Setting::kOverall, opt);
  for (int g = 0; g < 3; ++g) {
    EXPECT_EQ(out.report.confusion.counts[g][0], 0u);
    EXPECT_EQ(out.report.confusion.counts[g][1], 0u);
  }
}

}  // namespace
}  // namespace dyco
