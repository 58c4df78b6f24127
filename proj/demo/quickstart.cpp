// Trains a judge on a synthetic corpus, scores it in every setting, then uses it to pick
// the best of a handful of candidates per criterion.

#include <iostream>

#include "dyco.hpp"

int main() {
  using namespace dyco;

  const auto corpus = synth::separable_fixture(/*seed=*/1);
  LossConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 1e-3;
  cfg.seed = 1;
  const auto trained = train_linear_scorer(training_examples(corpus), cfg, LinearScorer::zeros(8, 16, 1));
  std::cout << "final loss " << trained.epoch_loss.back() << "\n\n";

  const LinearJudge judge(trained.scorer);
  std::vector<EvalReport> reports;
  for (auto setting : {Setting::kSingle, Setting::kOverall}) reports.push_back(evaluate_setting(corpus, judge, setting).report);
  std::cout << reports_table(reports) << '\n';

  const auto file = candidate_file_from_json(synth::candidate_file(/*seed=*/2, /*n=*/5));
  const auto criteria = resolve_criteria(file.criteria, {file.set.prompt, file.set.candidates}, nullptr);
  const auto selection = pick(file.set, criteria, judge);
  for (const auto& c : selection.per_criterion) std::cout << c.criterion.id << " -> " << c.winner << '\n';
  return 0;
}
