#pragma once

// Runs a judge over the evaluation instances of a benchmark and reduces the predictions
// into per-setting reports.

#include <map>
#include <string>
#include <vector>

#include "dyco/curation.hpp"
#include "dyco/metrics.hpp"
#include "dyco/parallel.hpp"
#include "dyco/scorers.hpp"

namespace dyco {

struct EvalOptions {
  double tie_band = 0.0;
  PromptTemplate prompt_template = PromptTemplate::kStructured;
  InstanceOptions instances;
  std::size_t jobs = 1;
};

struct InstanceError {
  std::string sample_id;
  std::string message;
};

struct EvalOutcome {
  EvalReport report;
  std::vector<InstanceError> errors;
};

/// Scores every instance of one setting. A scorer failure is recorded against its
/// instance and excluded from the confusion matrix; it never stops the run. Shards
/// merge by cellwise addition, so the report does not depend on opt.jobs.
inline EvalOutcome evaluate_setting(const std::vector<Sample>& samples, const Scorer& scorer, Setting setting,
                                    const EvalOptions& opt = {}) {
  const auto instances = build_instances(samples, setting, opt.instances);
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id.emplace(s.id, &s);

  const std::size_t jobs = std::max<std::size_t>(1, opt.jobs);
  std::vector<ConfusionMatrix3> shard_cm(jobs);
  std::vector<std::vector<InstanceError>> shard_err(jobs);
  parallel_shards(instances.size(), jobs, [&](std::size_t j, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto& inst = instances[i];
      try {
        const auto req = make_request(*by_id.at(inst.sample_id), inst.condition, opt.prompt_template);
        const auto pred = to_prediction(scorer.score(req), opt.tie_band);
        shard_cm[j] = accumulate(inst.gold, pred, shard_cm[j]);
      } catch (const std::exception& ex) {
        shard_err[j].push_back({inst.sample_id, ex.what()});
      }
    }
  });
  ConfusionMatrix3 cm;
  EvalOutcome out;
  for (std::size_t j = 0; j < jobs; ++j) {
    cm += shard_cm[j];
    out.errors.insert(out.errors.end(), shard_err[j].begin(), shard_err[j].end());
  }
  out.report = EvalReport::from_confusion(setting, cm, instances.size(), out.errors.size());
  return out;
}

}  // namespace dyco
