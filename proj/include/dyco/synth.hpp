#pragma once

// Seeded synthetic corpora for tests, demos and the `synth` subcommand.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyco/aggregation.hpp"
#include "dyco/core.hpp"
#include "dyco/pick.hpp"
#include "dyco/records.hpp"
#include "dyco/rng.hpp"

namespace dyco::synth {

inline constexpr std::array<std::string_view, 8> kSourceModels = {
    "flux-dev", "sd35-large", "sdxl", "playground-v25", "kolors", "hidream", "pixart-sigma", "janus-pro"};

inline constexpr std::array<std::string_view, 10> kTopics = {
    "animals", "architecture", "food", "people", "vehicles", "landscape", "objects", "fantasy", "text", "sports"};

inline constexpr std::array<std::string_view, 12> kWords = {
    "a",     "red",    "fox",   "under", "neon",  "lights", "beside",
    "old",   "castle", "glass", "tiny",  "robot"};

inline constexpr std::array<std::string_view, 12> kCriterionTexts = {
    "the subject count matches the prompt",    "colors of each object are faithful",
    "objects are placed as described",         "lighting is coherent across the scene",
    "hands and faces are anatomically sound",  "the requested art style is applied",
    "rendered text is readable and correct",   "materials and textures look plausible",
    "the background matches the setting",      "motion and pose follow the description",
    "the camera framing fits the request",     "no extra unrequested objects appear"};

inline std::string padded_id(std::string_view prefix, std::size_t i, std::size_t width) {
  std::string digits = std::to_string(i);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return std::string(prefix) + digits;
}

inline std::vector<double> gaussian_vector(Rng& rng, std::size_t d, double scale = 1.0) {
  std::vector<double> v(d);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline Prompt random_prompt(Rng& rng, const std::string& id, int components) {
  Prompt p;
  p.id = id;
  std::vector<std::size_t> comp = {0, 1, 2, 3, 4, 5};
  rng.shuffle(comp);
  for (int i = 0; i < components; ++i) p.components.insert(static_cast<PromptComponent>(comp[static_cast<std::size_t>(i)]));
  const auto words = 4 + rng.below(12);
  for (std::uint64_t w = 0; w < words; ++w) {
    if (w) p.text += ' ';
    p.text += kWords[rng.below(kWords.size())];
  }
  p.topic = std::string(kTopics[rng.below(kTopics.size())]);
  return p;
}

inline int components_for(Difficulty d, Rng& rng) {
  const int base = 1 + 2 * static_cast<int>(d);
  return base + static_cast<int>(rng.below(2));
}

inline PreferenceLabel random_label(Rng& rng, double tie_rate) {
  if (rng.uniform() < tie_rate) return PreferenceLabel::kTie;
  return rng.below(2) ? PreferenceLabel::kBWins : PreferenceLabel::kAWins;
}

struct PoolOptions {
  std::size_t n = 300;
  int d_img = 8;
  std::uint64_t seed = 0;
  double tie_rate = 0.2;
  // Agreement draw per label: below the benchmark threshold, in the close band
  // (0.8, 0.9], or confident (0.9, 1.0].
  double low_agreement_rate = 0.1;
  double close_agreement_rate = 0.06;
};

inline double draw_agreement(Rng& rng, const PoolOptions& o) {
  const double u = rng.uniform();
  if (u < o.low_agreement_rate) return 0.6 + 0.2 * rng.uniform();            // [0.6, 0.8)
  if (u < o.low_agreement_rate + o.close_agreement_rate) return 0.85;         // close band
  return 0.95 + 0.05 * rng.uniform();                                        // confident
}

/// One sample with `n_criteria` labeled criteria; the overall label is the majority of
/// the criterion labels, so reversals and ties occur at natural rates.
inline Sample random_sample(Rng& rng, const std::string& id, std::size_t n_criteria, Difficulty diff,
                            const PoolOptions& o) {
  Sample s;
  s.id = id;
  s.prompt = random_prompt(rng, "p-" + id, components_for(diff, rng));
  s.difficulty = diff;
  const auto ma = rng.below(kSourceModels.size());
  auto mb = rng.below(kSourceModels.size() - 1);
  if (mb >= ma) ++mb;
  s.image_a = ImageRef{id + "-a", std::string(kSourceModels[ma]), gaussian_vector(rng, static_cast<std::size_t>(o.d_img)),
                       std::nullopt};
  s.image_b = ImageRef{id + "-b", std::string(kSourceModels[mb]), gaussian_vector(rng, static_cast<std::size_t>(o.d_img)),
                       std::nullopt};
  std::vector<std::size_t> texts(kCriterionTexts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) texts[i] = i;
  rng.shuffle(texts);
  std::vector<PreferenceLabel> labels;
  for (std::size_t k = 0; k < n_criteria; ++k) {
    Criterion c{"c" + std::to_string(k + 1), std::string(kCriterionTexts[texts[k]]),
                static_cast<CriterionTheme>(texts[k] % kThemeNames.size())};
    const auto l = random_label(rng, o.tie_rate);
    s.criterion_labels[c.id] = l;
    s.agreement[c.id] = draw_agreement(rng, o);
    labels.push_back(l);
    s.criteria.push_back(std::move(c));
  }
  s.overall_label = majority_label(labels);
  s.agreement[std::string(kOverallId)] = draw_agreement(rng, o);
  return s;
}

/// A mixed pool: criteria counts uniform on 1..5, difficulties cycling easy/medium/hard.
inline std::vector<Sample> random_pool(const PoolOptions& o) {
  Rng rng(o.seed, "synth.pool");
  std::vector<Sample> out;
  out.reserve(o.n);
  for (std::size_t i = 0; i < o.n; ++i) {
    const auto k = 1 + rng.below(kMaxCriteria);
    const auto id = padded_id("s", i, 5);
    out.push_back(random_sample(rng, id, k, static_cast<Difficulty>(i % 3), o));
  }
  return out;
}

/// A 3000-sample pool with the published benchmark profile: criteria counts 603 x 1,
/// 1192 x 3, 1204 x 4 and 1 x 5 (mean exactly 3.00, 79.9% multi-criterion) and 1000
/// prompts per difficulty level.
inline std::vector<Sample> benchmark_profile_pool(std::uint64_t seed, int d_img = 8) {
  std::vector<std::size_t> counts;
  counts.insert(counts.end(), 603, 1);
  counts.insert(counts.end(), 1192, 3);
  counts.insert(counts.end(), 1204, 4);
  counts.insert(counts.end(), 1, 5);
  Rng rng(seed, "synth.profile");
  rng.shuffle(counts);
  PoolOptions o;
  o.d_img = d_img;
  o.seed = seed;
  std::vector<Sample> out;
  out.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto id = padded_id("b", i, 5);
    out.push_back(random_sample(rng, id, counts[i], static_cast<Difficulty>(i % 3), o));
  }
  return out;
}

/// Linearly separable pairs: A-wins have a - b = +v, B-wins have a - b = -v around a
/// random shared centre, with labels alternating so the classes are balanced. Every
/// sample carries one criterion whose label equals the overall label, and all samples
/// share one prompt.
inline std::vector<Sample> separable_fixture(std::uint64_t seed, std::size_t n = 200, int d_img = 8,
                                             double margin_norm = 2.0) {
  Rng rng(seed, "synth.separable");
  auto v = gaussian_vector(rng, static_cast<std::size_t>(d_img));
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x *= margin_norm / norm;
  Prompt prompt{"p-sep", "a red fox under neon lights", {PromptComponent::kCoreSubjects}, "animals"};
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool a_wins = i % 2 == 0;
    const auto c = gaussian_vector(rng, static_cast<std::size_t>(d_img), 0.5);
    std::vector<double> fa(c), fb(c);
    for (std::size_t k = 0; k < fa.size(); ++k) {
      const double h = 0.5 * v[k] * (a_wins ? 1.0 : -1.0);
      fa[k] += h;
      fb[k] -= h;
    }
    const auto id = padded_id("sep", i, 4);
    Sample s;
    s.id = id;
    s.prompt = prompt;
    s.image_a = ImageRef{s.id + "-a", std::string(kSourceModels[0]), fa, std::nullopt};
    s.image_b = ImageRef{s.id + "-b", std::string(kSourceModels[1]), fb, std::nullopt};
    s.criteria = {Criterion{"c1", "the subject matches the prompt", CriterionTheme::kSemanticAlignment}};
    s.overall_label = a_wins ? PreferenceLabel::kAWins : PreferenceLabel::kBWins;
    s.criterion_labels["c1"] = s.overall_label;
    s.difficulty = Difficulty::kEasy;
    s.agreement = {{"c1", 1.0}, {std::string(kOverallId), 1.0}};
    out.push_back(std::move(s));
  }
  return out;
}

/// Candidate file for `pick`: one prompt and n candidates with random features.
inline nlohmann::json candidate_file(std::uint64_t seed, std::size_t n = 4, int d_img = 8, bool with_criteria = true) {
  Rng rng(seed, "synth.candidates");
  CandidateSet set;
  set.prompt = random_prompt(rng, "p-pick", 3);
  for (std::size_t i = 0; i < n; ++i) {
    set.candidates.push_back(ImageRef{"cand" + std::to_string(i), std::string(kSourceModels[i % kSourceModels.size()]),
                                      gaussian_vector(rng, static_cast<std::size_t>(d_img)), std::nullopt});
  }
  auto j = to_json(set);
  if (with_criteria) {
    j["criteria"] = nlohmann::json::array();
    for (std::size_t k = 0; k < 3; ++k) {
      j["criteria"].push_back(to_json(Criterion{"c" + std::to_string(k + 1), std::string(kCriterionTexts[k]), std::nullopt}));
    }
  }
  return j;
}

/// Annotation run definition over random pair stubs.
inline nlohmann::json annotation_run(const std::string& run_id, std::uint64_t seed, std::size_t n_samples,
                                     std::size_t judgments_per_task = 3, double threshold = 0.7, int d_img = 4) {
  Rng rng(seed, "synth.annotation");
  nlohmann::json samples = nlohmann::json::array();
  PoolOptions o;
  o.d_img = d_img;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto s = random_sample(rng, "a" + std::to_string(i), 1, static_cast<Difficulty>(i % 3), o);
    samples.push_back(to_json(SampleStub{s.id, s.prompt, s.image_a, s.image_b}));
  }
  return nlohmann::json{{"run_id", run_id},
                        {"kind", "annotation"},
                        {"seed", seed},
                        {"threshold", threshold},
                        {"judgments_per_task", judgments_per_task},
                        {"samples", samples}};
}

/// Study run definition: each prompt has "ours" plus three baselines and the three
/// settings. With `with_duplicate`, one baseline shows the same image as "ours" on every
/// other prompt.
inline nlohmann::json study_run(const std::string& run_id, std::uint64_t seed, std::size_t n_prompts,
                                std::size_t rankings_per_task = 3, bool with_duplicate = true, int d_img = 4) {
  Rng rng(seed, "synth.study");
  const std::array<std::string, 4> methods = {"ours", "random", "best_of_overall", "single_judge"};
  nlohmann::json prompts = nlohmann::json::array();
  for (std::size_t i = 0; i < n_prompts; ++i) {
    const auto p = random_prompt(rng, "q" + std::to_string(i), 1 + static_cast<int>(rng.below(6)));
    nlohmann::json cands = nlohmann::json::array();
    for (std::size_t m = 0; m < methods.size(); ++m) {
      std::string img_id = p.id + "-img" + std::to_string(m);
      if (with_duplicate && i % 2 == 1 && m == 2) img_id = p.id + "-img0";
      ImageRef img{img_id, "", gaussian_vector(rng, static_cast<std::size_t>(d_img)), "https://img.invalid/" + img_id + ".png"};
      cands.push_back({{"method", methods[m]}, {"image", to_json(img)}});
    }
    nlohmann::json settings = nlohmann::json::array();
    settings.push_back({{"setting", "overall"}});
    settings.push_back({{"setting", "single"}, {"criteria", {to_json(Criterion{"c1", std::string(kCriterionTexts[0]), std::nullopt})}}});
    settings.push_back(
        {{"setting", "multi"},
         {"criteria",
          {to_json(Criterion{"c1", std::string(kCriterionTexts[0]), std::nullopt}),
           to_json(Criterion{"c2", std::string(kCriterionTexts[1]), std::nullopt})}}});
    prompts.push_back({{"prompt", to_json(p)}, {"candidates", cands}, {"settings", settings}});
  }
  return nlohmann::json{
      {"run_id", run_id}, {"kind", "study"}, {"seed", seed}, {"rankings_per_task", rankings_per_task}, {"prompts", prompts}};
}

}  // namespace dyco::synth
