#pragma once

// Domain types shared by the whole toolkit: prompts, image references, criteria, the
// three-way preference label, dataset samples and evaluation instances.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dyco/errors.hpp"

namespace dyco {

enum class PromptComponent {
  kCoreSubjects,
  kVisualAppearance,
  kSceneEnvironment,
  kMotionSpatial,
  kArtisticFormat,
  kRenderingSpecs,
};

inline constexpr std::array<std::string_view, 6> kComponentNames = {
    "core_subjects",   "visual_appearance", "scene_environment",
    "motion_spatial",  "artistic_format",   "rendering_specs",
};

enum class CriterionTheme {
  kSemanticAlignment,
  kAttributeFidelity,
  kCompositionSpatial,
  kLightingColor,
  kStructureAnatomy,
  kStyleAesthetics,
};

inline constexpr std::array<std::string_view, 6> kThemeNames = {
    "semantic_alignment", "attribute_fidelity", "composition_spatial",
    "lighting_color",     "structure_anatomy",  "style_aesthetics",
};

inline std::string_view to_string(PromptComponent c) { return kComponentNames[static_cast<int>(c)]; }
inline std::string_view to_string(CriterionTheme t) { return kThemeNames[static_cast<int>(t)]; }

inline std::optional<PromptComponent> parse_component(std::string_view s) {
  for (std::size_t i = 0; i < kComponentNames.size(); ++i) {
    if (kComponentNames[i] == s) return static_cast<PromptComponent>(i);
  }
  return std::nullopt;
}

inline std::optional<CriterionTheme> parse_theme(std::string_view s) {
  for (std::size_t i = 0; i < kThemeNames.size(); ++i) {
    if (kThemeNames[i] == s) return static_cast<CriterionTheme>(i);
  }
  return std::nullopt;
}

struct Prompt {
  std::string id;
  std::string text;
  std::set<PromptComponent> components;
  std::string topic;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

struct ImageRef {
  std::string id;
  std::string source_model;
  std::vector<double> features;
  std::optional<std::string> uri;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

inline constexpr std::string_view kOverallId = "overall";

struct Criterion {
  std::string id;
  std::string text;
  std::optional<CriterionTheme> theme;

  bool is_overall() const { return id == kOverallId; }

  friend bool operator==(const Criterion&, const Criterion&) = default;
};

/// The reserved whole-image criterion.
inline Criterion overall_criterion() { return Criterion{std::string(kOverallId), "overall", std::nullopt}; }

enum class PreferenceLabel { kAWins, kBWins, kTie };

inline constexpr std::array<PreferenceLabel, 3> kAllLabels = {
    PreferenceLabel::kAWins, PreferenceLabel::kBWins, PreferenceLabel::kTie};

inline constexpr int index_of(PreferenceLabel l) { return static_cast<int>(l); }

/// Wire code used by record files and the service: "A", "B" or "T".
inline std::string_view label_code(PreferenceLabel l) {
  switch (l) {
    case PreferenceLabel::kAWins: return "A";
    case PreferenceLabel::kBWins: return "B";
    case PreferenceLabel::kTie: return "T";
  }
  return "T";
}

inline std::optional<PreferenceLabel> parse_label_code(std::string_view s) {
  if (s == "A") return PreferenceLabel::kAWins;
  if (s == "B") return PreferenceLabel::kBWins;
  if (s == "T") return PreferenceLabel::kTie;
  return std::nullopt;
}

inline PreferenceLabel swapped(PreferenceLabel l) {
  switch (l) {
    case PreferenceLabel::kAWins: return PreferenceLabel::kBWins;
    case PreferenceLabel::kBWins: return PreferenceLabel::kAWins;
    case PreferenceLabel::kTie: return PreferenceLabel::kTie;
  }
  return l;
}

/// Regression target for a comparison outcome: A wins -> 1, B wins -> 0, tie -> 0.5.
inline constexpr double label_to_target(PreferenceLabel l) {
  switch (l) {
    case PreferenceLabel::kAWins: return 1.0;
    case PreferenceLabel::kBWins: return 0.0;
    case PreferenceLabel::kTie: return 0.5;
  }
  return 0.5;
}

enum class Difficulty { kEasy, kMedium, kHard };

inline std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy: return "easy";
    case Difficulty::kMedium: return "medium";
    case Difficulty::kHard: return "hard";
  }
  return "easy";
}

inline std::optional<Difficulty> parse_difficulty(std::string_view s) {
  if (s == "easy") return Difficulty::kEasy;
  if (s == "medium") return Difficulty::kMedium;
  if (s == "hard") return Difficulty::kHard;
  return std::nullopt;
}

/// Prompt difficulty from the number of prompt components used: 1-2 easy, 3-4 medium,
/// 5-6 hard.
inline Difficulty difficulty_of(int component_count) {
  if (component_count < 1 || component_count > 6) {
    throw DomainError("component count must be in [1,6], got " + std::to_string(component_count));
  }
  if (component_count <= 2) return Difficulty::kEasy;
  if (component_count <= 4) return Difficulty::kMedium;
  return Difficulty::kHard;
}

inline constexpr std::size_t kMaxCriteria = 5;

struct Sample {
  std::string id;
  Prompt prompt;
  ImageRef image_a;
  ImageRef image_b;
  std::vector<Criterion> criteria;
  std::map<std::string, PreferenceLabel> criterion_labels;
  PreferenceLabel overall_label = PreferenceLabel::kTie;
  Difficulty difficulty = Difficulty::kEasy;
  // Winning-vote fraction per retained label, keyed by criterion id or "overall".
  // Filled by aggregation; consumed by curation. Empty when unknown.
  std::map<std::string, double> agreement;

  const Criterion* find_criterion(std::string_view cid) const {
    for (const auto& c : criteria) {
      if (c.id == cid) return &c;
    }
    return nullptr;
  }

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class Setting { kSingle, kMulti, kOverall };

inline std::string_view to_string(Setting s) {
  switch (s) {
    case Setting::kSingle: return "single";
    case Setting::kMulti: return "multi";
    case Setting::kOverall: return "overall";
  }
  return "overall";
}

inline std::optional<Setting> parse_setting(std::string_view s) {
  if (s == "single") return Setting::kSingle;
  if (s == "multi") return Setting::kMulti;
  if (s == "overall") return Setting::kOverall;
  return std::nullopt;
}

/// Which criteria a comparison is conditioned on.
struct Condition {
  Setting setting = Setting::kOverall;
  std::vector<std::string> criterion_ids;  // one for kSingle, >= 2 for kMulti, none for kOverall

  static Condition overall() { return {Setting::kOverall, {}}; }
  static Condition single(std::string id) { return {Setting::kSingle, {std::move(id)}}; }
  static Condition multi(std::vector<std::string> ids) { return {Setting::kMulti, std::move(ids)}; }

  friend bool operator==(const Condition&, const Condition&) = default;
};

struct EvalInstance {
  std::string sample_id;
  Condition condition;
  PreferenceLabel gold = PreferenceLabel::kTie;

  friend bool operator==(const EvalInstance&, const EvalInstance&) = default;
};

// Structural checks on a condition against the sample it refers to.
inline void validate_condition(const Sample& s, const Condition& c) {
  switch (c.setting) {
    case Setting::kOverall:
      if (!c.criterion_ids.empty()) throw DomainError("overall condition carries criteria");
      return;
    case Setting::kSingle:
      if (c.criterion_ids.size() != 1) throw DomainError("single condition needs exactly one criterion");
      break;
    case Setting::kMulti: {
      if (c.criterion_ids.size() < 2) throw DomainError("multi condition needs at least two criteria");
      std::set<std::string> distinct(c.criterion_ids.begin(), c.criterion_ids.end());
      if (distinct.size() != c.criterion_ids.size()) throw DomainError("multi condition repeats a criterion");
      break;
    }
  }
  for (const auto& id : c.criterion_ids) {
    if (s.find_criterion(id) == nullptr) {
      throw DomainError("sample " + s.id + " has no criterion '" + id + "'");
    }
  }
}

/// Gold label of a multi-criteria condition: majority vote over the per-criterion labels.
/// TIE when the A and B counts are equal or when TIE outnumbers both decisive labels.
inline PreferenceLabel majority_label(const std::vector<PreferenceLabel>& labels) {
  int a = 0, b = 0, t = 0;
  for (auto l : labels) {
    if (l == PreferenceLabel::kAWins) ++a;
    else if (l == PreferenceLabel::kBWins) ++b;
    else ++t;
  }
  if (t > a && t > b) return PreferenceLabel::kTie;
  if (a > b) return PreferenceLabel::kAWins;
  if (b > a) return PreferenceLabel::kBWins;
  return PreferenceLabel::kTie;
}

// Gold label of a condition over a sample's annotations. Throws DomainError when the
// condition names a criterion the sample lacks or that carries no retained label.
inline PreferenceLabel gold_label(const Sample& s, const Condition& c) {
  validate_condition(s, c);
  if (c.setting == Setting::kOverall) return s.overall_label;
  std::vector<PreferenceLabel> labels;
  for (const auto& id : c.criterion_ids) {
    auto it = s.criterion_labels.find(id);
    if (it == s.criterion_labels.end()) {
      throw DomainError("sample " + s.id + " has no label for criterion '" + id + "'");
    }
    labels.push_back(it->second);
  }
  if (c.setting == Setting::kSingle) return labels.front();
  return majority_label(labels);
}

inline void validate_prompt(const Prompt& p, const std::string& path = "prompt") {
  if (p.id.empty()) throw SchemaError(path + ".id", "empty id");
  if (p.text.empty()) throw SchemaError(path + ".text", "empty prompt text");
  if (p.components.empty() || p.components.size() > 6) {
    throw SchemaError(path + ".components", "expected 1-6 components");
  }
}

inline void validate_image(const ImageRef& img, const std::string& path) {
  if (img.id.empty()) throw SchemaError(path + ".id", "empty id");
  if (img.features.empty()) throw SchemaError(path + ".features", "empty feature vector");
  for (std::size_t i = 0; i < img.features.size(); ++i) {
    if (!std::isfinite(img.features[i])) {
      throw SchemaError(path + ".features[" + std::to_string(i) + "]", "non-finite feature");
    }
  }
}

inline void validate_criterion(const Criterion& c, const std::string& path) {
  if (c.id.empty()) throw SchemaError(path + ".id", "empty id");
  if (c.text.empty()) throw SchemaError(path + ".text", "empty criterion text");
}

inline void validate_sample(const Sample& s) {
  if (s.id.empty()) throw SchemaError("id", "empty sample id");
  validate_prompt(s.prompt);
  validate_image(s.image_a, "image_a");
  validate_image(s.image_b, "image_b");
  if (s.image_a.id == s.image_b.id) throw SchemaError("image_b.id", "image_a and image_b share an id");
  if (s.image_a.features.size() != s.image_b.features.size()) {
    throw SchemaError("image_b.features", "feature length differs from image_a");
  }
  if (s.criteria.empty() || s.criteria.size() > kMaxCriteria) {
    throw SchemaError("criteria", "expected 1-5 criteria");
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < s.criteria.size(); ++i) {
    const auto path = "criteria[" + std::to_string(i) + "]";
    validate_criterion(s.criteria[i], path);
    if (s.criteria[i].is_overall()) throw SchemaError(path + ".id", "'overall' is reserved");
    if (!ids.insert(s.criteria[i].id).second) throw SchemaError(path + ".id", "duplicate criterion id");
  }
  for (const auto& [cid, label] : s.criterion_labels) {
    if (!ids.contains(cid)) throw SchemaError("criterion_labels." + cid, "label for unknown criterion");
  }
  const auto expected = difficulty_of(static_cast<int>(s.prompt.components.size()));
  if (s.difficulty != expected) {
    throw SchemaError("difficulty", "does not match the prompt's component count");
  }
  for (const auto& [key, frac] : s.agreement) {
    if (!(frac >= 0.0 && frac <= 1.0)) throw SchemaError("agreement." + key, "fraction outside [0,1]");
  }
}

}  // namespace dyco
