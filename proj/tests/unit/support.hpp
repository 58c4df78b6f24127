#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dyco/core.hpp"
#include "dyco/rng.hpp"

namespace dyco::test {

inline ImageRef image(const std::string& id, std::vector<double> f, std::string model = "m0") {
  return ImageRef{id, std::move(model), std::move(f), std::nullopt};
}

inline Prompt prompt(const std::string& id, int components = 2, std::string text = "a red fox in the snow") {
  Prompt p;
  p.id = id;
  p.text = std::move(text);
  for (int i = 0; i < components; ++i) p.components.insert(static_cast<PromptComponent>(i));
  p.topic = "animals";
  return p;
}

// A valid sample whose criteria c1..cK carry the given labels.
inline Sample sample(const std::string& id, const std::vector<PreferenceLabel>& labels,
                     PreferenceLabel overall = PreferenceLabel::kTie, int components = 2, std::size_t d_img = 3) {
  Sample s;
  s.id = id;
  s.prompt = prompt("p-" + id, components);
  s.image_a = image(id + "-a", std::vector<double>(d_img, 1.0));
  s.image_b = image(id + "-b", std::vector<double>(d_img, -1.0), "m1");
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const auto cid = "c" + std::to_string(k + 1);
    s.criteria.push_back(Criterion{cid, "criterion " + cid, std::nullopt});
    s.criterion_labels[cid] = labels[k];
  }
  s.overall_label = overall;
  s.difficulty = difficulty_of(components);
  return s;
}

inline PreferenceLabel label_at(std::uint64_t i) { return kAllLabels[static_cast<std::size_t>(i % 3)]; }

// Vote counter reading "TIE is the strict majority" as more than half of all votes.
// For up to five criteria this agrees with the plurality reading used by the library.
inline PreferenceLabel vote_oracle(const std::vector<PreferenceLabel>& labels) {
  std::map<PreferenceLabel, int> n;
  for (auto l : labels) ++n[l];
  const int a = n[PreferenceLabel::kAWins], b = n[PreferenceLabel::kBWins], t = n[PreferenceLabel::kTie];
  if (2 * t > static_cast<int>(labels.size())) return PreferenceLabel::kTie;
  if (a == b) return PreferenceLabel::kTie;
  return a > b ? PreferenceLabel::kAWins : PreferenceLabel::kBWins;
}

// All label vectors of length k, in base-3 order.
inline std::vector<std::vector<PreferenceLabel>> all_label_vectors(std::size_t k) {
  std::vector<std::vector<PreferenceLabel>> out;
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < k; ++i) total *= 3;
  for (std::uint64_t code = 0; code < total; ++code) {
    std::vector<PreferenceLabel> v;
    auto c = code;
    for (std::size_t i = 0; i < k; ++i, c /= 3) v.push_back(label_at(c));
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace dyco::test
