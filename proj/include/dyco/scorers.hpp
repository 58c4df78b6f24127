#pragma once

// Criterion-conditioned judges. A judge sees a prompt, an image pair and the resolved
// criterion texts, and returns either two pointwise scores or one comparison score.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dyco/core.hpp"
#include "dyco/hashing.hpp"
#include "dyco/numeric.hpp"

namespace dyco {

enum class PromptTemplate { kLegacy, kStructured };

inline std::string_view to_string(PromptTemplate t) { return t == PromptTemplate::kLegacy ? "legacy" : "structured"; }

struct ScoreRequest {
  Prompt prompt;
  ImageRef image_a;
  ImageRef image_b;
  Condition condition;
  std::vector<std::string> criteria_text;  // resolved texts, empty for the overall condition
  std::string instruction;
  std::string sample_id;  // set when the request comes from a dataset sample
};

struct ScorerOutput {
  enum class Kind { kPointwise, kPairwise };

  Kind kind = Kind::kPairwise;
  double r_a = 0.0;
  double r_b = 0.0;
  double s = 0.0;

  static ScorerOutput pointwise(double r_a, double r_b) { return {Kind::kPointwise, r_a, r_b, 0.0}; }
  static ScorerOutput pairwise(double s) { return {Kind::kPairwise, 0.0, 0.0, s}; }

  /// r_a - r_b for pointwise output, s for pairwise output.
  double margin() const { return kind == Kind::kPointwise ? r_a - r_b : s; }
};

inline std::string join_criteria(const std::vector<std::string>& texts, std::string_view sep = "; ") {
  std::string out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (i) out += sep;
    out += texts[i];
  }
  return out;
}

/// Text prompt for judges that only accept a caption: the criteria are appended as
/// "Critical Considerations". The overall condition sends the bare prompt.
inline std::string legacy_prompt(std::string_view prompt_text, const std::vector<std::string>& criteria) {
  std::string out = "Prompt: " + std::string(prompt_text) + ".";
  if (!criteria.empty()) out += " Critical Considerations: " + join_criteria(criteria) + ".";
  return out;
}

/// Instruction for judges that take both images and a structured criterion slot.
inline std::string structured_instruction(std::string_view prompt_text, std::string_view image_a,
                                          std::string_view image_b, const std::vector<std::string>& criteria) {
  const std::string crit = criteria.empty() ? std::string("overall") : join_criteria(criteria);
  return "The prompt is: " + std::string(prompt_text) + ", the image A is: " + std::string(image_a) +
         ", and the image B is: " + std::string(image_b) +
         ". Please compare the two images under the specified criterion: " + crit +
         ". Your output must be a single label: A if image A is better under the specified criterion, "
         "or B if image B is better.";
}

inline std::string image_handle(const ImageRef& img) { return img.uri.value_or(img.id); }

inline std::string render_instruction(PromptTemplate t, const ScoreRequest& req) {
  if (t == PromptTemplate::kLegacy) return legacy_prompt(req.prompt.text, req.criteria_text);
  return structured_instruction(req.prompt.text, image_handle(req.image_a), image_handle(req.image_b),
                                req.criteria_text);
}

inline std::vector<std::string> resolve_criteria_text(const Sample& s, const Condition& c) {
  validate_condition(s, c);
  std::vector<std::string> out;
  for (const auto& id : c.criterion_ids) out.push_back(s.find_criterion(id)->text);
  return out;
}

inline ScoreRequest make_request(const Sample& s, const Condition& c,
                                 PromptTemplate t = PromptTemplate::kStructured) {
  ScoreRequest req{s.prompt, s.image_a, s.image_b, c, resolve_criteria_text(s, c), "", s.id};
  req.instruction = render_instruction(t, req);
  return req;
}

// The text conditioning string: prompt, separator, then the criterion texts ("overall"
// when the condition has none).
inline std::string conditioning_text(const ScoreRequest& req) {
  const std::string crit = req.criteria_text.empty() ? std::string("overall") : join_criteria(req.criteria_text);
  return req.prompt.text + " | " + crit;
}

/// Pair feature map: [a - b, a + b, hash_embed(text, text_dim)].
/// Length 2*d_img + text_dim. The first block flips sign when the images are swapped and
/// the second is unchanged.
inline std::vector<double> assemble_features(const ScoreRequest& req, int text_dim) {
  const auto& a = req.image_a.features;
  const auto& b = req.image_b.features;
  if (a.size() != b.size()) throw DomainError("assemble_features: image feature lengths differ");
  if (text_dim < 0) throw DomainError("assemble_features: negative text_dim");
  std::vector<double> f;
  f.reserve(2 * a.size() + static_cast<std::size_t>(text_dim));
  for (std::size_t i = 0; i < a.size(); ++i) f.push_back(a[i] - b[i]);
  for (std::size_t i = 0; i < a.size(); ++i) f.push_back(a[i] + b[i]);
  if (text_dim > 0) {
    const auto t = hash_embed(conditioning_text(req), text_dim);
    f.insert(f.end(), t.begin(), t.end());
  }
  return f;
}

/// Single-image feature map used by the pointwise pathway: [x, 0, text]. The symmetric
/// block is zero, so r_a - r_b only sees the image-difference weights.
inline std::vector<double> single_image_features(const ImageRef& img, const ScoreRequest& req, int text_dim) {
  std::vector<double> f;
  f.reserve(2 * img.features.size() + static_cast<std::size_t>(text_dim));
  f.insert(f.end(), img.features.begin(), img.features.end());
  f.insert(f.end(), img.features.size(), 0.0);
  if (text_dim > 0) {
    const auto t = hash_embed(conditioning_text(req), text_dim);
    f.insert(f.end(), t.begin(), t.end());
  }
  return f;
}

enum class Objective { kPointwise, kPairwise };

inline std::string_view to_string(Objective o) { return o == Objective::kPointwise ? "pointwise" : "pairwise"; }

inline std::optional<Objective> parse_objective(std::string_view s) {
  if (s == "pointwise") return Objective::kPointwise;
  if (s == "pairwise") return Objective::kPairwise;
  return std::nullopt;
}

// Linear comparison head over assemble_features.
struct LinearScorer {
  int d_img = 0;
  int text_dim = 0;
  std::vector<double> weights;  // length 2*d_img + text_dim
  double bias = 0.0;
  std::uint64_t seed = 0;
  Objective objective = Objective::kPairwise;

  std::size_t feature_dim() const { return 2 * static_cast<std::size_t>(d_img) + static_cast<std::size_t>(text_dim); }

  static LinearScorer zeros(int d_img, int text_dim, std::uint64_t seed = 0) {
    LinearScorer s;
    s.d_img = d_img;
    s.text_dim = text_dim;
    s.seed = seed;
    s.weights.assign(s.feature_dim(), 0.0);
    return s;
  }

  friend bool operator==(const LinearScorer&, const LinearScorer&) = default;
};

inline void check_compatible(const LinearScorer& scorer, const ScoreRequest& req) {
  if (scorer.weights.size() != scorer.feature_dim()) throw DomainError("linear scorer: weight length mismatch");
  if (req.image_a.features.size() != static_cast<std::size_t>(scorer.d_img) ||
      req.image_b.features.size() != static_cast<std::size_t>(scorer.d_img)) {
    throw DomainError("linear scorer: expected image features of length " + std::to_string(scorer.d_img));
  }
}

/// s = w . assemble_features(req) + bias. The preference probability is sigmoid(s).
inline ScorerOutput score_pairwise(const LinearScorer& scorer, const ScoreRequest& req) {
  check_compatible(scorer, req);
  const auto f = assemble_features(req, scorer.text_dim);
  return ScorerOutput::pairwise(dot(scorer.weights, f) + scorer.bias);
}

inline ScorerOutput score_pointwise(const LinearScorer& scorer, const ScoreRequest& req) {
  check_compatible(scorer, req);
  const auto fa = single_image_features(req.image_a, req, scorer.text_dim);
  const auto fb = single_image_features(req.image_b, req, scorer.text_dim);
  return ScorerOutput::pointwise(dot(scorer.weights, fa) + scorer.bias, dot(scorer.weights, fb) + scorer.bias);
}

inline double preference_probability(const ScorerOutput& out) { return sigmoid(out.margin()); }

/// Ground-truth judge: s = +1, -1 or 0 for an A win, B win or tie under the condition.
inline ScorerOutput oracle_score(const Sample& sample, const Condition& condition) {
  switch (gold_label(sample, condition)) {
    case PreferenceLabel::kAWins: return ScorerOutput::pairwise(1.0);
    case PreferenceLabel::kBWins: return ScorerOutput::pairwise(-1.0);
    case PreferenceLabel::kTie: return ScorerOutput::pairwise(0.0);
  }
  return ScorerOutput::pairwise(0.0);
}

/// Three-way prediction from a score margin. Margins inside [-tie_band, tie_band] are
/// ties, so exactly equal pointwise scores are a tie at the default band of 0.
inline PreferenceLabel to_prediction(const ScorerOutput& out, double tie_band = 0.0) {
  if (!(tie_band >= 0.0)) throw DomainError("tie_band must be >= 0");
  const double m = out.margin();
  if (m > tie_band) return PreferenceLabel::kAWins;
  if (m < -tie_band) return PreferenceLabel::kBWins;
  return PreferenceLabel::kTie;
}

/// Pluggable judge. Implementations must be safe for concurrent score() calls.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual ScorerOutput score(const ScoreRequest& req) const = 0;
  virtual std::string name() const = 0;
};

class LinearJudge final : public Scorer {
 public:
  explicit LinearJudge(LinearScorer head) : head_(std::move(head)) {}

  ScorerOutput score(const ScoreRequest& req) const override {
    return head_.objective == Objective::kPointwise ? score_pointwise(head_, req) : score_pairwise(head_, req);
  }
  std::string name() const override { return "linear"; }
  const LinearScorer& head() const { return head_; }

 private:
  LinearScorer head_;
};

/// Looks the request's sample up by id and answers with its gold label.
class OracleJudge final : public Scorer {
 public:
  explicit OracleJudge(const std::vector<Sample>& samples) {
    for (const auto& s : samples) samples_.emplace(s.id, s);
  }

  ScorerOutput score(const ScoreRequest& req) const override {
    auto it = samples_.find(req.sample_id);
    if (it == samples_.end()) throw ScorerError("oracle: unknown sample '" + req.sample_id + "'");
    try {
      return oracle_score(it->second, req.condition);
    } catch (const DomainError& e) {
      throw ScorerError(std::string("oracle: ") + e.what());
    }
  }
  std::string name() const override { return "oracle"; }

 private:
  std::map<std::string, Sample> samples_;
};

}  // namespace dyco
