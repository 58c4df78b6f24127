#pragma once

// Comparison-score objectives and a deterministic gradient-descent trainer for the
// linear head.
//
// Both objectives share one form over a margin m (m = s for the pairwise head,
// m = r_a - r_b for the pointwise head):
//
//   L(m) = -y log sigmoid(m + eps) - (1 - y) log(1 - sigmoid(m) + eps)
//
// with eps placed exactly as written. The literal form can dip to about -eps when
// y = 0 and m is very negative (1 - sigmoid(m) + eps > 1). LossConfig::clamped switches
// to the clamped variant -y log p - (1 - y) log(1 - p), p = clamp(sigmoid(m), eps, 1 - eps),
// which is never negative.
//
// Pointwise pathway: r_x = w . [x, 0, text] + b per image, so
// r_a - r_b = w_diff . (a - b) and neither the symmetric block, the text block nor the
// bias receives gradient under that objective.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dyco/core.hpp"
#include "dyco/errors.hpp"
#include "dyco/numeric.hpp"
#include "dyco/rng.hpp"
#include "dyco/scorers.hpp"

namespace dyco {

struct LossConfig {
  Objective objective = Objective::kPairwise;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;
  int epochs = 50;
  std::uint64_t seed = 0;
  bool shuffle = false;  // false: full-batch gradient descent; true: per-example SGD in seeded order
  bool clamped = false;

  void validate() const {
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be > 0");
    if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be > 0");
    if (epochs < 1) throw DomainError("epochs must be >= 1");
  }
};

namespace detail {

inline void check_loss_args(double m, double target, double epsilon) {
  if (!std::isfinite(m)) throw DomainError("loss: non-finite score");
  if (!(target >= 0.0 && target <= 1.0)) throw DomainError("loss: target outside [0,1]");
  if (!(epsilon > 0.0)) throw DomainError("loss: epsilon must be > 0");
}

inline double literal_loss(double m, double y, double eps) {
  return -y * log_sigmoid(m + eps) - (1.0 - y) * std::log(sigmoid(-m) + eps);
}

inline double clamped_loss(double m, double y, double eps) {
  const double p = std::clamp(sigmoid(m), eps, 1.0 - eps);
  const double q = std::clamp(sigmoid(-m), eps, 1.0 - eps);
  return -y * std::log(p) - (1.0 - y) * std::log(q);
}

}  // namespace detail

inline double pointwise_loss(double delta_r, double target, double epsilon = 1e-8, bool clamped = false) {
  detail::check_loss_args(delta_r, target, epsilon);
  return clamped ? detail::clamped_loss(delta_r, target, epsilon) : detail::literal_loss(delta_r, target, epsilon);
}

inline double pairwise_loss(double s, double target, double epsilon = 1e-8, bool clamped = false) {
  detail::check_loss_args(s, target, epsilon);
  return clamped ? detail::clamped_loss(s, target, epsilon) : detail::literal_loss(s, target, epsilon);
}

inline double objective_loss(Objective obj, double m, double target, double epsilon, bool clamped = false) {
  return obj == Objective::kPointwise ? pointwise_loss(m, target, epsilon, clamped)
                                      : pairwise_loss(m, target, epsilon, clamped);
}

/// dL/dm of either objective. The two objectives differ only in what m is, so the
/// derivative with respect to the margin is the same expression:
///   -y (1 - sigmoid(m + eps)) + (1 - y) sigmoid(m) sigmoid(-m) / (sigmoid(-m) + eps)
inline double loss_gradient(double m, double target, double epsilon, Objective /*objective*/,
                            bool clamped = false) {
  detail::check_loss_args(m, target, epsilon);
  if (clamped) {
    const double p = sigmoid(m);
    if (p <= epsilon || p >= 1.0 - epsilon) return 0.0;
    return p - target;
  }
  const double p = sigmoid(m);
  const double q = sigmoid(-m);
  return -target * sigmoid(-(m + epsilon)) + (1.0 - target) * p * q / (q + epsilon);
}

struct TrainingExample {
  ScoreRequest request;
  PreferenceLabel label = PreferenceLabel::kTie;
};

struct TrainResult {
  LinearScorer scorer;
  std::vector<double> epoch_loss;  // mean loss over the dataset after each epoch's update
};

namespace detail {

// Margin m = w . direction + bias_coef * b for one example.
struct Design {
  std::vector<double> direction;
  double bias_coef = 1.0;
  double target = 0.5;
};

inline std::vector<Design> build_design(const std::vector<TrainingExample>& data, const LinearScorer& init,
                                        Objective obj) {
  std::vector<Design> rows;
  rows.reserve(data.size());
  for (const auto& ex : data) {
    check_compatible(init, ex.request);
    Design d;
    d.target = label_to_target(ex.label);
    if (obj == Objective::kPairwise) {
      d.direction = assemble_features(ex.request, init.text_dim);
      d.bias_coef = 1.0;
    } else {
      auto fa = single_image_features(ex.request.image_a, ex.request, init.text_dim);
      const auto fb = single_image_features(ex.request.image_b, ex.request, init.text_dim);
      for (std::size_t i = 0; i < fa.size(); ++i) fa[i] -= fb[i];
      d.direction = std::move(fa);
      d.bias_coef = 0.0;
    }
    rows.push_back(std::move(d));
  }
  return rows;
}

inline double margin(const LinearScorer& w, const Design& d) { return dot(w.weights, d.direction) + d.bias_coef * w.bias; }

}  // namespace detail

/// Mean objective over a dataset, summed in pairwise order.
inline double dataset_loss(const LinearScorer& scorer, const std::vector<TrainingExample>& data,
                           const LossConfig& cfg) {
  const auto rows = detail::build_design(data, scorer, cfg.objective);
  std::vector<double> losses;
  losses.reserve(rows.size());
  for (const auto& r : rows) {
    losses.push_back(objective_loss(cfg.objective, detail::margin(scorer, r), r.target, cfg.epsilon, cfg.clamped));
  }
  return pairwise_sum(losses) / static_cast<double>(rows.size());
}

/// Trains the linear head. Full-batch gradient descent when cfg.shuffle is false,
/// per-example SGD over a seeded permutation (substream "training.shuffle") otherwise.
/// The returned scorer records cfg.seed and cfg.objective.
inline TrainResult train_linear_scorer(const std::vector<TrainingExample>& data, const LossConfig& cfg,
                                       const LinearScorer& init) {
  cfg.validate();
  if (data.empty()) throw DomainError("train: empty dataset");
  if (init.weights.size() != init.feature_dim()) throw DomainError("train: init weight length mismatch");
  const auto rows = detail::build_design(data, init, cfg.objective);
  const std::size_t dim = init.feature_dim();
  const double n = static_cast<double>(rows.size());

  TrainResult result{init, {}};
  LinearScorer& w = result.scorer;
  w.seed = cfg.seed;
  w.objective = cfg.objective;
  Rng order_rng(cfg.seed, "training.shuffle");
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (!cfg.shuffle) {
      std::vector<std::vector<double>> grads;
      std::vector<double> bias_grads;
      grads.reserve(rows.size());
      bias_grads.reserve(rows.size());
      for (const auto& r : rows) {
        const double g = loss_gradient(detail::margin(w, r), r.target, cfg.epsilon, cfg.objective, cfg.clamped);
        std::vector<double> gw(r.direction);
        for (double& x : gw) x *= g;
        grads.push_back(std::move(gw));
        bias_grads.push_back(g * r.bias_coef);
      }
      const auto total = pairwise_sum_rows(grads, dim);
      const double total_bias = pairwise_sum(bias_grads);
      for (std::size_t i = 0; i < dim; ++i) w.weights[i] -= cfg.learning_rate * total[i] / n;
      w.bias -= cfg.learning_rate * total_bias / n;
    } else {
      order_rng.shuffle(order);
      for (auto idx : order) {
        const auto& r = rows[idx];
        const double g = loss_gradient(detail::margin(w, r), r.target, cfg.epsilon, cfg.objective, cfg.clamped);
        for (std::size_t i = 0; i < dim; ++i) w.weights[i] -= cfg.learning_rate * g * r.direction[i];
        w.bias -= cfg.learning_rate * g * r.bias_coef;
      }
    }
    if (!all_finite(w.weights) || !std::isfinite(w.bias)) throw TrainingError(epoch, "weights became non-finite");
    std::vector<double> losses;
    losses.reserve(rows.size());
    for (const auto& r : rows) {
      const double m = detail::margin(w, r);
      if (!std::isfinite(m)) throw TrainingError(epoch, "score became non-finite");
      losses.push_back(objective_loss(cfg.objective, m, r.target, cfg.epsilon, cfg.clamped));
    }
    const double mean = pairwise_sum(losses) / n;
    if (!std::isfinite(mean)) throw TrainingError(epoch, "loss became non-finite");
    result.epoch_loss.push_back(mean);
  }
  return result;
}

/// One example per sample under the overall condition, plus one per labeled criterion
/// under the single-criterion condition when `include_single` is set.
inline std::vector<TrainingExample> training_examples(const std::vector<Sample>& samples, bool include_single = true,
                                                      PromptTemplate tpl = PromptTemplate::kStructured) {
  std::vector<TrainingExample> out;
  for (const auto& s : samples) {
    out.push_back({make_request(s, Condition::overall(), tpl), s.overall_label});
    if (!include_single) continue;
    for (const auto& c : s.criteria) {
      auto it = s.criterion_labels.find(c.id);
      if (it == s.criterion_labels.end()) continue;
      out.push_back({make_request(s, Condition::single(c.id), tpl), it->second});
    }
  }
  return out;
}

/// Small seeded Gaussian initialization (substream "training.init"); bias starts at 0.
inline LinearScorer random_init(int d_img, int text_dim, std::uint64_t seed, double scale = 0.01) {
  auto s = LinearScorer::zeros(d_img, text_dim, seed);
  Rng rng(seed, "training.init");
  for (double& x : s.weights) x = scale * rng.normal();
  return s;
}

inline nlohmann::json to_json(const LinearScorer& s) {
  return nlohmann::json{{"d_img", s.d_img},     {"text_dim", s.text_dim},
                        {"bias", s.bias},       {"weights", s.weights},
                        {"seed", s.seed},       {"objective", std::string(to_string(s.objective))}};
}

inline LinearScorer linear_scorer_from_json(const nlohmann::json& j) {
  for (const char* k : {"d_img", "text_dim", "bias", "weights", "seed", "objective"}) {
    if (!j.contains(k)) throw SchemaError(k, "missing key");
  }
  for (const auto& [k, v] : j.items()) {
    static const std::set<std::string> known = {"d_img", "text_dim", "bias", "weights", "seed", "objective", "manifest"};
    if (!known.contains(k)) throw SchemaError(k, "unknown key");
  }
  LinearScorer s;
  s.d_img = j["d_img"].get<int>();
  s.text_dim = j["text_dim"].get<int>();
  s.bias = j["bias"].get<double>();
  s.weights = j["weights"].get<std::vector<double>>();
  s.seed = j["seed"].get<std::uint64_t>();
  auto obj = parse_objective(j["objective"].get<std::string>());
  if (!obj) throw SchemaError("objective", "expected pointwise or pairwise");
  s.objective = *obj;
  if (s.d_img <= 0 || s.text_dim < 0) throw SchemaError("d_img", "invalid dimensions");
  if (s.weights.size() != s.feature_dim()) throw SchemaError("weights", "length must be 2*d_img + text_dim");
  if (!all_finite(s.weights) || !std::isfinite(s.bias)) throw SchemaError("weights", "non-finite value");
  return s;
}

}  // namespace dyco
