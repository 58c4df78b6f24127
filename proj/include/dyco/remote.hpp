#pragma once

// HTTP clients for external judges and criterion generators.
//
//   POST /v1/compare   {"prompt", "image_a", "image_b", "criteria", "mode", "template"}
//     -> {"kind":"pairwise","s"} | {"kind":"pointwise","r_a","r_b"} | {"kind":"label","label"}
//   POST /v1/criteria  {"prompt", "reference_candidates", "instruction"}
//     -> {"criteria": [{"id","text"} | string, ...]}

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "dyco/core.hpp"
#include "dyco/errors.hpp"
#include "dyco/numeric.hpp"
#include "dyco/pick.hpp"
#include "dyco/records.hpp"
#include "dyco/scorers.hpp"

namespace dyco {

struct RemoteConfig {
  std::string base_url = "http://127.0.0.1:8080";  // scheme://host:port
  Objective mode = Objective::kPairwise;
  PromptTemplate prompt_template = PromptTemplate::kStructured;
  int max_in_flight = 4;
  int timeout_seconds = 30;
  bool memoize = false;
};

/// Builds the /v1/compare body for a request. "prompt" carries the rendered template
/// text; the legacy template embeds the criteria there as well.
inline nlohmann::json compare_body(const ScoreRequest& req, Objective mode, PromptTemplate tpl) {
  nlohmann::json criteria = req.condition.setting == Setting::kOverall || req.criteria_text.empty()
                                ? nlohmann::json("overall")
                                : nlohmann::json(req.criteria_text);
  return nlohmann::json{{"prompt", render_instruction(tpl, req)},
                        {"image_a", image_handle(req.image_a)},
                        {"image_b", image_handle(req.image_b)},
                        {"criteria", criteria},
                        {"mode", std::string(to_string(mode))},
                        {"template", std::string(to_string(tpl))}};
}

/// Decodes a /v1/compare response. A label answer maps to a unit margin
/// (A -> +1, B -> -1, T -> 0) so that to_prediction with a zero band recovers it.
inline ScorerOutput parse_compare_response(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw ScorerError("remote: response lacks \"kind\"");
  }
  const auto kind = j["kind"].get<std::string>();
  auto number = [&](const char* k) {
    if (!j.contains(k) || !j[k].is_number()) throw ScorerError(std::string("remote: response lacks numeric \"") + k + "\"");
    const double v = j[k].get<double>();
    if (!std::isfinite(v)) throw ScorerError(std::string("remote: non-finite \"") + k + "\"");
    return v;
  };
  if (kind == "pairwise") return ScorerOutput::pairwise(number("s"));
  if (kind == "pointwise") return ScorerOutput::pointwise(number("r_a"), number("r_b"));
  if (kind == "label") {
    if (!j.contains("label") || !j["label"].is_string()) throw ScorerError("remote: response lacks \"label\"");
    auto l = parse_label_code(j["label"].get<std::string>());
    if (!l) throw ScorerError("remote: label must be A, B or T");
    return ScorerOutput::pairwise(label_to_target(*l) * 2.0 - 1.0);
  }
  throw ScorerError("remote: unknown kind '" + kind + "'");
}

namespace detail {

inline nlohmann::json post_json(const RemoteConfig& cfg, const std::string& path, const nlohmann::json& body) {
  httplib::Client cli(cfg.base_url);
  cli.set_connection_timeout(cfg.timeout_seconds, 0);
  cli.set_read_timeout(cfg.timeout_seconds, 0);
  cli.set_write_timeout(cfg.timeout_seconds, 0);
  auto res = cli.Post(path, body.dump(), "application/json");
  if (!res) throw ScorerError("remote: transport error: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw ScorerError("remote: HTTP " + std::to_string(res->status) + " from " + path);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ScorerError(std::string("remote: malformed body: ") + e.what());
  }
}

}  // namespace detail

class RemoteScorer final : public Scorer {
 public:
  explicit RemoteScorer(RemoteConfig cfg)
      : cfg_(std::move(cfg)),
        slots_(std::make_unique<std::counting_semaphore<1024>>(std::clamp(cfg_.max_in_flight, 1, 1024))) {}

  ScorerOutput score(const ScoreRequest& req) const override {
    const auto body = compare_body(req, cfg_.mode, cfg_.prompt_template);
    const auto text = body.dump();
    const auto key = fnv1a64(text);
    if (cfg_.memoize) {
      std::lock_guard lock(memo_mutex_);
      if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    }
    slots_->acquire();
    ScorerOutput out;
    try {
      out = parse_compare_response(detail::post_json(cfg_, "/v1/compare", body));
    } catch (...) {
      slots_->release();
      throw;
    }
    slots_->release();
    if (cfg_.memoize) {
      std::lock_guard lock(memo_mutex_);
      memo_.emplace(key, out);
    }
    return out;
  }

  std::string name() const override { return "remote"; }
  const RemoteConfig& config() const { return cfg_; }

 private:
  RemoteConfig cfg_;
  std::unique_ptr<std::counting_semaphore<1024>> slots_;
  mutable std::mutex memo_mutex_;
  mutable std::map<std::uint64_t, ScorerOutput> memo_;
};

class RemoteCriteriaProvider final : public CriteriaProvider {
 public:
  explicit RemoteCriteriaProvider(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

  std::vector<Criterion> generate(const CriteriaProviderRequest& req) override {
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& c : req.reference_candidates) refs.push_back(image_handle(c));
    const nlohmann::json body{{"prompt", req.prompt.text}, {"reference_candidates", refs}, {"instruction", req.instruction}};
    const auto res = detail::post_json(cfg_, "/v1/criteria", body);
    if (!res.is_object() || !res.contains("criteria") || !res["criteria"].is_array()) {
      throw ScorerError("criteria provider: response lacks a \"criteria\" array");
    }
    std::vector<Criterion> out;
    int k = 0;
    for (const auto& item : res["criteria"]) {
      ++k;
      if (item.is_string()) {
        out.push_back(Criterion{"c" + std::to_string(k), item.get<std::string>(), std::nullopt});
      } else if (item.is_object()) {
        out.push_back(criterion_from_json(item, "criteria[" + std::to_string(k - 1) + "]", ParseMode::kLenient));
      } else {
        throw ScorerError("criteria provider: criterion must be an object or a string");
      }
    }
    return out;
  }

 private:
  RemoteConfig cfg_;
};

}  // namespace dyco
