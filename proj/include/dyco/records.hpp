#pragma once

// Canonical record format: one JSON object per line. Every record has exactly the keys
// id, prompt, image_a, image_b, criteria, criterion_labels, overall_label, difficulty,
// plus an optional "agreement" object written by aggregation. Files written by this
// toolkit start with a single header line {"manifest": {...}}.

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyco/core.hpp"
#include "dyco/numeric.hpp"

namespace dyco {

using json = nlohmann::json;

enum class ParseMode { kStrict, kLenient };

inline constexpr std::string_view kToolVersion = "0.1.0";

struct RunManifest {
  std::string command;
  json config = json::object();
  std::vector<std::string> input_digests;
  std::uint64_t seed = 0;
  std::string tool_version{kToolVersion};

  json to_json() const {
    return json{{"command", command},
                {"config", config},
                {"input_digests", input_digests},
                {"seed", seed},
                {"tool_version", tool_version}};
  }
};

inline std::string digest_bytes(std::string_view bytes) { return "fnv1a64:" + hex64(fnv1a64(bytes)); }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DomainError("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DomainError("write failed for " + path);
}

inline std::string digest_file(const std::string& path) { return digest_bytes(read_file(path)); }

namespace detail {

inline void check_keys(const json& obj, std::initializer_list<std::string_view> required,
                       std::initializer_list<std::string_view> optional, const std::string& path,
                       ParseMode mode) {
  if (!obj.is_object()) throw SchemaError(path.empty() ? "$" : path, "expected an object");
  auto field = [&](std::string_view k) { return path.empty() ? std::string(k) : path + "." + std::string(k); };
  for (auto k : required) {
    if (!obj.contains(std::string(k))) throw SchemaError(field(k), "missing key");
  }
  if (mode == ParseMode::kLenient) return;
  for (const auto& [k, v] : obj.items()) {
    const bool known = std::find(required.begin(), required.end(), k) != required.end() ||
                       std::find(optional.begin(), optional.end(), k) != optional.end();
    if (!known) throw SchemaError(field(k), "unknown key");
  }
}

inline const std::string& get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get_ref<const std::string&>();
}

inline PreferenceLabel get_label(const json& j, const std::string& path) {
  const auto& s = get_string(j, path);
  auto l = parse_label_code(s);
  if (!l) throw SchemaError(path, "expected \"A\", \"B\" or \"T\", got \"" + s + "\"");
  return *l;
}

}  // namespace detail

inline json to_json(const Prompt& p) {
  json comps = json::array();
  for (auto c : p.components) comps.push_back(std::string(to_string(c)));
  return json{{"id", p.id}, {"text", p.text}, {"components", comps}, {"topic", p.topic}};
}

inline json to_json(const ImageRef& img) {
  return json{{"id", img.id},
              {"source_model", img.source_model},
              {"features", img.features},
              {"uri", img.uri ? json(*img.uri) : json(nullptr)}};
}

inline json to_json(const Criterion& c) {
  return json{{"id", c.id},
              {"text", c.text},
              {"theme", c.theme ? json(std::string(to_string(*c.theme))) : json(nullptr)}};
}

inline json to_json(const Sample& s) {
  json criteria = json::array();
  for (const auto& c : s.criteria) criteria.push_back(to_json(c));
  json labels = json::object();
  for (const auto& [cid, l] : s.criterion_labels) labels[cid] = std::string(label_code(l));
  json j{{"id", s.id},
         {"prompt", to_json(s.prompt)},
         {"image_a", to_json(s.image_a)},
         {"image_b", to_json(s.image_b)},
         {"criteria", criteria},
         {"criterion_labels", labels},
         {"overall_label", std::string(label_code(s.overall_label))},
         {"difficulty", std::string(to_string(s.difficulty))}};
  if (!s.agreement.empty()) j["agreement"] = s.agreement;
  return j;
}

inline Prompt prompt_from_json(const json& j, const std::string& path, ParseMode mode) {
  detail::check_keys(j, {"id", "text", "components", "topic"}, {}, path, mode);
  Prompt p;
  p.id = detail::get_string(j["id"], path + ".id");
  p.text = detail::get_string(j["text"], path + ".text");
  p.topic = detail::get_string(j["topic"], path + ".topic");
  const auto& comps = j["components"];
  if (!comps.is_array()) throw SchemaError(path + ".components", "expected an array");
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto cpath = path + ".components[" + std::to_string(i) + "]";
    auto c = parse_component(detail::get_string(comps[i], cpath));
    if (!c) throw SchemaError(cpath, "unknown prompt component");
    if (!p.components.insert(*c).second) throw SchemaError(cpath, "duplicate component");
  }
  validate_prompt(p, path);
  return p;
}

inline ImageRef image_from_json(const json& j, const std::string& path, ParseMode mode) {
  detail::check_keys(j, {"id", "source_model", "features"}, {"uri"}, path, mode);
  ImageRef img;
  img.id = detail::get_string(j["id"], path + ".id");
  img.source_model = detail::get_string(j["source_model"], path + ".source_model");
  const auto& f = j["features"];
  if (!f.is_array()) throw SchemaError(path + ".features", "expected an array");
  img.features.reserve(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!f[i].is_number()) throw SchemaError(path + ".features[" + std::to_string(i) + "]", "expected a number");
    img.features.push_back(f[i].get<double>());
  }
  if (j.contains("uri") && !j["uri"].is_null()) img.uri = detail::get_string(j["uri"], path + ".uri");
  validate_image(img, path);
  return img;
}

inline Criterion criterion_from_json(const json& j, const std::string& path, ParseMode mode) {
  detail::check_keys(j, {"id", "text"}, {"theme"}, path, mode);
  Criterion c;
  c.id = detail::get_string(j["id"], path + ".id");
  c.text = detail::get_string(j["text"], path + ".text");
  if (j.contains("theme") && !j["theme"].is_null()) {
    auto t = parse_theme(detail::get_string(j["theme"], path + ".theme"));
    if (!t) throw SchemaError(path + ".theme", "unknown criterion theme");
    c.theme = *t;
  }
  validate_criterion(c, path);
  return c;
}

inline Sample sample_from_json(const json& j, ParseMode mode = ParseMode::kStrict) {
  detail::check_keys(j,
                     {"id", "prompt", "image_a", "image_b", "criteria", "criterion_labels", "overall_label",
                      "difficulty"},
                     {"agreement"}, "", mode);
  Sample s;
  s.id = detail::get_string(j["id"], "id");
  s.prompt = prompt_from_json(j["prompt"], "prompt", mode);
  s.image_a = image_from_json(j["image_a"], "image_a", mode);
  s.image_b = image_from_json(j["image_b"], "image_b", mode);
  const auto& crit = j["criteria"];
  if (!crit.is_array()) throw SchemaError("criteria", "expected an array");
  for (std::size_t i = 0; i < crit.size(); ++i) {
    s.criteria.push_back(criterion_from_json(crit[i], "criteria[" + std::to_string(i) + "]", mode));
  }
  const auto& labels = j["criterion_labels"];
  if (!labels.is_object()) throw SchemaError("criterion_labels", "expected an object");
  for (const auto& [cid, v] : labels.items()) {
    s.criterion_labels[cid] = detail::get_label(v, "criterion_labels." + cid);
  }
  s.overall_label = detail::get_label(j["overall_label"], "overall_label");
  const auto& dstr = detail::get_string(j["difficulty"], "difficulty");
  auto d = parse_difficulty(dstr);
  if (!d) throw SchemaError("difficulty", "expected easy, medium or hard");
  s.difficulty = *d;
  if (j.contains("agreement")) {
    const auto& ag = j["agreement"];
    if (!ag.is_object()) throw SchemaError("agreement", "expected an object");
    for (const auto& [k, v] : ag.items()) {
      if (!v.is_number()) throw SchemaError("agreement." + k, "expected a number");
      s.agreement[k] = v.get<double>();
    }
  }
  validate_sample(s);
  return s;
}

inline std::string to_record_line(const Sample& s) { return to_json(s).dump(); }

struct Dataset {
  std::optional<json> manifest;
  std::vector<Sample> samples;
};

/// Reads a record log. A leading {"manifest": ...} line is returned separately. Errors
/// carry the 1-based line number and the field path.
inline Dataset read_dataset(std::istream& in, ParseMode mode = ParseMode::kStrict) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> ids;
  std::optional<std::size_t> d_img;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DomainError("line " + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    if (ds.samples.empty() && !ds.manifest && j.is_object() && j.size() == 1 && j.contains("manifest")) {
      ds.manifest = j["manifest"];
      continue;
    }
    try {
      Sample s = sample_from_json(j, mode);
      if (!ids.insert(s.id).second) throw SchemaError("id", "duplicate sample id '" + s.id + "'");
      if (!d_img) d_img = s.image_a.features.size();
      if (s.image_a.features.size() != *d_img) {
        throw SchemaError("image_a.features", "feature length differs from the rest of the corpus");
      }
      ds.samples.push_back(std::move(s));
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(lineno) + ": " + e.field(),
                        std::string(e.what()).substr(e.field().size() + 2));
    }
  }
  return ds;
}

inline Dataset read_dataset_file(const std::string& path, ParseMode mode = ParseMode::kStrict) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);
  return read_dataset(in, mode);
}

inline void write_dataset(std::ostream& out, const std::vector<Sample>& samples,
                          const std::optional<json>& manifest = std::nullopt) {
  if (manifest) out << json{{"manifest", *manifest}}.dump() << '\n';
  for (const auto& s : samples) out << to_record_line(s) << '\n';
}

inline std::string dataset_to_string(const std::vector<Sample>& samples,
                                     const std::optional<json>& manifest = std::nullopt) {
  std::ostringstream ss;
  write_dataset(ss, samples, manifest);
  return ss.str();
}

}  // namespace dyco
