#pragma once

// Event-sourced task queue for criteria formulation, pairwise judgment and blind study
// rankings. All durable state is a fold over the event log; leases live in memory only.
//
// Task ids:
//   <run>:<sample>            CRITERIA_FORMULATION
//   <run>:<sample>:judge      PAIRWISE_JUDGMENT, created when the formulation finalizes
//   <run>:<prompt>:<setting>  STUDY_RANKING

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dyco/aggregation.hpp"
#include "dyco/core.hpp"
#include "dyco/errors.hpp"
#include "dyco/metrics.hpp"
#include "dyco/numeric.hpp"
#include "dyco/records.hpp"
#include "dyco/rng.hpp"
#include "dyco/scorers.hpp"

namespace dyco {

enum class TaskKind { kCriteriaFormulation, kPairwiseJudgment, kStudyRanking };
enum class TaskStatus { kOpen, kInProgress, kDone };

inline std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kCriteriaFormulation: return "CRITERIA_FORMULATION";
    case TaskKind::kPairwiseJudgment: return "PAIRWISE_JUDGMENT";
    case TaskKind::kStudyRanking: return "STUDY_RANKING";
  }
  return "?";
}

inline std::optional<TaskKind> parse_task_kind(std::string_view s) {
  for (auto k : {TaskKind::kCriteriaFormulation, TaskKind::kPairwiseJudgment, TaskKind::kStudyRanking}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

inline std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::kOpen: return "OPEN";
    case TaskStatus::kInProgress: return "IN_PROGRESS";
    case TaskStatus::kDone: return "DONE";
  }
  return "?";
}

inline constexpr std::array<std::string_view, 4> kBlindLetters = {"A", "B", "C", "D"};
inline constexpr std::string_view kOursMethod = "ours";

struct ServiceConfig {
  std::optional<std::string> data_dir;  // nullopt: in-memory only
  std::int64_t lease_ms = 30LL * 60 * 1000;
  std::size_t snapshot_every = 50;
  std::function<std::int64_t()> clock;  // milliseconds; defaults to the system clock
};

struct ExportResult {
  std::string run_id;
  std::string kind;
  std::map<std::string, std::string> files;  // file name -> contents
  nlohmann::json report;

  nlohmann::json to_json() const {
    return nlohmann::json{{"run_id", run_id}, {"kind", kind}, {"files", files}, {"report", report}};
  }
};

class Service {
 public:
  explicit Service(ServiceConfig cfg = {}) : cfg_(std::move(cfg)) {
    if (!cfg_.clock) {
      cfg_.clock = [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
            .count();
      };
    }
    if (cfg_.lease_ms <= 0) throw DomainError("lease duration must be positive");
    if (cfg_.data_dir) load_from_disk();
  }

  ~Service() {
    try {
      if (cfg_.data_dir && !log_.empty()) write_snapshot();
    } catch (...) {
    }
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Rebuilds an in-memory service from an event sequence.
  static std::unique_ptr<Service> from_events(const std::vector<LogEvent>& events, ServiceConfig cfg = {}) {
    cfg.data_dir.reset();
    auto s = std::make_unique<Service>(std::move(cfg));
    for (const auto& e : events) s->replay_one(e);
    return s;
  }

  // -- operations ------------------------------------------------------------------------

  nlohmann::json create_run(const nlohmann::json& definition) {
    std::unique_lock lock(mutex_);
    if (!definition.is_object()) throw SchemaError("", "run definition must be an object");
    const auto id = definition.contains("run_id") ? detail::get_string(definition["run_id"], "run_id") : std::string{};
    LogEvent ev{id, last_seq_ + 1, "admin", "CREATE_RUN", definition, cfg_.clock()};
    auto commit = prepare(ev);
    append(ev);
    commit();
    after_commit();
    return nlohmann::json{{"run_id", id}, {"seq", ev.seq}, {"tasks", runs_.at(id).task_ids.size()}};
  }

  /// Leases the first eligible OPEN task in creation order, or the task this annotator
  /// already holds.
  std::optional<nlohmann::json> next_task(const std::string& annotator, std::optional<TaskKind> kind = std::nullopt) {
    if (annotator.empty()) throw SchemaError("annotator", "must be non-empty");
    std::unique_lock lock(mutex_);
    const auto now = cfg_.clock();
    expire_leases(now);
    for (const auto& t : tasks_) {
      if (kind && t.kind != *kind) continue;
      if (done(t)) continue;
      auto lease = leases_.find(t.task_id);
      if (lease != leases_.end()) {
        if (lease->second.annotator != annotator) continue;
        lease->second.expires_ms = now + cfg_.lease_ms;
        return view(t, lease->second);
      }
      if (!eligible(t, annotator)) continue;
      auto& l = leases_[t.task_id];
      l = Lease{annotator, now + cfg_.lease_ms};
      return view(t, l);
    }
    return std::nullopt;
  }

  /// Accepts a submission from the lease holder. An exact repeat of an accepted
  /// submission returns the original acknowledgment with "duplicate": true.
  nlohmann::json submit(const std::string& task_id, const std::string& annotator, const nlohmann::json& body) {
    if (annotator.empty()) throw SchemaError("annotator_id", "must be non-empty");
    std::unique_lock lock(mutex_);
    auto it = task_index_.find(task_id);
    if (it == task_index_.end()) throw NotFoundError("unknown task '" + task_id + "'");
    const auto key = idempotency_key(task_id, annotator, body);
    if (auto d = acks_.find(key); d != acks_.end()) {
      auto ack = d->second;
      ack["duplicate"] = true;
      return ack;
    }
    const Task& t = tasks_[it->second];
    if (done(t)) throw ConflictError("task '" + task_id + "' is DONE");
    const auto now = cfg_.clock();
    expire_leases(now);
    auto lease = leases_.find(task_id);
    if (lease == leases_.end() || lease->second.annotator != annotator) {
      throw ConflictError("stale lease: task '" + task_id + "' is not leased to " + annotator);
    }
    std::string action;
    switch (t.kind) {
      case TaskKind::kCriteriaFormulation:
        action = body.is_object() && body.contains("action") && body["action"].is_string()
                     ? body["action"].get<std::string>()
                     : std::string{};
        break;
      case TaskKind::kPairwiseJudgment: action = "JUDGE"; break;
      case TaskKind::kStudyRanking: action = "RANK"; break;
    }
    LogEvent ev{task_id, last_seq_ + 1, annotator, action, body, now};
    auto commit = prepare(ev);
    append(ev);
    commit();
    after_commit();
    leases_.erase(task_id);
    auto ack = acks_.at(key);
    ack["duplicate"] = false;
    return ack;
  }

  nlohmann::json progress(const std::string& run_id, const std::optional<std::string>& annotator = std::nullopt) {
    std::unique_lock lock(mutex_);
    expire_leases(cfg_.clock());
    const Run& run = find_run(run_id);
    std::map<std::string, std::size_t> by_status{{"OPEN", 0}, {"IN_PROGRESS", 0}, {"DONE", 0}};
    std::map<std::string, std::size_t> by_kind;
    std::size_t submissions = 0;
    for (const auto& tid : run.task_ids) {
      const Task& t = tasks_[task_index_.at(tid)];
      ++by_status[std::string(to_string(status(t)))];
      ++by_kind[std::string(to_string(t.kind))];
      submissions += t.submissions.size();
    }
    nlohmann::json out{{"run_id", run_id},   {"kind", run.kind},           {"tasks", run.task_ids.size()},
                       {"status", by_status}, {"by_kind", by_kind},        {"submissions", submissions}};
    if (annotator) {
      nlohmann::json mine = nlohmann::json::object();
      std::size_t count = 0;
      for (const auto& tid : run.task_ids) {
        const Task& t = tasks_[task_index_.at(tid)];
        const bool acted = t.acted_by.contains(*annotator);
        count += acted ? 1 : 0;
        if (t.kind == TaskKind::kStudyRanking) {
          mine[run.prompts[t.prompt_index].prompt.id][std::string(to_string(t.setting))] = acted;
        }
      }
      out["annotator"] = {{"annotator_id", *annotator}, {"tasks_acted_on", count}, {"prompts", mine}};
    }
    return out;
  }

  /// Export documents are a pure function of the event log.
  /// `threshold` overrides the run's retention threshold for annotation exports.
  ExportResult export_run(const std::string& run_id, std::optional<double> threshold = std::nullopt) const {
    std::shared_lock lock(mutex_);
    const Run& run = find_run(run_id);
    if (threshold && !(*threshold > 0.0 && *threshold < 1.0)) throw DomainError("threshold must be in (0,1)");
    return run.kind == "study" ? export_study(run) : export_annotation(run, threshold.value_or(run.threshold));
  }

  /// fnv1a64 of the canonical durable state (leases excluded).
  std::string state_digest() const {
    std::shared_lock lock(mutex_);
    return digest_bytes(state_json().dump());
  }

  std::vector<LogEvent> events() const {
    std::shared_lock lock(mutex_);
    return log_;
  }

  std::string log_text() const {
    std::shared_lock lock(mutex_);
    std::string out;
    for (const auto& e : log_) out += to_line(e) + '\n';
    return out;
  }

  std::optional<std::string> run_kind(const std::string& run_id) const {
    std::shared_lock lock(mutex_);
    auto it = runs_.find(run_id);
    if (it == runs_.end()) return std::nullopt;
    return it->second.kind;
  }

  std::vector<std::string> run_ids() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, r] : runs_) ids.push_back(id);
    return ids;
  }

  /// Writes the snapshot document now.
  void checkpoint() {
    std::unique_lock lock(mutex_);
    if (cfg_.data_dir) write_snapshot();
  }

  const ServiceConfig& config() const { return cfg_; }

 private:
  struct Lease {
    std::string annotator;
    std::int64_t expires_ms = 0;
  };

  struct StudyCandidate {
    std::string method;
    ImageRef image;
  };

  struct StudyPrompt {
    Prompt prompt;
    std::vector<StudyCandidate> by_letter;                         // A, B, C, D
    std::vector<std::pair<std::string, std::string>> duplicates;  // letter pairs showing one image
  };

  struct Submission {
    std::string annotator;
    nlohmann::json body;
  };

  struct Task {
    std::string task_id;
    std::string run_id;
    TaskKind kind = TaskKind::kCriteriaFormulation;
    std::optional<ConsensusTask> consensus;  // formulation
    SampleStub stub;                         // formulation and judgment
    std::vector<Criterion> criteria;         // judgment: finalized draft; ranking: setting criteria
    std::size_t prompt_index = 0;            // ranking
    Setting setting = Setting::kOverall;     // ranking
    std::size_t required = 1;                // submissions needed for DONE (judgment, ranking)
    std::vector<Submission> submissions;
    std::set<std::string> acted_by;
  };

  struct Run {
    std::string run_id;
    std::string kind;  // "annotation" | "study"
    std::uint64_t seed = 0;
    double threshold = 0.7;
    std::size_t per_task = 3;
    nlohmann::json definition;
    std::vector<std::string> task_ids;  // creation order
    std::vector<SampleStub> samples;    // annotation
    std::vector<StudyPrompt> prompts;   // study
  };

  // -- state fold --------------------------------------------------------------------------

  static std::string idempotency_key(const std::string& task_id, const std::string& annotator,
                                     const nlohmann::json& body) {
    return hex64(fnv1a64(task_id + '\n' + annotator + '\n' + body.dump()));
  }

  bool done(const Task& t) const {
    if (t.kind == TaskKind::kCriteriaFormulation) return t.consensus->finalized();
    return t.submissions.size() >= t.required;
  }

  TaskStatus status(const Task& t) const {
    if (done(t)) return TaskStatus::kDone;
    return leases_.contains(t.task_id) ? TaskStatus::kInProgress : TaskStatus::kOpen;
  }

  bool eligible(const Task& t, const std::string& annotator) const {
    if (t.kind == TaskKind::kCriteriaFormulation) {
      const auto& c = *t.consensus;
      if (c.history.empty()) return true;
      if (c.last_editor == annotator) return false;
      return std::find(c.current_approvers.begin(), c.current_approvers.end(), annotator) == c.current_approvers.end();
    }
    return !t.acted_by.contains(annotator);
  }

  void expire_leases(std::int64_t now) {
    for (auto it = leases_.begin(); it != leases_.end();) {
      it = it->second.expires_ms <= now ? leases_.erase(it) : std::next(it);
    }
  }

  const Run& find_run(const std::string& run_id) const {
    auto it = runs_.find(run_id);
    if (it == runs_.end()) throw NotFoundError("unknown run '" + run_id + "'");
    return it->second;
  }

  nlohmann::json ack_for(const Task& t, std::uint64_t seq) const {
    return nlohmann::json{{"task_id", t.task_id}, {"seq", seq}, {"status", done(t) ? "DONE" : "OPEN"}};
  }

  /// Validates an event against the current state and returns the mutation that applies
  /// it. Nothing is changed until the returned function runs.
  std::function<void()> prepare(const LogEvent& ev) {
    if (ev.seq <= last_seq_) throw DomainError("event seq " + std::to_string(ev.seq) + " is not increasing");
    if (ev.action == "CREATE_RUN") return prepare_run(ev);
    auto it = task_index_.find(ev.task_id);
    if (it == task_index_.end()) throw NotFoundError("unknown task '" + ev.task_id + "'");
    const std::size_t idx = it->second;
    const Task& t = tasks_[idx];
    if (done(t)) throw ConflictError("task '" + t.task_id + "' is DONE");
    const auto key = idempotency_key(ev.task_id, ev.annotator_id, ev.payload);
    if (acks_.contains(key)) throw ConflictError("submission already accepted");
    if (t.kind != TaskKind::kCriteriaFormulation && t.acted_by.contains(ev.annotator_id)) {
      throw ConflictError(ev.annotator_id + " already submitted a different body for '" + t.task_id + "'");
    }
    const auto seq = ev.seq;
    const auto who = ev.annotator_id;
    const auto body = ev.payload;

    switch (t.kind) {
      case TaskKind::kCriteriaFormulation: {
        const auto ce = criteria_event_from_body(who, body);
        if (std::string(to_string(ce.action)) != ev.action) throw SchemaError("action", "does not match the log action");
        auto next = apply_event(*t.consensus, ce);
        return [this, idx, seq, who, body, key, next = std::move(next)]() mutable {
          Task& task = tasks_[idx];
          task.consensus = std::move(next);
          task.submissions.push_back({who, body});
          task.acted_by.insert(who);
          if (task.consensus->finalized()) spawn_judgment(task);
          acks_[key] = ack_for(tasks_[idx], seq);
          last_seq_ = seq;
        };
      }
      case TaskKind::kPairwiseJudgment: {
        if (ev.action != "JUDGE") throw SchemaError("action", "expected JUDGE");
        validate_judgment(t, body);
        break;
      }
      case TaskKind::kStudyRanking: {
        if (ev.action != "RANK") throw SchemaError("action", "expected RANK");
        const Run& run = runs_.at(t.run_id);
        ranking_outcomes(run.prompts[t.prompt_index], body);
        break;
      }
    }
    return [this, idx, seq, who, body, key]() {
      Task& task = tasks_[idx];
      task.submissions.push_back({who, body});
      task.acted_by.insert(who);
      acks_[key] = ack_for(task, seq);
      last_seq_ = seq;
    };
  }

  void spawn_judgment(const Task& formulation) {
    Task j;
    j.task_id = formulation.task_id + ":judge";
    j.run_id = formulation.run_id;
    j.kind = TaskKind::kPairwiseJudgment;
    j.stub = formulation.stub;
    j.criteria = formulation.consensus->criteria_draft;
    j.required = runs_.at(formulation.run_id).per_task;
    add_task(std::move(j));
  }

  void add_task(Task t) {
    runs_.at(t.run_id).task_ids.push_back(t.task_id);
    task_index_.emplace(t.task_id, tasks_.size());
    tasks_.push_back(std::move(t));
  }

  static void validate_judgment(const Task& t, const nlohmann::json& body) {
    detail::check_keys(body, {"labels", "overall"}, {}, "", ParseMode::kStrict);
    if (!body["labels"].is_object()) throw SchemaError("labels", "expected an object");
    for (const auto& c : t.criteria) {
      if (!body["labels"].contains(c.id)) throw SchemaError("labels." + c.id, "missing label");
      detail::get_label(body["labels"][c.id], "labels." + c.id);
    }
    for (const auto& [cid, v] : body["labels"].items()) {
      const bool known = std::any_of(t.criteria.begin(), t.criteria.end(), [&](const Criterion& c) { return c.id == cid; });
      if (!known) throw SchemaError("labels." + cid, "not a finalized criterion of this task");
    }
    detail::get_label(body["overall"], "overall");
  }

  /// Validates a ranking body and converts it to pairwise outcomes over letters.
  static PairOutcomes ranking_outcomes(const StudyPrompt& sp, const nlohmann::json& body) {
    detail::check_keys(body, {"ranks"}, {}, "", ParseMode::kStrict);
    const auto& ranks = body["ranks"];
    if (!ranks.is_object()) throw SchemaError("ranks", "expected an object");
    std::vector<std::pair<std::string, int>> ranking;
    for (auto letter : kBlindLetters) {
      const std::string l(letter);
      if (!ranks.contains(l)) throw SchemaError("ranks." + l, "missing rank");
      if (!ranks[l].is_number_integer()) throw SchemaError("ranks." + l, "expected an integer rank");
      ranking.emplace_back(l, ranks[l].get<int>());
    }
    for (const auto& [k, v] : ranks.items()) {
      if (std::find(kBlindLetters.begin(), kBlindLetters.end(), k) == kBlindLetters.end()) {
        throw SchemaError("ranks." + k, "unknown candidate label");
      }
    }
    return rankings_to_pairwise(ranking, sp.duplicates);
  }

  std::function<void()> prepare_run(const LogEvent& ev) {
    const auto& def = ev.payload;
    if (!def.is_object()) throw SchemaError("", "run definition must be an object");
    if (!def.contains("kind")) throw SchemaError("kind", "missing key");
    const auto kind = detail::get_string(def["kind"], "kind");
    Run run;
    run.run_id = ev.task_id;
    if (run.run_id.empty() || run.run_id.find(':') != std::string::npos) {
      throw SchemaError("run_id", "must be non-empty and must not contain ':'");
    }
    if (runs_.contains(run.run_id)) throw ConflictError("run '" + run.run_id + "' already exists");
    run.kind = kind;
    run.definition = def;
    if (def.contains("seed")) {
      if (!def["seed"].is_number_unsigned()) throw SchemaError("seed", "expected a non-negative integer");
      run.seed = def["seed"].get<std::uint64_t>();
    }
    std::vector<Task> tasks;
    if (kind == "annotation") {
      detail::check_keys(def, {"run_id", "kind", "samples"}, {"seed", "threshold", "judgments_per_task"}, "",
                         ParseMode::kStrict);
      if (def.contains("threshold")) {
        if (!def["threshold"].is_number()) throw SchemaError("threshold", "expected a number");
        run.threshold = def["threshold"].get<double>();
        if (!(run.threshold > 0.0 && run.threshold < 1.0)) throw SchemaError("threshold", "must be in (0,1)");
      }
      run.per_task = read_count(def, "judgments_per_task", 3);
      if (!def["samples"].is_array() || def["samples"].empty()) throw SchemaError("samples", "expected a non-empty array");
      std::set<std::string> ids;
      for (std::size_t i = 0; i < def["samples"].size(); ++i) {
        auto stub = stub_from_json(def["samples"][i], "samples[" + std::to_string(i) + "]");
        if (stub.sample_id.find(':') != std::string::npos) {
          throw SchemaError("samples[" + std::to_string(i) + "].sample_id", "must not contain ':'");
        }
        if (!ids.insert(stub.sample_id).second) {
          throw SchemaError("samples[" + std::to_string(i) + "].sample_id", "duplicate sample id");
        }
        Task t;
        t.task_id = run.run_id + ":" + stub.sample_id;
        t.run_id = run.run_id;
        t.kind = TaskKind::kCriteriaFormulation;
        t.stub = stub;
        t.consensus = make_consensus_task(t.task_id, stub);
        tasks.push_back(std::move(t));
        run.samples.push_back(std::move(stub));
      }
    } else if (kind == "study") {
      detail::check_keys(def, {"run_id", "kind", "prompts"}, {"seed", "rankings_per_task"}, "", ParseMode::kStrict);
      run.per_task = read_count(def, "rankings_per_task", 3);
      if (!def["prompts"].is_array() || def["prompts"].empty()) throw SchemaError("prompts", "expected a non-empty array");
      std::set<std::string> prompt_ids;
      for (std::size_t i = 0; i < def["prompts"].size(); ++i) {
        const std::string path = "prompts[" + std::to_string(i) + "]";
        const auto& pj = def["prompts"][i];
        detail::check_keys(pj, {"prompt", "candidates", "settings"}, {}, path, ParseMode::kStrict);
        StudyPrompt sp;
        sp.prompt = prompt_from_json(pj["prompt"], path + ".prompt", ParseMode::kStrict);
        if (sp.prompt.id.find(':') != std::string::npos) throw SchemaError(path + ".prompt.id", "must not contain ':'");
        if (!prompt_ids.insert(sp.prompt.id).second) throw SchemaError(path + ".prompt.id", "duplicate prompt id");
        const auto& cj = pj["candidates"];
        if (!cj.is_array() || cj.size() != kBlindLetters.size()) {
          throw SchemaError(path + ".candidates", "expected exactly 4 candidates");
        }
        std::vector<StudyCandidate> cands;
        std::set<std::string> methods;
        for (std::size_t k = 0; k < cj.size(); ++k) {
          const std::string cpath = path + ".candidates[" + std::to_string(k) + "]";
          detail::check_keys(cj[k], {"method", "image"}, {}, cpath, ParseMode::kStrict);
          StudyCandidate c{detail::get_string(cj[k]["method"], cpath + ".method"),
                           image_from_json(cj[k]["image"], cpath + ".image", ParseMode::kStrict)};
          if (c.method.empty() || !methods.insert(c.method).second) {
            throw SchemaError(cpath + ".method", "methods must be non-empty and distinct");
          }
          cands.push_back(std::move(c));
        }
        if (!methods.contains(std::string(kOursMethod))) throw SchemaError(path + ".candidates", "no candidate from \"ours\"");
        // Blind letters: one seeded permutation per prompt, shared by all its settings.
        std::vector<std::size_t> perm = {0, 1, 2, 3};
        Rng rng(run.seed, "study.blind:" + sp.prompt.id);
        rng.shuffle(perm);
        for (auto p : perm) sp.by_letter.push_back(cands[p]);
        for (std::size_t x = 0; x < sp.by_letter.size(); ++x) {
          for (std::size_t y = x + 1; y < sp.by_letter.size(); ++y) {
            if (sp.by_letter[x].image.id == sp.by_letter[y].image.id) {
              sp.duplicates.emplace_back(std::string(kBlindLetters[x]), std::string(kBlindLetters[y]));
            }
          }
        }
        const auto& sj = pj["settings"];
        if (!sj.is_array() || sj.empty()) throw SchemaError(path + ".settings", "expected a non-empty array");
        std::set<Setting> seen;
        for (std::size_t k = 0; k < sj.size(); ++k) {
          const std::string spath = path + ".settings[" + std::to_string(k) + "]";
          detail::check_keys(sj[k], {"setting"}, {"criteria"}, spath, ParseMode::kStrict);
          auto setting = parse_setting(detail::get_string(sj[k]["setting"], spath + ".setting"));
          if (!setting) throw SchemaError(spath + ".setting", "expected overall, single or multi");
          if (!seen.insert(*setting).second) throw SchemaError(spath + ".setting", "setting listed twice");
          Task t;
          t.task_id = run.run_id + ":" + sp.prompt.id + ":" + std::string(to_string(*setting));
          t.run_id = run.run_id;
          t.kind = TaskKind::kStudyRanking;
          t.prompt_index = i;
          t.setting = *setting;
          t.required = run.per_task;
          if (sj[k].contains("criteria")) {
            for (std::size_t c = 0; c < sj[k]["criteria"].size(); ++c) {
              t.criteria.push_back(criterion_from_json(sj[k]["criteria"][c], spath + ".criteria[" + std::to_string(c) + "]",
                                                       ParseMode::kStrict));
            }
          }
          const std::size_t nc = t.criteria.size();
          if ((*setting == Setting::kOverall && nc != 0) || (*setting == Setting::kSingle && nc != 1) ||
              (*setting == Setting::kMulti && (nc < 2 || nc > kMaxCriteria))) {
            throw SchemaError(spath + ".criteria", "criterion count does not fit the setting");
          }
          tasks.push_back(std::move(t));
        }
        run.prompts.push_back(std::move(sp));
      }
    } else {
      throw SchemaError("kind", "expected \"annotation\" or \"study\"");
    }
    const auto seq = ev.seq;
    return [this, run = std::move(run), tasks = std::move(tasks), seq]() mutable {
      const auto id = run.run_id;
      runs_.emplace(id, std::move(run));
      for (auto& t : tasks) add_task(std::move(t));
      last_seq_ = seq;
    };
  }

  static std::size_t read_count(const nlohmann::json& def, const char* key, std::size_t fallback) {
    if (!def.contains(key)) return fallback;
    if (!def[key].is_number_unsigned() || def[key].get<std::uint64_t>() < 1) {
      throw SchemaError(key, "expected a positive integer");
    }
    return def[key].get<std::size_t>();
  }

  // -- exports ---------------------------------------------------------------------------

  nlohmann::json manifest_for(const Run& run, nlohmann::json config) const {
    config["run_id"] = run.run_id;
    RunManifest m;
    m.command = "export";
    m.config = std::move(config);
    m.input_digests = {digest_bytes(run.definition.dump())};
    m.seed = run.seed;
    return m.to_json();
  }

  ExportResult export_annotation(const Run& run, double threshold) const {
    std::vector<Sample> samples;
    std::size_t finalized = 0, vote_sets = 0, retained = 0;
    for (const auto& stub : run.samples) {
      const Task& f = tasks_[task_index_.at(run.run_id + ":" + stub.sample_id)];
      if (!f.consensus->finalized()) continue;
      ++finalized;
      const Task& j = tasks_[task_index_.at(f.task_id + ":judge")];
      if (j.submissions.empty()) continue;
      std::map<std::string, VoteSet> sets;
      for (const auto& c : j.criteria) sets[c.id] = VoteSet{{}, stub.sample_id, c.id};
      sets[std::string(kOverallId)] = VoteSet{{}, stub.sample_id, std::string(kOverallId)};
      for (const auto& sub : j.submissions) {
        for (const auto& c : j.criteria) {
          sets[c.id].votes.emplace_back(sub.annotator, *parse_label_code(sub.body["labels"][c.id].get<std::string>()));
        }
        sets[std::string(kOverallId)].votes.emplace_back(sub.annotator,
                                                          *parse_label_code(sub.body["overall"].get<std::string>()));
      }
      Sample s;
      s.id = stub.sample_id;
      s.prompt = stub.prompt;
      s.image_a = stub.image_a;
      s.image_b = stub.image_b;
      s.criteria = j.criteria;
      s.difficulty = difficulty_of(static_cast<int>(stub.prompt.components.size()));
      std::optional<PreferenceLabel> overall;
      for (const auto& [cid, vs] : sets) {
        ++vote_sets;
        const auto label = retain_label(vs, threshold);
        s.agreement[cid] = modal_share(vs).fraction();
        if (!label) continue;
        ++retained;
        if (cid == kOverallId) overall = label;
        else s.criterion_labels[cid] = *label;
      }
      if (!overall) continue;
      s.overall_label = *overall;
      samples.push_back(std::move(s));
    }
    ExportResult r;
    r.run_id = run.run_id;
    r.kind = run.kind;
    r.files["dataset.jsonl"] = dataset_to_string(samples, manifest_for(run, {{"threshold", threshold}}));
    r.report = {{"threshold", threshold},      {"samples_total", run.samples.size()},
                {"samples_finalized", finalized},  {"samples_exported", samples.size()},
                {"vote_sets", vote_sets},          {"vote_sets_retained", retained}};
    return r;
  }

  ExportResult export_study(const Run& run) const {
    struct Triple {
      std::uint64_t wins = 0, losses = 0, ties = 0;
    };
    // setting -> baseline -> counts; "total" aggregates all settings.
    std::map<std::string, std::map<std::string, Triple>> counts;
    std::string lines;
    for (const auto& tid : run.task_ids) {
      const Task& t = tasks_[task_index_.at(tid)];
      const StudyPrompt& sp = run.prompts[t.prompt_index];
      std::map<std::string, std::string> method_of;
      for (std::size_t k = 0; k < sp.by_letter.size(); ++k) method_of[std::string(kBlindLetters[k])] = sp.by_letter[k].method;
      const std::string setting(to_string(t.setting));
      for (const auto& sub : t.submissions) {
        const auto outcomes = ranking_outcomes(sp, sub.body);
        auto tally = [&](const std::string& baseline, auto field) {
          ++(counts[setting][baseline].*field);
          ++(counts["total"][baseline].*field);
        };
        for (const auto& [w, l] : outcomes.decisive) {
          if (method_of[w] == kOursMethod) tally(method_of[l], &Triple::wins);
          else if (method_of[l] == kOursMethod) tally(method_of[w], &Triple::losses);
        }
        for (const auto& [x, y] : outcomes.ties) {
          if (method_of[x] == kOursMethod) tally(method_of[y], &Triple::ties);
          else if (method_of[y] == kOursMethod) tally(method_of[x], &Triple::ties);
        }
        nlohmann::json ranks = nlohmann::json::object();
        for (const auto& [letter, rank] : sub.body["ranks"].items()) ranks[method_of[letter]] = rank;
        lines += nlohmann::json{{"task_id", t.task_id},
                                {"prompt_id", sp.prompt.id},
                                {"setting", setting},
                                {"annotator_id", sub.annotator},
                                {"ranks", ranks}}
                     .dump() +
                 '\n';
      }
    }
    nlohmann::json report = nlohmann::json::object();
    for (const auto& [setting, per] : counts) {
      for (const auto& [baseline, c] : per) {
        nlohmann::json e{{"wins", c.wins}, {"losses", c.losses}, {"ties", c.ties}};
        if (c.wins + c.losses + c.ties > 0) {
          const auto fit = bt_fit_two(c.wins, c.losses, c.ties, TiePolicy::kHalf);
          e["bt_gap"] = fit.gap;
          e["win_rate"] = fit.win_rate;
          e["clamped"] = fit.clamped;
        }
        report[setting][baseline] = e;
      }
    }
    ExportResult r;
    r.run_id = run.run_id;
    r.kind = run.kind;
    r.files["rankings.jsonl"] =
        nlohmann::json{{"manifest", manifest_for(run, {{"tie_policy", "half"}})}}.dump() + '\n' + lines;
    r.report = nlohmann::json{{"ours", std::string(kOursMethod)}, {"results", report}};
    return r;
  }

  // -- views -----------------------------------------------------------------------------

  nlohmann::json view(const Task& t, const Lease& lease) const {
    nlohmann::json payload;
    auto criteria_json = [](const std::vector<Criterion>& cs) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& c : cs) a.push_back(to_json(c));
      return a;
    };
    switch (t.kind) {
      case TaskKind::kCriteriaFormulation: {
        const auto& c = *t.consensus;
        payload = {{"sample", to_json(t.stub)},
                   {"criteria_draft", criteria_json(c.criteria_draft)},
                   {"consecutive_approvals", c.consecutive_approvals},
                   {"state", c.finalized() ? "FINALIZED" : "FORMULATING"},
                   {"proposal_size", kProposalSize}};
        break;
      }
      case TaskKind::kPairwiseJudgment:
        payload = {{"sample", to_json(t.stub)}, {"criteria", criteria_json(t.criteria)}};
        break;
      case TaskKind::kStudyRanking: {
        const auto& sp = runs_.at(t.run_id).prompts[t.prompt_index];
        nlohmann::json cands = nlohmann::json::array();
        for (std::size_t k = 0; k < sp.by_letter.size(); ++k) {
          cands.push_back({{"label", std::string(kBlindLetters[k])}, {"image", image_handle(sp.by_letter[k].image)}});
        }
        nlohmann::json dups = nlohmann::json::array();
        for (const auto& [x, y] : sp.duplicates) dups.push_back({x, y});
        payload = {{"prompt_id", sp.prompt.id},
                   {"prompt", sp.prompt.text},
                   {"setting", std::string(to_string(t.setting))},
                   {"criteria", criteria_json(t.criteria)},
                   {"candidates", cands},
                   {"duplicates", dups}};
        break;
      }
    }
    return nlohmann::json{{"task_id", t.task_id},         {"run_id", t.run_id},
                          {"kind", std::string(to_string(t.kind))}, {"status", "IN_PROGRESS"},
                          {"assigned_to", lease.annotator}, {"lease_expires_ms", lease.expires_ms},
                          {"payload", payload}};
  }

  nlohmann::json state_json() const {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& [id, r] : runs_) runs.push_back(r.definition);
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : tasks_) {
      nlohmann::json subs = nlohmann::json::array();
      for (const auto& s : t.submissions) subs.push_back({s.annotator, s.body});
      nlohmann::json e{{"task_id", t.task_id}, {"kind", std::string(to_string(t.kind))}, {"done", done(t)}, {"submissions", subs}};
      if (t.consensus) {
        nlohmann::json draft = nlohmann::json::array();
        for (const auto& c : t.consensus->criteria_draft) draft.push_back(to_json(c));
        e["draft"] = draft;
        e["approvals"] = t.consensus->consecutive_approvals;
      }
      tasks.push_back(e);
    }
    return nlohmann::json{{"last_seq", last_seq_}, {"runs", runs}, {"tasks", tasks}};
  }

  // -- persistence -----------------------------------------------------------------------

  std::filesystem::path log_path() const { return std::filesystem::path(*cfg_.data_dir) / "events.jsonl"; }
  std::filesystem::path snapshot_path() const { return std::filesystem::path(*cfg_.data_dir) / "snapshot.json"; }

  void replay_one(const LogEvent& e) {
    try {
      prepare(e)();
    } catch (const std::exception& ex) {
      throw DomainError("replay failed at seq " + std::to_string(e.seq) + ": " + ex.what());
    }
    log_.push_back(e);
  }

  void load_from_disk() {
    std::filesystem::create_directories(*cfg_.data_dir);
    std::optional<nlohmann::json> snapshot;
    if (std::filesystem::exists(snapshot_path())) snapshot = nlohmann::json::parse(read_file(snapshot_path().string()));
    if (std::filesystem::exists(log_path())) {
      const auto text = read_file(log_path().string());
      std::istringstream in(text);
      const auto events = read_event_log(in, true);
      // Cut a torn tail so the next append starts on a fresh line.
      const auto good = text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1;
      if (good != text.size()) std::filesystem::resize_file(log_path(), good);
      const std::uint64_t snap_seq = snapshot ? (*snapshot)["seq"].get<std::uint64_t>() : 0;
      bool verified = !snapshot;
      for (const auto& e : events) {
        replay_one(e);
        if (!verified && last_seq_ == snap_seq) {
          if (digest_bytes(state_json().dump()) != (*snapshot)["digest"].get<std::string>()) {
            throw DomainError("snapshot digest does not match the replayed event log at seq " + std::to_string(snap_seq));
          }
          verified = true;
        }
      }
      if (!verified) throw DomainError("snapshot refers to seq " + std::to_string(snap_seq) + " beyond the event log");
    } else if (snapshot && (*snapshot)["seq"].get<std::uint64_t>() != 0) {
      throw DomainError("snapshot present but event log missing");
    }
    out_.open(log_path(), std::ios::app | std::ios::binary);
    if (!out_) throw DomainError("cannot open event log for appending");
  }

  void append(const LogEvent& ev) {
    if (cfg_.data_dir) {
      out_ << to_line(ev) << '\n';
      out_.flush();
      if (!out_) throw DomainError("event log append failed");
    }
    log_.push_back(ev);
    if (cfg_.data_dir && cfg_.snapshot_every > 0 && log_.size() % cfg_.snapshot_every == 0) pending_snapshot_ = true;
  }

  void write_snapshot() {
    const nlohmann::json snap{{"seq", last_seq_}, {"digest", digest_bytes(state_json().dump())}, {"events", log_.size()}};
    const auto tmp = snapshot_path().string() + ".tmp";
    write_file(tmp, snap.dump() + '\n');
    std::filesystem::rename(tmp, snapshot_path());
    pending_snapshot_ = false;
  }

  void after_commit() {
    if (pending_snapshot_) write_snapshot();
  }

  ServiceConfig cfg_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Run> runs_;
  std::vector<Task> tasks_;
  std::map<std::string, std::size_t> task_index_;
  std::map<std::string, nlohmann::json> acks_;  // idempotency key -> acknowledgment
  std::map<std::string, Lease> leases_;
  std::vector<LogEvent> log_;
  std::uint64_t last_seq_ = 0;
  std::ofstream out_;
  bool pending_snapshot_ = false;
};

}  // namespace dyco
