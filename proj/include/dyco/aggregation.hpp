#pragma once

// Annotation consensus: the criteria-formulation state machine and agreement-based
// label retention.
//
// Formulation rules:
//  - the first event is PROPOSE with exactly five criteria;
//  - ADD / DELETE / MODIFY edit the draft and reset the approval run to zero;
//  - APPROVE extends the run; the approver must not be the author of the latest edit
//    and must not already be in the current run;
//  - three approvals in a row finalize the draft, after which every event is rejected.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dyco/core.hpp"
#include "dyco/errors.hpp"
#include "dyco/records.hpp"

namespace dyco {

enum class CriteriaAction { kPropose, kAdd, kDelete, kModify, kApprove };

inline std::string_view to_string(CriteriaAction a) {
  switch (a) {
    case CriteriaAction::kPropose: return "PROPOSE";
    case CriteriaAction::kAdd: return "ADD";
    case CriteriaAction::kDelete: return "DELETE";
    case CriteriaAction::kModify: return "MODIFY";
    case CriteriaAction::kApprove: return "APPROVE";
  }
  return "APPROVE";
}

inline std::optional<CriteriaAction> parse_criteria_action(std::string_view s) {
  if (s == "PROPOSE") return CriteriaAction::kPropose;
  if (s == "ADD") return CriteriaAction::kAdd;
  if (s == "DELETE") return CriteriaAction::kDelete;
  if (s == "MODIFY") return CriteriaAction::kModify;
  if (s == "APPROVE") return CriteriaAction::kApprove;
  return std::nullopt;
}

inline constexpr std::size_t kProposalSize = 5;
inline constexpr int kApprovalsToFinalize = 3;

struct CriteriaEvent {
  std::string annotator_id;
  CriteriaAction action = CriteriaAction::kApprove;
  std::vector<Criterion> criteria;     // PROPOSE
  std::optional<Criterion> criterion;  // ADD, MODIFY (matched by id)
  std::string criterion_id;            // DELETE

  static CriteriaEvent propose(std::string who, std::vector<Criterion> cs) {
    return {std::move(who), CriteriaAction::kPropose, std::move(cs), std::nullopt, {}};
  }
  static CriteriaEvent add(std::string who, Criterion c) {
    return {std::move(who), CriteriaAction::kAdd, {}, std::move(c), {}};
  }
  static CriteriaEvent modify(std::string who, Criterion c) {
    return {std::move(who), CriteriaAction::kModify, {}, std::move(c), {}};
  }
  static CriteriaEvent remove(std::string who, std::string id) {
    return {std::move(who), CriteriaAction::kDelete, {}, std::nullopt, std::move(id)};
  }
  static CriteriaEvent approve(std::string who) { return {std::move(who), CriteriaAction::kApprove, {}, std::nullopt, {}}; }

  friend bool operator==(const CriteriaEvent&, const CriteriaEvent&) = default;
};

/// The part of a sample that exists before annotation.
struct SampleStub {
  std::string sample_id;
  Prompt prompt;
  ImageRef image_a;
  ImageRef image_b;

  friend bool operator==(const SampleStub&, const SampleStub&) = default;
};

enum class ConsensusState { kFormulating, kFinalized };

struct ConsensusTask {
  std::string task_id;
  SampleStub stub;
  std::vector<Criterion> criteria_draft;
  std::vector<CriteriaEvent> history;
  int consecutive_approvals = 0;
  std::vector<std::string> current_approvers;
  std::string last_editor;
  ConsensusState state = ConsensusState::kFormulating;

  bool finalized() const { return state == ConsensusState::kFinalized; }

  friend bool operator==(const ConsensusTask&, const ConsensusTask&) = default;
};

namespace detail {

inline auto find_draft(std::vector<Criterion>& draft, std::string_view id) {
  return std::find_if(draft.begin(), draft.end(), [&](const Criterion& c) { return c.id == id; });
}

inline void check_new_criterion(const Criterion& c) {
  if (c.id.empty() || c.text.empty()) throw ProtocolError("criterion needs a non-empty id and text");
  if (c.is_overall()) throw ProtocolError("criterion id 'overall' is reserved");
}

}  // namespace detail

/// Pure transition of the formulation state machine.
inline ConsensusTask apply_event(ConsensusTask task, const CriteriaEvent& ev) {
  if (task.finalized()) throw ProtocolError("task " + task.task_id + " is finalized");
  if (ev.annotator_id.empty()) throw ProtocolError("event without annotator id");
  const bool first = task.history.empty();
  if (first && ev.action != CriteriaAction::kPropose) throw ProtocolError("the first event must be PROPOSE");
  if (!first && ev.action == CriteriaAction::kPropose) throw ProtocolError("PROPOSE is only valid as the first event");

  auto& draft = task.criteria_draft;
  switch (ev.action) {
    case CriteriaAction::kPropose: {
      if (ev.criteria.size() != kProposalSize) {
        throw ProtocolError("PROPOSE must supply exactly 5 criteria, got " + std::to_string(ev.criteria.size()));
      }
      std::set<std::string> ids;
      for (const auto& c : ev.criteria) {
        detail::check_new_criterion(c);
        if (!ids.insert(c.id).second) throw ProtocolError("duplicate criterion id '" + c.id + "'");
      }
      draft = ev.criteria;
      break;
    }
    case CriteriaAction::kAdd: {
      if (!ev.criterion) throw ProtocolError("ADD without a criterion");
      detail::check_new_criterion(*ev.criterion);
      if (detail::find_draft(draft, ev.criterion->id) != draft.end()) {
        throw ProtocolError("criterion '" + ev.criterion->id + "' already exists");
      }
      if (draft.size() >= kMaxCriteria) throw ProtocolError("draft already holds 5 criteria");
      draft.push_back(*ev.criterion);
      break;
    }
    case CriteriaAction::kDelete: {
      auto it = detail::find_draft(draft, ev.criterion_id);
      if (it == draft.end()) throw ProtocolError("no criterion '" + ev.criterion_id + "' to delete");
      if (draft.size() == 1) throw ProtocolError("cannot delete the last criterion");
      draft.erase(it);
      break;
    }
    case CriteriaAction::kModify: {
      if (!ev.criterion) throw ProtocolError("MODIFY without a criterion");
      detail::check_new_criterion(*ev.criterion);
      auto it = detail::find_draft(draft, ev.criterion->id);
      if (it == draft.end()) throw ProtocolError("no criterion '" + ev.criterion->id + "' to modify");
      *it = *ev.criterion;
      break;
    }
    case CriteriaAction::kApprove: {
      if (ev.annotator_id == task.last_editor) {
        throw ProtocolError("annotator " + ev.annotator_id + " authored the latest edit");
      }
      if (std::find(task.current_approvers.begin(), task.current_approvers.end(), ev.annotator_id) !=
          task.current_approvers.end()) {
        throw ProtocolError("annotator " + ev.annotator_id + " already approved this draft");
      }
      task.current_approvers.push_back(ev.annotator_id);
      task.consecutive_approvals += 1;
      if (task.consecutive_approvals >= kApprovalsToFinalize) task.state = ConsensusState::kFinalized;
      task.history.push_back(ev);
      return task;
    }
  }
  task.last_editor = ev.annotator_id;
  task.consecutive_approvals = 0;
  task.current_approvers.clear();
  task.history.push_back(ev);
  return task;
}

inline ConsensusTask make_consensus_task(std::string task_id, SampleStub stub) {
  ConsensusTask t;
  t.task_id = std::move(task_id);
  t.stub = std::move(stub);
  return t;
}

/// Rebuilds a task by folding its history over a fresh task.
inline ConsensusTask replay(const std::string& task_id, const SampleStub& stub, const std::vector<CriteriaEvent>& events) {
  auto t = make_consensus_task(task_id, stub);
  for (const auto& ev : events) t = apply_event(std::move(t), ev);
  return t;
}

struct VoteSet {
  std::vector<std::pair<std::string, PreferenceLabel>> votes;
  std::string sample_id;
  std::string condition;  // criterion id or "overall"
};

struct ModalShare {
  std::optional<PreferenceLabel> label;  // nullopt when two labels share the top count
  int count = 0;
  int total = 0;
  double fraction() const { return total ? static_cast<double>(count) / total : 0.0; }
};

inline ModalShare modal_share(const VoteSet& vs) {
  if (vs.votes.empty()) throw DomainError("empty vote set");
  std::set<std::string> seen;
  int counts[3] = {0, 0, 0};
  for (const auto& [who, l] : vs.votes) {
    if (!seen.insert(who).second) throw DomainError("annotator " + who + " voted twice");
    ++counts[index_of(l)];
  }
  ModalShare m;
  m.total = static_cast<int>(vs.votes.size());
  int ties = 0;
  for (auto l : kAllLabels) {
    const int c = counts[index_of(l)];
    if (c > m.count) {
      m.count = c;
      m.label = l;
      ties = 0;
    } else if (c == m.count) {
      ++ties;
    }
  }
  if (ties > 0) m.label.reset();
  return m;
}

/// Returns the modal label when its share is strictly above the threshold. A split
/// between two modal labels is never retained, and a retained TIE means TIE itself was
/// the modal choice.
inline std::optional<PreferenceLabel> retain_label(const VoteSet& vs, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw DomainError("threshold must be in (0,1)");
  const auto m = modal_share(vs);
  if (!m.label) return std::nullopt;
  // Both sides are correctly rounded, so a share exactly equal to the threshold (7/10
  // against 0.7) compares equal and is rejected.
  if (static_cast<double>(m.count) / static_cast<double>(m.total) > threshold) return m.label;
  return std::nullopt;
}

// ---------------------------------------------------------------------------------------
// Event log: one JSON object per line,
//   {"task_id", "seq", "annotator_id", "action", "payload", "ts"}
// seq is a log-wide counter, so it is strictly increasing within every task.

struct LogEvent {
  std::string task_id;
  std::uint64_t seq = 0;
  std::string annotator_id;
  std::string action;
  nlohmann::json payload = nlohmann::json::object();
  std::int64_t ts = 0;  // milliseconds since the Unix epoch

  nlohmann::json to_json() const {
    return nlohmann::json{{"task_id", task_id}, {"seq", seq},         {"annotator_id", annotator_id},
                          {"action", action},   {"payload", payload}, {"ts", ts}};
  }

  static LogEvent from_json(const nlohmann::json& j) {
    detail::check_keys(j, {"task_id", "seq", "annotator_id", "action", "payload", "ts"}, {}, "", ParseMode::kStrict);
    LogEvent e;
    e.task_id = detail::get_string(j["task_id"], "task_id");
    if (!j["seq"].is_number_unsigned()) throw SchemaError("seq", "expected a non-negative integer");
    e.seq = j["seq"].get<std::uint64_t>();
    e.annotator_id = detail::get_string(j["annotator_id"], "annotator_id");
    e.action = detail::get_string(j["action"], "action");
    e.payload = j["payload"];
    if (!j["ts"].is_number_integer()) throw SchemaError("ts", "expected an integer");
    e.ts = j["ts"].get<std::int64_t>();
    return e;
  }

  friend bool operator==(const LogEvent&, const LogEvent&) = default;
};

inline std::string to_line(const LogEvent& e) { return e.to_json().dump(); }

/// Reads an event log, checking that seq increases strictly within each task. A final
/// line without a trailing newline is a torn append and is dropped when
/// `drop_torn_tail` is set.
inline std::vector<LogEvent> read_event_log(std::istream& in, bool drop_torn_tail = true) {
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<LogEvent> events;
  std::map<std::string, std::uint64_t> last_seq;
  std::size_t pos = 0;
  std::size_t lineno = 0;
  while (pos < all.size()) {
    const auto nl = all.find('\n', pos);
    if (nl == std::string::npos && drop_torn_tail) break;
    const auto end = nl == std::string::npos ? all.size() : nl;
    const std::string line = all.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (line.empty()) continue;
    LogEvent e;
    try {
      e = LogEvent::from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& ex) {
      throw DomainError("event log line " + std::to_string(lineno) + ": " + ex.what());
    } catch (const SchemaError& ex) {
      throw SchemaError("line " + std::to_string(lineno) + ": " + ex.field(), "invalid event");
    }
    auto [it, inserted] = last_seq.try_emplace(e.task_id, e.seq);
    if (!inserted) {
      if (e.seq <= it->second) {
        throw DomainError("event log line " + std::to_string(lineno) + ": seq not increasing for task " + e.task_id);
      }
      it->second = e.seq;
    }
    events.push_back(std::move(e));
  }
  return events;
}

inline nlohmann::json to_json(const SampleStub& s) {
  return nlohmann::json{
      {"sample_id", s.sample_id}, {"prompt", to_json(s.prompt)}, {"image_a", to_json(s.image_a)}, {"image_b", to_json(s.image_b)}};
}

inline SampleStub stub_from_json(const nlohmann::json& j, const std::string& path) {
  detail::check_keys(j, {"sample_id", "prompt", "image_a", "image_b"}, {}, path, ParseMode::kStrict);
  SampleStub s;
  s.sample_id = detail::get_string(j["sample_id"], path + ".sample_id");
  if (s.sample_id.empty()) throw SchemaError(path + ".sample_id", "must be non-empty");
  s.prompt = prompt_from_json(j["prompt"], path + ".prompt", ParseMode::kStrict);
  s.image_a = image_from_json(j["image_a"], path + ".image_a", ParseMode::kStrict);
  s.image_b = image_from_json(j["image_b"], path + ".image_b", ParseMode::kStrict);
  if (s.image_a.id == s.image_b.id) throw SchemaError(path + ".image_b.id", "image ids of a pair must differ");
  return s;
}

// Payload codecs for the formulation actions.

inline nlohmann::json criteria_event_payload(const CriteriaEvent& ev) {
  nlohmann::json p = nlohmann::json::object();
  switch (ev.action) {
    case CriteriaAction::kPropose: {
      p["criteria"] = nlohmann::json::array();
      for (const auto& c : ev.criteria) p["criteria"].push_back(to_json(c));
      break;
    }
    case CriteriaAction::kAdd:
    case CriteriaAction::kModify: p["criterion"] = to_json(*ev.criterion); break;
    case CriteriaAction::kDelete: p["criterion_id"] = ev.criterion_id; break;
    case CriteriaAction::kApprove: break;
  }
  return p;
}

/// Parses a formulation submission body {"action", ...}. Field paths in errors are
/// relative to the body.
inline CriteriaEvent criteria_event_from_body(const std::string& annotator, const nlohmann::json& body) {
  detail::check_keys(body, {"action"}, {"criteria", "criterion", "criterion_id"}, "", ParseMode::kStrict);
  auto action = parse_criteria_action(detail::get_string(body["action"], "action"));
  if (!action) throw SchemaError("action", "expected PROPOSE, ADD, DELETE, MODIFY or APPROVE");
  CriteriaEvent ev;
  ev.annotator_id = annotator;
  ev.action = *action;
  switch (*action) {
    case CriteriaAction::kPropose: {
      if (!body.contains("criteria") || !body["criteria"].is_array()) throw SchemaError("criteria", "expected an array");
      for (std::size_t i = 0; i < body["criteria"].size(); ++i) {
        ev.criteria.push_back(
            criterion_from_json(body["criteria"][i], "criteria[" + std::to_string(i) + "]", ParseMode::kStrict));
      }
      break;
    }
    case CriteriaAction::kAdd:
    case CriteriaAction::kModify:
      if (!body.contains("criterion")) throw SchemaError("criterion", "missing key");
      ev.criterion = criterion_from_json(body["criterion"], "criterion", ParseMode::kStrict);
      break;
    case CriteriaAction::kDelete:
      if (!body.contains("criterion_id")) throw SchemaError("criterion_id", "missing key");
      ev.criterion_id = detail::get_string(body["criterion_id"], "criterion_id");
      break;
    case CriteriaAction::kApprove: break;
  }
  return ev;
}

inline nlohmann::json criteria_event_body(const CriteriaEvent& ev) {
  auto p = criteria_event_payload(ev);
  p["action"] = std::string(to_string(ev.action));
  return p;
}

}  // namespace dyco
