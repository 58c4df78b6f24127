#pragma once

// JSON-over-HTTP front end for Service.
//
//   GET  /v1/health
//   GET  /v1/tasks/next?annotator=<id>[&kind=<TaskKind>]   200 task | 204
//   POST /v1/tasks/<task_id>/submit  {"annotator_id", "body"}
//   GET  /v1/runs/<run_id>/progress[?annotator=<id>]
//   POST /v1/runs/<run_id>/export
//   POST /v1/runs                    run definition
//
// Errors: {"error": message, "field": path-or-null} with 400 (schema or protocol),
// 404 (unknown task or run) or 409 (stale lease, duplicate conflict, DONE task).

#include <filesystem>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "dyco/errors.hpp"
#include "dyco/records.hpp"
#include "dyco/service.hpp"

namespace dyco {

class HttpService {
 public:
  explicit HttpService(Service& service) : service_(service) { routes(); }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_to_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  bool is_running() const { return server_.is_running(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void error(httplib::Response& res, int status, const std::string& msg, nlohmann::json field = nullptr) {
    reply(res, status, nlohmann::json{{"error", msg}, {"field", std::move(field)}});
  }

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const nlohmann::json::parse_error& e) {
      error(res, 400, std::string("malformed JSON: ") + e.what(), "");
    } catch (const SchemaError& e) {
      error(res, 400, e.what(), e.field());
    } catch (const NotFoundError& e) {
      error(res, 404, e.what());
    } catch (const ConflictError& e) {
      error(res, 409, e.what());
    } catch (const ProtocolError& e) {
      error(res, 400, e.what());
    } catch (const DomainError& e) {
      error(res, 400, e.what());
    } catch (const std::exception& e) {
      error(res, 500, e.what());
    }
  }

  void routes() {
    server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"status", "ok"}, {"version", std::string(kToolVersion)}});
    });

    server_.Get("/v1/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto annotator = req.get_param_value("annotator");
        if (annotator.empty()) throw SchemaError("annotator", "query parameter is required");
        std::optional<TaskKind> kind;
        if (req.has_param("kind")) {
          kind = parse_task_kind(req.get_param_value("kind"));
          if (!kind) throw SchemaError("kind", "expected CRITERIA_FORMULATION, PAIRWISE_JUDGMENT or STUDY_RANKING");
        }
        auto task = service_.next_task(annotator, kind);
        if (!task) {
          res.status = 204;
          return;
        }
        reply(res, 200, *task);
      });
    });

    server_.Post(R"(/v1/tasks/(.+)/submit)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto task_id = req.matches[1].str();
        const auto j = nlohmann::json::parse(req.body);
        detail::check_keys(j, {"annotator_id", "body"}, {}, "", ParseMode::kStrict);
        const auto& annotator = detail::get_string(j["annotator_id"], "annotator_id");
        try {
          reply(res, 200, service_.submit(task_id, annotator, j["body"]));
        } catch (const SchemaError& e) {
          throw SchemaError(e.field().empty() ? "body" : "body." + e.field(),
                            std::string(e.what()).substr(e.field().size() + 2));
        }
      });
    });

    server_.Get(R"(/v1/runs/([^/]+)/progress)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::optional<std::string> annotator;
        if (req.has_param("annotator")) annotator = req.get_param_value("annotator");
        reply(res, 200, service_.progress(req.matches[1].str(), annotator));
      });
    });

    server_.Post(R"(/v1/runs/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto exp = service_.export_run(req.matches[1].str());
        if (const auto& dir = service_.config().data_dir) {
          const auto out = std::filesystem::path(*dir) / "exports" / exp.run_id;
          std::filesystem::create_directories(out);
          for (const auto& [name, contents] : exp.files) write_file((out / name).string(), contents);
          write_file((out / "report.json").string(), exp.report.dump(2) + '\n');
        }
        reply(res, 200, exp.to_json());
      });
    });

    server_.Post("/v1/runs", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 201, service_.create_run(nlohmann::json::parse(req.body))); });
    });
  }

  Service& service_;
  httplib::Server server_;
};

}  // namespace dyco
