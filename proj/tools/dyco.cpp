// dyco: command-line entry point.
//
// Option values resolve as flags > DYCO_<NAME> environment variables > --config JSON.
// The config file holds top-level keys for any subcommand and per-subcommand objects,
// e.g. {"seed": 7, "curate": {"target": 90}}. Exit codes: 0 success, 1 domain error,
// 2 usage error.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dyco.hpp"
#include "dyco/http_service.hpp"
#include "dyco/remote.hpp"
#include "dyco/service.hpp"

namespace {

using nlohmann::json;
using namespace dyco;

struct Options {
  // global
  std::string config;
  std::uint64_t seed = 0;
  std::string format = "json";
  std::size_t jobs = 1;
  std::string out;
  bool lenient = false;

  // inputs
  std::string in;
  std::string bench;
  std::string model;
  std::string log;
  std::string candidates;
  std::string data_dir;
  std::string run;
  std::string out_dir;

  // aggregate
  double threshold = 0.7;

  // curate
  std::size_t target = 1000;
  std::vector<double> mix = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double reversal = 0.354;
  double ambiguous = 0.047;
  double retention = 0.8;
  double tolerance = 0.05;

  // train
  std::string objective = "pairwise";
  int epochs = 50;
  double lr = 1e-3;
  double epsilon = 1e-8;
  int text_dim = 16;
  std::string init = "zeros";
  bool shuffle = false;
  bool clamped = false;
  bool overall_only = false;

  // evaluate / pick
  std::string scorer = "linear";
  std::string setting = "all";
  double tie_band = 0.0;
  std::string prompt_template = "structured";
  int max_subset = 5;
  std::size_t max_multi = 0;
  std::string remote_url;
  std::string remote_mode = "pairwise";
  int max_in_flight = 4;
  bool memo = false;
  std::string criteria_url;
  std::string tie_break = "h2h";

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  double lease_minutes = 30.0;
  std::vector<std::string> create_run;

  // synth
  std::string kind = "separable";
  std::size_t n = 200;
  int d_img = 8;
};

// Options whose values never enter an output manifest: paths (covered by input digests)
// and presentation or parallelism settings that do not change results.
const std::set<std::string> kUnrecorded = {"config", "format", "jobs",     "out",      "in",      "bench",
                                           "model",  "log",    "candidates", "data-dir", "out-dir", "help"};

void define(CLI::App& app, Options& o) {
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", o.config, "JSON config file (lowest precedence)");
  app.add_option("--seed", o.seed, "master seed for every random stream");
  app.add_option("--format", o.format, "report format")->check(CLI::IsMember({"json", "table"}));
  app.add_option("--jobs", o.jobs, "worker threads for evaluation and tournaments")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "output file (default: stdout)");
  app.add_flag("--lenient", o.lenient, "ignore unknown record keys instead of rejecting them");

  auto* agg = app.add_subcommand("aggregate", "event log -> retained dataset");
  agg->add_option("--log", o.log, "event log (JSONL)")->required();
  agg->add_option("--run", o.run, "annotation run id (default: all annotation runs)");
  agg->add_option("--threshold", o.threshold, "strict retention threshold");

  auto* cur = app.add_subcommand("curate", "dataset -> benchmark");
  cur->add_option("--in", o.in, "dataset (JSONL)")->required();
  cur->add_option("--target", o.target, "benchmark size");
  cur->add_option("--mix", o.mix, "easy,medium,hard target shares")->expected(3)->delimiter(',');
  cur->add_option("--reversal", o.reversal, "target share of preference-reversal pairs");
  cur->add_option("--ambiguous", o.ambiguous, "target share of close-agreement pairs");
  cur->add_option("--retention", o.retention, "strict agreement threshold for eligibility");
  cur->add_option("--tolerance", o.tolerance, "allowed deviation of every share");

  auto* st = app.add_subcommand("stats", "corpus statistics");
  st->add_option("--in", o.in, "dataset (JSONL)")->required();

  auto* tr = app.add_subcommand("train", "dataset -> linear scorer");
  tr->add_option("--in", o.in, "dataset (JSONL)")->required();
  tr->add_option("--objective", o.objective)->check(CLI::IsMember({"pairwise", "pointwise"}));
  tr->add_option("--epochs", o.epochs)->check(CLI::PositiveNumber);
  tr->add_option("--lr", o.lr);
  tr->add_option("--epsilon", o.epsilon);
  tr->add_option("--text-dim", o.text_dim, "hashed text features")->check(CLI::NonNegativeNumber);
  tr->add_option("--init", o.init)->check(CLI::IsMember({"zeros", "random"}));
  tr->add_flag("--shuffle", o.shuffle, "per-example SGD in seeded order instead of full-batch descent");
  tr->add_flag("--clamped", o.clamped, "clamp probabilities inside the loss");
  tr->add_flag("--overall-only", o.overall_only, "train on overall labels only");

  auto add_scorer = [&](CLI::App* sub) {
    sub->add_option("--scorer", o.scorer)->check(CLI::IsMember({"linear", "oracle", "remote"}));
    sub->add_option("--model", o.model, "scorer file from `train`");
    sub->add_option("--tie-band", o.tie_band, "|margin| <= band predicts a tie")->check(CLI::NonNegativeNumber);
    sub->add_option("--template", o.prompt_template)->check(CLI::IsMember({"legacy", "structured"}));
    sub->add_option("--remote-url", o.remote_url, "base URL of a remote judge");
    sub->add_option("--remote-mode", o.remote_mode)->check(CLI::IsMember({"pairwise", "pointwise"}));
    sub->add_option("--max-in-flight", o.max_in_flight)->check(CLI::PositiveNumber);
    sub->add_flag("--memo", o.memo, "memoize identical remote requests");
  };

  auto* ev = app.add_subcommand("evaluate", "benchmark + scorer -> reports");
  ev->add_option("--bench", o.bench, "benchmark (JSONL)")->required();
  ev->add_option("--setting", o.setting)->check(CLI::IsMember({"single", "multi", "overall", "all"}));
  ev->add_option("--max-subset", o.max_subset, "largest criterion subset in the multi setting")->check(CLI::Range(2, 5));
  ev->add_option("--max-multi", o.max_multi, "cap on multi instances per sample (0: all)");
  add_scorer(ev);

  auto* pk = app.add_subcommand("pick", "candidate file + scorer -> selection report");
  pk->add_option("--candidates", o.candidates, "candidate file (JSON)")->required();
  pk->add_option("--criteria-url", o.criteria_url, "criteria generator used when the file has no criteria");
  pk->add_option("--tie-break", o.tie_break)->check(CLI::IsMember({"h2h", "index"}));
  add_scorer(pk);

  auto* sv = app.add_subcommand("serve", "annotation and study service");
  sv->add_option("--host", o.host);
  sv->add_option("--port", o.port)->check(CLI::Range(0, 65535));
  sv->add_option("--data-dir", o.data_dir, "event log and snapshot directory (default: in-memory)");
  sv->add_option("--lease-minutes", o.lease_minutes)->check(CLI::PositiveNumber);
  sv->add_option("--create-run", o.create_run, "run definition files to register at startup");

  auto* ex = app.add_subcommand("export", "replay a data directory and write run exports");
  ex->add_option("--data-dir", o.data_dir)->required();
  ex->add_option("--run", o.run)->required();
  ex->add_option("--out-dir", o.out_dir, "destination directory")->required();

  auto* sy = app.add_subcommand("synth", "write a synthetic corpus or run definition");
  sy->add_option("--kind", o.kind)
      ->check(CLI::IsMember({"separable", "pool", "profile", "candidates", "annotation-run", "study-run"}));
  sy->add_option("--n", o.n, "number of samples, candidates or prompts");
  sy->add_option("--d-img", o.d_img)->check(CLI::PositiveNumber);
}

std::string env_name(const std::string& opt) {
  std::string e = "DYCO_";
  for (char c : opt) e += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return e;
}

std::vector<std::string> json_values(const json& v) {
  std::vector<std::string> out;
  auto one = [](const json& x) {
    if (x.is_string()) return x.get<std::string>();
    if (x.is_boolean()) return std::string(x.get<bool>() ? "true" : "false");
    return x.dump();
  };
  if (v.is_array()) {
    for (const auto& x : v) out.push_back(one(x));
  } else {
    out.push_back(one(v));
  }
  return out;
}

bool truthy(const std::string& s) { return s == "1" || s == "true" || s == "yes" || s == "on"; }

/// Appends environment and config values for every option the command line left unset.
std::vector<std::string> layered_args(CLI::App& probe, const Options& o, int argc, char** argv) {
  probe.parse(argc, argv);
  json cfg = json::object();
  if (!o.config.empty()) {
    cfg = json::parse(read_file(o.config));
    if (!cfg.is_object()) throw CLI::ValidationError("--config", "config file must hold a JSON object");
  }
  std::vector<std::string> args(argv + 1, argv + argc);
  auto layer = [&](const CLI::App* scope, const std::string& section) {
    for (const CLI::Option* opt : scope->get_options()) {
      const std::string name = opt->get_single_name();
      if (opt->count() > 0 || name.empty() || name == "help" || name == "config") continue;
      std::optional<std::vector<std::string>> values;
      if (const char* e = std::getenv(env_name(name).c_str())) {
        values = std::vector<std::string>{e};
      } else {
        std::string under = name;
        std::replace(under.begin(), under.end(), '-', '_');
        auto lookup = [&](const json& j) -> std::optional<std::vector<std::string>> {
          for (const auto& key : {name, under}) {
            if (j.contains(key) && !j[key].is_object()) return json_values(j[key]);
          }
          return std::nullopt;
        };
        if (!section.empty() && cfg.contains(section) && cfg[section].is_object()) values = lookup(cfg[section]);
        if (!values) values = lookup(cfg);
      }
      if (!values) continue;
      if (opt->get_items_expected_max() == 0) {
        if (truthy(values->front())) args.push_back("--" + name);
        continue;
      }
      args.push_back("--" + name);
      args.insert(args.end(), values->begin(), values->end());
    }
  };
  layer(&probe, "");
  for (const CLI::App* sub : probe.get_subcommands()) layer(sub, sub->get_name());
  return args;
}

json recorded_config(const CLI::App& app) {
  json cfg = json::object();
  auto collect = [&](const CLI::App* scope) {
    for (const CLI::Option* opt : scope->get_options()) {
      const std::string name = opt->get_single_name();
      if (name.empty() || kUnrecorded.contains(name)) continue;
      std::vector<std::string> vals = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
      if (vals.empty()) {
        const auto d = opt->get_default_str();
        if (d.empty()) continue;
        vals = {d};
      }
      cfg[name] = vals.size() == 1 ? json(vals.front()) : json(vals);
    }
  };
  collect(&app);
  for (const CLI::App* sub : app.get_subcommands()) collect(sub);
  return cfg;
}

struct Context {
  Options o;
  const CLI::App* app = nullptr;
  std::string command;

  ParseMode mode() const { return o.lenient ? ParseMode::kLenient : ParseMode::kStrict; }

  RunManifest manifest(const std::vector<std::string>& inputs) const {
    RunManifest m;
    m.command = command;
    m.config = recorded_config(*app);
    for (const auto& p : inputs) m.input_digests.push_back(digest_file(p));
    m.seed = o.seed;
    return m;
  }

  void emit(const std::string& text) const {
    if (o.out.empty()) {
      std::cout << text;
    } else {
      write_file(o.out, text);
    }
  }
};

std::unique_ptr<Scorer> make_scorer(const Context& ctx, const std::vector<Sample>* oracle_samples) {
  const auto& o = ctx.o;
  if (o.scorer == "oracle") {
    if (!oracle_samples) throw DomainError("the oracle scorer needs labeled samples");
    return std::make_unique<OracleJudge>(*oracle_samples);
  }
  if (o.scorer == "remote") {
    if (o.remote_url.empty()) throw DomainError("--scorer remote requires --remote-url");
    RemoteConfig rc;
    rc.base_url = o.remote_url;
    rc.mode = *parse_objective(o.remote_mode);
    rc.prompt_template = o.prompt_template == "legacy" ? PromptTemplate::kLegacy : PromptTemplate::kStructured;
    rc.max_in_flight = o.max_in_flight;
    rc.memoize = o.memo;
    return std::make_unique<RemoteScorer>(rc);
  }
  if (o.model.empty()) throw DomainError("--scorer linear requires --model");
  return std::make_unique<LinearJudge>(linear_scorer_from_json(json::parse(read_file(o.model))));
}

int cmd_aggregate(Context& ctx) {
  std::ifstream in(ctx.o.log);
  if (!in) throw DomainError("cannot open " + ctx.o.log);
  const auto svc = Service::from_events(read_event_log(in, true));
  std::vector<std::string> runs;
  if (!ctx.o.run.empty()) {
    runs.push_back(ctx.o.run);
  } else {
    for (const auto& id : svc->run_ids()) {
      if (svc->run_kind(id) == "annotation") runs.push_back(id);
    }
  }
  std::vector<Sample> samples;
  for (const auto& id : runs) {
    if (svc->run_kind(id) != "annotation") throw DomainError("run '" + id + "' is not an annotation run");
    const auto exp = svc->export_run(id, ctx.o.threshold);
    std::istringstream ds(exp.files.at("dataset.jsonl"));
    for (auto& s : read_dataset(ds).samples) samples.push_back(std::move(s));
  }
  ctx.emit(dataset_to_string(samples, ctx.manifest({ctx.o.log}).to_json()));
  return 0;
}

int cmd_curate(Context& ctx) {
  const auto ds = read_dataset_file(ctx.o.in, ctx.mode());
  CurationConfig cfg;
  cfg.target_pairs = ctx.o.target;
  if (ctx.o.mix.size() != 3) throw DomainError("--mix needs three shares");
  cfg.difficulty_mix = {ctx.o.mix[0], ctx.o.mix[1], ctx.o.mix[2]};
  cfg.reversal_share = ctx.o.reversal;
  cfg.ambiguous_share = ctx.o.ambiguous;
  cfg.retention_threshold = ctx.o.retention;
  cfg.tolerance = ctx.o.tolerance;
  cfg.seed = ctx.o.seed;
  const auto bench = curate(ds.samples, cfg);
  ctx.emit(dataset_to_string(bench, ctx.manifest({ctx.o.in}).to_json()));
  return 0;
}

int cmd_stats(Context& ctx) {
  const auto ds = read_dataset_file(ctx.o.in, ctx.mode());
  const auto st = corpus_stats(ds.samples);
  if (ctx.o.format == "table") {
    ctx.emit(stats_table(st));
  } else {
    ctx.emit(json{{"manifest", ctx.manifest({ctx.o.in}).to_json()}, {"stats", st.to_json()}}.dump(2) + '\n');
  }
  return 0;
}

int cmd_train(Context& ctx) {
  const auto ds = read_dataset_file(ctx.o.in, ctx.mode());
  if (ds.samples.empty()) throw DomainError("train: dataset has no samples");
  LossConfig cfg;
  cfg.objective = *parse_objective(ctx.o.objective);
  cfg.learning_rate = ctx.o.lr;
  cfg.epsilon = ctx.o.epsilon;
  cfg.epochs = ctx.o.epochs;
  cfg.seed = ctx.o.seed;
  cfg.shuffle = ctx.o.shuffle;
  cfg.clamped = ctx.o.clamped;
  const int d_img = static_cast<int>(ds.samples.front().image_a.features.size());
  const auto init = ctx.o.init == "random" ? random_init(d_img, ctx.o.text_dim, ctx.o.seed)
                                           : LinearScorer::zeros(d_img, ctx.o.text_dim, ctx.o.seed);
  const auto result = train_linear_scorer(training_examples(ds.samples, !ctx.o.overall_only), cfg, init);
  auto j = to_json(result.scorer);
  j["manifest"] = ctx.manifest({ctx.o.in}).to_json();
  ctx.emit(j.dump(2) + '\n');
  if (!result.epoch_loss.empty()) {
    std::cerr << "trained " << cfg.epochs << " epochs, final loss " << result.epoch_loss.back() << '\n';
  }
  return 0;
}

int cmd_evaluate(Context& ctx) {
  const auto ds = read_dataset_file(ctx.o.bench, ctx.mode());
  const auto scorer = make_scorer(ctx, &ds.samples);
  EvalOptions opt;
  opt.tie_band = ctx.o.tie_band;
  opt.prompt_template = ctx.o.prompt_template == "legacy" ? PromptTemplate::kLegacy : PromptTemplate::kStructured;
  opt.instances.max_subset = ctx.o.max_subset;
  opt.instances.max_multi_per_sample = ctx.o.max_multi;
  opt.instances.seed = ctx.o.seed;
  opt.jobs = ctx.o.jobs;
  std::vector<Setting> settings;
  if (ctx.o.setting == "all") settings = {Setting::kSingle, Setting::kMulti, Setting::kOverall};
  else settings = {*parse_setting(ctx.o.setting)};
  std::vector<EvalReport> reports;
  json errors = json::array();
  for (auto s : settings) {
    auto outcome = evaluate_setting(ds.samples, *scorer, s, opt);
    for (const auto& e : outcome.errors) {
      errors.push_back({{"setting", std::string(to_string(s))}, {"sample_id", e.sample_id}, {"error", e.message}});
    }
    reports.push_back(outcome.report);
  }
  if (ctx.o.format == "table") {
    ctx.emit(reports_table(reports));
  } else {
    std::vector<std::string> inputs = {ctx.o.bench};
    if (ctx.o.scorer == "linear") inputs.push_back(ctx.o.model);
    json rs = json::array();
    for (const auto& r : reports) rs.push_back(r.to_json());
    ctx.emit(json{{"manifest", ctx.manifest(inputs).to_json()}, {"reports", rs}, {"errors", errors}}.dump(2) + '\n');
  }
  if (!errors.empty()) std::cerr << errors.size() << " instance(s) failed to score\n";
  return 0;
}

int cmd_pick(Context& ctx) {
  const auto file = candidate_file_from_json(json::parse(read_file(ctx.o.candidates)), ctx.mode());
  const auto scorer = make_scorer(ctx, nullptr);
  std::unique_ptr<CriteriaProvider> provider;
  if (!ctx.o.criteria_url.empty()) {
    RemoteConfig rc;
    rc.base_url = ctx.o.criteria_url;
    provider = std::make_unique<RemoteCriteriaProvider>(rc);
  }
  CriteriaProviderRequest req{file.set.prompt, file.set.candidates, std::string(kDefaultCriteriaInstruction)};
  const auto criteria = resolve_criteria(file.criteria, req, provider.get());
  TournamentOptions opt;
  opt.tie_band = ctx.o.tie_band;
  opt.tie_break = ctx.o.tie_break == "index" ? TieBreak::kIndexOnly : TieBreak::kHeadToHeadThenIndex;
  opt.jobs = ctx.o.jobs;
  const auto rep = pick(file.set, criteria, *scorer, opt);
  if (ctx.o.format == "table") {
    std::ostringstream os;
    os << "criterion            winner\n";
    for (const auto& c : rep.per_criterion) {
      std::string id = c.criterion.id;
      id.resize(20, ' ');
      os << id << ' ' << c.winner << '\n';
    }
    ctx.emit(os.str());
  } else {
    std::vector<std::string> inputs = {ctx.o.candidates};
    if (ctx.o.scorer == "linear") inputs.push_back(ctx.o.model);
    auto j = rep.to_json();
    j["manifest"] = ctx.manifest(inputs).to_json();
    ctx.emit(j.dump(2) + '\n');
  }
  return 0;
}

std::atomic<HttpService*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

int cmd_serve(Context& ctx) {
  ServiceConfig cfg;
  if (!ctx.o.data_dir.empty()) cfg.data_dir = ctx.o.data_dir;
  cfg.lease_ms = static_cast<std::int64_t>(ctx.o.lease_minutes * 60'000.0);
  Service svc(cfg);
  for (const auto& path : ctx.o.create_run) {
    const auto def = json::parse(read_file(path));
    const auto id = def.value("run_id", std::string{});
    if (svc.run_kind(id)) {
      std::cerr << "run '" << id << "' already exists, skipping " << path << '\n';
      continue;
    }
    svc.create_run(def);
  }
  HttpService http(svc);
  g_server = &http;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  int port = ctx.o.port;
  if (port == 0) {
    port = http.bind_to_any_port(ctx.o.host);
    if (port < 0) throw DomainError("cannot bind " + ctx.o.host);
    std::cerr << "listening on " << ctx.o.host << ':' << port << std::endl;
    http.listen_after_bind();
  } else {
    std::cerr << "listening on " << ctx.o.host << ':' << port << std::endl;
    if (!http.listen(ctx.o.host, port)) throw DomainError("cannot listen on " + ctx.o.host + ":" + std::to_string(port));
  }
  g_server = nullptr;
  svc.checkpoint();
  return 0;
}

int cmd_export(Context& ctx) {
  if (!std::filesystem::exists(std::filesystem::path(ctx.o.data_dir) / "events.jsonl")) {
    throw DomainError("no event log in " + ctx.o.data_dir);
  }
  ServiceConfig cfg;
  cfg.data_dir = ctx.o.data_dir;
  Service svc(cfg);
  const auto exp = svc.export_run(ctx.o.run);
  std::filesystem::create_directories(ctx.o.out_dir);
  for (const auto& [name, contents] : exp.files) write_file((std::filesystem::path(ctx.o.out_dir) / name).string(), contents);
  write_file((std::filesystem::path(ctx.o.out_dir) / "report.json").string(), exp.report.dump(2) + '\n');
  json summary{{"run_id", exp.run_id}, {"kind", exp.kind}, {"report", exp.report}};
  for (const auto& [name, contents] : exp.files) summary["files"][name] = digest_bytes(contents);
  ctx.emit(summary.dump(2) + '\n');
  return 0;
}

int cmd_synth(Context& ctx) {
  const auto& o = ctx.o;
  const RunManifest m = ctx.manifest({});
  if (o.kind == "separable") {
    ctx.emit(dataset_to_string(synth::separable_fixture(o.seed, o.n, o.d_img), m.to_json()));
  } else if (o.kind == "pool") {
    synth::PoolOptions po;
    po.n = o.n;
    po.d_img = o.d_img;
    po.seed = o.seed;
    ctx.emit(dataset_to_string(synth::random_pool(po), m.to_json()));
  } else if (o.kind == "profile") {
    ctx.emit(dataset_to_string(synth::benchmark_profile_pool(o.seed, o.d_img), m.to_json()));
  } else if (o.kind == "candidates") {
    ctx.emit(synth::candidate_file(o.seed, o.n, o.d_img).dump(2) + '\n');
  } else if (o.kind == "annotation-run") {
    ctx.emit(synth::annotation_run("ann" + std::to_string(o.seed), o.seed, o.n, 3, 0.7, o.d_img).dump(2) + '\n');
  } else {
    ctx.emit(synth::study_run("study" + std::to_string(o.seed), o.seed, o.n, 3, true, o.d_img).dump(2) + '\n');
  }
  return 0;
}

}  // namespace

constexpr const char* kDescription = "dyco: criterion-conditioned preference toolkit";

int main(int argc, char** argv) {
  std::vector<std::string> args;
  {
    CLI::App probe(kDescription);
    Options po;
    define(probe, po);
    try {
      args = layered_args(probe, po, argc, argv);
    } catch (const CLI::ParseError& e) {
      const int rc = probe.exit(e);
      return rc == 0 ? 0 : 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }

  CLI::App app(kDescription);
  Context ctx;
  define(app, ctx.o);
  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  ctx.app = &app;
  ctx.command = app.get_subcommands().front()->get_name();
  try {
    if (ctx.command == "aggregate") return cmd_aggregate(ctx);
    if (ctx.command == "curate") return cmd_curate(ctx);
    if (ctx.command == "stats") return cmd_stats(ctx);
    if (ctx.command == "train") return cmd_train(ctx);
    if (ctx.command == "evaluate") return cmd_evaluate(ctx);
    if (ctx.command == "pick") return cmd_pick(ctx);
    if (ctx.command == "serve") return cmd_serve(ctx);
    if (ctx.command == "export") return cmd_export(ctx);
    if (ctx.command == "synth") return cmd_synth(ctx);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
