#include "lhc/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "lhc/data.hpp"
#include "lhc/eval.hpp"
#include "lhc/inference.hpp"
#include "lhc/learning.hpp"

namespace lhc {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Failure {
  ExitCode code;
  std::string message;
};

const char *name_of(ExitCode c) {
  switch (c) {
  case ExitCode::Usage: return "Usage";
  case ExitCode::Io: return "Io";
  case ExitCode::Validation: return "Validation";
  case ExitCode::TrainingFailure: return "TrainingFailure";
  case ExitCode::Ok: break;
  }
  return "Ok";
}

ExitCode classify(ErrorCode c) {
  switch (c) {
  case ErrorCode::Io: return ExitCode::Io;
  case ErrorCode::InvalidHyperparams: return ExitCode::Usage;
  case ErrorCode::QpFailure:
  case ErrorCode::NumericalInstability:
  case ErrorCode::InstanceTooLarge: return ExitCode::TrainingFailure;
  default: return ExitCode::Validation;
  }
}

[[noreturn]] void usage(const std::string &msg) { throw Failure{ExitCode::Usage, msg}; }

std::string escape(const std::string &s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

void write_text(const fs::path &path, const std::string &text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

fs::path ensure_dir(const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create directory '" + dir + "': " + ec.message());
  return dir;
}

std::size_t hardware_threads() {
  const auto n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

struct Settings {
  Hyperparams hp;
  std::size_t threads{0};
  std::string config;
  std::string data, model, out, out_dir, categories, select_c;
  bool log_timing{false};
  std::size_t repeats{1};
  // synth
  std::size_t n_sequences{120}, n_subjects{4};
  double noise{0.3};
};

void add_hyperparams(CLI::App *cmd, Settings &s) {
  cmd->add_option("--c", s.hp.c_reg, "Regularization constant C")->capture_default_str();
  cmd->add_option("--lambda", s.hp.lambda_loss, "Activity loss weight in [0,1]")->capture_default_str();
  cmd->add_option("--n-latent", s.hp.n_latent, "Latent states per action")->capture_default_str();
  cmd->add_option("--epsilon", s.hp.epsilon_cp, "Cutting-plane tolerance")->capture_default_str();
  cmd->add_option("--max-cccp-iters", s.hp.max_cccp_iters)->capture_default_str();
  cmd->add_option("--max-cp-iters", s.hp.max_cp_iters)->capture_default_str();
  cmd->add_option_function<std::string>(
         "--init", [&s](const std::string &v) { s.hp.init_strategy = parse_init_strategy(v); },
         "random | kmeans_features | kmeans_categorical (default kmeans_features)");
  cmd->add_option("--categories", s.categories, "Per-segment categorical labels for kmeans_categorical");
}

// Keys accepted in a --config file, applied after command-line flags.
void apply_config(Settings &s, const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  if (!j.is_object()) usage("config '" + path + "' must be a JSON object");
  try {
    for (const auto &[k, v] : j.items()) {
      if (k == "c_reg") s.hp.c_reg = v.get<double>();
      else if (k == "lambda_loss") s.hp.lambda_loss = v.get<double>();
      else if (k == "n_latent") s.hp.n_latent = v.get<std::size_t>();
      else if (k == "epsilon_cp") s.hp.epsilon_cp = v.get<double>();
      else if (k == "max_cccp_iters") s.hp.max_cccp_iters = v.get<std::size_t>();
      else if (k == "max_cp_iters") s.hp.max_cp_iters = v.get<std::size_t>();
      else if (k == "init_strategy") s.hp.init_strategy = parse_init_strategy(v.get<std::string>());
      else if (k == "rng_seed" || k == "seed") s.hp.rng_seed = v.get<std::uint64_t>();
      else if (k == "threads") s.threads = v.get<std::size_t>();
      else if (k == "data") s.data = v.get<std::string>();
      else if (k == "model") s.model = v.get<std::string>();
      else if (k == "out") s.out = v.get<std::string>();
      else if (k == "out_dir") s.out_dir = v.get<std::string>();
      else if (k == "categories") s.categories = v.get<std::string>();
      else if (k == "repeats") s.repeats = v.get<std::size_t>();
      else if (k == "n_sequences") s.n_sequences = v.get<std::size_t>();
      else if (k == "n_subjects") s.n_subjects = v.get<std::size_t>();
      else if (k == "noise") s.noise = v.get<double>();
      else usage("config '" + path + "': unknown key '" + k + "'");
    }
  } catch (const json::type_error &e) {
    usage("config '" + path + "': " + e.what());
  }
}

json hyperparams_json(const Hyperparams &hp) {
  return json{{"c_reg", hp.c_reg},
              {"lambda_loss", hp.lambda_loss},
              {"n_latent", hp.n_latent},
              {"epsilon_cp", hp.epsilon_cp},
              {"max_cccp_iters", hp.max_cccp_iters},
              {"max_cp_iters", hp.max_cp_iters},
              {"init_strategy", to_string(hp.init_strategy)},
              {"rng_seed", hp.rng_seed}};
}

void write_resolved(const fs::path &dir, const std::string &cmd, const Settings &s, json extra = {}) {
  json j{{"command", cmd}, {"threads", s.hp.n_threads}};
  if (!s.config.empty()) j["config"] = s.config;
  if (!s.data.empty()) j["data"] = s.data;
  if (!s.model.empty()) j["model"] = s.model;
  if (cmd == "train" || cmd == "cv") j["hyperparams"] = hyperparams_json(s.hp);
  if (!s.categories.empty()) j["categories"] = s.categories;
  for (const auto &[k, v] : extra.items()) j[k] = v;
  write_text(dir / "resolved_config.json", j.dump(1) + "\n");
}

Dataset load_labeled(const std::string &path) {
  auto ds = load_dataset(path);
  if (ds.records.empty()) throw Error(ErrorCode::EmptyDataset, "'" + path + "' has no records");
  for (const auto &r : ds.records)
    if (!r.labeled()) throw Error(ErrorCode::MissingLabels, "record '" + r.id + "' in '" + path + "' is unlabeled");
  return ds;
}

TrainOptions category_options(const Settings &s, const Dataset &ds, LatentPaths &storage) {
  TrainOptions opt;
  if (s.hp.init_strategy == InitStrategy::KmeansCategorical) {
    if (s.categories.empty()) usage("--init kmeans_categorical needs --categories");
    const auto cats = load_categories(s.categories);
    storage = align_categories(cats, ds);
    opt.categories = &storage;
    opt.n_categories = cats.n_categories;
  }
  return opt;
}

json log_json(const TrainLogRecord &r, bool timing) {
  json j{{"kind", r.kind}, {"cccp_iter", r.cccp_iter}};
  if (r.kind == "cp") j["cp_iter"] = r.cp_iter;
  j["objective"] = r.objective;
  if (r.kind == "cp") {
    j["violation"] = r.violation;
    j["slack"] = r.slack;
    j["loss"] = r.loss;
  }
  if (timing) j["wall_time"] = r.wall_time;
  return j;
}

int cmd_train(Settings &s) {
  const auto ds = load_labeled(s.data);
  const fs::path dir = ensure_dir(s.out_dir);
  LatentPaths storage;
  auto opt = category_options(s, ds, storage);
  json extra = json::object();
  if (!s.select_c.empty()) {
    const std::vector<double> grid{0.1, 1.0, 10.0, 100.0};
    s.hp.c_reg = select_c(ds, s.hp, grid, s.select_c);
    extra["select_c"] = {{"validation_subject", s.select_c}, {"grid", grid}, {"chosen", s.hp.c_reg}};
  }
  std::ostringstream log;
  opt.log = [&](const TrainLogRecord &r) { log << log_json(r, s.log_timing).dump() << "\n"; };
  TrainReport report;
  const auto model = fit_model(ds, s.hp, &report, opt);
  json summary{{"kind", "summary"},
               {"cccp_iterations", report.cccp_iterations},
               {"converged", report.converged},
               {"stop_reason", report.stop_reason},
               {"objective", report.cccp_objective_per_iter},
               {"cp_iterations", report.cp_iterations_per_cccp},
               {"final_slack", report.final_slack}};
  if (s.log_timing) summary["wall_time"] = report.wall_time;
  log << summary.dump() << "\n";
  save_model(model, dir / "model.json");
  write_text(dir / "train_log.jsonl", log.str());
  write_resolved(dir, "train", s, extra);
  return 0;
}

int cmd_predict(Settings &s) {
  const auto model = load_model(s.model);
  const auto ds = load_dataset(s.data);
  if (ds.space.dim_segment != model.weights.space().dim_segment ||
      ds.space.dim_global != model.weights.space().dim_global)
    throw Error(ErrorCode::ValidationError, "dataset feature dimensions do not match the model");
  const auto preds = predict(model, ds.records, s.hp.n_threads);
  std::ostringstream out;
  auto name = [](const std::vector<std::string> &names, std::size_t i) {
    return i < names.size() ? names[i] : std::to_string(i);
  };
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto &p = preds[i];
    json actions = json::array();
    for (auto y : p.actions) actions.push_back(name(model.action_names, y));
    out << json{{"id", ds.records[i].id},
                {"activity", name(model.activity_names, p.activity)},
                {"activity_id", p.activity},
                {"actions", actions},
                {"action_ids", p.actions},
                {"latents", p.latents},
                {"score", p.score}}
               .dump()
        << "\n";
  }
  const fs::path path = s.out;
  write_text(path, out.str());
  write_resolved(path.has_parent_path() ? path.parent_path() : fs::path("."), "predict", s,
                 json{{"out", s.out}});
  return 0;
}

int cmd_eval(Settings &s, std::ostream &stdout_) {
  const auto model = load_model(s.model);
  const auto ds = load_labeled(s.data);
  if (ds.space.n_actions != model.weights.space().n_actions ||
      ds.space.n_activities != model.weights.space().n_activities ||
      ds.space.dim_segment != model.weights.space().dim_segment ||
      ds.space.dim_global != model.weights.space().dim_global)
    throw Error(ErrorCode::ValidationError, "dataset label space does not match the model");
  const auto preds = predict(model, ds.records, s.hp.n_threads);
  const auto ev = evaluate(preds, ds.records, ds.space);
  const fs::path dir = ensure_dir(s.out_dir);
  const auto text = metrics_to_text(ev, ds);
  write_text(dir / "metrics.json", metrics_to_json(ev, ds));
  write_text(dir / "metrics.txt", text);
  write_text(dir / "confusion_actions.tsv", confusion_tsv(ev.actions, ds.action_names));
  write_text(dir / "confusion_activities.tsv", confusion_tsv(ev.activities, ds.activity_names));
  write_resolved(dir, "eval", s);
  stdout_ << text;
  return 0;
}

int cmd_cv(Settings &s, std::ostream &stdout_) {
  const auto ds = load_labeled(s.data);
  if (s.repeats == 0) usage("--repeats must be >= 1");
  LatentPaths storage;
  const auto opt = category_options(s, ds, storage);
  const fs::path dir = ensure_dir(s.out_dir);
  const auto base_seed = s.hp.rng_seed;
  std::string text;
  json runs = json::array();
  std::vector<double> act_acc, activity_acc;
  for (std::size_t r = 0; r < s.repeats; ++r) {
    auto hp = s.hp;
    hp.rng_seed = base_seed + r;
    const auto cv = cross_validate(ds, hp, opt);
    if (s.repeats == 1) {
      write_text(dir / "cv_report.json", cv_to_json(cv, ds));
      text = cv_to_text(cv);
    } else {
      runs.push_back({{"seed", hp.rng_seed}, {"report", json::parse(cv_to_json(cv, ds))}});
      text += "repeat " + std::to_string(r + 1) + " (seed " + std::to_string(hp.rng_seed) + ")\n" + cv_to_text(cv);
      act_acc.push_back(cv.actions.accuracy.mean);
      activity_acc.push_back(cv.activities.accuracy.mean);
    }
  }
  if (s.repeats > 1) {
    const auto a = summarize(act_acc), b = summarize(activity_acc);
    json j{{"repeats", runs},
           {"actions_accuracy", {{"mean", a.mean}, {"std_error", a.std_error}}},
           {"activities_accuracy", {{"mean", b.mean}, {"std_error", b.std_error}}}};
    write_text(dir / "cv_report.json", j.dump(1) + "\n");
  }
  write_text(dir / "cv_report.txt", text);
  write_resolved(dir, "cv", s, json{{"repeats", s.repeats}});
  stdout_ << text;
  return 0;
}

int cmd_synth(Settings &s) {
  auto spec = default_synthetic_spec(s.hp.rng_seed);
  spec.n_sequences = s.n_sequences;
  spec.n_subjects = s.n_subjects;
  spec.noise_scale = s.noise;
  const auto ds = synth_generate(spec);
  const fs::path path = s.out;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_dataset(ds, path);
  write_resolved(path.has_parent_path() ? path.parent_path() : fs::path("."), "synth", s,
                 json{{"out", s.out},
                      {"seed", s.hp.rng_seed},
                      {"n_sequences", s.n_sequences},
                      {"n_subjects", s.n_subjects},
                      {"noise", s.noise}});
  return 0;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

int cmd_inspect(Settings &s, std::ostream &out) {
  if (s.model.empty() == s.data.empty()) usage("inspect needs exactly one of --model or --data");
  auto list = [](const std::vector<std::string> &names) {
    std::string r;
    for (std::size_t i = 0; i < names.size(); ++i) r += (i ? ", " : "") + std::to_string(i) + "=" + names[i];
    return r;
  };
  if (!s.model.empty()) {
    const auto m = load_model(s.model);
    const auto &sp = m.weights.space();
    const auto o = block_offsets(sp);
    const auto &w = m.weights.data();
    out << "model " << s.model << "\n"
        << "  actions N_y=" << sp.n_actions << "  latent N_z=" << sp.n_latent << "  activities N_A="
        << sp.n_activities << "  D=" << sp.dim_segment << "  D0=" << sp.dim_global << "\n"
        << "  weight dim " << sp.weight_dim() << "\n";
    const std::size_t bounds[] = {o.w1, o.w2, o.w3, o.w4, o.w5, o.total};
    const char *names[] = {"w1 (segment features)", "w2 (action/latent bias)", "w3 (state transitions)",
                           "w4 (activity-conditioned transitions)", "w5 (activity/global)"};
    for (int b = 0; b < 5; ++b)
      out << "  |" << names[b] << "| = " << norm(std::span(w).subspan(bounds[b], bounds[b + 1] - bounds[b]))
          << "\n";
    out << "  |w| = " << norm(w) << "\n"
        << "  standardizer: " << (m.standardizer ? "yes" : "no") << "\n"
        << "  actions: " << list(m.action_names) << "\n"
        << "  activities: " << list(m.activity_names) << "\n";
  } else {
    const auto ds = load_dataset(s.data);
    std::size_t segs = 0, labeled = 0;
    for (const auto &r : ds.records) {
      segs += r.length();
      labeled += r.labeled();
    }
    out << "dataset " << s.data << "\n"
        << "  records " << ds.records.size() << " (" << labeled << " labeled), segments " << segs << "\n"
        << "  actions N_y=" << ds.space.n_actions << "  activities N_A=" << ds.space.n_activities
        << "  D=" << ds.space.dim_segment << "  D0=" << ds.space.dim_global << "\n"
        << "  subjects: " << list(ds.subjects) << "\n"
        << "  actions: " << list(ds.action_names) << "\n"
        << "  activities: " << list(ds.activity_names) << "\n";
  }
  return 0;
}

int report(std::ostream &err, ExitCode code, const std::string &msg) {
  err << "error: code=" << name_of(code) << " message=\"" << escape(msg) << "\"\n";
  return static_cast<int>(code);
}

template <class Fn> int guarded(std::ostream &err, Fn &&fn) {
  try {
    return fn();
  } catch (const Failure &f) {
    return report(err, f.code, f.message);
  } catch (const Error &e) {
    return report(err, classify(e.code()), std::string(to_string(e.code())) + ": " + e.what());
  } catch (const fs::filesystem_error &e) {
    return report(err, ExitCode::Io, e.what());
  } catch (const std::exception &e) {
    return report(err, ExitCode::TrainingFailure, e.what());
  }
}

std::vector<const char *> argv_of(const std::vector<std::string> &args) {
  std::vector<const char *> v;
  for (const auto &a : args) v.push_back(a.c_str());
  return v;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Latent hierarchical chain model: joint action and activity labeling of segment sequences."};
  app.name(args.empty() ? "lhc" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  app.fallthrough();
  Settings s;
  app.add_option("--threads", s.threads, "Worker threads (default: available parallelism)");
  app.add_option("--config", s.config, "JSON file whose keys override command-line flags");

  auto *train = app.add_subcommand("train", "Train a model; writes model.json, train_log.jsonl");
  train->add_option("--data", s.data, "Training dataset (.jsonl)")->required();
  train->add_option("--out-dir", s.out_dir, "Output directory")->required();
  train->add_option("--seed", s.hp.rng_seed, "Random seed")->capture_default_str();
  add_hyperparams(train, s);
  train->add_option("--select-c", s.select_c,
                    "Choose C from {0.1,1,10,100} holding out this subject for validation");
  train->add_flag("--log-timing", s.log_timing, "Include wall-clock times in train_log.jsonl");

  auto *predict_cmd = app.add_subcommand("predict", "Decode a dataset; writes one JSON line per sequence");
  predict_cmd->add_option("--model", s.model, "Model file")->required();
  predict_cmd->add_option("--data", s.data, "Dataset (.jsonl)")->required();
  predict_cmd->add_option("--out", s.out, "Predictions file (.jsonl)")->required();

  auto *eval = app.add_subcommand("eval", "Evaluate a model on a labeled dataset");
  eval->add_option("--model", s.model, "Model file")->required();
  eval->add_option("--data", s.data, "Labeled dataset (.jsonl)")->required();
  eval->add_option("--out-dir", s.out_dir, "Output directory")->required();

  auto *cv = app.add_subcommand("cv", "Leave-one-subject-out cross-validation");
  cv->add_option("--data", s.data, "Labeled dataset (.jsonl)")->required();
  cv->add_option("--out-dir", s.out_dir, "Output directory")->required();
  cv->add_option("--seed", s.hp.rng_seed, "Random seed (repeat r uses seed + r)")->capture_default_str();
  cv->add_option("--repeats", s.repeats, "Repeat the whole cross-validation with consecutive seeds")
      ->capture_default_str();
  add_hyperparams(cv, s);

  auto *synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out", s.out, "Output dataset (.jsonl)")->required();
  synth->add_option("--seed", s.hp.rng_seed, "Random seed")->capture_default_str();
  synth->add_option("--n-sequences", s.n_sequences)->capture_default_str();
  synth->add_option("--n-subjects", s.n_subjects)->capture_default_str();
  synth->add_option("--noise", s.noise, "Noise scale")->capture_default_str();

  auto *inspect = app.add_subcommand("inspect", "Print model or dataset summary");
  inspect->add_option("--model", s.model, "Model file");
  inspect->add_option("--data", s.data, "Dataset file");

  auto argv = argv_of(args);
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    return report(err, ExitCode::Usage, e.what());
  }

  return guarded(err, [&] {
    if (!s.config.empty()) apply_config(s, s.config);
    s.hp.n_threads = s.threads == 0 ? hardware_threads() : s.threads;
    s.hp.validate();
    if (*train) return cmd_train(s);
    if (*predict_cmd) return cmd_predict(s);
    if (*eval) return cmd_eval(s, out);
    if (*cv) return cmd_cv(s, out);
    if (*synth) return cmd_synth(s);
    return cmd_inspect(s, out);
  });
}

int run_convert(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Convert a CSV feature table (sequence_id,subject,activity,action,f_1..f_D) to a dataset file."};
  app.name(args.empty() ? "lhc-convert" : fs::path(args[0]).filename().string());
  std::string in_path, out_path;
  app.add_option("--in", in_path, "CSV feature table")->required();
  app.add_option("--out", out_path, "Output dataset (.jsonl)")->required();
  auto argv = argv_of(args);
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    return report(err, ExitCode::Usage, e.what());
  }
  return guarded(err, [&] {
    std::ifstream in(in_path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + in_path + "'");
    const auto ds = convert_feature_table(in, in_path);
    save_dataset(ds, out_path);
    out << "wrote " << ds.records.size() << " sequences to " << out_path << "\n";
    return 0;
  });
}

} // namespace lhc
