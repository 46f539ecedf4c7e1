#include "reachmap/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "reachmap/chain_io.hpp"
#include "reachmap/error.hpp"
#include "reachmap/eval.hpp"
#include "reachmap/models.hpp"
#include "reachmap/planner.hpp"
#include "reachmap/sampling.hpp"

#ifndef REACHMAP_VERSION
#define REACHMAP_VERSION "0.0.0"
#endif

namespace reachmap {

namespace {

using Json = nlohmann::ordered_json;

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Files read and written by one command, for its manifest.
struct Run {
  std::string command;
  std::vector<std::string> argv;
  Json config = Json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

void write_manifest(const Run& run) {
  if (run.outputs.empty()) return;
  Json j;
  j["tool"] = "reachmap";
  j["version"] = REACHMAP_VERSION;
  j["command"] = run.command;
  j["argv"] = run.argv;
  j["config"] = run.config;
  j["seed"] = run.seed;
  auto files = [](const std::vector<std::string>& paths) {
    Json a = Json::array();
    for (const auto& p : paths) a.push_back({{"path", p}, {"fnv1a64", file_fnv1a(p)}});
    return a;
  };
  j["inputs"] = files(run.inputs);
  j["outputs"] = files(run.outputs);
  save_text(run.outputs.front() + ".manifest.json", j.dump(2) + "\n");
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kInvalidArgument, what + ": '" + s + "' is not a number");
  }
  return v;
}

// "lo:hi,lo:hi,..."
Bounds parse_bounds(const std::string& s, const std::string& what) {
  Bounds b;
  for (const auto& part : split_list(s, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kInvalidArgument, what + " entries must be lo:hi");
    const double lo = parse_number(part.substr(0, colon), what);
    const double hi = parse_number(part.substr(colon + 1), what);
    if (!(lo < hi)) throw Error(ErrorCode::kInvalidArgument, what + " needs lo < hi");
    b.emplace_back(lo, hi);
  }
  return b;
}

Json bounds_json(const Bounds& b) {
  Json a = Json::array();
  for (const auto& [lo, hi] : b) a.push_back({lo, hi});
  return a;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// sample

struct SampleOpts {
  std::string chain, method, out, bounds, test_out;
  int count = 0;
  std::uint64_t seed = 0;
  int per_axis = 100;
  int oracle_res = 400;
  int ik_restarts = 10;
  double ik_tol = 1e-4;
  double holdout = 0.0;
};

void cmd_sample(const SampleOpts& o, Run& run, std::ostream& out) {
  run.seed = o.seed;
  run.inputs.push_back(o.chain);
  const Robot robot = load_robot(o.chain);
  IkOptions ik;
  ik.restarts = o.ik_restarts;
  ik.tol = o.ik_tol;
  const bool is_chain = std::holds_alternative<SerialChain>(robot);
  if ((o.method == "footstep") == is_chain) {
    throw Error(ErrorCode::kInvalidArgument,
                o.method == "footstep" ? "method footstep needs a biped file" : "method " + o.method + " needs a chain file");
  }
  if (o.method != "grid" && o.count <= 0) throw Error(ErrorCode::kInvalidArgument, "--count must be positive");

  SampleSet data;
  Bounds bounds;
  if (o.method == "fk") {
    data = sample_fk(std::get<SerialChain>(robot), o.count, o.seed);
  } else if (o.method == "ik") {
    const auto& chain = std::get<SerialChain>(robot);
    bounds = o.bounds.empty() ? default_ik_bounds(chain) : parse_bounds(o.bounds, "--bounds");
    data = sample_ik(chain, bounds, o.count, o.seed, ik);
  } else if (o.method == "footstep") {
    bounds = o.bounds.empty() ? default_footstep_bounds() : parse_bounds(o.bounds, "--bounds");
    data = sample_footsteps(std::get<BipedModel>(robot), bounds, o.count, o.seed, ik);
  } else {
    const auto& chain = std::get<SerialChain>(robot);
    bounds = o.bounds.empty() ? default_ik_bounds(chain) : parse_bounds(o.bounds, "--bounds");
    data = oracle_grid_set(chain, bounds, o.per_axis, o.oracle_res);
  }

  run.config = {{"chain", o.chain},         {"method", o.method},       {"count", o.count},
                {"seed", o.seed},           {"bounds", bounds_json(bounds)}, {"per_axis", o.per_axis},
                {"oracle_res", o.oracle_res}, {"ik_restarts", o.ik_restarts}, {"ik_tol", o.ik_tol},
                {"holdout", o.holdout},     {"out", o.out},             {"test_out", o.test_out}};

  if (o.holdout > 0.0) {
    if (o.test_out.empty()) throw Error(ErrorCode::kInvalidArgument, "--holdout needs --test-out");
    if (!(o.holdout < 1.0)) throw Error(ErrorCode::kInvalidArgument, "--holdout must be in (0, 1)");
    const auto [train, test] = split(data, 1.0 - o.holdout, o.seed);
    write_samples_csv(train, o.out);
    write_samples_csv(test, o.test_out);
    run.outputs = {o.out, o.test_out};
    out << "wrote " << train.size() << " samples to " << o.out << " and " << test.size() << " to "
        << o.test_out << "\n";
  } else {
    if (!o.test_out.empty()) throw Error(ErrorCode::kInvalidArgument, "--test-out needs --holdout");
    write_samples_csv(data, o.out);
    run.outputs = {o.out};
    out << "wrote " << data.size() << " samples (" << data.positives() << " positive) to " << o.out << "\n";
  }
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string model, data, out;
  double gamma = 30.0, C = 10.0, nu = 0.05, kkt_tol = 1e-3;
  int max_passes = 200;
  double offset = 0.1;
  bool offset_given = false;
  std::vector<int> hidden = {64, 32};
  int epochs = 200, batch = 256;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool positives_only = false;
};

void cmd_train(const TrainOpts& o, Run& run, std::ostream& out) {
  run.seed = o.seed;
  run.inputs.push_back(o.data);
  SampleSet data = read_samples_csv(o.data);
  if (o.positives_only) {
    std::vector<int> rows;
    for (int i = 0; i < data.size(); ++i) {
      if (data.labels[i] > 0) rows.push_back(i);
    }
    data = data.subset(rows);
  }
  const double offset = o.offset_given ? o.offset : (o.model == "mlp" ? 0.0 : 0.1);
  run.config = {{"model", o.model}, {"data", o.data}, {"out", o.out}, {"offset", offset},
                {"positives_only", o.positives_only}, {"seed", o.seed}};

  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream summary;
  if (o.model == "mlp") {
    MlpConfig cfg;
    cfg.hidden = o.hidden;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.learning_rate = o.lr;
    cfg.seed = o.seed;
    cfg.offset = offset;
    run.config["hidden"] = o.hidden;
    run.config["epochs"] = o.epochs;
    run.config["batch"] = o.batch;
    run.config["lr"] = o.lr;
    const MlpTraining t = train_mlp(data, cfg);
    save_model(t.model, o.out);
    summary << "final loss " << t.loss_curve.back();
  } else {
    SvmConfig cfg;
    cfg.gamma = o.gamma;
    cfg.C = o.C;
    cfg.nu = o.nu;
    cfg.kkt_tol = o.kkt_tol;
    cfg.max_passes = o.max_passes;
    cfg.offset = offset;
    run.config["gamma"] = o.gamma;
    run.config[o.model == "svm" ? "C" : "nu"] = o.model == "svm" ? o.C : o.nu;
    run.config["kkt_tol"] = o.kkt_tol;
    run.config["max_passes"] = o.max_passes;
    const SvmTraining t = o.model == "svm" ? train_svm(data, cfg) : train_ocsvm(data, cfg);
    save_model(t.model, o.out);
    summary << t.model.support_count() << " support vectors, " << t.iterations << " iterations"
            << (t.converged ? "" : " (iteration cap reached)");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.outputs = {o.out};
  out << "trained " << o.model << " on " << data.size() << " samples in " << secs << " s: " << summary.str()
      << "\nwrote " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string model, baseline, train, test, out, sweep;
  int k = 5;
  double offset = 0.0;
  bool offset_given = false;
  bool timing_column = false;
  bool no_timing = false;
  int min_timed = 10000;
};

void cmd_eval(const EvalOpts& o, Run& run, std::ostream& out) {
  if (o.model.empty() == o.baseline.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "give exactly one of --model and --baseline");
  }
  run.config = {{"model", o.model}, {"baseline", o.baseline}, {"train", o.train}, {"test", o.test},
                {"out", o.out}};
  const SampleSet test = read_samples_csv(o.test);
  EvalOptions eo;
  eo.test_set = o.test;
  eo.timing = !o.no_timing;
  eo.min_timed = o.min_timed;

  std::string csv;
  if (!o.sweep.empty()) {
    if (o.model.empty()) throw Error(ErrorCode::kInvalidArgument, "--sweep needs --model");
    run.inputs = {o.model, o.test};
    const MapPtr m = load_model(o.model);
    std::vector<double> offsets;
    for (const auto& s : split_list(o.sweep, ',')) offsets.push_back(parse_number(s, "--sweep"));
    run.config["sweep"] = offsets;
    csv = "offset,iou\n";
    for (const auto& [rho, iou] : offset_sweep(*m, test, offsets)) {
      csv += fmt(rho) + "," + fmt(iou) + "\n";
      out << "offset " << rho << "  iou " << iou << "\n";
    }
  } else {
    EvalReport r;
    if (!o.model.empty()) {
      run.inputs = {o.model, o.test};
      const MapPtr m = load_model(o.model);
      if (o.offset_given) run.config["offset"] = o.offset;
      r = compute_iou(*m, test, o.offset_given ? std::optional<double>(o.offset) : std::nullopt, eo);
    } else {
      if (o.train.empty()) throw Error(ErrorCode::kInvalidArgument, "--baseline needs --train");
      if (o.offset_given) throw Error(ErrorCode::kInvalidArgument, "--offset applies to --model only");
      run.inputs = {o.train, o.test};
      const SampleSet train = read_samples_csv(o.train);
      run.config["k"] = o.k;
      if (o.baseline == "knn") {
        r = compute_iou(KnnClassifier(train, o.k), test, eo);
      } else {
        r = compute_iou(ConvexHullClassifier(train), test, eo);
      }
    }
    out << eval_text(r);
    csv = eval_csv_header(o.timing_column) + eval_csv_row(r, o.timing_column);
  }
  run.config["timing_column"] = o.timing_column;
  if (!o.out.empty()) {
    save_text(o.out, csv);
    run.outputs = {o.out};
    out << "wrote " << o.out << "\n";
  }
}

// ---------------------------------------------------------------------------
// plan

struct PlanOpts {
  std::string problem, out, json;
  int max_iters = -1;
};

void cmd_plan(const PlanOpts& o, Run& run, std::ostream& out) {
  run.inputs.push_back(o.problem);
  PlanFile file = load_plan_file(o.problem);
  for (const auto& p : file.model_paths) run.inputs.push_back(p);
  if (o.max_iters >= 0) file.config.max_iters = o.max_iters;
  const SqpConfig& c = file.config;
  run.seed = c.rng_seed;
  run.config = {{"problem", o.problem},
                {"kind", file.kind},
                {"variant", plan_variant_name(file.problem.variant)},
                {"out", o.out},
                {"json", o.json},
                {"sqp",
                 {{"lambda", c.lambda},
                  {"trust_radius", std::vector<double>(c.trust_radius.data(), c.trust_radius.data() + c.trust_radius.size())},
                  {"param_radius", c.param_radius},
                  {"max_iters", c.max_iters},
                  {"step_tol", c.step_tol},
                  {"constraint_tol", c.constraint_tol},
                  {"margin", c.margin},
                  {"qp_tol", c.qp_tol},
                  {"seed", c.rng_seed},
                  {"init_jitter", c.init_jitter}}}};

  const PlanResult r = sqp_solve(file.problem, file.config);
  save_text(o.out, plan_to_csv(file.problem, r));
  run.outputs = {o.out};
  if (!o.json.empty()) {
    save_text(o.json, plan_to_json(r));
    run.outputs.push_back(o.json);
  }
  double min_f = r.constraint_values.size() > 0 ? r.constraint_values.minCoeff() : 0.0;
  out << file.kind << " plan (" << plan_variant_name(file.problem.variant) << "): "
      << (r.converged ? "converged" : "NOT converged") << " after " << r.iterations << " iterations, objective "
      << r.objective << ", violation " << r.violation << ", min f " << min_f << ", " << r.seconds << " s\n"
      << "wrote " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// heatmap

struct HeatmapOpts {
  std::string model, slice, range = "-2.5:2.5,-2.5:2.5", out;
  int res = 100;
};

void cmd_heatmap(const HeatmapOpts& o, Run& run, std::ostream& out) {
  run.inputs.push_back(o.model);
  const MapPtr m = load_model(o.model);
  const TaskSpace space = m->space();
  const Bounds range = parse_bounds(o.range, "--range");
  if (range.size() != 2) throw Error(ErrorCode::kInvalidArgument, "--range needs x and y intervals");
  if (o.res < 2) throw Error(ErrorCode::kInvalidArgument, "--res must be at least 2");

  std::string slice_var;
  double slice_value = 0.0;
  if (space.kind() == SpaceKind::kSE2) slice_var = "theta";
  else if (space.kind() == SpaceKind::kR3) slice_var = "z";
  else if (space.kind() == SpaceKind::kSE3) throw Error(ErrorCode::kUnsupportedSpace, "heatmaps cover R2, SE2 and R3");
  if (!o.slice.empty()) {
    const auto eq = o.slice.find('=');
    const std::string var = o.slice.substr(0, eq);
    if (eq == std::string::npos || var != slice_var) {
      throw Error(ErrorCode::kInvalidArgument,
                  slice_var.empty() ? "R2 maps take no --slice"
                                    : "a " + space.name() + " slice is " + slice_var + "=<value>");
    }
    slice_value = parse_number(o.slice.substr(eq + 1), "--slice");
  }
  run.config = {{"model", o.model}, {"res", o.res}, {"range", bounds_json(range)}, {"out", o.out}};
  if (!slice_var.empty()) run.config["slice"] = {{slice_var, slice_value}};

  std::string csv = "x,y,f\n";
  csv.reserve(static_cast<std::size_t>(o.res) * o.res * 60);
  for (int iy = 0; iy < o.res; ++iy) {
    const double y = range[1].first + (range[1].second - range[1].first) * iy / (o.res - 1);
    for (int ix = 0; ix < o.res; ++ix) {
      const double x = range[0].first + (range[0].second - range[0].first) * ix / (o.res - 1);
      Pose p;
      switch (space.kind()) {
        case SpaceKind::kR2: p = Pose::r2(x, y); break;
        case SpaceKind::kSE2: p = Pose::se2(x, y, slice_value); break;
        default: p = Pose::r3(x, y, slice_value); break;
      }
      csv += fmt(x) + "," + fmt(y) + "," + fmt(m->value(encode(p))) + "\n";
    }
  }
  save_text(o.out, csv);
  run.outputs = {o.out};
  out << "wrote " << o.res << "x" << o.res << " grid to " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// replay

struct ReplayOpts {
  std::string manifest, out_dir;
};

std::string basename_of(const std::string& p) {
  const auto slash = p.find_last_of('/');
  return slash == std::string::npos ? p : p.substr(slash + 1);
}

int cmd_replay(const ReplayOpts& o, std::ostream& out, std::ostream& err) {
  Json m;
  try {
    m = Json::parse(load_text(o.manifest));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchema, "manifest: " + std::string(e.what()));
  }
  if (!m.is_object() || !m.contains("argv") || !m.contains("inputs") || !m.contains("outputs")) {
    throw Error(ErrorCode::kSchema, "manifest needs argv, inputs and outputs");
  }
  for (const auto& f : m["inputs"]) {
    const std::string path = f.at("path").get<std::string>();
    if (file_fnv1a(path) != f.at("fnv1a64").get<std::string>()) {
      throw Error(ErrorCode::kIo, "input '" + path + "' changed since the recorded run");
    }
  }
  std::vector<std::string> argv = m["argv"].get<std::vector<std::string>>();
  if (!argv.empty() && argv.front() == "replay") throw Error(ErrorCode::kInvalidArgument, "cannot replay a replay");
  std::vector<std::pair<std::string, std::string>> outputs;  // new path, recorded hash
  for (const auto& f : m["outputs"]) {
    const std::string path = f.at("path").get<std::string>();
    const std::string moved = o.out_dir + "/" + basename_of(path);
    for (const auto& [p, h] : outputs) {
      if (p == moved) throw Error(ErrorCode::kInvalidArgument, "two outputs share the name " + basename_of(path));
    }
    bool found = false;
    for (auto& a : argv) {
      if (a == path) {
        a = moved;
        found = true;
      }
    }
    if (!found) throw Error(ErrorCode::kSchema, "output '" + path + "' does not appear in argv");
    outputs.emplace_back(moved, f.at("fnv1a64").get<std::string>());
  }
  std::ostringstream inner_out;
  const int code = run_cli(argv, inner_out, err);
  if (code != 0) return code;
  bool same = true;
  for (const auto& [path, hash] : outputs) {
    const bool ok = file_fnv1a(path) == hash;
    same = same && ok;
    out << (ok ? "identical " : "DIFFERENT ") << path << "\n";
  }
  if (!same) {
    err << "error:replay_mismatch: outputs differ from " << o.manifest << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string file_fnv1a(const std::string& path) { return hex64(fnv1a(load_text(path))); }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned reachability maps: sampling, training, evaluation and planning", "reachmap"};
  app.require_subcommand(1);
  app.set_version_flag("--version", REACHMAP_VERSION);

  SampleOpts so;
  auto* sample = app.add_subcommand("sample", "Generate a labeled sample CSV from a chain or biped file");
  sample->add_option("--chain", so.chain, "Chain or biped JSON")->required();
  sample->add_option("--method", so.method, "fk, ik, footstep or grid")
      ->required()
      ->check(CLI::IsMember({"fk", "ik", "footstep", "grid"}));
  sample->add_option("--count", so.count, "Number of samples (not used by grid)");
  sample->add_option("--seed", so.seed, "Random seed")->capture_default_str();
  sample->add_option("--bounds", so.bounds, "Sampling box lo:hi,lo:hi,... (ik, footstep, grid)");
  sample->add_option("--per-axis", so.per_axis, "Grid points per axis (grid)")->capture_default_str();
  sample->add_option("--oracle-res", so.oracle_res, "Joint grid resolution of the oracle (grid)")
      ->capture_default_str();
  sample->add_option("--ik-restarts", so.ik_restarts, "IK restarts per sample")->capture_default_str();
  sample->add_option("--ik-tol", so.ik_tol, "IK task error tolerance")->capture_default_str();
  sample->add_option("--holdout", so.holdout, "Fraction moved to --test-out");
  sample->add_option("--test-out", so.test_out, "Holdout CSV");
  sample->add_option("--out", so.out, "Sample CSV")->required();

  TrainOpts to;
  auto* train = app.add_subcommand("train", "Train a reachability map");
  train->add_option("--model", to.model, "svm, ocsvm or mlp")
      ->required()
      ->check(CLI::IsMember({"svm", "ocsvm", "mlp"}));
  train->add_option("--data", to.data, "Training CSV")->required();
  train->add_option("--out", to.out, "Model JSON")->required();
  train->add_option("--gamma", to.gamma, "RBF kernel width")->capture_default_str();
  train->add_option("--C", to.C, "SVM box constraint")->capture_default_str();
  train->add_option("--nu", to.nu, "One-class SVM nu")->capture_default_str();
  train->add_option("--kkt-tol", to.kkt_tol, "SMO stopping tolerance")->capture_default_str();
  train->add_option("--max-passes", to.max_passes, "SMO iteration cap per sample")->capture_default_str();
  auto* offset_opt = train->add_option("--offset", to.offset, "Offset rho (default 0.1 for SVMs, 0 for mlp)");
  train->add_option("--hidden", to.hidden, "MLP hidden layer sizes")->delimiter(',')->capture_default_str();
  train->add_option("--epochs", to.epochs, "MLP epochs")->capture_default_str();
  train->add_option("--batch", to.batch, "MLP minibatch size")->capture_default_str();
  train->add_option("--lr", to.lr, "MLP Adam learning rate")->capture_default_str();
  train->add_option("--seed", to.seed, "Random seed")->capture_default_str();
  train->add_flag("--positives-only", to.positives_only, "Drop negative samples before training");

  EvalOpts eo;
  auto* eval = app.add_subcommand("eval", "IoU of a model or baseline on a labeled test set");
  eval->add_option("--model", eo.model, "Model JSON");
  eval->add_option("--baseline", eo.baseline, "knn or convex")->check(CLI::IsMember({"knn", "convex"}));
  eval->add_option("--train", eo.train, "Training CSV for a baseline");
  eval->add_option("--k", eo.k, "Neighbours for knn")->capture_default_str();
  eval->add_option("--test", eo.test, "Test CSV")->required();
  auto* eval_offset = eval->add_option("--offset", eo.offset, "Replace the model offset");
  eval->add_option("--sweep", eo.sweep, "Comma-separated offsets; writes offset,iou rows");
  eval->add_option("--out", eo.out, "Report CSV");
  eval->add_flag("--timing", eo.timing_column, "Add seconds_per_sample to the report CSV");
  eval->add_flag("--no-timing", eo.no_timing, "Skip the per-sample timing");
  eval->add_option("--min-timed", eo.min_timed, "Timed single-sample calls")->capture_default_str();

  PlanOpts po;
  auto* plan = app.add_subcommand("plan", "Solve a planning problem file");
  plan->add_option("--problem", po.problem, "Problem JSON")->required();
  plan->add_option("--out", po.out, "Plan CSV")->required();
  plan->add_option("--json", po.json, "Plan JSON with the SQP trace");
  plan->add_option("--max-iters", po.max_iters, "Override sqp.max_iters");

  HeatmapOpts ho;
  auto* heatmap = app.add_subcommand("heatmap", "Evaluate a model on an (x, y) grid");
  heatmap->add_option("--model", ho.model, "Model JSON")->required();
  heatmap->add_option("--slice", ho.slice, "theta=<rad> for SE2, z=<m> for R3 (default 0)");
  heatmap->add_option("--res", ho.res, "Grid points per axis")->capture_default_str();
  heatmap->add_option("--range", ho.range, "xlo:xhi,ylo:yhi")->capture_default_str();
  heatmap->add_option("--out", ho.out, "Grid CSV")->required();

  ReplayOpts ro;
  auto* replay = app.add_subcommand("replay", "Rerun a manifest and compare output hashes");
  replay->add_option("--manifest", ro.manifest, "Manifest JSON")->required();
  replay->add_option("--out-dir", ro.out_dir, "Directory for the regenerated outputs")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Run run;
  run.argv = args;
  try {
    if (*sample) {
      run.command = "sample";
      cmd_sample(so, run, out);
    } else if (*train) {
      run.command = "train";
      to.offset_given = offset_opt->count() > 0;
      cmd_train(to, run, out);
    } else if (*eval) {
      run.command = "eval";
      eo.offset_given = eval_offset->count() > 0;
      cmd_eval(eo, run, out);
    } else if (*plan) {
      run.command = "plan";
      cmd_plan(po, run, out);
    } else if (*heatmap) {
      run.command = "heatmap";
      cmd_heatmap(ho, run, out);
    } else {
      return cmd_replay(ro, out, err);
    }
    write_manifest(run);
  } catch (const Error& e) {
    err << "error:" << error_code_name(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error:schema: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace reachmap
