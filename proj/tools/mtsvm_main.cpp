// Command-line front end: ERC estimation and bounds, coupled multi-task
// training, evaluation, synthetic data, and the s/C sweep protocol.
//
// Exit codes: 0 success, 1 numeric failure, 2 usage or config error.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mtsvm/dataset.hpp"
#include "mtsvm/errors.hpp"
#include "mtsvm/kernels.hpp"
#include "mtsvm/mkl.hpp"
#include "mtsvm/model_io.hpp"
#include "mtsvm/mtl.hpp"
#include "mtsvm/parallel.hpp"
#include "mtsvm/rademacher.hpp"

namespace {

using nlohmann::json;
using namespace mtsvm;

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << text;
  if (!out) throw ParseError("write failed: " + path);
}

void reject_unknown_keys(const json& cfg,
                         std::initializer_list<const char*> known,
                         const char* what) {
  if (!cfg.is_object()) throw ParseError(std::string(what) + ": expected a JSON object");
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    bool ok = false;
    for (const char* k : known) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ParseError(std::string(what) + ": unknown key '" + it.key() + "'");
    }
  }
}

Exponent exponent_from(const json& j, const char* what) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return Exponent::infinity();
    throw ParseError(std::string(what) + ": expected a number or \"inf\"");
  }
  if (!j.is_number()) {
    throw ParseError(std::string(what) + ": expected a number or \"inf\"");
  }
  try {
    return Exponent(j.get<double>());
  } catch (const InvalidExponent& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

json exponent_json(Exponent e) {
  if (e.is_inf()) return json("inf");
  return json(e.value());
}

double number_from(const json& j, const char* what) {
  if (!j.is_number()) throw ParseError(std::string(what) + ": expected a number");
  return j.get<double>();
}

int int_from(const json& j, const char* what) {
  if (!j.is_number_integer()) {
    throw ParseError(std::string(what) + ": expected an integer");
  }
  return j.get<int>();
}

std::vector<KernelSpec> kernels_from_config(const json& cfg,
                                            bool default_normalize) {
  std::vector<KernelSpec> out;
  try {
    if (cfg.contains("kernels")) {
      const json& ks = cfg["kernels"];
      if (!ks.is_array() || ks.empty()) {
        throw ParseError("config: 'kernels' must be a nonempty array");
      }
      for (const auto& k : ks) {
        out.push_back(kernel_spec_from_json(k, default_normalize));
      }
    } else if (cfg.contains("kernel")) {
      out.push_back(kernel_spec_from_json(cfg["kernel"], default_normalize));
    } else {
      out.push_back(KernelSpec::gaussian(1.0));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config kernels: ") + e.what());
  }
  for (const auto& k : out) k.validate();
  return out;
}

MultiTaskDataset load_dataset_arg(const std::string& path, bool subsample,
                                  std::uint64_t seed) {
  if (path.empty()) throw ParseError("--dataset is required");
  MultiTaskDataset data;
  bool sub = subsample;
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    const json m = read_json_file(path);
    reject_unknown_keys(m, {"path", "schema", "subsample_to_min"},
                        "dataset manifest");
    if (!m.contains("path") || !m["path"].is_string()) {
      throw ParseError(path + ": manifest needs a string 'path'");
    }
    if (m.contains("schema") &&
        (!m["schema"].is_string() ||
         m["schema"].get<std::string>() != "task_csv")) {
      throw ParseError(path + ": unsupported manifest schema");
    }
    std::filesystem::path p(m["path"].get<std::string>());
    if (p.is_relative()) {
      p = std::filesystem::path(path).parent_path() / p;
    }
    if (m.contains("subsample_to_min")) {
      if (!m["subsample_to_min"].is_boolean()) {
        throw ParseError(path + ": subsample_to_min must be a bool");
      }
      sub = sub || m["subsample_to_min"].get<bool>();
    }
    data = load_csv(p.string());
  } else {
    data = load_csv(path);
  }
  if (sub) data = subsample_to_min(data, seed);
  return data;
}

// Bound column: the number when the assumption holds, otherwise the status.
std::string bound_cell(const BoundResult& b) {
  if (b.status == BoundStatus::ok) return fmt(b.value);
  return to_string(b.status);
}

json erc_report_json(const ErcReport& rep, Exponent s,
                     std::optional<Exponent> r, Eigen::Index T, Eigen::Index N,
                     Eigen::Index M, int D, std::uint64_t seed) {
  json j;
  j["estimate"] = rep.estimate;
  j["std_error"] = rep.std_error;
  if (rep.bound.status == BoundStatus::ok) {
    j["bound"] = rep.bound.value;
  } else {
    j["bound"] = to_string(rep.bound.status);
  }
  j["bound_value"] = rep.bound.value;  // null when no finite formula applies
  j["branch"] = to_string(rep.bound.branch);
  j["status"] = to_string(rep.bound.status);
  j["tau"] = rep.bound.tau;
  j["rho"] = rep.bound.rho;
  j["s"] = exponent_json(s);
  j["r"] = r.has_value() ? exponent_json(*r) : json();
  j["T"] = static_cast<std::int64_t>(T);
  j["N"] = static_cast<std::int64_t>(N);
  j["M"] = static_cast<std::int64_t>(M);
  j["D"] = D;
  j["seed"] = seed;
  j["excluded_samples"] = rep.excluded_samples;
  return j;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
}

// ---------------------------------------------------------------- erc ----

struct ErcArgs {
  std::string dataset, config, out, per_sample;
  std::uint64_t seed = 0;
  int samples = 1000;
  int workers = 1;
  bool subsample = false;
};

std::vector<Exponent> erc_grid_from_config(const json& cfg, bool multi) {
  std::vector<Exponent> grid;
  if (cfg.contains("s_grid")) {
    if (!cfg["s_grid"].is_array() || cfg["s_grid"].empty()) {
      throw ParseError("config: 's_grid' must be a nonempty array");
    }
    for (const auto& e : cfg["s_grid"]) grid.push_back(exponent_from(e, "s_grid"));
  } else if (cfg.contains("s")) {
    grid.push_back(exponent_from(cfg["s"], "s"));
  } else if (multi) {
    for (double v : {2.0, 4.0, 10.0, 100.0}) grid.emplace_back(v);
    grid.push_back(Exponent::infinity());
  } else {
    for (double v : {1.0, 4.0 / 3.0, 2.0, 4.0, 10.0, 100.0}) grid.emplace_back(v);
    grid.push_back(Exponent::infinity());
  }
  return grid;
}

void run_erc_estimate(const ErcArgs& a) {
  const json cfg = a.config.empty() ? json::object() : read_json_file(a.config);
  reject_unknown_keys(
      cfg, {"kernels", "kernel", "s_grid", "s", "r", "R", "schema_version"},
      "erc config");
  const auto specs = kernels_from_config(cfg, /*default_normalize=*/true);
  std::optional<Exponent> r;
  if (cfg.contains("r")) r = exponent_from(cfg["r"], "r");
  const double R = cfg.contains("R") ? number_from(cfg["R"], "R") : 1.0;
  if (!(R > 0.0)) throw ParseError("config: R must be positive");
  if (specs.size() > 1 && !r.has_value()) {
    throw ParseError("config: multiple kernels need the 'r' exponent");
  }
  const auto grid = erc_grid_from_config(cfg, r.has_value());
  if (r.has_value()) {
    for (const auto& s : grid) {
      if (s < Exponent(2.0)) {
        throw ParseError(
            "config: multiple-kernel estimation needs s >= 2; use erc-bound "
            "for smaller s");
      }
    }
  }

  const auto data = load_dataset_arg(a.dataset, a.subsample, a.seed);
  const GramStack g = build_gram(data, specs);
  const Eigen::Index N = g.common_task_size();
  const bool assumption_ok = check_bound_assumption(g);
  const QuadSamples quads = sigma_quadratics(g, a.seed, a.samples, a.workers);

  std::ostringstream csv;
  csv << "s,estimate,std_error,bound,branch\n";
  std::ostringstream ps;
  if (!a.per_sample.empty()) ps << "s,sample,value\n";

  json single;
  for (const auto& s : grid) {
    const ErcParams p{s, r, R, a.samples, a.seed, !a.per_sample.empty(),
                      a.workers};
    const ErcReport rep = r.has_value()
                              ? erc_multi_from_samples(quads, p, assumption_ok)
                              : erc_single_from_samples(quads, p, assumption_ok);
    csv << to_string(s) << ',' << fmt(rep.estimate) << ',' << fmt(rep.std_error)
        << ',' << bound_cell(rep.bound) << ',' << to_string(rep.bound.branch)
        << '\n';
    if (!a.per_sample.empty()) {
      for (std::size_t d = 0; d < rep.per_sample.size(); ++d) {
        ps << to_string(s) << ',' << d << ',' << fmt(rep.per_sample[d]) << '\n';
      }
    }
    if (grid.size() == 1) {
      single = erc_report_json(rep, s, r, g.num_tasks(), N, g.num_kernels(),
                               a.samples, a.seed);
    }
  }

  emit(a.out, csv.str());
  if (!a.per_sample.empty()) write_text(a.per_sample, ps.str());
  if (!a.out.empty()) {
    if (grid.size() == 1) {
      std::cout << single.dump(2) << '\n';
    } else {
      json summary;
      summary["out"] = a.out;
      summary["rows"] = grid.size();
      summary["T"] = static_cast<std::int64_t>(g.num_tasks());
      summary["N"] = static_cast<std::int64_t>(N);
      summary["M"] = static_cast<std::int64_t>(g.num_kernels());
      summary["D"] = a.samples;
      summary["seed"] = a.seed;
      std::cout << summary.dump(2) << '\n';
    }
  }
}

struct BoundArgs {
  std::string config, out;
  std::uint64_t seed = 0;
};

void run_erc_bound(const BoundArgs& a) {
  if (a.config.empty()) {
    throw ParseError("erc-bound: --config with {T, N, s [, M, r, R]} required");
  }
  const json cfg = read_json_file(a.config);
  reject_unknown_keys(cfg, {"T", "N", "M", "s", "r", "R", "schema_version"},
                      "bound config");
  if (!cfg.contains("T") || !cfg.contains("N") || !cfg.contains("s")) {
    throw ParseError("bound config: keys T, N, s are required");
  }
  const int T = int_from(cfg["T"], "T");
  const int N = int_from(cfg["N"], "N");
  const int M = cfg.contains("M") ? int_from(cfg["M"], "M") : 1;
  const Exponent s = exponent_from(cfg["s"], "s");
  std::optional<Exponent> r;
  if (cfg.contains("r")) r = exponent_from(cfg["r"], "r");
  const double R = cfg.contains("R") ? number_from(cfg["R"], "R") : 1.0;
  if (T < 1 || N < 1 || M < 1) {
    throw ParseError("bound config: T, N, M must be positive");
  }
  if (!(R > 0.0)) throw ParseError("bound config: R must be positive");
  if (M > 1 && !r.has_value()) {
    throw ParseError("bound config: M > 1 needs the 'r' exponent");
  }

  ErcReport rep;
  rep.bound = erc_bound(T, N, M, s, r, R, /*assumption_ok=*/true);
  json j = erc_report_json(rep, s, r, T, N, M, 0, a.seed);
  j["estimate"] = nullptr;
  j["std_error"] = nullptr;
  j.erase("excluded_samples");
  emit(a.out, j.dump(2) + "\n");
}

// -------------------------------------------------------------- train ----

struct TrainArgs {
  std::string dataset, config, out;
  std::uint64_t seed = 0;
  int workers = 1;
  bool subsample = false;
};

struct TrainConfig {
  std::vector<KernelSpec> kernels;
  Exponent s{2.0};
  std::optional<Exponent> r;
  double C = 1.0;
  bool mkl = false;
  TrainOptions opts;
};

TrainConfig train_config_from_json(const json& cfg, int workers) {
  reject_unknown_keys(cfg,
                      {"model", "s", "r", "C", "kernels", "kernel", "max_outer",
                       "tol", "inner_tol", "schema_version"},
                      "train config");
  TrainConfig tc;
  tc.kernels = kernels_from_config(cfg, /*default_normalize=*/false);
  if (cfg.contains("s")) tc.s = exponent_from(cfg["s"], "s");
  if (cfg.contains("r")) tc.r = exponent_from(cfg["r"], "r");
  if (cfg.contains("C")) tc.C = number_from(cfg["C"], "C");
  if (!(tc.C >= 0.0)) throw ParseError("train config: C must be nonnegative");
  std::string model_type;
  if (cfg.contains("model")) {
    if (!cfg["model"].is_string()) {
      throw ParseError("train config: model must be \"mtl\" or \"mkl\"");
    }
    model_type = cfg["model"].get<std::string>();
    if (model_type != "mtl" && model_type != "mkl") {
      throw ParseError("train config: model must be \"mtl\" or \"mkl\"");
    }
  }
  tc.mkl = model_type == "mkl" ||
           (model_type.empty() && (tc.kernels.size() > 1 || tc.r.has_value()));
  if (model_type == "mtl" && tc.kernels.size() > 1) {
    throw ParseError("train config: single-kernel model with several kernels");
  }
  if (tc.mkl && !tc.r.has_value()) tc.r = Exponent(1.0);
  if (cfg.contains("max_outer")) {
    tc.opts.max_outer = int_from(cfg["max_outer"], "max_outer");
    if (tc.opts.max_outer < 1) throw ParseError("train config: max_outer >= 1");
  }
  if (cfg.contains("tol")) {
    tc.opts.tol = number_from(cfg["tol"], "tol");
    if (!(tc.opts.tol > 0.0)) throw ParseError("train config: tol > 0");
  }
  if (cfg.contains("inner_tol")) {
    tc.opts.inner_tol = number_from(cfg["inner_tol"], "inner_tol");
    if (!(tc.opts.inner_tol > 0.0)) {
      throw ParseError("train config: inner_tol > 0");
    }
  }
  tc.opts.workers = workers;
  return tc;
}

MtlModel train_from_config(const MultiTaskDataset& data, const TrainConfig& tc) {
  if (tc.mkl) {
    return train_mkl(data, tc.kernels, tc.s, *tc.r, tc.C, tc.opts);
  }
  return train_mtl(data, tc.kernels.front(), tc.s, tc.C, tc.opts);
}

void run_train(const TrainArgs& a) {
  if (a.out.empty()) throw ParseError("train: --out <model.json> is required");
  const json cfg = a.config.empty() ? json::object() : read_json_file(a.config);
  const TrainConfig tc = train_config_from_json(cfg, a.workers);
  const auto data = load_dataset_arg(a.dataset, a.subsample, a.seed);
  const MtlModel model = train_from_config(data, tc);
  save_model(model, a.out);

  json j;
  j["model_type"] = tc.mkl ? "mkl" : "mtl";
  j["s"] = exponent_json(tc.s);
  j["r"] = tc.r.has_value() ? exponent_json(*tc.r) : json();
  j["C"] = tc.C;
  j["tasks"] = static_cast<std::int64_t>(model.num_tasks());
  j["outer_iterations"] = model.diag.outer_iterations;
  j["objective"] = objective_value(model, data);
  j["train_accuracy"] = mean_task_accuracy(model, data);
  j["out"] = a.out;
  std::cout << j.dump(2) << '\n';
}

// --------------------------------------------------------------- eval ----

struct EvalArgs {
  std::string dataset, model, out;
  std::uint64_t seed = 0;
  bool subsample = false;
};

void run_eval(const EvalArgs& a) {
  if (a.model.empty()) throw ParseError("eval: --model <model.json> is required");
  const MtlModel model = load_model(a.model);
  const auto data = load_dataset_arg(a.dataset, a.subsample, a.seed);
  if (data.num_tasks() != model.num_tasks()) {
    throw InvalidDataset("dataset and model task counts differ");
  }

  json per_task = json::array();
  for (Eigen::Index t = 0; t < model.num_tasks(); ++t) {
    const auto& task = data.tasks[static_cast<std::size_t>(t)];
    const Eigen::VectorXd f = predict_task(model, t, task.features);
    Eigen::Index good = 0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      if (task.labels[i] * f[i] > 0.0) ++good;
    }
    json row;
    row["task"] = model.tasks[static_cast<std::size_t>(t)].name;
    row["samples"] = static_cast<std::int64_t>(f.size());
    row["accuracy"] = static_cast<double>(good) / static_cast<double>(f.size());
    per_task.push_back(std::move(row));
  }
  json j;
  j["per_task"] = std::move(per_task);
  j["mean_task_accuracy"] = mean_task_accuracy(model, data);
  j["objective"] = objective_value(model, data);
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!a.out.empty()) write_text(a.out, text);
}

// -------------------------------------------------------------- synth ----

struct SynthArgs {
  std::string config, out;
  std::uint64_t seed = 0;
};

void run_synth(const SynthArgs& a) {
  if (a.config.empty()) {
    throw ParseError("synth: --config with {tasks, samples, dim} required");
  }
  if (a.out.empty()) throw ParseError("synth: --out <data.csv> is required");
  const json cfg = read_json_file(a.config);
  reject_unknown_keys(
      cfg, {"tasks", "samples", "dim", "relatedness", "noise", "schema_version"},
      "synth config");
  if (!cfg.contains("tasks") || !cfg.contains("samples") || !cfg.contains("dim")) {
    throw ParseError("synth config: keys tasks, samples, dim are required");
  }
  const int T = int_from(cfg["tasks"], "tasks");
  const int N = int_from(cfg["samples"], "samples");
  const int d = int_from(cfg["dim"], "dim");
  const double rel =
      cfg.contains("relatedness") ? number_from(cfg["relatedness"], "relatedness") : 1.0;
  const double noise = cfg.contains("noise") ? number_from(cfg["noise"], "noise") : 0.0;
  if (T < 1 || N < 1 || d < 1) {
    throw ParseError("synth config: tasks, samples, dim must be positive");
  }
  if (!(rel >= 0.0 && rel <= 1.0)) {
    throw ParseError("synth config: relatedness in [0,1]");
  }
  if (!(noise >= 0.0 && noise < 1.0)) {
    throw ParseError("synth config: noise in [0,1)");
  }

  const auto data = synth_multitask(T, N, d, rel, noise, a.seed);
  save_csv(data, a.out);
  json j;
  j["path"] = a.out;
  j["tasks"] = T;
  j["samples_per_task"] = N;
  j["dim"] = d;
  j["relatedness"] = rel;
  j["noise"] = noise;
  j["seed"] = a.seed;
  std::cout << j.dump(2) << '\n';
}

// -------------------------------------------------------------- sweep ----

struct SweepArgs {
  std::string dataset, config, out;
  std::uint64_t seed = 0;
  int workers = 1;
  bool timing = false;
  bool subsample = false;
};

struct SweepCell {
  std::size_t kernel_idx = 0;  // index into kernel cells
  Exponent s{2.0};
  double C = 1.0;
  int repeat = 0;
};

struct SweepRow {
  bool done = false;
  bool failed = false;
  double accuracy = 0.0;
  double objective = 0.0;
  double wall_time = 0.0;
  std::string verbatim;  // reused row text from a previous run
};

struct SweepPlan {
  std::vector<std::vector<KernelSpec>> kernel_cells;
  std::vector<std::string> kernel_names;
  std::vector<Exponent> s_grid;
  std::vector<double> C_grid;
  std::optional<Exponent> r;  // engaged for joint multiple-kernel cells
  int repeats = 1;
  double train_fraction = 0.1;
  TrainOptions opts;
  std::vector<SweepCell> cells;
};

SweepPlan sweep_plan_from_json(const json& cfg) {
  reject_unknown_keys(cfg,
                      {"kernels", "kernel", "model", "s_grid", "C_grid", "r",
                       "repeats", "train_fraction", "max_outer", "tol",
                       "inner_tol", "schema_version"},
                      "sweep config");
  SweepPlan plan;
  const auto specs = kernels_from_config(cfg, /*default_normalize=*/false);
  std::string model_type;
  if (cfg.contains("model")) {
    if (!cfg["model"].is_string()) {
      throw ParseError("sweep config: model must be \"mtl\" or \"mkl\"");
    }
    model_type = cfg["model"].get<std::string>();
    if (model_type != "mtl" && model_type != "mkl") {
      throw ParseError("sweep config: model must be \"mtl\" or \"mkl\"");
    }
  }
  const bool mkl = model_type == "mkl";
  if (mkl) {
    plan.r = cfg.contains("r") ? exponent_from(cfg["r"], "r") : Exponent(1.0);
    plan.kernel_cells.push_back(specs);
    std::string name = "mix[";
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (i) name += '+';
      name += specs[i].describe();
    }
    name += ']';
    plan.kernel_names.push_back(std::move(name));
  } else {
    if (cfg.contains("r")) {
      throw ParseError("sweep config: 'r' needs model \"mkl\"");
    }
    for (const auto& k : specs) {
      plan.kernel_cells.push_back({k});
      plan.kernel_names.push_back(k.describe());
    }
  }

  if (cfg.contains("s_grid")) {
    if (!cfg["s_grid"].is_array() || cfg["s_grid"].empty()) {
      throw ParseError("sweep config: 's_grid' must be a nonempty array");
    }
    for (const auto& e : cfg["s_grid"]) {
      plan.s_grid.push_back(exponent_from(e, "s_grid"));
    }
  } else {
    for (double v : {1.0, 4.0 / 3.0, 2.0, 4.0, 10.0, 100.0}) {
      plan.s_grid.emplace_back(v);
    }
  }
  if (cfg.contains("C_grid")) {
    if (!cfg["C_grid"].is_array() || cfg["C_grid"].empty()) {
      throw ParseError("sweep config: 'C_grid' must be a nonempty array");
    }
    for (const auto& e : cfg["C_grid"]) {
      plan.C_grid.push_back(number_from(e, "C_grid"));
      if (!(plan.C_grid.back() >= 0.0)) {
        throw ParseError("sweep config: C values must be nonnegative");
      }
    }
  } else {
    for (int e = -4; e <= 4; ++e) plan.C_grid.push_back(std::pow(3.0, e));
  }
  if (cfg.contains("repeats")) {
    plan.repeats = int_from(cfg["repeats"], "repeats");
    if (plan.repeats < 1) throw ParseError("sweep config: repeats >= 1");
  }
  if (cfg.contains("train_fraction")) {
    plan.train_fraction = number_from(cfg["train_fraction"], "train_fraction");
    if (!(plan.train_fraction > 0.0 && plan.train_fraction < 1.0)) {
      throw ParseError("sweep config: train_fraction in (0,1)");
    }
  }
  if (cfg.contains("max_outer")) {
    plan.opts.max_outer = int_from(cfg["max_outer"], "max_outer");
    if (plan.opts.max_outer < 1) throw ParseError("sweep config: max_outer >= 1");
  }
  if (cfg.contains("tol")) plan.opts.tol = number_from(cfg["tol"], "tol");
  if (cfg.contains("inner_tol")) {
    plan.opts.inner_tol = number_from(cfg["inner_tol"], "inner_tol");
  }
  plan.opts.workers = 1;  // cells are the parallel unit

  for (std::size_t k = 0; k < plan.kernel_cells.size(); ++k) {
    for (const auto& s : plan.s_grid) {
      for (const double C : plan.C_grid) {
        for (int rep = 0; rep < plan.repeats; ++rep) {
          plan.cells.push_back(SweepCell{k, s, C, rep});
        }
      }
    }
  }
  return plan;
}

std::string sweep_key(const SweepPlan& plan, const SweepCell& c) {
  std::ostringstream os;
  os << to_string(c.s) << ','
     << (plan.r.has_value() ? to_string(*plan.r) : std::string()) << ','
     << fmt(c.C) << ',' << plan.kernel_names[c.kernel_idx] << ',' << c.repeat;
  return os.str();
}

// Reads a previous partial output. Rows must be a prefix of the planned
// grid in order; mismatches mean the file belongs to a different plan.
std::vector<std::string> read_previous_rows(const std::string& path,
                                            const std::string& header,
                                            const SweepPlan& plan) {
  std::vector<std::string> rows;
  std::ifstream in(path, std::ios::binary);
  if (!in) return rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (line != header) {
    throw ParseError(path + ": existing output has a different schema; "
                            "remove it or change --out");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (rows.size() >= plan.cells.size()) {
      throw ParseError(path + ": existing output has more rows than the grid");
    }
    const std::string key = sweep_key(plan, plan.cells[rows.size()]);
    if (line.compare(0, key.size(), key) != 0 ||
        (line.size() > key.size() && line[key.size()] != ',')) {
      throw ParseError(path + ": row " + std::to_string(rows.size() + 1) +
                       " does not match the planned grid; remove the file or "
                       "change --out");
    }
    rows.push_back(line);
  }
  return rows;
}

void run_sweep(const SweepArgs& a) {
  if (a.out.empty()) throw ParseError("sweep: --out <rows.csv> is required");
  const json cfg = a.config.empty() ? json::object() : read_json_file(a.config);
  const SweepPlan plan = sweep_plan_from_json(cfg);
  const auto data = load_dataset_arg(a.dataset, a.subsample, a.seed);

  std::string header = "s,r,C,kernel,repeat,mean_task_accuracy,objective";
  if (a.timing) header += ",wall_time";

  const std::vector<std::string> previous =
      read_previous_rows(a.out, header, plan);
  const std::size_t done = previous.size();
  const std::size_t total = plan.cells.size();

  std::vector<SweepRow> rows(total);
  for (std::size_t i = 0; i < done; ++i) {
    rows[i].done = true;
    rows[i].verbatim = previous[i];
  }

  std::atomic<int> failed{0};
  parallel_for(total - done, a.workers, [&](std::size_t idx) {
    const std::size_t i = done + idx;
    const SweepCell& cell = plan.cells[i];
    SweepRow& row = rows[i];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const SplitResult sp =
          split(data, plan.train_fraction,
                a.seed + static_cast<std::uint64_t>(cell.repeat));
      TrainConfig tc;
      tc.kernels = plan.kernel_cells[cell.kernel_idx];
      tc.s = cell.s;
      tc.r = plan.r;
      tc.C = cell.C;
      tc.mkl = plan.r.has_value();
      tc.opts = plan.opts;
      const MtlModel model = train_from_config(sp.train, tc);
      row.accuracy = mean_task_accuracy(model, sp.test);
      row.objective = objective_value(model, sp.train);
    } catch (const std::exception& e) {
      row.failed = true;
      row.accuracy = std::numeric_limits<double>::quiet_NaN();
      row.objective = std::numeric_limits<double>::quiet_NaN();
      ++failed;
      std::cerr << "sweep cell " << sweep_key(plan, cell) << " failed: "
                << e.what() << '\n';
    }
    row.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    row.done = true;
  });

  std::ostringstream csv;
  csv << header << '\n';
  for (std::size_t i = 0; i < total; ++i) {
    if (!rows[i].verbatim.empty()) {
      csv << rows[i].verbatim << '\n';
      continue;
    }
    csv << sweep_key(plan, plan.cells[i]) << ',' << fmt(rows[i].accuracy) << ','
        << fmt(rows[i].objective);
    if (a.timing) csv << ',' << fmt(rows[i].wall_time);
    csv << '\n';
  }
  write_text(a.out, csv.str());

  // Best C per (kernel, s): mean accuracy over repeats, from the final file
  // so reused rows participate.
  const std::string final_csv = csv.str();
  std::vector<double> acc(total, std::numeric_limits<double>::quiet_NaN());
  {
    std::istringstream in(final_csv);
    std::string line;
    std::getline(in, line);  // header
    std::size_t i = 0;
    while (std::getline(in, line) && i < total) {
      // accuracy is the field right after the key prefix
      const std::string key = sweep_key(plan, plan.cells[i]);
      std::string rest = line.substr(key.size() + 1);
      const auto comma = rest.find(',');
      if (comma != std::string::npos) rest = rest.substr(0, comma);
      double v = std::numeric_limits<double>::quiet_NaN();
      std::from_chars(rest.data(), rest.data() + rest.size(), v);
      acc[i] = v;
      ++i;
    }
  }

  std::ostringstream summary;
  summary << "kernel,s,best_C,mean_accuracy\n";
  std::size_t cell_idx = 0;
  for (std::size_t k = 0; k < plan.kernel_cells.size(); ++k) {
    for (const auto& s : plan.s_grid) {
      double best_acc = -1.0;
      double best_C = std::numeric_limits<double>::quiet_NaN();
      for (const double C : plan.C_grid) {
        double sum = 0.0;
        int used = 0;
        for (int rep = 0; rep < plan.repeats; ++rep) {
          const double v = acc[cell_idx++];
          if (std::isfinite(v)) {
            sum += v;
            ++used;
          }
        }
        if (used == 0) continue;
        const double mean = sum / used;
        if (mean > best_acc) {
          best_acc = mean;
          best_C = C;
        }
      }
      summary << plan.kernel_names[k] << ',' << to_string(s) << ','
              << fmt(best_C) << ',' << fmt(best_acc < 0.0 ? std::numeric_limits<double>::quiet_NaN() : best_acc)
              << '\n';
    }
  }
  const std::string summary_path = a.out + ".summary.csv";
  write_text(summary_path, summary.str());

  json j;
  j["out"] = a.out;
  j["summary"] = summary_path;
  j["cells"] = total;
  j["reused"] = done;
  j["computed"] = total - done;
  j["failed"] = failed.load();
  std::cout << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-task kernel SVM toolkit: complexity estimates, bounds, "
               "coupled training, and sweeps"};
  app.require_subcommand(1);

  ErcArgs erc;
  auto* cmd_erc = app.add_subcommand(
      "erc-estimate", "Monte Carlo complexity estimate across an s grid");
  cmd_erc->add_option("--dataset", erc.dataset, "task CSV or JSON manifest")
      ->required();
  cmd_erc->add_option("--config", erc.config,
                      "JSON: kernels, s_grid/s, r, R");
  cmd_erc->add_option("--seed", erc.seed, "RNG seed");
  cmd_erc->add_option("--samples", erc.samples, "sign draws per estimate")
      ->check(CLI::PositiveNumber);
  cmd_erc->add_option("--out", erc.out, "CSV output path (default stdout)");
  cmd_erc->add_option("--per-sample", erc.per_sample,
                      "also dump per-draw values to this CSV");
  cmd_erc->add_flag("--subsample-to-min", erc.subsample,
                    "subsample every task to the smallest task size");
  cmd_erc->add_option("--workers", erc.workers, "worker threads")
      ->check(CLI::PositiveNumber);

  BoundArgs bound;
  auto* cmd_bound = app.add_subcommand(
      "erc-bound", "closed-form complexity bound from shape parameters");
  cmd_bound->add_option("--config", bound.config,
                        "JSON: T, N, s [, M, r, R]")
      ->required();
  cmd_bound->add_option("--seed", bound.seed, "echoed into the report");
  cmd_bound->add_option("--out", bound.out, "JSON output path (default stdout)");

  TrainArgs train;
  auto* cmd_train =
      app.add_subcommand("train", "train a coupled multi-task model");
  cmd_train->add_option("--dataset", train.dataset, "task CSV or JSON manifest")
      ->required();
  cmd_train->add_option("--config", train.config,
                        "JSON: model, s, r, C, kernels, max_outer, tol");
  cmd_train->add_option("--seed", train.seed, "subsampling seed");
  cmd_train->add_option("--out", train.out, "model JSON path")->required();
  cmd_train->add_flag("--subsample-to-min", train.subsample,
                      "subsample every task to the smallest task size");
  cmd_train->add_option("--workers", train.workers, "worker threads")
      ->check(CLI::PositiveNumber);

  EvalArgs eval;
  auto* cmd_eval =
      app.add_subcommand("eval", "evaluate a saved model on a dataset");
  cmd_eval->add_option("--dataset", eval.dataset, "task CSV or JSON manifest")
      ->required();
  cmd_eval->add_option("--model", eval.model, "model JSON path")->required();
  cmd_eval->add_option("--seed", eval.seed, "subsampling seed");
  cmd_eval->add_option("--out", eval.out, "also write the report here");
  cmd_eval->add_flag("--subsample-to-min", eval.subsample,
                     "subsample every task to the smallest task size");

  SynthArgs synth;
  auto* cmd_synth =
      app.add_subcommand("synth", "generate a synthetic multi-task dataset");
  cmd_synth->add_option("--config", synth.config,
                        "JSON: tasks, samples, dim [, relatedness, noise]")
      ->required();
  cmd_synth->add_option("--seed", synth.seed, "RNG seed");
  cmd_synth->add_option("--out", synth.out, "CSV output path")->required();

  SweepArgs sweep;
  auto* cmd_sweep = app.add_subcommand(
      "sweep", "grid sweep over (kernel, s, C) with repeated splits");
  cmd_sweep->add_option("--dataset", sweep.dataset,
                        "task CSV or JSON manifest")
      ->required();
  cmd_sweep->add_option("--config", sweep.config,
                        "JSON: kernels, s_grid, C_grid, repeats, "
                        "train_fraction [, model, r]");
  cmd_sweep->add_option("--seed", sweep.seed, "split seed base");
  cmd_sweep->add_option("--out", sweep.out, "rows CSV path")->required();
  cmd_sweep->add_flag("--timing", sweep.timing,
                      "append a wall_time column (breaks byte determinism)");
  cmd_sweep->add_flag("--subsample-to-min", sweep.subsample,
                      "subsample every task to the smallest task size");
  cmd_sweep->add_option("--workers", sweep.workers, "parallel sweep cells")
      ->check(CLI::PositiveNumber);

  std::function<void()> run;
  cmd_erc->callback([&] { run = [&] { run_erc_estimate(erc); }; });
  cmd_bound->callback([&] { run = [&] { run_erc_bound(bound); }; });
  cmd_train->callback([&] { run = [&] { run_train(train); }; });
  cmd_eval->callback([&] { run = [&] { run_eval(eval); }; });
  cmd_synth->callback([&] { run = [&] { run_synth(synth); }; });
  cmd_sweep->callback([&] { run = [&] { run_sweep(sweep); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    run();
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidDataset& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidExponent& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const UnsupportedExponent& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidTask& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
