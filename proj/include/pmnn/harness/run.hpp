#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pmnn/baseline_fdm.hpp"
#include "pmnn/error.hpp"
#include "pmnn/format.hpp"
#include "pmnn/harness/config.hpp"
#include "pmnn/harness/density.hpp"
#include "pmnn/network.hpp"
#include "pmnn/problems.hpp"
#include "pmnn/sampling.hpp"
#include "pmnn/training.hpp"

namespace pmnn::harness {

namespace fs = std::filesystem;

struct SweepRow {
  int n_h = 0;
  double fdm_lambda = 0.0;
  double fdm_lambda_err = 0.0;
  double fdm_u_err = 0.0;
  std::optional<double> nn_lambda;
  std::optional<double> nn_lambda_err;
  std::optional<double> nn_u_err;
};

struct RunReport {
  ExperimentConfig config;  // effective config (profile and seed applied)
  fs::path directory;
  std::map<std::string, fs::path> artifacts;
  double wall_seconds = 0.0;

  // solver runs
  std::optional<double> lambda;
  std::optional<double> exact_lambda;
  std::optional<double> abs_error;
  std::optional<double> rel_error;  // only when the exact eigenvalue is nonzero
  std::optional<double> u_err_max;  // held-out points, normalized and sign-aligned
  std::optional<double> density_discrepancy;
  std::optional<double> final_loss;
  std::optional<long> epochs_run;

  // fdm sweeps
  std::vector<SweepRow> sweep;
};

namespace detail {

inline json opt(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (!std::isfinite(*v)) return fmt_real(*v);
  return *v;
}

}  // namespace detail

inline json to_json(const RunReport& r) {
  json j;
  j["config"] = to_json(r.config);
  j["directory"] = r.directory.string();
  json paths = json::object();
  for (const auto& [k, p] : r.artifacts) paths[k] = p.string();
  j["artifacts"] = paths;
  j["wall_seconds"] = r.wall_seconds;
  j["lambda"] = detail::opt(r.lambda);
  j["exact_lambda"] = detail::opt(r.exact_lambda);
  j["abs_error"] = detail::opt(r.abs_error);
  j["rel_error"] = detail::opt(r.rel_error);
  j["u_err_max"] = detail::opt(r.u_err_max);
  j["density_discrepancy"] = detail::opt(r.density_discrepancy);
  j["final_loss"] = detail::opt(r.final_loss);
  j["epochs_run"] = r.epochs_run ? json(*r.epochs_run) : json(nullptr);
  if (!r.sweep.empty()) {
    json rows = json::array();
    for (const SweepRow& s : r.sweep)
      rows.push_back({{"n_h", s.n_h},
                      {"fdm_lambda", s.fdm_lambda},
                      {"fdm_lambda_err", s.fdm_lambda_err},
                      {"fdm_u_err", s.fdm_u_err},
                      {"nn_lambda", detail::opt(s.nn_lambda)},
                      {"nn_lambda_err", detail::opt(s.nn_lambda_err)},
                      {"nn_u_err", detail::opt(s.nn_u_err)}});
    j["sweep"] = rows;
  }
  return j;
}

/// Creates `root/name`, or `root/name-2`, `root/name-3`, ... when taken.
/// An existing run directory is never reused.
inline fs::path fresh_run_directory(const fs::path& root, const std::string& name) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create output directory " + root.string() + ": " + ec.message());
  for (int k = 1; k < 100000; ++k) {
    fs::path p = root / (k == 1 ? name : name + "-" + std::to_string(k));
    if (fs::create_directory(p, ec)) return p;
    if (ec) throw IoError("cannot create run directory " + p.string() + ": " + ec.message());
  }
  throw IoError("no free run directory name under " + root.string());
}

inline std::ofstream open_output(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

inline void write_iteration_header(std::ostream& out) { out << "epoch,loss,lambda,lambda_err_max,u_err_max\n"; }

inline void write_iteration_row(std::ostream& out, const IterationRecord& r) {
  out << r.epoch << ',' << fmt_real(r.loss) << ',' << fmt_real(r.lambda) << ','
      << (r.lambda_err_max ? fmt_real(*r.lambda_err_max) : "") << ',' << (r.u_err_max ? fmt_real(*r.u_err_max) : "")
      << '\n';
}

/// Held-out evaluation points: a uniform grid for d <= 2, uniform random
/// points otherwise.
inline SampleSet evaluation_points(const ExperimentConfig& c) {
  const int d = c.problem.dimension;
  const Box box = domain_of(c);
  int n = c.outputs.eval_points;
  if (d == 1) return uniform_grid(n > 0 ? n : 1000, 1, box);
  if (d == 2) return uniform_grid(n > 0 ? n : 100, 2, box);
  return uniform_random(n > 0 ? n : 10000, box, sampling_seed(c.training.seed) + 1);
}

using ProgressSink = std::function<void(const IterationRecord&)>;

namespace detail {

inline std::optional<SampleSet> training_points(const ExperimentConfig& c) {
  if (c.training.sampling != "grid") return std::nullopt;
  return uniform_grid(c.training.grid_points, c.problem.dimension, domain_of(c));
}

inline void fill_solver_report(RunReport& rep, const ExperimentConfig& c, const SolverRun& run,
                               const std::optional<ExactSolution>& exact, const fs::path& dir) {
  const Problem problem = problem_of(c);
  const TrialFunction trial = wrap_trial(run.network, problem.bc);
  rep.lambda = run.estimate.lambda;
  rep.final_loss = run.estimate.final_loss;
  rep.epochs_run = run.estimate.epochs_run;
  if (exact) {
    rep.exact_lambda = exact->lambda;
    rep.abs_error = std::abs(run.estimate.lambda - exact->lambda);
    if (exact->lambda != 0.0) rep.rel_error = *rep.abs_error / std::abs(exact->lambda);
  }

  // Eigenfunction on held-out points.
  const SampleSet eval = evaluation_points(c);
  Eigen::ArrayXd u = normalize(evaluate_trial(trial, eval.points, run.network.params));
  std::optional<Eigen::ArrayXd> ue;
  if (exact) {
    ue = normalize(exact->eigenfunction(eval.points));
    u = sign_aligned(u, *ue);
    rep.u_err_max = (u - *ue).abs().maxCoeff();
  }
  {
    auto out = open_output(dir / "eigenfunction.csv");
    for (int i = 0; i < eval.dimension(); ++i) out << 'x' << i << ',';
    out << "u" << (ue ? ",u_exact" : "") << '\n';
    for (Eigen::Index j = 0; j < eval.size(); ++j) {
      for (int i = 0; i < eval.dimension(); ++i) out << fmt_real(eval.points(i, j)) << ',';
      out << fmt_real(u(j));
      if (ue) out << ',' << fmt_real((*ue)(j));
      out << '\n';
    }
    rep.artifacts["eigenfunction"] = dir / "eigenfunction.csv";
  }

  // Density of u(X), X uniform on the domain.
  const SampleSet dens = uniform_random(c.outputs.density_points, domain_of(c), sampling_seed(c.training.seed) + 2);
  Eigen::ArrayXd v = normalize(evaluate_trial(trial, dens.points, run.network.params));
  auto span_of = [](const Eigen::ArrayXd& a) {
    return std::span<const double>(a.data(), static_cast<std::size_t>(a.size()));
  };
  {
    auto out = open_output(dir / "density.csv");
    if (exact) {
      const Eigen::ArrayXd ve = normalize(exact->eigenfunction(dens.points));
      v = sign_aligned(v, ve);
      const DensityComparison cmp = compare_densities(span_of(v), span_of(ve), c.outputs.histogram_bins);
      rep.density_discrepancy = cmp.discrepancy;
      write_density_csv(out, cmp.predicted, &cmp.exact);
    } else {
      write_density_csv(out, density_histogram(span_of(v), c.outputs.histogram_bins));
    }
    rep.artifacts["density"] = dir / "density.csv";
  }

  save_checkpoint(run.network, (dir / "checkpoint.json").string());
  rep.artifacts["checkpoint"] = dir / "checkpoint.json";
}

}  // namespace detail

/// Trains one configured solver and writes its artifacts into `dir`.
inline RunReport run_solver_into(const ExperimentConfig& c, const fs::path& dir, const ProgressSink& progress = {}) {
  validate(c);
  RunReport rep;
  rep.config = c;
  rep.directory = dir;
  const auto t0 = std::chrono::steady_clock::now();
  const std::optional<ExactSolution> exact = exact_of(c);

  auto csv = open_output(dir / "iterations.csv");
  write_iteration_header(csv);
  rep.artifacts["iterations"] = dir / "iterations.csv";
  RecordSink sink = [&](const IterationRecord& r) {
    write_iteration_row(csv, r);
    if (progress) progress(r);
  };
  const SolverRun run = run_solver(train_config_of(c), problem_of(c), exact, detail::training_points(c), sink);
  csv.flush();
  detail::fill_solver_report(rep, c, run, exact, dir);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

/// Finite differences on each grid, and optionally IPMNN trained on the same
/// grid points; errors are against d pi^2 and prod sin(pi x_i).
inline std::vector<SweepRow> fdm_vs_nn_sweep(const ExperimentConfig& c, const ProgressSink& progress = {}) {
  validate(c);
  if (c.kind != "fdm_sweep") throw InvalidArgument(c.name + " is not an fdm_sweep config");
  const int d = c.problem.dimension;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  std::vector<SweepRow> rows;
  for (int n_h : c.sweep.grids) {
    SweepRow row;
    row.n_h = n_h;
    const fdm::ReferenceError f = fdm::fdm_reference_error(d, n_h);
    row.fdm_lambda = f.lambda;
    row.fdm_lambda_err = f.lambda_err;
    row.fdm_u_err = f.u_err;
    if (c.sweep.with_network) {
      ExperimentConfig nn = c;
      nn.kind = "solver";
      nn.training.sampling = "grid";
      nn.training.grid_points = n_h;
      const SampleSet grid = uniform_grid(n_h, d, domain_of(nn));
      const auto exact = exact_of(nn);
      const SolverRun run = run_solver(train_config_of(nn), problem_of(nn), exact, grid, progress);
      row.nn_lambda = run.estimate.lambda;
      row.nn_lambda_err = std::abs(run.estimate.lambda - d * pi2);
      row.nn_u_err = max_error_aligned(run.estimate.eigenfunction, exact->eigenfunction(grid.points));
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  const bool nn = !rows.empty() && rows.front().nn_lambda.has_value();
  out << "n_h,fdm_lambda,fdm_lambda_inf,fdm_u_inf";
  if (nn) out << ",nn_lambda,nn_lambda_inf,nn_u_inf";
  out << '\n';
  for (const SweepRow& r : rows) {
    out << r.n_h << ',' << fmt_real(r.fdm_lambda) << ',' << fmt_real(r.fdm_lambda_err) << ',' << fmt_real(r.fdm_u_err);
    if (nn) out << ',' << fmt_real(*r.nn_lambda) << ',' << fmt_real(*r.nn_lambda_err) << ',' << fmt_real(*r.nn_u_err);
    out << '\n';
  }
}

struct RunOptions {
  std::string profile = "full";
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;  // overrides outputs.directory
  ProgressSink progress;
};

inline ExperimentConfig effective_config(ExperimentConfig c, const RunOptions& opt) {
  c = apply_profile(std::move(c), opt.profile);
  if (opt.seed) c.training.seed = *opt.seed;
  if (opt.out) c.outputs.directory = opt.out->string();
  validate(c);
  return c;
}

/// Runs a config end to end in a fresh directory under outputs.directory and
/// writes config.json and report.json next to the other artifacts.
inline RunReport run(const ExperimentConfig& base, const RunOptions& opt = {}) {
  const ExperimentConfig c = effective_config(base, opt);
  const fs::path dir = fresh_run_directory(c.outputs.directory, c.name);
  {
    auto out = open_output(dir / "config.json");
    out << to_json(c).dump(2) << '\n';
  }
  RunReport rep;
  if (c.kind == "fdm_sweep") {
    const auto t0 = std::chrono::steady_clock::now();
    rep.config = c;
    rep.directory = dir;
    rep.sweep = fdm_vs_nn_sweep(c, opt.progress);
    auto out = open_output(dir / "sweep.csv");
    write_sweep_csv(out, rep.sweep);
    rep.artifacts["sweep"] = dir / "sweep.csv";
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  } else {
    rep = run_solver_into(c, dir, opt.progress);
  }
  rep.artifacts["config"] = dir / "config.json";
  rep.artifacts["report"] = dir / "report.json";
  auto out = open_output(dir / "report.json");
  out << to_json(rep).dump(2) << '\n';
  return rep;
}

inline json read_report(const fs::path& dir) {
  std::ifstream in(dir / "report.json");
  if (!in) throw IoError("no report.json in " + dir.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("report.json in " + dir.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace pmnn::harness
