#include "fmsolve/cli.hpp"

#include "fmsolve/analysis.hpp"
#include "fmsolve/csv.hpp"
#include "fmsolve/svg.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

namespace fmsolve::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

template <typename T>
T get_or(const Json& obj, const char* key, T fallback) {
  return obj.contains(key) ? obj.at(key).get<T>() : fallback;
}

cfm::SolverSpec parse_solver_spec(const Json& j) {
  io::require_known_keys(j, {"method", "steps", "atol", "rtol"}, "solver_grid entry");
  if (!j.contains("method")) {
    throw ConfigError("solver_grid entry: missing key 'method'");
  }
  const ode::Method method = ode::parse_method(j.at("method").get<std::string>());
  if (method == ode::Method::dopri5) {
    if (j.contains("steps")) {
      throw ConfigError("solver_grid entry: dopri5 takes atol/rtol, not steps");
    }
    return cfm::SolverSpec::adaptive(get_or(j, "atol", 1e-5), get_or(j, "rtol", 1e-5));
  }
  if (j.contains("atol") || j.contains("rtol")) {
    throw ConfigError(fmt::format("solver_grid entry: {} takes steps, not tolerances",
                                  ode::to_string(method)));
  }
  if (!j.contains("steps")) {
    throw ConfigError(
        fmt::format("solver_grid entry: {} needs 'steps'", ode::to_string(method)));
  }
  return cfm::SolverSpec::fixed(method, j.at("steps").get<int>());
}

std::vector<double> parse_double_list(const std::string& text, std::string_view what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) {
        throw std::invalid_argument(item);
      }
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{}: cannot parse '{}' as a number", what, item));
    }
  }
  if (out.empty()) {
    throw ConfigError(fmt::format("{}: empty list", what));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text, std::string_view what) {
  std::vector<int> out;
  for (double v : parse_double_list(text, what)) {
    if (v != std::floor(v) || v < 1) {
      throw ConfigError(fmt::format("{}: '{}' is not a positive integer", what, v));
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) {
    return *flag;
  }
  if (const char* env = std::getenv("FMSOLVE_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string_view(env).size()) {
        throw std::invalid_argument(env);
      }
      return v;
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("FMSOLVE_SEED='{}' is not an unsigned integer", env));
    }
  }
  return fallback;
}

fs::path prepare_output_dir(const fs::path& dir) {
  fs::create_directories(dir);
  return dir;
}

std::vector<cfm::SolverSpec> grid_or_default(const RunConfig& cfg) {
  return cfg.solver_grid.empty() ? analysis::default_pareto_grid() : cfg.solver_grid;
}

// -- subcommand options ------------------------------------------------------

struct CommonOptions {
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string config_path;
  bool quiet = false;
};

struct ConvergenceOptions {
  int dim = 1;
  std::string h_list;
  double lambda = -1.0;
};

struct StabilityOptions {
  double re_min = -5.0;
  double re_max = 2.0;
  double im_min = -4.0;
  double im_max = 4.0;
  int n_re = 141;
  int n_im = 161;
  double lambda = -15.0;
  std::string demo_h = "0.1,0.16666666666666666";
  double t1 = 3.0;
  int max_steps = 200;
};

struct DataOptions {
  std::string kind = "moons";
  int n = 2000;
  double noise = 0.05;
  int dim = 2;
};

struct TrainOptions {
  std::string model_path;
  std::optional<int> epochs;
  std::optional<int> hidden;
};

struct SampleOptions {
  std::string model_path;
  std::string solver = "rk4";
  int steps = 20;
  double atol = 1e-5;
  double rtol = 1e-5;
  int n = 2000;
};

struct BenchmarkOptions {
  std::string model_path;
  int n = 2000;
  int projections = 200;
  std::string hidden_sweep;
  std::string epoch_sweep;
};

struct JacobianOptions {
  std::string model_path;
  int n = 200;
  int steps = 20;
};

struct DopriOptions {
  std::string model_path;
  double atol = 1e-5;
  double rtol = 1e-5;
  int n = 2000;
  int bins = 10;
};

RunConfig config_for(const CommonOptions& common) {
  RunConfig cfg = common.config_path.empty() ? RunConfig{} : load_run_config(common.config_path);
  if (!common.out_dir.empty()) {
    cfg.output_dir = common.out_dir;
  }
  cfg.seed = resolve_seed(common.seed, cfg.seed);
  cfg.train.seed = cfg.seed;
  return cfg;
}

cfm::FlowModel load_flow_model(const std::string& path) {
  if (path.empty()) {
    throw ConfigError("--model is required");
  }
  return io::load_model(path).model;
}

// -- subcommands -------------------------------------------------------------

int cmd_convergence(const CommonOptions& common, const ConvergenceOptions& opt, std::ostream& out) {
  const RunConfig cfg = config_for(common);
  const fs::path dir = prepare_output_dir(cfg.output_dir);
  if (opt.dim < 1) {
    throw ConfigError("--dim must be >= 1");
  }
  analysis::DecayProblem problem;
  problem.lambda = opt.lambda;
  if (opt.dim == 1) {
    problem.y0 = StateVector::Ones(1);
  } else {
    Rng rng(cfg.seed);
    const PointBatch g = gaussian_sample(rng, opt.dim, 1);
    problem.y0 = Eigen::Map<const StateVector>(g.data(), g.size());
  }
  const std::vector<double> h_list = opt.h_list.empty()
                                         ? analysis::default_step_sizes()
                                         : parse_double_list(opt.h_list, "--h-list");
  const std::vector<ode::Method> methods = {ode::Method::euler, ode::Method::midpoint,
                                            ode::Method::rk4, ode::Method::dopri5};
  const analysis::ConvergenceResult result =
      analysis::convergence_study(problem, methods, h_list);
  io::write_convergence_csv(dir / "convergence.csv", result.rows);

  std::vector<svg::Series> series;
  std::size_t k = 0;
  for (ode::Method m : methods) {
    svg::Series s;
    s.label = std::string(ode::to_string(m));
    s.color = svg::color(k);
    s.markers = true;
    svg::Series ref;
    ref.label = fmt::format("slope {}", ode::order(m));
    ref.color = s.color;
    ref.dashed = true;
    for (const auto& row : result.rows) {
      if (row.method == m && row.error > analysis::kErrorFloor) {
        s.x.push_back(row.h);
        s.y.push_back(row.error);
      }
    }
    if (!s.x.empty()) {
      const double h0 = s.x.front();
      const double e0 = s.y.front();
      for (double h : s.x) {
        ref.x.push_back(h);
        ref.y.push_back(e0 * std::pow(h / h0, ode::order(m)));
      }
    }
    series.push_back(std::move(s));
    series.push_back(std::move(ref));
    ++k;
  }
  svg::Plot plot{fmt::format("Global error vs step size (y' = {} y, dim {})", opt.lambda, opt.dim),
                 "h", "global error at t=1", true, true};
  svg::write(dir / "convergence.svg", svg::line_plot(plot, series));

  for (ode::Method m : methods) {
    fmt::print(out, "slope {:<8} {:.4f}\n", ode::to_string(m), result.slopes.at(m));
  }
  return kOk;
}

int cmd_stability(const CommonOptions& common, const StabilityOptions& opt, std::ostream& out) {
  const RunConfig cfg = config_for(common);
  const fs::path dir = prepare_output_dir(cfg.output_dir);
  std::vector<ode::StabilityRaster> rasters;
  for (ode::Method m :
       {ode::Method::euler, ode::Method::midpoint, ode::Method::rk4, ode::Method::dopri5}) {
    ode::StabilityRaster r = ode::stability_region_grid(m, opt.re_min, opt.re_max, opt.im_min,
                                                        opt.im_max, opt.n_re, opt.n_im);
    io::write_raster_csv(dir / fmt::format("stability_{}.csv", ode::to_string(m)), r);
    fmt::print(out, "real-axis extent {:<8} {:.4f}\n", ode::to_string(m),
               ode::real_axis_extent(r));
    rasters.push_back(std::move(r));
  }
  svg::Plot plot{"Stability regions |R(z)| <= 1", "Re(z)", "Im(z)"};
  plot.width = 560;
  plot.height = 600;
  svg::write(dir / "stability.svg", svg::stability_regions(plot, rasters));

  const std::vector<double> hs = parse_double_list(opt.demo_h, "--demo-h");
  const auto traces = analysis::stability_demo(opt.lambda, hs, opt.t1, opt.max_steps);
  io::write_stability_demo_csv(dir / "stability_demo.csv", traces);
  std::vector<svg::Series> series;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    svg::Series s;
    s.label = fmt::format("h = {:.4g}{}", traces[i].h, traces[i].diverged ? " (diverged)" : "");
    s.color = svg::color(i);
    s.markers = true;
    for (std::size_t n = 0; n < traces[i].y.size(); ++n) {
      s.x.push_back(static_cast<double>(n) * traces[i].h);
      s.y.push_back(traces[i].y[n]);
    }
    series.push_back(std::move(s));
    fmt::print(out, "demo h={:.6g} steps={} diverged={}\n", traces[i].h, traces[i].y.size() - 1,
               traces[i].diverged ? "yes" : "no");
  }
  svg::write(dir / "stability_demo.svg",
             svg::line_plot({fmt::format("Euler on y' = {} y", opt.lambda), "t", "y"}, series));
  return kOk;
}

int cmd_data(const CommonOptions& common, const DataOptions& opt, std::ostream& out) {
  const RunConfig cfg = config_for(common);
  const fs::path dir = prepare_output_dir(cfg.output_dir);
  data::DatasetSpec spec;
  spec.kind = data::parse_kind(opt.kind);
  spec.n = opt.n;
  spec.noise = opt.noise;
  spec.dim = opt.dim;
  Rng rng(cfg.seed);
  const data::Dataset ds = data::generate(spec, rng);
  io::write_points_csv(dir / "data.csv", ds.points, &ds.labels);
  if (ds.points.cols() >= 2) {
    svg::write(dir / "data.svg",
               svg::scatter({fmt::format("{} (n = {})", opt.kind, opt.n), "x0", "x1"}, ds.points,
                            svg::color(0)));
  }
  fmt::print(out, "wrote {} points\n", ds.points.rows());
  return kOk;
}

int cmd_train(const CommonOptions& common, const TrainOptions& opt, std::ostream& out) {
  RunConfig cfg = config_for(common);
  if (opt.epochs) {
    cfg.train.epochs = *opt.epochs;
  }
  if (opt.hidden) {
    cfg.train.mlp.hidden = *opt.hidden;
  }
  cfg.train.validate();
  const fs::path dir = prepare_output_dir(cfg.output_dir);
  const fs::path model_path = opt.model_path.empty() ? dir / "model.json" : fs::path(opt.model_path);
  if (model_path.has_parent_path()) {
    fs::create_directories(model_path.parent_path());
  }
  const int report_every = std::max(1, cfg.train.epochs / 10);
  const cfm::TrainResult result =
      cfm::train(cfg.train, [&](int epoch, double loss) {
        if (!common.quiet && ((epoch + 1) % report_every == 0 || epoch == 0)) {
          fmt::print(out, "epoch {:>5}  loss {:.6f}\n", epoch + 1, loss);
        }
      });
  io::ModelFile file{result.model, cfg.seed,
                     io::TrainingMeta{cfg.train.epochs, result.loss_curve.back()}};
  io::save_model(model_path, file);
  io::write_loss_csv(dir / "loss.csv", result.loss_curve);
  std::vector<double> epochs(result.loss_curve.size());
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    epochs[i] = static_cast<double>(i + 1);
  }
  svg::Series s;
  s.label = "loss";
  s.x = epochs;
  s.y = result.loss_curve;
  svg::write(dir / "loss.svg", svg::line_plot({"Training loss", "epoch", "CFM loss"}, {s}));
  fmt::print(out, "final loss {:.6f}; parameters {}; model written to {}\n",
             result.loss_curve.back(), result.model.params.parameter_count(), model_path.string());
  return kOk;
}

cfm::SolverSpec solver_from_flags(const std::string& name, int steps, double atol, double rtol) {
  const ode::Method m = ode::parse_method(name);
  return m == ode::Method::dopri5 ? cfm::SolverSpec::adaptive(atol, rtol)
                                  : cfm::SolverSpec::fixed(m, steps);
}

int cmd_sample(const CommonOptions& common, const SampleOptions& opt, std::ostream& out) {
  const RunConfig cfg = config_for(common);
  const cfm::SolverSpec solver = solver_from_flags(opt.solver, opt.steps, opt.atol, opt.rtol);
  const cfm::FlowModel model = load_flow_model(opt.model_path);
  const fs::path dir = prepare_output_dir(cfg.output_dir);
  Rng rng(cfg.seed);
  const cfm::SampleResult res = cfm::sample(model, solver, opt.n, rng);
  io::write_points_csv(dir / "samples.csv", res.points);
  io::write_trace_csv(dir / "trace.csv", res.trace);
  if (res.points.cols() >= 2) {
    svg::write(dir / "samples.svg",
               svg::scatter({fmt::format("Samples, {} (NFE {})", solver.label(),
                                         res.trace.nfe_total),
                             "x0", "x1"},
                            res.points, svg::color(0)));
  }
  fmt::print(out, "solver {} nfe={} accepted={} rejected={}\n", solver.label(),
             res.trace.nfe_total, res.trace.accepted_count(), res.trace.rejected_count());
  return kOk;
}

svg::Series pareto_series(const std::vector<analysis::ParetoRow>& rows, const std::string& method,
                          std::size_t color_index) {
  svg::Series s;
  s.label = method;
  s.color = svg::color(color_index);
  s.markers = true;
  s.line = method != "dopri5";
  for (const auto& r : rows) {
    if (r.method == method && r.error.empty()) {
      s.x.push_back(static_cast<double>(r.nfe));
      s.y.push_back(r.swd);
      s.annotations.push_back(r.adaptive() ? "adaptive" : std::to_string(r.steps));
    }
  }
  return s;
}

void write_pareto_plot(const fs::path& path, const std::vector<analysis::ParetoRow>& rows,
                       const std::string& title) {
  std::vector<svg::Series> series;
  std::size_t k = 0;
  for (const char* m : {"euler", "midpoint", "rk4", "dopri5"}) {
    series.push_back(pareto_series(rows, m, k++));
  }
  svg::write(path, svg::line_plot({title, "NFE", "SWD", true, false}, series));
}

void run_sweep(const RunConfig& cfg, const std::vector<int>& values, bool sweep_hidden,
               const BenchmarkOptions& opt, const fs::path& dir, std::ostream& out, bool quiet) {
  const std::string key = sweep_hidden ? "hidden" : "epochs";
  const fs::path csv_path = dir / fmt::format("ablation_{}.csv", key);
  std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
  csv << fmt::format("{},method,steps,nfe,swd\n", key);
  std::map<std::string, svg::Series> by_solver;
  const std::vector<cfm::SolverSpec> grid = grid_or_default(cfg);
  for (int v : values) {
    cfm::TrainConfig tc = cfg.train;
    if (sweep_hidden) {
      tc.mlp.hidden = v;
    } else {
      tc.epochs = v;
    }
    if (!quiet) {
      fmt::print(out, "training with {} = {}\n", key, v);
    }
    const cfm::TrainResult trained = cfm::train(tc);
    const auto rows = analysis::pareto_benchmark(trained.model, tc.dataset, grid, opt.n,
                                                 opt.projections, Rng(cfg.seed));
    for (const auto& r : rows) {
      csv << fmt::format("{},{},{},{},{}\n", v, r.method,
                         r.adaptive() ? std::string("adaptive") : std::to_string(r.steps), r.nfe,
                         io::format_double(r.swd));
      const std::string label = r.adaptive() ? r.method : fmt::format("{}-{}", r.method, r.steps);
      svg::Series& s = by_solver[label];
      s.label = label;
      s.markers = true;
      s.x.push_back(v);
      s.y.push_back(r.swd);
      if (!quiet) {
        fmt::print(out, "  {:<14} nfe={:<5} swd={:.5f}\n", label, r.nfe, r.swd);
      }
    }
  }
  std::vector<svg::Series> series;
  std::size_t k = 0;
  for (auto& [label, s] : by_solver) {
    s.color = svg::color(k++);
    series.push_back(s);
  }
  svg::write(dir / fmt::format("ablation_{}.svg", key),
             svg::line_plot({fmt::format("SWD vs {}", key), key, "SWD", true, false}, series));
}

int cmd_benchmark(const CommonOptions& common, const BenchmarkOptions& opt, std::ostream& out) {
  const RunConfig cfg = config_for(common);
  const fs::path dir = prepare_output_dir(cfg.output_dir);
  const bool sweeping = !opt.hidden_sweep.empty() || !opt.epoch_sweep.empty();
  if (!sweeping || !opt.model_path.empty()) {
    const cfm::FlowModel model = load_flow_model(opt.model_path);
    const std::vector<cfm::SolverSpec> grid = grid_or_default(cfg);
    const auto rows = analysis::pareto_benchmark(model, cfg.train.dataset, grid, opt.n,
                                                 opt.projections, Rng(cfg.seed));
    io::write_pareto_csv(dir / "pareto.csv", rows);
    write_pareto_plot(dir / "pareto.svg", rows,
                      fmt::format("NFE vs SWD ({})", data::to_string(cfg.train.dataset.kind)));
    for (const auto& r : rows) {
      fmt::print(out, "{:<9} {:>8} nfe={:<5} swd={}{}\n", r.method,
                 r.adaptive() ? std::string("adaptive") : std::to_string(r.steps), r.nfe,
                 io::format_double(r.swd), r.error.empty() ? "" : "  error: " + r.error);
    }
  }
  if (!opt.hidden_sweep.empty()) {
    run_sweep(cfg, parse_int_list(opt.hidden_sweep, "--hidden"), true, opt, dir, out,
              common.quiet);
  }
  if (!opt.epoch_sweep.empty()) {
    run_sweep(cfg, parse_int_list(opt.epoch_sweep, "--epochs"), false, opt, dir, out,
              common.quiet);
  }
  return kOk;
}

int cmd_jacobian(const CommonOptions& common, const JacobianOptions& opt, std::ostream& out) {
  const RunConfig cfg = config_for(common);
  const cfm::FlowModel model = load_flow_model(opt.model_path);
  if (model.params.config.data_dim != 2) {
    throw ConfigError(fmt::format("jacobian: unsupported dimension {} (only 2D models)",
                                  model.params.config.data_dim));
  }
  const fs::path dir = prepare_output_dir(cfg.output_dir);
  Rng rng(cfg.seed);
  const std::vector<double> grid = analysis::default_time_grid();
  const auto rows = analysis::spectrum_along_trajectory(
      model.params, opt.n, grid, cfm::SolverSpec::fixed(ode::Method::rk4, opt.steps), rng);
  io::write_spectrum_csv(dir / "spectrum.csv", rows);

  svg::Series e1;
  svg::Series e2;
  svg::Series e1_lo;
  svg::Series cond;
  e1.label = "eig1 (mean)";
  e2.label = "eig2 (mean)";
  cond.label = "median condition number";
  e1_lo.color = svg::color(0);
  e1_lo.dashed = true;
  svg::Series e1_hi = e1_lo;
  e1_lo.label = "eig1 +/- std";
  e1.color = svg::color(0);
  e2.color = svg::color(1);
  cond.color = svg::color(2);
  e1.markers = e2.markers = cond.markers = true;
  for (const auto& r : rows) {
    e1.x.push_back(r.t);
    e1.y.push_back(r.eig1_re_mean);
    e1_lo.x.push_back(r.t);
    e1_lo.y.push_back(r.eig1_re_mean - r.eig1_re_std);
    e1_hi.x.push_back(r.t);
    e1_hi.y.push_back(r.eig1_re_mean + r.eig1_re_std);
    e2.x.push_back(r.t);
    e2.y.push_back(r.eig2_re_mean);
    cond.x.push_back(r.t);
    cond.y.push_back(r.cond_median);
    fmt::print(out, "t={:.2f} eig1_re={:+.4f} eig2_re={:+.4f} cond_median={}\n", r.t,
               r.eig1_re_mean, r.eig2_re_mean, io::format_double(r.cond_median));
  }
  const std::string left =
      svg::line_plot({"Jacobian eigenvalues (real part)", "t", "Re(lambda)"}, {e1, e1_lo, e1_hi, e2});
  const std::string right =
      svg::line_plot({"Condition number", "t", "median cond", false, true}, {cond});
  svg::write(dir / "spectrum.svg", svg::side_by_side(left, right, 640, 480));
  return kOk;
}

int cmd_dopri_trace(const CommonOptions& common, const DopriOptions& opt, std::ostream& out) {
  const RunConfig cfg = config_for(common);
  const cfm::FlowModel model = load_flow_model(opt.model_path);
  const fs::path dir = prepare_output_dir(cfg.output_dir);
  Rng rng(cfg.seed);
  const cfm::SampleResult res =
      cfm::sample(model, cfm::SolverSpec::adaptive(opt.atol, opt.rtol), opt.n, rng);
  io::write_trace_csv(dir / "dopri_trace.csv", res.trace);
  const analysis::StepSummary summary = analysis::dopri_step_summary(res.trace, opt.bins);
  io::write_step_summary_csv(dir / "dopri_steps.csv", summary);

  svg::Series steps;
  steps.label = "accepted h";
  steps.x = summary.accepted_t;
  steps.y = summary.accepted_h;
  steps.markers = true;
  std::vector<double> counts(summary.counts.begin(), summary.counts.end());
  const std::string left = svg::line_plot({"DOPRI5 step size vs time", "t", "h", false, true},
                                          {steps});
  const std::string right =
      svg::histogram({"Accepted steps per time bin", "t", "count"}, summary.bin_edges, counts);
  svg::write(dir / "dopri_steps.svg", svg::side_by_side(left, right, 640, 480));

  double total = 0.0;
  for (double h : summary.accepted_h) {
    total += h;
  }
  fmt::print(out, "accepted={} rejected={} nfe={} sum_h={}\n", res.trace.accepted_count(),
             res.trace.rejected_count(), res.trace.nfe_total, io::format_double(total));
  fmt::print(out, "mean h over [0, 0.2): {:.5f}; over [0.8, 1]: {:.5f}\n",
             analysis::mean_accepted_step(res.trace, 0.0, 0.2),
             analysis::mean_accepted_step(res.trace, 0.8, 1.0));
  return kOk;
}

void add_common(CLI::App* cmd, CommonOptions& common, bool with_config) {
  cmd->add_option("-o,--out", common.out_dir, "Output directory (default: out)");
  cmd->add_option("--seed", common.seed, "Seed (overrides FMSOLVE_SEED and the config)");
  cmd->add_flag("-q,--quiet", common.quiet, "Suppress progress output");
  if (with_config) {
    cmd->add_option("-c,--config", common.config_path, "JSON run configuration")
        ->check(CLI::ExistingFile);
  }
}

}  // namespace

RunConfig parse_run_config(const Json& doc) {
  try {
    io::require_known_keys(
        doc, {"format_version", "seed", "dataset", "train", "solver_grid", "output_dir"},
        "config");
    if (doc.contains("format_version") &&
        doc.at("format_version").get<int>() != kConfigFormatVersion) {
      throw ConfigError(fmt::format("config: unsupported format_version {}",
                                    doc.at("format_version").dump()));
    }
    RunConfig cfg;
    cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);
    if (doc.contains("dataset")) {
      const Json& d = doc.at("dataset");
      io::require_known_keys(d, {"kind", "n", "noise", "dim"}, "config.dataset");
      data::DatasetSpec& spec = cfg.train.dataset;
      spec.kind = data::parse_kind(get_or<std::string>(d, "kind", "moons"));
      spec.n = get_or(d, "n", spec.n);
      spec.noise = get_or(d, "noise", spec.noise);
      spec.dim = get_or(d, "dim", spec.dim);
    }
    if (doc.contains("train")) {
      const Json& t = doc.at("train");
      io::require_known_keys(
          t, {"epochs", "batch_size", "lr", "hidden", "n_blocks", "time_embed_dim"},
          "config.train");
      cfg.train.epochs = get_or(t, "epochs", cfg.train.epochs);
      cfg.train.batch_size = get_or(t, "batch_size", cfg.train.batch_size);
      cfg.train.lr = get_or(t, "lr", cfg.train.lr);
      cfg.train.mlp.hidden = get_or(t, "hidden", cfg.train.mlp.hidden);
      cfg.train.mlp.n_blocks = get_or(t, "n_blocks", cfg.train.mlp.n_blocks);
      cfg.train.mlp.time_embed_dim = get_or(t, "time_embed_dim", cfg.train.mlp.time_embed_dim);
    }
    cfg.train.mlp.data_dim = cfg.train.dataset.data_dim();
    if (doc.contains("solver_grid")) {
      const Json& grid = doc.at("solver_grid");
      if (!grid.is_array()) {
        throw ConfigError("config.solver_grid: expected an array");
      }
      for (const Json& entry : grid) {
        cfg.solver_grid.push_back(parse_solver_spec(entry));
      }
    }
    if (doc.contains("output_dir")) {
      cfg.output_dir = doc.at("output_dir").get<std::string>();
    }
    cfg.train.seed = cfg.seed;
    cfg.train.validate();
    return cfg;
  } catch (const Json::exception& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  }
  try {
    return parse_run_config(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw ConfigError(fmt::format("config '{}': {}", path.string(), e.what()));
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Flow matching ODE solver experiments"};
  app.require_subcommand(1);

  CommonOptions common;
  ConvergenceOptions conv;
  StabilityOptions stab;
  DataOptions data_opt;
  TrainOptions train_opt;
  SampleOptions sample_opt;
  BenchmarkOptions bench_opt;
  JacobianOptions jac_opt;
  DopriOptions dopri_opt;

  auto* convergence = app.add_subcommand("convergence", "Global error vs step size on y' = lambda y");
  add_common(convergence, common, false);
  convergence->add_option("--dim", conv.dim, "Number of decoupled copies");
  convergence->add_option("--h-list", conv.h_list, "Comma-separated step sizes (default 2^-3..2^-10)");
  convergence->add_option("--lambda", conv.lambda, "Decay rate");

  auto* stability = app.add_subcommand("stability", "Stability regions and the Euler blow-up demo");
  add_common(stability, common, false);
  stability->add_option("--re-min", stab.re_min);
  stability->add_option("--re-max", stab.re_max);
  stability->add_option("--im-min", stab.im_min);
  stability->add_option("--im-max", stab.im_max);
  stability->add_option("--n-re", stab.n_re, "Grid points along Re(z)");
  stability->add_option("--n-im", stab.n_im, "Grid points along Im(z)");
  stability->add_option("--lambda", stab.lambda, "Demo decay rate");
  stability->add_option("--demo-h", stab.demo_h, "Comma-separated demo step sizes");
  stability->add_option("--t1", stab.t1, "Demo horizon");
  stability->add_option("--max-steps", stab.max_steps, "Demo step cap");

  auto* data_cmd = app.add_subcommand("data", "Write a toy dataset");
  add_common(data_cmd, common, false);
  data_cmd->add_option("--kind", data_opt.kind, "moons, circles or gaussian_nd");
  data_cmd->add_option("--n", data_opt.n);
  data_cmd->add_option("--noise", data_opt.noise);
  data_cmd->add_option("--dim", data_opt.dim);

  auto* train = app.add_subcommand("train", "Train a flow matching model");
  add_common(train, common, true);
  train->add_option("-m,--model", train_opt.model_path, "Model output path (default <out>/model.json)");
  train->add_option("--epochs", train_opt.epochs, "Override train.epochs");
  train->add_option("--hidden", train_opt.hidden, "Override train.hidden");

  auto* sample = app.add_subcommand("sample", "Sample from a trained model");
  add_common(sample, common, false);
  sample->add_option("-m,--model", sample_opt.model_path)->required();
  sample->add_option("--solver", sample_opt.solver, "euler, midpoint, rk4 or dopri5");
  sample->add_option("--steps", sample_opt.steps, "Steps for fixed-step solvers");
  sample->add_option("--atol", sample_opt.atol);
  sample->add_option("--rtol", sample_opt.rtol);
  sample->add_option("--n", sample_opt.n, "Number of samples");

  auto* bench = app.add_subcommand("benchmark", "NFE vs SWD over a solver grid");
  add_common(bench, common, true);
  bench->add_option("-m,--model", bench_opt.model_path);
  bench->add_option("--n", bench_opt.n, "Samples per solver");
  bench->add_option("--projections", bench_opt.projections, "SWD projections");
  bench->add_option("--hidden", bench_opt.hidden_sweep, "Retrain and benchmark per hidden width");
  bench->add_option("--epochs", bench_opt.epoch_sweep, "Retrain and benchmark per epoch count");

  auto* jac = app.add_subcommand("jacobian", "Jacobian spectrum along RK4 trajectories");
  add_common(jac, common, false);
  jac->add_option("-m,--model", jac_opt.model_path)->required();
  jac->add_option("--n", jac_opt.n, "Trajectories");
  jac->add_option("--steps", jac_opt.steps, "Total RK4 steps over [0, 1]");

  auto* dopri = app.add_subcommand("dopri-trace", "Step sizes chosen by DOPRI5 in one sampling run");
  add_common(dopri, common, false);
  dopri->add_option("-m,--model", dopri_opt.model_path)->required();
  dopri->add_option("--atol", dopri_opt.atol);
  dopri->add_option("--rtol", dopri_opt.rtol);
  dopri->add_option("--n", dopri_opt.n, "Samples");
  dopri->add_option("--bins", dopri_opt.bins, "Time bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*convergence) return cmd_convergence(common, conv, out);
    if (*stability) return cmd_stability(common, stab, out);
    if (*data_cmd) return cmd_data(common, data_opt, out);
    if (*train) return cmd_train(common, train_opt, out);
    if (*sample) return cmd_sample(common, sample_opt, out);
    if (*bench) return cmd_benchmark(common, bench_opt, out);
    if (*jac) return cmd_jacobian(common, jac_opt, out);
    if (*dopri) return cmd_dopri_trace(common, dopri_opt, out);
  } catch (const ConfigError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kUsage;
  } catch (const NumericError& e) {
    fmt::print(err, "numeric failure: {}\n", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kFailure;
  }
  return kUsage;
}

}  // namespace fmsolve::cli
