// End-to-end acceptance run: one PASS/FAIL line per criterion.

#include "cli_harness.hpp"
#include "fmsolve/analysis.hpp"
#include "fmsolve/cfm.hpp"
#include "fmsolve/nn.hpp"
#include "fmsolve/ode.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <fmt/format.h>

using namespace fmsolve;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("exception: {}", e.what())};
  }
  failures += o.pass ? 0 : 1;
  fmt::print("{} C{:<2} {}: {}\n", o.pass ? "PASS" : "FAIL", id, name, o.detail);
  std::fflush(stdout);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Stability polynomials written out independently of the library.
double amplification(ode::Method m, double z) {
  switch (m) {
    case ode::Method::euler:
      return 1.0 + z;
    case ode::Method::midpoint:
      return 1.0 + z + z * z / 2.0;
    default:
      return 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
  }
}

const std::vector<ode::Method> kFixed = {ode::Method::euler, ode::Method::midpoint,
                                         ode::Method::rk4};

// -- per-seed measurements on the trained moons model -------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  double train_seconds = 0.0;
  double first_loss = 0.0;
  double final_loss = 0.0;
  double swd_rk4_20 = 0.0;
  double swd_euler_20 = 0.0;
  double swd_euler_200 = 0.0;
  double cond_01 = 0.0;
  double cond_09 = 0.0;
  double h_early = 0.0;
  double h_late = 0.0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

SeedRun run_seed(std::uint64_t seed) {
  SeedRun r;
  r.seed = seed;
  cfm::TrainConfig cfg;
  cfg.seed = seed;
  const auto t0 = Clock::now();
  const cfm::TrainResult trained = cfm::train(cfg);
  r.train_seconds = seconds_since(t0);
  r.first_loss = trained.loss_curve.front();
  r.final_loss = trained.loss_curve.back();

  const std::vector<cfm::SolverSpec> grid = {cfm::SolverSpec::fixed(ode::Method::rk4, 20),
                                             cfm::SolverSpec::fixed(ode::Method::euler, 20),
                                             cfm::SolverSpec::fixed(ode::Method::euler, 200)};
  const auto rows = analysis::pareto_benchmark(trained.model, cfg.dataset, grid, 2000, 200,
                                               Rng(seed, 1));
  for (const auto& row : rows) {
    if (!row.error.empty()) {
      throw NumericError(row.method + ": " + row.error);
    }
    if (row.method == "rk4") {
      r.swd_rk4_20 = row.swd;
    } else if (row.steps == 20) {
      r.swd_euler_20 = row.swd;
    } else {
      r.swd_euler_200 = row.swd;
    }
  }

  Rng spec_rng(seed, 2);
  const auto spectrum = analysis::spectrum_along_trajectory(
      trained.model.params, 200, analysis::default_time_grid(),
      cfm::SolverSpec::fixed(ode::Method::rk4, 20), spec_rng);
  for (const auto& row : spectrum) {
    if (std::abs(row.t - 0.1) < 1e-9) {
      r.cond_01 = row.cond_median;
    }
    if (std::abs(row.t - 0.9) < 1e-9) {
      r.cond_09 = row.cond_median;
    }
  }

  Rng dopri_rng(seed, 3);
  const cfm::SampleResult s =
      cfm::sample(trained.model, cfm::SolverSpec::adaptive(1e-5, 1e-5), 2000, dopri_rng);
  r.h_early = analysis::mean_accepted_step(s.trace, 0.0, 0.2);
  r.h_late = analysis::mean_accepted_step(s.trace, 0.8, 1.0);
  r.accepted = s.trace.accepted_count();
  r.rejected = s.trace.rejected_count();

  fmt::print(
      "  seed {}: train {:.1f}s loss {:.4f}->{:.4f}; swd rk4-20 {:.4f} euler-20 {:.4f} "
      "euler-200 {:.4f}; cond t=0.1 {:.3f} t=0.9 {:.3f}; dopri5 {} acc {} rej, mean h "
      "[0,0.2) {:.5f} [0.8,1] {:.5f}\n",
      seed, r.train_seconds, r.first_loss, r.final_loss, r.swd_rk4_20, r.swd_euler_20,
      r.swd_euler_200, r.cond_01, r.cond_09, r.accepted, r.rejected, r.h_early, r.h_late);
  std::fflush(stdout);
  return r;
}

// -- determinism over the CLI ---------------------------------------------------

std::vector<std::vector<std::string>> cli_script(const fs::path& dir) {
  const std::string out = dir.string();
  const std::string cfg = (dir / "config.json").string();
  const std::string model = (dir / "model.json").string();
  return {
      {"convergence", "-o", out, "--dim", "3", "--seed", "4"},
      {"stability", "-o", out, "--n-re", "71", "--n-im", "81"},
      {"data", "-o", out, "--kind", "circles", "--n", "300", "--seed", "9"},
      {"train", "-c", cfg, "-o", out},
      {"sample", "-m", model, "--solver", "rk4", "--steps", "10", "--n", "300", "-o", out},
      {"sample", "-m", model, "--solver", "dopri5", "--n", "300", "-o", (dir / "dopri").string()},
      {"benchmark", "-m", model, "-c", cfg, "--n", "300", "--projections", "20", "-o", out},
      {"benchmark", "-c", cfg, "--n", "200", "--projections", "10", "--hidden", "8,16", "--epochs",
       "1,2", "-o", (dir / "sweep").string()},
      {"jacobian", "-m", model, "--n", "20", "--steps", "10", "-o", out},
      {"dopri-trace", "-m", model, "--n", "300", "-o", out},
  };
}

Outcome determinism() {
  const fs::path a = testing::fresh_dir("acceptance_a");
  const fs::path b = testing::fresh_dir("acceptance_b");
  for (const fs::path& dir : {a, b}) {
    testing::write_file(dir / "config.json", testing::kTinyConfig);
    for (const auto& args : cli_script(dir)) {
      const testing::CliResult r = testing::run_cli(args);
      if (r.code != 0) {
        return {false, fmt::format("'{}' exited {}: {}", args[0], r.code, r.err)};
      }
    }
  }
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    const fs::path p = entry.path();
    if (p.extension() != ".csv" && p.extension() != ".json") {
      continue;
    }
    const fs::path other = b / fs::relative(p, a);
    if (testing::read_file(p) != testing::read_file(other)) {
      return {false, fmt::format("{} differs between runs", fs::relative(p, a).string())};
    }
    ++compared;
  }
  return {compared >= 20, fmt::format("{} CSV/JSON files byte-identical across two runs", compared)};
}

}  // namespace

int main() {
  const auto start = Clock::now();

  report(1, "convergence orders", [] {
    const auto t0 = Clock::now();
    const auto res = analysis::convergence_study(analysis::DecayProblem{}, kFixed,
                                                 analysis::default_step_sizes());
    const double secs = seconds_since(t0);
    const double e = res.slopes.at(ode::Method::euler);
    const double m = res.slopes.at(ode::Method::midpoint);
    const double k = res.slopes.at(ode::Method::rk4);
    const bool ok = std::abs(e - 1.0) <= 0.1 && std::abs(m - 2.0) <= 0.1 &&
                    std::abs(k - 4.0) <= 0.2 && secs < 1.0;
    return Outcome{ok, fmt::format("euler {:.4f} midpoint {:.4f} rk4 {:.4f} in {:.3f}s", e, m, k,
                                   secs)};
  });

  report(2, "error gap at h=0.1", [] {
    const double exact = std::exp(-1.0);
    auto err = [&](ode::Method m) {
      ode::VectorFieldHandle f([](double, const StateVector& y) { return StateVector(-y); });
      const auto tr = ode::integrate_fixed(f, StateVector::Ones(1), 0.0, 1.0, 10, m);
      return std::abs(tr.y_final(0) - exact);
    };
    const double eu = err(ode::Method::euler);
    const double rk = err(ode::Method::rk4);
    const double rk_oracle = std::abs(std::pow(amplification(ode::Method::rk4, -0.1), 10) - exact);
    const double eu_oracle = std::abs(std::pow(0.9, 10) - exact);
    const bool ok = rk <= 1e-4 * eu && std::abs(rk - rk_oracle) <= 1e-9 * rk_oracle &&
                    std::abs(eu - eu_oracle) <= 1e-12 * eu_oracle;
    return Outcome{ok, fmt::format("euler {:.4e} rk4 {:.4e} ratio {:.3e} (closed forms {:.4e}, {:.4e})",
                                   eu, rk, eu / rk, eu_oracle, rk_oracle)};
  });

  report(3, "linear-field oracle", [] {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const double lambda = rng.uniform(-3.0, 0.5);
      const double h = rng.uniform(0.01, 0.3);
      const int n = 1 + static_cast<int>(rng.below(50));
      const ode::Method m = kFixed[trial % 3];
      ode::VectorFieldHandle f(
          [lambda](double, const StateVector& y) { return StateVector(lambda * y); });
      const auto tr = ode::integrate_fixed(f, StateVector::Constant(1, 1.7), 0.0, n * h, n, m);
      const double expected = std::pow(amplification(m, h * lambda), n) * 1.7;
      worst = std::max(worst, std::abs(tr.y_final(0) - expected) / std::abs(expected));
    }
    return Outcome{worst <= 1e-12, fmt::format("max relative deviation {:.3e} over 100 cases", worst)};
  });

  report(4, "euler stability demo", [] {
    const std::vector<double> hs{0.1, 1.0 / 6.0};
    const auto tr = analysis::stability_demo(-15.0, hs, 3.0, 200);
    const bool converges = std::abs(tr[0].y.back()) < std::abs(tr[0].y.front());
    double peak = 0.0;
    for (std::size_t i = 0; i < tr[1].y.size() && i <= 200; ++i) {
      peak = std::max(peak, std::abs(tr[1].y[i]));
    }
    return Outcome{converges && peak > 1e3,
                   fmt::format("h=0.1 |y_N|={:.3e}; h=1/6 max |y_n|={:.3e} in {} steps",
                               std::abs(tr[0].y.back()), peak, tr[1].y.size() - 1)};
  });

  report(5, "stability region extents", [] {
    const auto rk4 = ode::stability_region_grid(ode::Method::rk4, -5.0, 2.0, -4.0, 4.0, 141, 161);
    const auto eu = ode::stability_region_grid(ode::Method::euler, -5.0, 2.0, -4.0, 4.0, 141, 161);
    const double a = ode::real_axis_extent(rk4);
    const double b = ode::real_axis_extent(eu);
    const bool ok = std::abs(a + 2.78) <= rk4.re_spacing() && std::abs(b + 2.0) <= eu.re_spacing();
    return Outcome{ok, fmt::format("rk4 {:.4f} euler {:.4f} (spacing {:.3f})", a, b,
                                   rk4.re_spacing())};
  });

  report(6, "dopri5 correctness", [] {
    ode::VectorFieldHandle f([](double, const StateVector& y) { return StateVector(-y); });
    ode::StepControlConfig cfg;
    cfg.atol = cfg.rtol = 1e-5;
    const auto tr = ode::integrate_dopri5(f, StateVector::Ones(1), 0.0, 1.0, cfg);
    const double err = std::abs(tr.y_final(0) - std::exp(-1.0));
    bool errs_ok = true;
    for (const auto& s : tr.steps) {
      errs_ok = errs_ok && (!s.accepted || (s.err && *s.err <= 1.0));
    }
    const auto acc = static_cast<long>(tr.accepted_count());
    const auto rej = static_cast<long>(tr.rejected_count());
    const long constant = static_cast<long>(tr.nfe_total) - (6 * acc + 1 + 6 * rej);
    const bool ok = err <= 1e-5 && errs_ok &&
                    constant == ode::dopri5_overhead_nfe(cfg) - 1 &&
                    static_cast<long>(f.nfe()) == static_cast<long>(tr.nfe_total);
    return Outcome{ok, fmt::format("|y(1)-e^-1|={:.3e}; {} accepted {} rejected nfe {} = 6*acc+1+6*rej+{}",
                                   err, acc, rej, tr.nfe_total, constant)};
  });

  report(7, "tableau integrity", [] {
    const auto& tab = ode::dopri5_tableau();
    double worst = 0.0;
    double sb = 0.0;
    double sbs = 0.0;
    for (int i = 0; i < ode::ButcherTableau::stages; ++i) {
      double row = 0.0;
      for (int j = 0; j < ode::ButcherTableau::stages; ++j) {
        row += tab.a[i][j];
      }
      worst = std::max(worst, std::abs(row - tab.c[i]));
      worst = std::max(worst, std::abs(tab.a[6][i] - tab.b[i]));
      sb += tab.b[i];
      sbs += tab.b_star[i];
    }
    worst = std::max({worst, std::abs(sb - 1.0), std::abs(sbs - 1.0)});
    return Outcome{worst <= 1e-15, fmt::format("max invariant violation {:.2e}", worst)};
  });

  report(8, "gradient check", [] {
    nn::MlpConfig cfg;
    cfg.hidden = 8;
    cfg.n_blocks = 1;
    Rng rng(81);
    nn::MlpParams p = nn::init_params(cfg, rng);
    for (nn::TensorRef& t : nn::tensors(p)) {
      for (double& v : t.span()) {
        v += rng.uniform(-0.5, 0.5);
      }
    }
    const PointBatch x = gaussian_sample(rng, 4, 2);
    const PointBatch u = gaussian_sample(rng, 4, 2);
    nn::Vector t(4);
    for (int i = 0; i < 4; ++i) {
      t(i) = rng.uniform();
    }
    const nn::LossAndGrad lg = nn::loss_and_grad(p, x, t, u);
    const auto grads = nn::tensors(lg.grads);
    auto params = nn::tensors(p);
    const double eps = 1e-5;
    double worst = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (Eigen::Index i = 0; i < params[k].size(); ++i) {
        double& v = params[k].data[i];
        const double saved = v;
        v = saved + eps;
        const double up = nn::loss_and_grad(p, x, t, u).loss;
        v = saved - eps;
        const double down = nn::loss_and_grad(p, x, t, u).loss;
        v = saved;
        const double fd = (up - down) / (2 * eps);
        const double an = grads[k].data[i];
        const double scale = std::max(std::abs(fd), std::abs(an));
        worst = std::max(worst, scale < 1e-8 ? std::abs(fd - an) : std::abs(fd - an) / scale);
        ++count;
      }
    }
    return Outcome{worst < 1e-4, fmt::format("max relative error {:.3e} over {} parameters", worst,
                                             count)};
  });

  std::vector<SeedRun> runs;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    try {
      runs.push_back(run_seed(seed));
    } catch (const std::exception& e) {
      fmt::print("  seed {} failed: {}\n", seed, e.what());
    }
  }
  const bool all_seeds = runs.size() == 3;

  report(9, "pareto ordering on moons", [&] {
    if (!all_seeds) {
      return Outcome{false, "training runs missing"};
    }
    std::vector<double> rk, e20, e200;
    double slowest = 0.0;
    for (const auto& r : runs) {
      rk.push_back(r.swd_rk4_20);
      e20.push_back(r.swd_euler_20);
      e200.push_back(r.swd_euler_200);
      slowest = std::max(slowest, r.train_seconds);
    }
    const double a = median(rk);
    const double b = median(e20);
    const double c = median(e200);
    const bool ok = a <= b && a <= 1.25 * c && slowest <= 300.0;
    return Outcome{ok, fmt::format("median swd rk4-20 {:.4f} euler-20 {:.4f} euler-200 {:.4f}; "
                                   "slowest training {:.0f}s",
                                   a, b, c, slowest)};
  });

  report(10, "stiffening near t=1", [&] {
    int wins = 0;
    std::string detail;
    for (const auto& r : runs) {
      wins += r.cond_09 > r.cond_01 ? 1 : 0;
      detail += fmt::format(" seed{} {:.2f}/{:.2f}", r.seed, r.cond_09, r.cond_01);
    }
    return Outcome{wins >= 2, fmt::format("{} of {} seeds; cond t=0.9/t=0.1:{}", wins, runs.size(),
                                          detail)};
  });

  report(11, "adaptive allocation", [&] {
    int wins = 0;
    std::string detail;
    for (const auto& r : runs) {
      wins += r.h_late < r.h_early ? 1 : 0;
      detail += fmt::format(" seed{} {:.5f}/{:.5f}", r.seed, r.h_late, r.h_early);
    }
    return Outcome{wins >= 2, fmt::format("{} of {} seeds; mean h late/early:{}", wins, runs.size(),
                                          detail)};
  });

  report(12, "dimension-independent slopes", [] {
    const auto one = analysis::convergence_study(analysis::DecayProblem{}, kFixed,
                                                 analysis::default_step_sizes());
    analysis::DecayProblem wide;
    Rng rng(12);
    const PointBatch g = gaussian_sample(rng, 100, 1);
    wide.y0 = Eigen::Map<const StateVector>(g.data(), 100);
    const auto t0 = Clock::now();
    const auto many = analysis::convergence_study(wide, kFixed, analysis::default_step_sizes());
    const double secs = seconds_since(t0);
    double worst = 0.0;
    std::string detail;
    for (ode::Method m : kFixed) {
      const double d = std::abs(one.slopes.at(m) - many.slopes.at(m));
      worst = std::max(worst, d);
      detail += fmt::format(" {} {:.4f}", ode::to_string(m), many.slopes.at(m));
    }
    return Outcome{worst <= 0.05 && secs < 10.0,
                   fmt::format("dim 100:{}; max shift {:.4f}; {:.3f}s", detail, worst, secs)};
  });

  report(13, "deterministic CLI outputs", determinism);

  fmt::print("{} failing; total {:.0f}s\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
