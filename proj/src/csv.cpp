#include "fmsolve/csv.hpp"

#include <cmath>
#include <sstream>

namespace fmsolve::io {

std::string format_double(double v) {
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  if (std::isnan(v)) {
    return "nan";
  }
  return fmt::format("{}", v);
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     std::initializer_list<std::string_view> header)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) {
    throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  }
  out_ << fmt::format("{}\n", fmt::join(header, ","));
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  }
  auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
      fields.emplace_back();
    }
    return fields;
  };
  CsvTable table;
  std::string line;
  if (std::getline(in, line)) {
    table.header = split(line);
  }
  while (std::getline(in, line)) {
    table.rows.push_back(split(line));
  }
  return table;
}

void write_points_csv(const std::filesystem::path& path, const PointBatch& points,
                      const std::vector<int>* labels) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    names.push_back(fmt::format("x{}", j));
  }
  if (labels != nullptr) {
    names.emplace_back("label");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  }
  out << fmt::format("{}\n", fmt::join(names, ","));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    std::string line;
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      if (j > 0) {
        line.push_back(',');
      }
      line += format_double(points(i, j));
    }
    if (labels != nullptr) {
      line += fmt::format(",{}", (*labels)[static_cast<std::size_t>(i)]);
    }
    line.push_back('\n');
    out << line;
  }
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses) {
  CsvWriter w(path, {"epoch", "loss"});
  for (std::size_t i = 0; i < losses.size(); ++i) {
    w.row(i, losses[i]);
  }
}

void write_trace_csv(const std::filesystem::path& path, const ode::SolveTrace& trace) {
  CsvWriter w(path, {"t", "h", "err", "accepted", "nfe_cum"});
  for (const ode::StepRecord& r : trace.steps) {
    w.row(r.t, r.h, r.err ? format_double(*r.err) : std::string(), r.accepted ? 1 : 0,
          r.nfe_cum);
  }
}

void write_convergence_csv(const std::filesystem::path& path,
                           const std::vector<analysis::ConvergenceRow>& rows) {
  CsvWriter w(path, {"method", "h", "error"});
  for (const auto& r : rows) {
    w.row(ode::to_string(r.method), r.h, r.error);
  }
}

void write_pareto_csv(const std::filesystem::path& path,
                      const std::vector<analysis::ParetoRow>& rows) {
  CsvWriter w(path, {"method", "steps", "nfe", "swd"});
  for (const auto& r : rows) {
    w.row(r.method, r.adaptive() ? std::string("adaptive") : std::to_string(r.steps), r.nfe,
          r.swd);
  }
}

void write_spectrum_csv(const std::filesystem::path& path,
                        const std::vector<analysis::SpectrumRow>& rows) {
  CsvWriter w(path, {"t", "eig1_re_mean", "eig1_re_std", "eig2_re_mean", "eig2_re_std",
                     "cond_median"});
  for (const auto& r : rows) {
    w.row(r.t, r.eig1_re_mean, r.eig1_re_std, r.eig2_re_mean, r.eig2_re_std, r.cond_median);
  }
}

void write_stability_demo_csv(const std::filesystem::path& path,
                              const std::vector<analysis::StabilityDemoTrace>& traces) {
  CsvWriter w(path, {"h", "n", "y"});
  for (const auto& tr : traces) {
    for (std::size_t n = 0; n < tr.y.size(); ++n) {
      w.row(tr.h, n, tr.y[n]);
    }
  }
}

void write_raster_csv(const std::filesystem::path& path, const ode::StabilityRaster& raster) {
  CsvWriter w(path, {"re", "im", "abs_r", "inside"});
  for (int j = 0; j < raster.n_im; ++j) {
    for (int i = 0; i < raster.n_re; ++i) {
      const auto idx = static_cast<std::size_t>(j) * raster.n_re + i;
      w.row(raster.re_at(i), raster.im_at(j), raster.abs_r[idx], raster.inside[idx] ? 1 : 0);
    }
  }
}

void write_step_summary_csv(const std::filesystem::path& path,
                            const analysis::StepSummary& summary) {
  CsvWriter w(path, {"bin_lo", "bin_hi", "count", "mean_h"});
  for (std::size_t b = 0; b < summary.counts.size(); ++b) {
    w.row(summary.bin_edges[b], summary.bin_edges[b + 1], summary.counts[b], summary.mean_h[b]);
  }
}

}  // namespace fmsolve::io
