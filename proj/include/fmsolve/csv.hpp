#pragma once

#include "fmsolve/analysis.hpp"
#include "fmsolve/ode.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

namespace fmsolve::io {

/// Shortest decimal form that round-trips; infinities print as "inf"/"-inf".
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header);

  template <typename... Fields>
  void row(const Fields&... fields) {
    std::string line;
    bool first = true;
    (append(line, first, fields), ...);
    line.push_back('\n');
    out_ << line;
  }

 private:
  template <typename T>
  static void append(std::string& line, bool& first, const T& field) {
    if (!first) {
      line.push_back(',');
    }
    first = false;
    if constexpr (std::is_floating_point_v<T>) {
      line += format_double(field);
    } else {
      line += fmt::format("{}", field);
    }
  }

  std::ofstream out_;
};

/// Parsed CSV: header row and data rows, no quoting support.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

void write_points_csv(const std::filesystem::path& path, const PointBatch& points,
                      const std::vector<int>* labels = nullptr);
void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses);
void write_trace_csv(const std::filesystem::path& path, const ode::SolveTrace& trace);
void write_convergence_csv(const std::filesystem::path& path,
                           const std::vector<analysis::ConvergenceRow>& rows);
void write_pareto_csv(const std::filesystem::path& path,
                      const std::vector<analysis::ParetoRow>& rows);
void write_spectrum_csv(const std::filesystem::path& path,
                        const std::vector<analysis::SpectrumRow>& rows);
void write_stability_demo_csv(const std::filesystem::path& path,
                              const std::vector<analysis::StabilityDemoTrace>& traces);
void write_raster_csv(const std::filesystem::path& path, const ode::StabilityRaster& raster);
void write_step_summary_csv(const std::filesystem::path& path,
                            const analysis::StepSummary& summary);

}  // namespace fmsolve::io
