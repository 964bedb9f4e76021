#pragma once

#include <string>
#include <vector>

#include "orim/problems.hpp"
#include "orim/rank_update.hpp"

namespace orim {

enum class ExperimentKind { heat_sequence, deblur, tomo_perturbed };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

// Flat key=value config; serialization is canonical and lossless, so a
// config round-trips bit-exactly through its text form.
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::heat_sequence;
  std::uint64_t seed = 1;

  // heat sequence; the tolerance is tighter than the generic rank-update
  // default because the chained corrections must keep tracking the drifting
  // operator (each per-mode improvement is a tiny fraction of the total risk)
  Index heat_n = 500;
  double heat_kappa_min = 1.0;
  double heat_kappa_max = 2.0;
  Index heat_kappa_count = 25;
  double heat_eta = 0.02;
  Index heat_repeats = 10;
  double heat_tol = 1e-5;
  Index heat_max_rank = 60;
  double heat_inner_tol = 1e-3;
  Index heat_inner_max_iter = 25;

  // deblurring
  Index deblur_image_size = 64;
  Index deblur_psf_size = 7;
  double deblur_noise_level = 0.01;
  NoiseConvention deblur_noise_convention = NoiseConvention::squared_ratio;
  double deblur_eta = 0.0;  // 0: pick by a min-error sweep on a pilot realization
  Index deblur_realizations = 100;
  double deblur_tol = 1e-6;
  Index deblur_max_rank = 8;
  Index deblur_stack_size = 15;
  Index deblur_exclude = 7;

  // perturbed tomography
  Index tomo_n_pix = 64;
  double tomo_angle_start = 0.0;
  double tomo_angle_step = 6.0;
  Index tomo_angle_count = 30;
  double tomo_angle_shift = 1.0;
  double tomo_noise_level = 0.005;
  NoiseConvention tomo_noise_convention = NoiseConvention::squared_ratio;
  double tomo_eta = 0.08;
  Index tomo_update_rank = 4;
  Index tomo_k_max = 80;

  bool operator==(const ExperimentConfig&) const = default;

  std::string to_text() const;
  static ExperimentConfig from_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig defaults(ExperimentKind kind);
};

struct ReportRow {
  std::string identifier;
  Index rank = 0;
  double f = std::numeric_limits<double>::quiet_NaN();
  double rel_error = std::numeric_limits<double>::quiet_NaN();
  double time_ms = 0.0;
  std::uint64_t seed = 0;
};

struct SummaryRow {
  std::string identifier;
  std::string metric;  // rel_error | f_value | time_ms
  Index count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<SummaryRow> summary;

  std::vector<double> column(const std::string& identifier, const std::string& metric) const;
  const SummaryRow* find_summary(const std::string& identifier, const std::string& metric) const;
};

/// Linear-interpolation percentile of the sample, p in [0, 100].
double percentile(std::vector<double> values, double p);

SummaryRow summarize(const std::string& identifier, const std::string& metric,
                     const std::vector<double>& values);

// Experiment drivers.  out_dir may be empty (no files written); reports are
// identical either way.
ExperimentReport run_heat_sequence(const ExperimentConfig& config, const std::string& out_dir = "");
ExperimentReport run_deblur(const ExperimentConfig& config, const std::string& out_dir = "");
ExperimentReport run_tomo_perturbed(const ExperimentConfig& config, const std::string& out_dir = "");
ExperimentReport run_experiment(const ExperimentConfig& config, const std::string& out_dir = "");

/// results.csv + summary.csv (deterministic bytes) and timings.csv (wall times).
void write_report(const ExperimentReport& report, const std::string& dir);

}  // namespace orim
