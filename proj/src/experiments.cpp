#include "orim/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "orim/io.hpp"
#include "orim/regularizers.hpp"

namespace orim {

namespace {

using clock_type = std::chrono::steady_clock;

double elapsed_ms(clock_type::time_point start) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - start).count();
}

std::string pad3(Index v) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%03ld", static_cast<long>(v));
  return buf;
}

std::string noise_convention_name(NoiseConvention c) {
  return c == NoiseConvention::squared_ratio ? "squared_ratio" : "ratio";
}

NoiseConvention noise_convention_from(const std::string& s) {
  if (s == "squared_ratio") return NoiseConvention::squared_ratio;
  if (s == "ratio") return NoiseConvention::ratio;
  throw std::invalid_argument("unknown noise convention: " + s);
}

std::vector<double> linspace(double lo, double hi, Index count) {
  std::vector<double> v(static_cast<std::size_t>(count));
  if (count == 1) {
    v[0] = lo;
    return v;
  }
  for (Index i = 0; i < count; ++i)
    v[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return v;
}

Matrix shift_image(const Matrix& img, Index dr, Index dc) {
  Matrix out = Matrix::Zero(img.rows(), img.cols());
  for (Index r = 0; r < img.rows(); ++r)
    for (Index c = 0; c < img.cols(); ++c) {
      const Index sr = r - dr;
      const Index sc = c - dc;
      if (sr >= 0 && sr < img.rows() && sc >= 0 && sc < img.cols()) out(r, c) = img(sr, sc);
    }
  return out;
}

// shifted and rescaled phantom variants; the excluded slot keeps the
// untouched phantom as the reconstruction target
std::vector<Matrix> synthetic_stack(Index n_pix, Index count, Index exclude) {
  const Matrix base = shepp_logan(n_pix);
  const Index offsets[][2] = {{1, 0},  {0, 1},  {-1, 0}, {0, -1}, {1, 1},  {-1, -1}, {2, 0},
                              {0, 2},  {-2, 0}, {0, -2}, {1, -1}, {-1, 1}, {2, 1},  {-1, 2}};
  const Index n_offsets = static_cast<Index>(std::size(offsets));
  std::vector<Matrix> stack;
  stack.reserve(static_cast<std::size_t>(count));
  Index pattern = 0;
  for (Index i = 0; i < count; ++i) {
    if (i == exclude) {
      stack.push_back(base);
      continue;
    }
    const auto& off = offsets[pattern % n_offsets];
    const double scale = 0.9 + 0.02 * static_cast<double>(pattern % 11);
    stack.push_back(scale * shift_image(base, off[0], off[1]));
    ++pattern;
  }
  return stack;
}

Vector vec(const Matrix& img) { return Eigen::Map<const Vector>(img.data(), img.size()); }

Matrix unvec(const Vector& v, Index rows, Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

void write_normalized_pgm(const std::string& path, const Matrix& img) {
  const double lo = img.minCoeff();
  const double hi = img.maxCoeff();
  const double span = hi - lo > 0 ? hi - lo : 1.0;
  write_pgm(path, Matrix(((img.array() - lo) / span).matrix()));
}

struct KvWriter {
  std::ostringstream out;
  void put(const std::string& key, const std::string& v) { out << key << "=" << v << "\n"; }
  void put(const std::string& key, double v) { put(key, format_double(v)); }
  void put(const std::string& key, Index v) { put(key, std::to_string(v)); }
  void put(const std::string& key, std::uint64_t v) { put(key, std::to_string(v)); }
};

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line without '=': " + line);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::heat_sequence:
      return "heat_sequence";
    case ExperimentKind::deblur:
      return "deblur";
    case ExperimentKind::tomo_perturbed:
      return "tomo_perturbed";
  }
  return "heat_sequence";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  if (name == "heat_sequence" || name == "heat") return ExperimentKind::heat_sequence;
  if (name == "deblur") return ExperimentKind::deblur;
  if (name == "tomo_perturbed" || name == "tomo") return ExperimentKind::tomo_perturbed;
  throw std::invalid_argument("unknown experiment: " + name);
}

std::string ExperimentConfig::to_text() const {
  KvWriter w;
  w.put("experiment", orim::to_string(experiment));
  w.put("seed", seed);
  w.put("heat_n", heat_n);
  w.put("heat_kappa_min", heat_kappa_min);
  w.put("heat_kappa_max", heat_kappa_max);
  w.put("heat_kappa_count", heat_kappa_count);
  w.put("heat_eta", heat_eta);
  w.put("heat_repeats", heat_repeats);
  w.put("heat_tol", heat_tol);
  w.put("heat_max_rank", heat_max_rank);
  w.put("heat_inner_tol", heat_inner_tol);
  w.put("heat_inner_max_iter", heat_inner_max_iter);
  w.put("deblur_image_size", deblur_image_size);
  w.put("deblur_psf_size", deblur_psf_size);
  w.put("deblur_noise_level", deblur_noise_level);
  w.put("deblur_noise_convention", noise_convention_name(deblur_noise_convention));
  w.put("deblur_eta", deblur_eta);
  w.put("deblur_realizations", deblur_realizations);
  w.put("deblur_tol", deblur_tol);
  w.put("deblur_max_rank", deblur_max_rank);
  w.put("deblur_stack_size", deblur_stack_size);
  w.put("deblur_exclude", deblur_exclude);
  w.put("tomo_n_pix", tomo_n_pix);
  w.put("tomo_angle_start", tomo_angle_start);
  w.put("tomo_angle_step", tomo_angle_step);
  w.put("tomo_angle_count", tomo_angle_count);
  w.put("tomo_angle_shift", tomo_angle_shift);
  w.put("tomo_noise_level", tomo_noise_level);
  w.put("tomo_noise_convention", noise_convention_name(tomo_noise_convention));
  w.put("tomo_eta", tomo_eta);
  w.put("tomo_update_rank", tomo_update_rank);
  w.put("tomo_k_max", tomo_k_max);
  return w.out.str();
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  ExperimentConfig c;
  auto kv = parse_kv(text);
  auto take = [&kv](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto take_double = [&take](const std::string& key, double& field) {
    if (auto v = take(key)) field = std::stod(*v);
  };
  auto take_index = [&take](const std::string& key, Index& field) {
    if (auto v = take(key)) field = static_cast<Index>(std::stoll(*v));
  };

  if (auto v = take("experiment")) c.experiment = experiment_kind_from_string(*v);
  if (auto v = take("seed")) c.seed = std::stoull(*v);
  take_index("heat_n", c.heat_n);
  take_double("heat_kappa_min", c.heat_kappa_min);
  take_double("heat_kappa_max", c.heat_kappa_max);
  take_index("heat_kappa_count", c.heat_kappa_count);
  take_double("heat_eta", c.heat_eta);
  take_index("heat_repeats", c.heat_repeats);
  take_double("heat_tol", c.heat_tol);
  take_index("heat_max_rank", c.heat_max_rank);
  take_double("heat_inner_tol", c.heat_inner_tol);
  take_index("heat_inner_max_iter", c.heat_inner_max_iter);
  take_index("deblur_image_size", c.deblur_image_size);
  take_index("deblur_psf_size", c.deblur_psf_size);
  take_double("deblur_noise_level", c.deblur_noise_level);
  if (auto v = take("deblur_noise_convention")) c.deblur_noise_convention = noise_convention_from(*v);
  take_double("deblur_eta", c.deblur_eta);
  take_index("deblur_realizations", c.deblur_realizations);
  take_double("deblur_tol", c.deblur_tol);
  take_index("deblur_max_rank", c.deblur_max_rank);
  take_index("deblur_stack_size", c.deblur_stack_size);
  take_index("deblur_exclude", c.deblur_exclude);
  take_index("tomo_n_pix", c.tomo_n_pix);
  take_double("tomo_angle_start", c.tomo_angle_start);
  take_double("tomo_angle_step", c.tomo_angle_step);
  take_index("tomo_angle_count", c.tomo_angle_count);
  take_double("tomo_angle_shift", c.tomo_angle_shift);
  take_double("tomo_noise_level", c.tomo_noise_level);
  if (auto v = take("tomo_noise_convention")) c.tomo_noise_convention = noise_convention_from(*v);
  take_double("tomo_eta", c.tomo_eta);
  take_index("tomo_update_rank", c.tomo_update_rank);
  take_index("tomo_k_max", c.tomo_k_max);

  if (!kv.empty()) throw std::invalid_argument("unknown config key: " + kv.begin()->first);
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  return c;
}

std::vector<double> ExperimentReport::column(const std::string& identifier,
                                             const std::string& metric) const {
  std::vector<double> out;
  for (const auto& row : rows) {
    if (row.identifier != identifier) continue;
    if (metric == "rel_error")
      out.push_back(row.rel_error);
    else if (metric == "f_value")
      out.push_back(row.f);
    else if (metric == "time_ms")
      out.push_back(row.time_ms);
    else
      throw std::invalid_argument("unknown metric: " + metric);
  }
  return out;
}

const SummaryRow* ExperimentReport::find_summary(const std::string& identifier,
                                                 const std::string& metric) const {
  for (const auto& s : summary)
    if (s.identifier == identifier && s.metric == metric) return &s;
  return nullptr;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = (p / 100.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

SummaryRow summarize(const std::string& identifier, const std::string& metric,
                     const std::vector<double>& values) {
  SummaryRow s;
  s.identifier = identifier;
  s.metric = metric;
  s.count = static_cast<Index>(values.size());
  if (values.empty()) return s;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var = values.size() > 1 ? var / static_cast<double>(values.size() - 1) : 0.0;
  s.mean = mean;
  s.stddev = std::sqrt(var);
  s.median = percentile(values, 50.0);
  s.p25 = percentile(values, 25.0);
  s.p75 = percentile(values, 75.0);
  return s;
}

void write_report(const ExperimentReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/results.csv");
    out << "identifier,rank,f_value,rel_error,seed\n";
    for (const auto& r : report.rows)
      out << r.identifier << ',' << r.rank << ',' << format_double(r.f) << ','
          << format_double(r.rel_error) << ',' << r.seed << '\n';
  }
  {
    std::ofstream out(dir + "/timings.csv");
    out << "identifier,rank,time_ms,seed\n";
    for (const auto& r : report.rows)
      out << r.identifier << ',' << r.rank << ',' << format_double(r.time_ms) << ',' << r.seed << '\n';
  }
  {
    std::ofstream out(dir + "/summary.csv");
    std::ofstream tout(dir + "/timings_summary.csv");
    const char* header = "identifier,metric,count,mean,stddev,median,p25,p75\n";
    out << header;
    tout << header;
    for (const auto& s : report.summary) {
      std::ofstream& target = s.metric == "time_ms" ? tout : out;
      target << s.identifier << ',' << s.metric << ',' << s.count << ',' << format_double(s.mean)
             << ',' << format_double(s.stddev) << ',' << format_double(s.median) << ','
             << format_double(s.p25) << ',' << format_double(s.p75) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Experiment 1: sequence of heat problems over κ

namespace {

Vector heat_truth(Index n) {
  Vector xi(n);
  for (Index i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double b1 = (t - 0.40) / 0.12;
    const double b2 = (t - 0.75) / 0.08;
    xi(i) = std::exp(-b1 * b1) + 0.6 * std::exp(-b2 * b2);
  }
  return xi;
}

struct ThinSvd {
  Matrix U;
  Vector s;
  Matrix V;
};

ThinSvd thin_svd(const Matrix& a) {
  Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

Vector tikhonov_filter_values(const Vector& s, double eta) {
  Vector psi(s.size());
  for (Index i = 0; i < s.size(); ++i) psi(i) = s(i) / (s(i) * s(i) + eta * eta);
  return psi;
}

}  // namespace

ExperimentReport run_heat_sequence(const ExperimentConfig& cfg, const std::string& out_dir) {
  const Index n = cfg.heat_n;
  const double eta = cfg.heat_eta;
  const auto kappas = linspace(cfg.heat_kappa_min, cfg.heat_kappa_max, cfg.heat_kappa_count);
  const Index n_kappa = static_cast<Index>(kappas.size());
  const Vector xi = heat_truth(n);

  // operators are shared by both paths; assembly is not part of the timings
  std::vector<Matrix> mats;
  std::vector<LinearOperator> ops;
  mats.reserve(kappas.size());
  for (double kappa : kappas) mats.push_back(heat_problem({n, kappa}));
  for (const auto& a : mats) ops.push_back(LinearOperator::from_dense(a));

  // f values of the per-κ Tikhonov matrices; informational, computed once
  // outside the timed sections
  std::vector<double> tik_f(kappas.size(), std::numeric_limits<double>::quiet_NaN());

  ExperimentReport report;
  const PriorModel prior = identity_prior(n);

  for (Index rep = 0; rep < cfg.heat_repeats; ++rep) {
    auto rng = make_rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(rep));
    std::vector<Vector> data;
    data.reserve(kappas.size());
    for (Index j = 0; j < n_kappa; ++j)
      data.push_back(mats[static_cast<std::size_t>(j)] * xi + eta * gaussian_vector(n, rng));

    // per-κ SVD path
    double svd_path_ms = 0.0;
    for (Index j = 0; j < n_kappa; ++j) {
      const auto t0 = clock_type::now();
      auto dec = thin_svd(mats[static_cast<std::size_t>(j)]);
      const Vector psi = tikhonov_filter_values(dec.s, eta);
      const Vector recon =
          dec.V * psi.cwiseProduct(dec.U.transpose() * data[static_cast<std::size_t>(j)]);
      const double dt = elapsed_ms(t0);
      svd_path_ms += dt;

      if (rep == 0) {
        Matrix ztik = dec.V * psi.asDiagonal() * dec.U.transpose();
        auto problem = make_problem(ops[static_cast<std::size_t>(j)], eta, prior);
        tik_f[static_cast<std::size_t>(j)] = bayes_risk(problem, ztik);
      }
      report.rows.push_back({"tikhonov_k" + pad3(j), 0, tik_f[static_cast<std::size_t>(j)],
                             relative_error(recon, xi), dt, rep});
    }
    report.rows.push_back({"tikhonov_path", 0, std::numeric_limits<double>::quiet_NaN(),
                           std::numeric_limits<double>::quiet_NaN(), svd_path_ms, rep});

    // update path: one SVD at κ_1, then chained low-rank corrections
    double update_path_ms = 0.0;
    Matrix p_dense;
    {
      const auto t0 = clock_type::now();
      auto dec = thin_svd(mats[0]);
      const Vector psi = tikhonov_filter_values(dec.s, eta);
      p_dense = dec.V * psi.asDiagonal() * dec.U.transpose();
      const Vector recon = p_dense * data[0];
      const double dt = elapsed_ms(t0);
      update_path_ms += dt;
      report.rows.push_back({"update_k" + pad3(0), 0, tik_f[0], relative_error(recon, xi), dt, rep});
    }
    for (Index j = 1; j < n_kappa; ++j) {
      const auto t0 = clock_type::now();
      auto problem = make_problem(ops[static_cast<std::size_t>(j)], eta, prior,
                                  LinearOperator::from_dense(p_dense));
      UpdateConfig ucfg;
      ucfg.outer_tol = cfg.heat_tol;
      ucfg.outer_max_rank = cfg.heat_max_rank;
      ucfg.inner_tol = cfg.heat_inner_tol;
      ucfg.inner_max_iter = static_cast<int>(cfg.heat_inner_max_iter);
      ucfg.seed = cfg.seed + 7919ULL * static_cast<std::uint64_t>(rep) + static_cast<std::uint64_t>(j);
      auto result = orim_update(problem, ucfg);
      if (result.Z.rank() > 0) p_dense += result.Z.X * result.Z.Y.transpose();
      const Vector recon = p_dense * data[static_cast<std::size_t>(j)];
      const double dt = elapsed_ms(t0);
      update_path_ms += dt;
      const double f = result.trace.steps.empty() ? result.trace.f0 : result.trace.steps.back().f;
      report.rows.push_back(
          {"update_k" + pad3(j), result.Z.rank(), f, relative_error(recon, xi), dt, rep});
    }
    report.rows.push_back({"update_path", 0, std::numeric_limits<double>::quiet_NaN(),
                           std::numeric_limits<double>::quiet_NaN(), update_path_ms, rep});
  }

  for (Index j = 0; j < n_kappa; ++j) {
    for (const char* base : {"tikhonov_k", "update_k"}) {
      const std::string id = base + pad3(j);
      report.summary.push_back(summarize(id, "rel_error", report.column(id, "rel_error")));
      report.summary.push_back(summarize(id, "time_ms", report.column(id, "time_ms")));
    }
  }
  for (const char* id : {"tikhonov_path", "update_path"})
    report.summary.push_back(summarize(id, "time_ms", report.column(id, "time_ms")));

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_vector_csv(out_dir + "/xi_true.csv", xi);
    Vector kv = Eigen::Map<const Vector>(kappas.data(), static_cast<Index>(kappas.size()));
    write_vector_csv(out_dir + "/kappas.csv", kv);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Experiment 2: low-rank corrections to a Tikhonov deblurring matrix

ExperimentReport run_deblur(const ExperimentConfig& cfg, const std::string& out_dir) {
  const Index n_pix = cfg.deblur_image_size;
  if (cfg.deblur_exclude < 0 || cfg.deblur_exclude >= cfg.deblur_stack_size)
    throw std::invalid_argument("run_deblur: exclude index out of range");

  auto blur = deblur_problem(n_pix, n_pix, cfg.deblur_psf_size);
  auto stack = synthetic_stack(n_pix, cfg.deblur_stack_size, cfg.deblur_exclude);
  const Vector xi = vec(stack[static_cast<std::size_t>(cfg.deblur_exclude)]);
  auto prior = prior_from_stack(stack, cfg.deblur_exclude);
  auto variants = build_M_variants(prior);

  const LinearOperator a = blur.op();
  const Vector b_clean = a.apply(xi);

  // pilot realization for the min-error regularization sweep
  const Vector b_pilot =
      add_noise(b_clean, cfg.deblur_noise_level, cfg.deblur_noise_convention, cfg.seed).b;
  double eta = cfg.deblur_eta;
  if (eta <= 0.0) {
    double best_rel = std::numeric_limits<double>::infinity();
    for (double log_eta = std::log(1e-3); log_eta <= std::log(0.5) + 1e-12;
         log_eta += (std::log(0.5) - std::log(1e-3)) / 24.0) {
      const double candidate = std::exp(log_eta);
      const Vector recon = blur.apply_filter(b_pilot, blur.tikhonov_filter(candidate));
      const double rel = relative_error(recon, xi);
      if (rel < best_rel) {
        best_rel = rel;
        eta = candidate;
      }
    }
  }

  const LinearOperator p_op = blur.tikhonov_operator(eta);

  ExperimentReport report;
  report.rows.push_back({"eta", 0, std::numeric_limits<double>::quiet_NaN(), eta, 0.0, cfg.seed});

  const PriorModel* variant_priors[3] = {&variants.m1, &variants.m2, &variants.m3};
  std::vector<LowRankMatrix> updates;
  for (int v = 0; v < 3; ++v) {
    const auto t0 = clock_type::now();
    auto problem = make_problem(a, eta, *variant_priors[v], p_op);
    UpdateConfig ucfg;
    ucfg.outer_tol = cfg.deblur_tol;
    ucfg.outer_max_rank = cfg.deblur_max_rank;
    ucfg.seed = cfg.seed + 101ULL * static_cast<std::uint64_t>(v);
    auto result = orim_update(problem, ucfg);
    const double f = result.trace.steps.empty() ? result.trace.f0 : result.trace.steps.back().f;
    report.rows.push_back({"orim_m" + std::to_string(v + 1) + "_fit", result.Z.rank(), f,
                           std::numeric_limits<double>::quiet_NaN(), elapsed_ms(t0), cfg.seed});
    updates.push_back(std::move(result.Z));
  }

  for (Index r = 0; r < cfg.deblur_realizations; ++r) {
    const std::uint64_t noise_seed = cfg.seed + 1000ULL + static_cast<std::uint64_t>(r);
    const Vector b =
        add_noise(b_clean, cfg.deblur_noise_level, cfg.deblur_noise_convention, noise_seed).b;
    const Vector tik = p_op.apply(b);
    report.rows.push_back({"tikhonov", 0, std::numeric_limits<double>::quiet_NaN(),
                           relative_error(tik, xi), 0.0, noise_seed});
    for (int v = 0; v < 3; ++v) {
      const Vector recon = tik + updates[static_cast<std::size_t>(v)].apply(b);
      report.rows.push_back({"orim_m" + std::to_string(v + 1),
                             updates[static_cast<std::size_t>(v)].rank(),
                             std::numeric_limits<double>::quiet_NaN(), relative_error(recon, xi),
                             0.0, noise_seed});
    }
  }

  for (const char* id : {"tikhonov", "orim_m1", "orim_m2", "orim_m3"})
    report.summary.push_back(summarize(id, "rel_error", report.column(id, "rel_error")));

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_pgm(out_dir + "/true.pgm", stack[static_cast<std::size_t>(cfg.deblur_exclude)]);
    write_pgm(out_dir + "/mean.pgm", unvec(prior.mean, n_pix, n_pix));
    write_pgm(out_dir + "/blurred.pgm", unvec(b_pilot, n_pix, n_pix));
    const Vector tik_pilot = p_op.apply(b_pilot);
    write_pgm(out_dir + "/recon_tikhonov.pgm", unvec(tik_pilot, n_pix, n_pix));
    for (int v = 0; v < 3; ++v) {
      const Vector recon = tik_pilot + updates[static_cast<std::size_t>(v)].apply(b_pilot);
      write_pgm(out_dir + "/recon_m" + std::to_string(v + 1) + ".pgm", unvec(recon, n_pix, n_pix));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Experiment 3: low-rank correction of a bidiagonalization-based inverse for
// a perturbed tomography problem

namespace {

// LSQR-iterate error curve from one bidiagonalization pass
std::vector<double> gk_error_curve(const Bidiagonalization& bd, const Vector& b, const Vector& xi,
                                   std::vector<Vector>* iterates = nullptr) {
  const Index k_max = bd.steps();
  const Vector wtb = bd.W.transpose() * b;
  const Matrix full_b = bd.bidiagonal();
  std::vector<double> rels;
  for (Index k = 1; k <= k_max; ++k) {
    const Matrix bk = full_b.topLeftCorner(k + 1, k);
    const Vector y = bk.colPivHouseholderQr().solve(wtb.head(k + 1));
    const Vector x = bd.Q.leftCols(k) * y;
    rels.push_back(relative_error(x, xi));
    if (iterates) iterates->push_back(x);
  }
  return rels;
}

RegularizedInverse gk_inverse_from(const Bidiagonalization& bd, Index k) {
  GkRep rep;
  rep.Q = bd.Q.leftCols(k);
  rep.W = bd.W.leftCols(k + 1);
  rep.B = bd.bidiagonal().topLeftCorner(k + 1, k);
  rep.B_pinv = pseudoinverse(rep.B);
  rep.breakdown = bd.breakdown;
  RegularizedInverse out;
  out.kind = InverseKind::golub_kahan_lsqr;
  out.gk = std::move(rep);
  return out;
}

}  // namespace

ExperimentReport run_tomo_perturbed(const ExperimentConfig& cfg, const std::string& out_dir) {
  std::vector<double> angles, angles_shifted;
  for (Index j = 0; j < cfg.tomo_angle_count; ++j) {
    const double base = cfg.tomo_angle_start + cfg.tomo_angle_step * static_cast<double>(j);
    angles.push_back(base);
    angles_shifted.push_back(base + cfg.tomo_angle_shift);
  }

  auto tomo = tomo_problem(cfg.tomo_n_pix, angles);
  auto tomo_pert = tomo_problem(cfg.tomo_n_pix, angles_shifted);
  const Index w = tomo.width;

  const Matrix truth = shepp_logan(cfg.tomo_n_pix);
  const Vector xi = tomo.embed(truth);
  const LinearOperator a_op = tomo.op();
  const LinearOperator a_pert_op = tomo_pert.op();

  const Vector b =
      add_noise(Vector(tomo.A * xi), cfg.tomo_noise_level, cfg.tomo_noise_convention, cfg.seed).b;
  const Vector b_pert = add_noise(Vector(tomo_pert.A * xi), cfg.tomo_noise_level,
                                  cfg.tomo_noise_convention, cfg.seed + 1).b;

  ExperimentReport report;

  // original problem: bidiagonalize once, sweep the iterate count
  const auto t_sweep = clock_type::now();
  auto bd = golub_kahan(a_op, b, cfg.tomo_k_max);
  const auto rels = gk_error_curve(bd, b, xi);
  Index k_best = 0;
  for (Index k = 0; k < static_cast<Index>(rels.size()); ++k) {
    report.rows.push_back({"lsqr_original_sweep", k + 1, std::numeric_limits<double>::quiet_NaN(),
                           rels[static_cast<std::size_t>(k)], 0.0, cfg.seed});
    if (rels[static_cast<std::size_t>(k)] < rels[static_cast<std::size_t>(k_best)]) k_best = k;
  }
  auto p_inv = gk_inverse_from(bd, k_best + 1);
  report.rows.push_back({"lsqr_best_original", k_best + 1, std::numeric_limits<double>::quiet_NaN(),
                         rels[static_cast<std::size_t>(k_best)], elapsed_ms(t_sweep), cfg.seed});

  // apply the stale inverse to the perturbed data
  const LinearOperator p_op = p_inv.as_operator();
  const Vector initial = p_op.apply(b_pert);
  report.rows.push_back({"initial", k_best + 1, std::numeric_limits<double>::quiet_NaN(),
                         relative_error(initial, xi), 0.0, cfg.seed});

  // low-rank correction computed against the perturbed operator
  const auto t_update = clock_type::now();
  auto problem = make_problem(a_pert_op, cfg.tomo_eta, identity_prior(tomo.pixels()), p_op);
  UpdateConfig ucfg;
  ucfg.outer_tol = 0.0;  // fixed-rank update
  ucfg.outer_max_rank = cfg.tomo_update_rank;
  ucfg.seed = cfg.seed + 31;
  auto result = orim_update(problem, ucfg);
  const Vector corrected = initial + result.Z.apply(b_pert);
  const double f = result.trace.steps.empty() ? result.trace.f0 : result.trace.steps.back().f;
  report.rows.push_back({"orim_update", result.Z.rank(), f, relative_error(corrected, xi),
                         elapsed_ms(t_update), cfg.seed});

  // reference: fresh LSQR sweep on the perturbed problem
  const auto t_ref = clock_type::now();
  auto bd_pert = golub_kahan(a_pert_op, b_pert, cfg.tomo_k_max);
  std::vector<Vector> iterates;
  const auto rels_pert = gk_error_curve(bd_pert, b_pert, xi, &iterates);
  Index k_best_pert = 0;
  for (Index k = 0; k < static_cast<Index>(rels_pert.size()); ++k) {
    report.rows.push_back({"lsqr_perturbed_sweep", k + 1, std::numeric_limits<double>::quiet_NaN(),
                           rels_pert[static_cast<std::size_t>(k)], 0.0, cfg.seed});
    if (rels_pert[static_cast<std::size_t>(k)] < rels_pert[static_cast<std::size_t>(k_best_pert)])
      k_best_pert = k;
  }
  report.rows.push_back({"lsqr_best_perturbed", k_best_pert + 1,
                         std::numeric_limits<double>::quiet_NaN(),
                         rels_pert[static_cast<std::size_t>(k_best_pert)], elapsed_ms(t_ref),
                         cfg.seed});

  for (const char* id : {"lsqr_original_sweep", "lsqr_perturbed_sweep"})
    report.summary.push_back(summarize(id, "rel_error", report.column(id, "rel_error")));

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_pgm(out_dir + "/true.pgm", unvec(xi, w, w));
    auto sinogram = [&](const Vector& data) {
      Matrix s(cfg.tomo_angle_count, w);
      for (Index j = 0; j < cfg.tomo_angle_count; ++j) s.row(j) = data.segment(j * w, w).transpose();
      return s;
    };
    write_normalized_pgm(out_dir + "/sinogram_original.pgm", sinogram(b));
    write_normalized_pgm(out_dir + "/sinogram_perturbed.pgm", sinogram(b_pert));
    write_pgm(out_dir + "/recon_initial.pgm", unvec(initial, w, w));
    write_pgm(out_dir + "/recon_orim.pgm", unvec(corrected, w, w));
    write_pgm(out_dir + "/recon_lsqr_best.pgm",
              unvec(iterates[static_cast<std::size_t>(k_best_pert)], w, w));
  }
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  switch (config.experiment) {
    case ExperimentKind::heat_sequence:
      return run_heat_sequence(config, out_dir);
    case ExperimentKind::deblur:
      return run_deblur(config, out_dir);
    case ExperimentKind::tomo_perturbed:
      return run_tomo_perturbed(config, out_dir);
  }
  throw std::logic_error("run_experiment: unreachable");
}

}  // namespace orim
