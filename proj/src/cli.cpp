#include "orim/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "orim/experiments.hpp"
#include "orim/io.hpp"
#include "orim/regularizers.hpp"

namespace orim {

namespace {

struct ComputeOptions {
  std::string operator_source;
  std::string method = "closed_form";
  double eta = 0.0;
  Index rank = 1;
  std::string prior_mean_file;
  std::string prior_cov_file;
  std::string initial_inverse_file;
  std::string out_dir;
  double tol = 1e-6;
  Index max_rank = 50;
  std::uint64_t seed = 1;
};

std::map<std::string, std::string> parse_spec_args(const std::string& spec) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected key=value in '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return kv;
}

LinearOperator load_operator(const std::string& source) {
  if (source.rfind("heat:", 0) == 0) {
    auto kv = parse_spec_args(source.substr(5));
    HeatParams params;
    if (kv.count("n")) params.n = std::stoll(kv["n"]);
    if (kv.count("kappa")) params.kappa = std::stod(kv["kappa"]);
    return LinearOperator::from_dense(heat_problem(params));
  }
  if (source.rfind("tomo:", 0) == 0) {
    auto kv = parse_spec_args(source.substr(5));
    Index n_pix = kv.count("n_pix") ? std::stoll(kv["n_pix"]) : 32;
    double start = kv.count("start") ? std::stod(kv["start"]) : 0.0;
    double step = kv.count("step") ? std::stod(kv["step"]) : 6.0;
    Index count = kv.count("count") ? std::stoll(kv["count"]) : 30;
    std::vector<double> angles;
    for (Index j = 0; j < count; ++j) angles.push_back(start + step * static_cast<double>(j));
    return tomo_problem(n_pix, angles).op();
  }
  const auto dot = source.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : source.substr(dot + 1);
  if (ext == "mtx") return LinearOperator::from_sparse(read_matrix_market(source));
  return LinearOperator::from_dense(read_matrix_any(source));
}

PriorModel load_prior(const ComputeOptions& opt, Index n) {
  if (opt.prior_cov_file.empty() && opt.prior_mean_file.empty()) return identity_prior(n);
  Vector mean = opt.prior_mean_file.empty() ? Vector(Vector::Zero(n))
                                            : read_vector_csv(opt.prior_mean_file);
  Matrix cov = opt.prior_cov_file.empty() ? Matrix(Matrix::Identity(n, n))
                                          : read_matrix_any(opt.prior_cov_file);
  return prior_from_mean_cov(mean, cov);
}

void write_info(const std::string& path, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path);
  for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

int run_compute(const ComputeOptions& opt, bool update_mode) {
  LinearOperator a;
  PriorModel prior;
  std::optional<LinearOperator> initial;

  // input phase: any failure here is a usage error, nothing is written
  try {
    a = load_operator(opt.operator_source);
    prior = load_prior(opt, a.cols());
    if (!opt.initial_inverse_file.empty())
      initial = LinearOperator::from_dense(read_matrix_any(opt.initial_inverse_file));
    if (update_mode && !initial)
      throw std::invalid_argument("update requires --initial-inverse");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  auto problem = make_problem(a, opt.eta, std::move(prior), std::move(initial));

  Matrix z_dense;
  std::optional<LowRankMatrix> z_factored;
  bool unique = true;
  const UpdateTrace* trace = nullptr;
  UpdateResult update_result;

  const std::string method = update_mode ? "rank_update" : opt.method;
  if (method == "closed_form") {
    auto cf = orim_closed_form(problem, opt.rank);
    unique = cf.unique;
    z_factored = std::move(cf.Z);
  } else if (method == "rank_update") {
    UpdateConfig ucfg;
    ucfg.outer_tol = opt.tol;
    ucfg.outer_max_rank = update_mode ? opt.max_rank : std::min(opt.rank, opt.max_rank);
    ucfg.seed = opt.seed;
    update_result = orim_update(problem, ucfg);
    z_factored = update_result.Z;
    trace = &update_result.trace;
  } else if (method == "tsvd") {
    z_dense = tsvd_inverse(a.to_dense(), opt.rank).to_dense();
    unique = tsvd_inverse(a.to_dense(), opt.rank).unique;
  } else if (method == "ttik") {
    auto inv = truncated_tikhonov(a.to_dense(), opt.rank, opt.eta);
    unique = inv.unique;
    z_dense = inv.to_dense();
  } else if (method == "tikhonov") {
    z_dense = tikhonov_inverse(a.to_dense(), opt.eta).to_dense();
  } else if (method == "orim0") {
    if (opt.prior_cov_file.empty())
      throw std::invalid_argument("orim0 requires --prior-cov (the covariance factor source)");
    auto m_xi = SymmetricOperator::from_dense(read_matrix_any(opt.prior_cov_file)).factor().to_dense();
    auto inv = orim0_inverse(a.to_dense(), m_xi, opt.eta, opt.rank);
    unique = inv.unique;
    z_factored = inv.low_rank;
  } else {
    throw std::invalid_argument("unknown method: " + method);
  }

  const double f = z_factored ? bayes_risk(problem, *z_factored) : bayes_risk(problem, z_dense);

  std::filesystem::create_directories(opt.out_dir);
  if (z_factored) {
    write_matrix_csv(opt.out_dir + "/X.csv", z_factored->X);
    write_matrix_csv(opt.out_dir + "/Y.csv", z_factored->Y);
  } else {
    write_matrix_csv(opt.out_dir + "/Z.csv", z_dense);
  }
  if (trace) {
    std::ofstream out(opt.out_dir + "/trace.csv");
    out << "rank,f_value,inner_iterations,time_ms\n";
    for (const auto& s : trace->steps)
      out << s.rank << ',' << format_double(s.f) << ',' << s.inner_iterations << ','
          << format_double(s.wall_ms) << '\n';
  }
  write_info(opt.out_dir + "/info.txt",
             {{"method", method},
              {"rows", std::to_string(problem.solution_size())},
              {"cols", std::to_string(problem.data_size())},
              {"rank", std::to_string(z_factored ? z_factored->rank() : opt.rank)},
              {"eta", format_double(opt.eta)},
              {"f_value", format_double(f)},
              {"unique", unique ? "true" : "false"}});

  std::cout << "f_value=" << format_double(f) << "\n";
  return 0;
}

int run_experiment_command(const std::string& kind_name, const std::string& config_file,
                           std::optional<std::uint64_t> seed, std::string out_dir) {
  ExperimentKind kind;
  ExperimentConfig config;
  try {
    kind = experiment_kind_from_string(kind_name);
    if (config_file.empty()) {
      config = ExperimentConfig::defaults(kind);
    } else {
      std::ifstream in(config_file);
      if (!in) throw std::runtime_error("cannot open config file: " + config_file);
      std::stringstream buf;
      buf << in.rdbuf();
      const std::string text = buf.str();
      config = ExperimentConfig::from_text(text);
      if (text.find("experiment=") == std::string::npos)
        config.experiment = kind;
      else if (config.experiment != kind)
        throw std::invalid_argument("config experiment does not match the subcommand");
    }
    if (seed) config.seed = *seed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  if (out_dir.empty()) out_dir = "orim_" + to_string(config.experiment) + "_out";
  auto report = run_experiment(config, out_dir);
  write_report(report, out_dir);
  {
    std::ofstream out(out_dir + "/config_used.cfg");
    out << config.to_text();
  }

  for (const auto& s : report.summary) {
    if (s.metric == "time_ms") continue;
    std::cout << s.identifier << " " << s.metric << ": mean=" << s.mean << " median=" << s.median
              << " [" << s.p25 << ", " << s.p75 << "]\n";
  }
  std::cout << "report written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"optimal regularized inverse matrices: computation, low-rank updates, experiments"};
  app.require_subcommand(1);

  ComputeOptions opt;
  auto add_common = [&opt](CLI::App* cmd) {
    cmd->add_option("--operator", opt.operator_source,
                    "matrix file (.csv/.mtx) or builtin spec, e.g. heat:n=200,kappa=1.0")
        ->required();
    cmd->add_option("--eta", opt.eta, "noise level / regularization weight");
    cmd->add_option("--prior-mean", opt.prior_mean_file, "prior mean vector (.csv)");
    cmd->add_option("--prior-cov", opt.prior_cov_file, "prior covariance (.csv/.mtx)");
    cmd->add_option("--out", opt.out_dir, "output directory")->required();
    cmd->add_option("--seed", opt.seed, "random seed");
    cmd->add_option("--tol", opt.tol, "relative improvement tolerance for rank updates");
    cmd->add_option("--max-rank", opt.max_rank, "rank cap for rank updates");
  };

  auto* compute = app.add_subcommand("compute", "compute a regularized inverse");
  add_common(compute);
  compute->add_option("--method", opt.method,
                      "closed_form | rank_update | tsvd | ttik | tikhonov | orim0");
  compute->add_option("--rank", opt.rank, "target rank");
  compute->add_option("--initial-inverse", opt.initial_inverse_file, "initial inverse P (.csv)");

  auto* update = app.add_subcommand("update", "low-rank update to an existing inverse");
  add_common(update);
  update->add_option("--initial-inverse", opt.initial_inverse_file, "initial inverse P (.csv)")
      ->required();

  std::string experiment_kind;
  std::string config_file;
  std::string exp_out;
  std::uint64_t exp_seed = 0;
  bool seed_given = false;
  auto* experiment = app.add_subcommand("experiment", "run a built-in experiment");
  experiment->add_option("kind", experiment_kind, "heat | deblur | tomo")->required();
  experiment->add_option("--config", config_file, "key=value config file");
  experiment->add_option("--out", exp_out, "output directory");
  experiment->add_option("--seed", exp_seed, "seed override")->each([&](const std::string&) {
    seed_given = true;
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (compute->parsed()) return run_compute(opt, false);
    if (update->parsed()) return run_compute(opt, true);
    if (experiment->parsed())
      return run_experiment_command(
          experiment_kind, config_file,
          seed_given ? std::optional<std::uint64_t>(exp_seed) : std::nullopt, exp_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace orim
