#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pmnn/caputo.hpp"
#include "pmnn/fdm.hpp"
#include "pmnn/problems.hpp"
#include "pmnn/solver.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12f", v);
  return buf;
}

double ls_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto n = double(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  return num / den;
}

struct RunConfig {
  int example = 1;
  double alpha = 0.5;
  std::string scheme = "l1";
  int nt = 41;
  int nx = 11;
  std::uint64_t seed = 42;
  int hidden = 5;
  int width = 20;
  int max_iters = 5000;
  std::string out;
  std::string dump;
};

pmnn::Scheme parse_scheme(const std::string& s) {
  if (s == "l1") return pmnn::Scheme::L1;
  if (s == "l2sigma") return pmnn::Scheme::L2Sigma;
  throw std::invalid_argument("unknown scheme: " + s);
}

int cmd_weights(double alpha_in, const std::string& scheme, int n) {
  const pmnn::FractionalOrder alpha(alpha_in);
  std::vector<double> w;
  if (scheme == "l1") {
    w = pmnn::l1_weights(alpha, n).a;
  } else {
    w = pmnn::l2sigma_weight_row(alpha, n).c;
  }
  std::string line;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) line += ", ";
    line += fmt12(w[i]);
  }
  std::cout << line << "\n";
  return 0;
}

double test_function(const std::string& id, double t) {
  if (id == "const") return 1.0;
  const double p = id == "t1" ? 1.0 : id == "t2" ? 2.0 : id == "t3" ? 3.0 : 4.0;
  return std::pow(t, p);
}

double test_function_caputo(const std::string& id, pmnn::FractionalOrder alpha, double t) {
  if (id == "const") return 0.0;
  const double p = id == "t1" ? 1.0 : id == "t2" ? 2.0 : id == "t3" ? 3.0 : 4.0;
  return pmnn::caputo_power_oracle(p, alpha, t);
}

int cmd_convergence(double alpha_in, const std::string& scheme, const std::string& fn,
                    const std::vector<int>& ns) {
  if (ns.size() < 3) {
    std::cerr << "convergence study needs at least 3 grid sizes\n";
    return kExitUsage;
  }
  const pmnn::FractionalOrder alpha(alpha_in);
  std::vector<double> errors, log_tau, log_err;
  for (const int n : ns) {
    if (n < 2) throw std::invalid_argument("grid size must be at least 2");
    const double tau = 1.0 / n;
    std::vector<double> samples(n + 1);
    for (int k = 0; k <= n; ++k) samples[k] = test_function(fn, k * tau);
    double approx, t_eval;
    if (scheme == "l1") {
      approx = pmnn::caputo_l1(samples, alpha, tau);
      t_eval = 1.0;
    } else {
      approx = pmnn::caputo_l2sigma(samples, alpha, tau);
      const double sigma = 1.0 - alpha.value() / 2.0;
      t_eval = (n - 1 + sigma) * tau;
    }
    const double err = std::abs(approx - test_function_caputo(fn, alpha, t_eval));
    errors.push_back(err);
    if (err > 0.0) {
      log_tau.push_back(std::log(tau));
      log_err.push_back(std::log(err));
    }
  }
  const bool exact = *std::max_element(errors.begin(), errors.end()) <= 1e-13;
  std::string order = "exact";
  if (!exact) order = fmt(ls_slope(log_tau, log_err));
  std::cout << "n,error,order\n";
  for (std::size_t i = 0; i < ns.size(); ++i)
    std::cout << ns[i] << ',' << fmt(errors[i]) << ',' << order << "\n";
  return 0;
}

/// Matches the sampling used by the reported L2 relative error.
std::vector<double> test_axis(double lo, double hi, int count) {
  std::vector<double> nodes(count);
  const double h = (hi - lo) / (count - 1);
  for (int i = 0; i < count; ++i) nodes[i] = lo + i * h;
  nodes[count - 1] = hi;
  return nodes;
}

int dump_prediction(const std::string& path, const pmnn::FractionalIVP& p,
                    const pmnn::NetworkParams& params) {
  std::ofstream out(path);
  if (!out) {
    std::cerr << "cannot open " << path << "\n";
    return kExitIo;
  }
  const int nt = p.spatial_dim == 0 ? 500 : 100;
  const auto times = test_axis(0.0, p.horizon, nt);
  std::vector<std::vector<double>> axes;
  for (int d = 0; d < p.spatial_dim; ++d)
    axes.push_back(test_axis(p.spatial_domain[d][0], p.spatial_domain[d][1], 100));

  out << (p.spatial_dim == 0 ? "t,u_exact,u_pred,abs_err"
          : p.spatial_dim == 1 ? "t,x,u_exact,u_pred,abs_err"
                               : "t,x,y,u_exact,u_pred,abs_err")
      << "\n";
  std::vector<double> in(p.spatial_dim + 1);
  const std::size_t ni = axes.empty() ? 1 : axes[0].size();
  const std::size_t nj = axes.size() > 1 ? axes[1].size() : 1;
  for (const double t : times)
    for (std::size_t i = 0; i < ni; ++i)
      for (std::size_t j = 0; j < nj; ++j) {
        std::string line = fmt(t);
        if (!axes.empty()) {
          in[0] = axes[0][i];
          line += ',' + fmt(in[0]);
        }
        if (axes.size() > 1) {
          in[1] = axes[1][j];
          line += ',' + fmt(in[1]);
        }
        in.back() = t;
        const double pred = pmnn::forward(params, in);
        const double exact =
            p.exact_solution(std::span(in.data(), p.spatial_dim), t);
        out << line << ',' << fmt(exact) << ',' << fmt(pred) << ','
            << fmt(std::abs(pred - exact)) << "\n";
      }
  return out ? 0 : kExitIo;
}

std::pair<pmnn::NetworkParams, pmnn::SolveReport> run_one(const RunConfig& cfg) {
  const pmnn::FractionalIVP p = pmnn::example_by_id(cfg.example, cfg.alpha);
  pmnn::TrainOptions opt;
  opt.n_t = cfg.nt;
  opt.n_x = cfg.nx;
  opt.seed = cfg.seed;
  opt.net.hidden_layers = cfg.hidden;
  opt.net.width = cfg.width;
  opt.opt.max_iterations = cfg.max_iters;
  return pmnn::train(p, parse_scheme(cfg.scheme), opt);
}

int cmd_solve(const RunConfig& cfg) {
  const auto [params, report] = run_one(cfg);

  nlohmann::ordered_json j;
  j["example"] = cfg.example;
  j["hidden_layers"] = cfg.hidden;
  j["width"] = cfg.width;
  j["max_iterations"] = cfg.max_iters;
  const auto rep = nlohmann::ordered_json::parse(report.to_json());
  for (const auto& [key, value] : rep.items()) j[key] = value;

  if (!cfg.out.empty()) {
    std::ofstream f(cfg.out);
    if (!f) {
      std::cerr << "cannot open " << cfg.out << "\n";
      return kExitIo;
    }
    f << j.dump(2) << "\n";
    if (!f) return kExitIo;
  } else {
    std::cout << j.dump(2) << "\n";
  }
  if (!cfg.dump.empty())
    return dump_prediction(cfg.dump, pmnn::example_by_id(cfg.example, cfg.alpha), params);
  return 0;
}

struct TablePlan {
  int example;
  bool vary_nx;         // rows sweep nx instead of nt
  std::vector<int> ns;  // nt or nx values per row
  std::vector<double> alphas;
  int fixed_nt;
  int fixed_nx;
};

TablePlan table_plan(const std::string& id) {
  if (id == "ode-err") return {1, false, {11, 21, 41, 81, 101, 201}, {0.25, 0.5, 0.75}, 0, 0};
  if (id == "pde1d-err") return {2, false, {11, 21, 41, 81, 101}, {0.25, 0.5, 0.75}, 0, 11};
  if (id == "pde1d-nx") return {2, true, {6, 11, 21, 41, 81, 101}, {0.5}, 41, 0};
  if (id == "pde2d-err") return {3, false, {11, 21, 41, 81, 101}, {0.25, 0.5, 0.75}, 0, 11};
  if (id == "pde2d-nx") return {3, true, {6, 11, 21, 41, 81}, {0.5}, 21, 0};
  throw std::invalid_argument("unknown table id: " + id);
}

int cmd_table(const std::string& id, std::vector<std::uint64_t> seeds, const std::vector<int>& ns,
              const std::vector<double>& alphas) {
  TablePlan plan = table_plan(id);
  if (!ns.empty()) plan.ns = ns;
  if (!alphas.empty()) plan.alphas = alphas;
  if (seeds.empty()) seeds = {42};

  std::string header = plan.vary_nx ? "nx,alpha,scheme" : "nt,alpha,scheme";
  if (seeds.size() == 1) {
    header += ",error";
  } else {
    for (const auto s : seeds) header += ",error_seed" + std::to_string(s);
    header += ",median";
  }
  std::cout << header << "\n";

  for (const int n : plan.ns)
    for (const double alpha : plan.alphas)
      for (const char* scheme : {"l1", "l2sigma"}) {
        RunConfig cfg;
        cfg.example = plan.example;
        cfg.alpha = alpha;
        cfg.scheme = scheme;
        cfg.nt = plan.vary_nx ? plan.fixed_nt : n;
        cfg.nx = plan.vary_nx ? n : plan.fixed_nx;
        std::vector<double> errs;
        for (const auto seed : seeds) {
          cfg.seed = seed;
          const auto [params, report] = run_one(cfg);
          (void)params;
          errs.push_back(report.l2_relative_error.value());
        }
        std::string row = std::to_string(n) + ',' + fmt(alpha) + ',' + scheme;
        for (const double e : errs) row += ',' + fmt(e);
        if (seeds.size() > 1) {
          std::vector<double> sorted = errs;
          std::sort(sorted.begin(), sorted.end());
          const std::size_t m = sorted.size();
          const double median =
              m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
          row += ',' + fmt(median);
        }
        std::cout << row << "\n";
      }
  return 0;
}

int cmd_fdm(const RunConfig& cfg) {
  const pmnn::FractionalIVP p = pmnn::example_by_id(cfg.example, cfg.alpha);
  if (cfg.nt < 2) throw std::invalid_argument("--nt must be at least 2 nodes");
  const int steps = cfg.nt - 1;
  pmnn::GridSolution sol;
  if (p.spatial_dim == 0) {
    sol = cfg.scheme == "l1" ? pmnn::fdm_solve_fode(p, steps)
                             : pmnn::fdm_solve_fode_l2sigma(p, steps);
  } else {
    if (cfg.scheme != "l1")
      throw std::invalid_argument("the grid oracle supports only --scheme l1 for PDE problems");
    sol = p.spatial_dim == 1 ? pmnn::fdm_solve_1d(p, steps, cfg.nx)
                             : pmnn::fdm_solve_2d(p, steps, cfg.nx);
  }
  if (!cfg.out.empty()) {
    std::ofstream f(cfg.out);
    if (!f) {
      std::cerr << "cannot open " << cfg.out << "\n";
      return kExitIo;
    }
    pmnn::export_csv(sol, f);
    if (!f) return kExitIo;
  } else {
    pmnn::export_csv(sol, std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional-derivative network solvers and discretization tools"};
  app.require_subcommand(1);

  RunConfig cfg;
  int n_weights = 8;
  std::string fn = "t3";
  std::vector<int> ns_list;
  std::string table_id;
  std::vector<std::uint64_t> seeds;
  std::vector<double> alphas;

  auto* weights = app.add_subcommand("weights", "Print discretization weights");
  weights->add_option("--alpha", cfg.alpha, "Fractional order in (0,1)");
  weights->add_option("--scheme", cfg.scheme, "l1 or l2sigma")
      ->check(CLI::IsMember({"l1", "l2sigma"}));
  weights->add_option("--n", n_weights, "How many weights (the row index for l2sigma)");

  auto* conv = app.add_subcommand("convergence", "Temporal convergence study of the kernels");
  conv->add_option("--alpha", cfg.alpha, "Fractional order in (0,1)");
  conv->add_option("--scheme", cfg.scheme, "l1 or l2sigma")
      ->check(CLI::IsMember({"l1", "l2sigma"}));
  conv->add_option("--function", fn, "Test function")
      ->check(CLI::IsMember({"const", "t1", "t2", "t3", "t4"}));
  conv->add_option("--ns", ns_list, "Grid sizes, e.g. 64,128,256")->delimiter(',');

  const auto add_run_flags = [&cfg](CLI::App* cmd) {
    cmd->add_option("--example", cfg.example, "Benchmark problem id")->check(CLI::Range(1, 3));
    cmd->add_option("--alpha", cfg.alpha, "Fractional order in (0,1)");
    cmd->add_option("--scheme", cfg.scheme, "l1 or l2sigma")
        ->check(CLI::IsMember({"l1", "l2sigma"}));
    cmd->add_option("--nt", cfg.nt, "Time nodes");
    cmd->add_option("--nx", cfg.nx, "Spatial nodes per axis (PDE only)");
    cmd->add_option("--out", cfg.out, "Output path (stdout when omitted)");
  };

  auto* solve = app.add_subcommand("solve", "Train one network and report the run");
  add_run_flags(solve);
  solve->add_option("--seed", cfg.seed, "Initialization seed");
  solve->add_option("--hidden", cfg.hidden, "Hidden layers");
  solve->add_option("--width", cfg.width, "Hidden width");
  solve->add_option("--max-iters", cfg.max_iters, "Optimizer iteration cap");
  solve->add_option("--dump-prediction", cfg.dump, "Also write a prediction CSV here");

  auto* table = app.add_subcommand("table", "Reproduce a benchmark error table");
  table->add_option("--table", table_id, "ode-err, pde1d-err, pde1d-nx, pde2d-err or pde2d-nx")
      ->required();
  table->add_option("--seeds", seeds, "Seeds; more than one adds a median column")
      ->delimiter(',');
  table->add_option("--ns", ns_list, "Override the swept nt/nx values")->delimiter(',');
  table->add_option("--alphas", alphas, "Override the alpha set")->delimiter(',');
  table->add_option("--hidden", cfg.hidden, "Hidden layers");
  table->add_option("--width", cfg.width, "Hidden width");
  table->add_option("--max-iters", cfg.max_iters, "Optimizer iteration cap");

  auto* fdm = app.add_subcommand("fdm", "Run the classical grid solver, CSV out");
  add_run_flags(fdm);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (weights->parsed()) return cmd_weights(cfg.alpha, cfg.scheme, n_weights);
    if (conv->parsed()) {
      if (ns_list.empty()) ns_list = {64, 128, 256, 512};
      return cmd_convergence(cfg.alpha, cfg.scheme, fn, ns_list);
    }
    if (solve->parsed()) return cmd_solve(cfg);
    if (table->parsed()) return cmd_table(table_id, seeds, ns_list, alphas);
    if (fdm->parsed()) return cmd_fdm(cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
