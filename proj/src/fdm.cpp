#include "pmnn/fdm.hpp"

#include <charconv>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>

#include "pmnn/caputo.hpp"
#include "pmnn/errors.hpp"

namespace pmnn {

namespace {

void check_steps(int n_steps) {
  if (n_steps < 1) throw std::invalid_argument("n_steps must be positive");
}

std::vector<double> axis_nodes(double lo, double hi, int n_x) {
  const double h = (hi - lo) / (n_x - 1);
  std::vector<double> nodes(n_x);
  for (int i = 0; i < n_x; ++i) nodes[i] = lo + i * h;
  nodes[n_x - 1] = hi;
  return nodes;
}

double l1_prefactor(const FractionalIVP& p, double tau) {
  return gamma_fn(2.0 - p.alpha.value()) * std::pow(tau, p.alpha.value());
}

void append_double(std::string& line, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  line.append(buf, res.ptr);
}

}  // namespace

std::size_t GridSolution::frame_size() const {
  std::size_t f = 1;
  for (const auto& ax : axes) f *= ax.size();
  return f;
}

double GridSolution::at(std::size_t n, std::size_t i, std::size_t j) const {
  std::size_t idx = n * frame_size();
  if (!axes.empty()) idx += axes.size() > 1 ? i * axes[1].size() + j : i;
  return values.at(idx);
}

GridSolution fdm_solve_fode(const FractionalIVP& p, int n_steps) {
  p.validate();
  if (p.spatial_dim != 0) throw std::invalid_argument("fdm_solve_fode: scalar problem required");
  check_steps(n_steps);
  const TimeGrid grid(p.horizon, n_steps);
  const L1Weights w = l1_weights(p.alpha, n_steps);
  const double gam = l1_prefactor(p, grid.tau);
  const double opc = p.operator_L == OperatorKind::NegIdentity ? 1.0 : 0.0;

  GridSolution sol;
  sol.times = grid.nodes;
  sol.values.resize(n_steps + 1);
  sol.values[0] = p.initial({});
  for (int n = 1; n <= n_steps; ++n) {
    double hist = sol.values[n - 1];
    for (int l = 1; l < n; ++l) hist -= w.a[l] * (sol.values[n - l] - sol.values[n - l - 1]);
    sol.values[n] = (gam * p.forcing({}, grid.nodes[n]) + hist) / (1.0 + gam * opc);
  }
  return sol;
}

GridSolution fdm_solve_fode_l2sigma(const FractionalIVP& p, int n_steps) {
  p.validate();
  if (p.spatial_dim != 0)
    throw std::invalid_argument("fdm_solve_fode_l2sigma: scalar problem required");
  check_steps(n_steps);
  const TimeGrid grid(p.horizon, n_steps);
  const auto rows = l2sigma_weight_table(p.alpha, n_steps);
  const double gam = l1_prefactor(p, grid.tau);
  const double sigma = rows[0].sigma;
  const double opc = p.operator_L == OperatorKind::NegIdentity ? 1.0 : 0.0;

  GridSolution sol;
  sol.times = grid.nodes;
  sol.values.resize(n_steps + 1);
  sol.values[0] = p.initial({});
  for (int n = 1; n <= n_steps; ++n) {
    const auto& c = rows[n - 1].c;
    double hist = 0.0;
    for (int k = 1; k < n; ++k) hist += c[k] * (sol.values[n - k - 1] - sol.values[n - k]);
    hist /= c[0];
    const double g = gam / c[0];
    const double t_off = (n - 1 + sigma) * grid.tau;
    const double rhs =
        g * (p.forcing({}, t_off) - opc * (1.0 - sigma) * sol.values[n - 1]) + hist +
        sol.values[n - 1];
    sol.values[n] = rhs / (1.0 + g * sigma * opc);
  }
  return sol;
}

GridSolution fdm_solve_1d(const FractionalIVP& p, int n_steps, int n_x) {
  p.validate();
  if (p.spatial_dim != 1 || p.operator_L != OperatorKind::SecondDerivX)
    throw std::invalid_argument("fdm_solve_1d: one-dimensional diffusion problem required");
  check_steps(n_steps);
  if (n_x < 3) throw std::invalid_argument("fdm_solve_1d: need at least 3 grid nodes");
  const TimeGrid grid(p.horizon, n_steps);
  const L1Weights w = l1_weights(p.alpha, n_steps);
  const double gam = l1_prefactor(p, grid.tau);
  const auto ax = axis_nodes(p.spatial_domain[0][0], p.spatial_domain[0][1], n_x);
  const double h = (p.spatial_domain[0][1] - p.spatial_domain[0][0]) / (n_x - 1);
  const double r = gam / (h * h);

  GridSolution sol;
  sol.times = grid.nodes;
  sol.axes = {ax};
  sol.values.resize(std::size_t(n_steps + 1) * n_x);
  for (int i = 0; i < n_x; ++i) sol.values[i] = p.initial(std::span(&ax[i], 1));

  std::vector<double> lower(n_x - 1), diag(n_x), upper(n_x - 1), rhs(n_x);
  for (int n = 1; n <= n_steps; ++n) {
    const double t = grid.nodes[n];
    const std::size_t base = std::size_t(n) * n_x;
    diag[0] = diag[n_x - 1] = 1.0;
    upper[0] = lower[n_x - 2] = 0.0;
    rhs[0] = p.boundary(std::span(&ax[0], 1), t);
    rhs[n_x - 1] = p.boundary(std::span(&ax[n_x - 1], 1), t);
    for (int i = 1; i < n_x - 1; ++i) {
      lower[i - 1] = upper[i] = -r;
      diag[i] = 1.0 + 2.0 * r;
      double hist = sol.values[base - n_x + i];
      for (int l = 1; l < n; ++l) {
        const std::size_t cur = std::size_t(n - l) * n_x + i;
        hist -= w.a[l] * (sol.values[cur] - sol.values[cur - n_x]);
      }
      rhs[i] = hist + gam * p.forcing(std::span(&ax[i], 1), t);
    }
    const std::vector<double> u = detail::thomas_solve(lower, diag, upper, rhs);
    std::copy(u.begin(), u.end(), sol.values.begin() + base);
  }
  return sol;
}

GridSolution fdm_solve_2d(const FractionalIVP& p, int n_steps, int n_x) {
  p.validate();
  if (p.spatial_dim != 2 || p.operator_L != OperatorKind::LaplacianXY)
    throw std::invalid_argument("fdm_solve_2d: two-dimensional diffusion problem required");
  check_steps(n_steps);
  if (n_x < 3) throw std::invalid_argument("fdm_solve_2d: need at least 3 grid nodes");
  const TimeGrid grid(p.horizon, n_steps);
  const L1Weights w = l1_weights(p.alpha, n_steps);
  const double gam = l1_prefactor(p, grid.tau);
  const auto ax = axis_nodes(p.spatial_domain[0][0], p.spatial_domain[0][1], n_x);
  const auto ay = axis_nodes(p.spatial_domain[1][0], p.spatial_domain[1][1], n_x);
  const double hx = (p.spatial_domain[0][1] - p.spatial_domain[0][0]) / (n_x - 1);
  const double hy = (p.spatial_domain[1][1] - p.spatial_domain[1][0]) / (n_x - 1);
  const double rx = gam / (hx * hx), ry = gam / (hy * hy);

  GridSolution sol;
  sol.times = grid.nodes;
  sol.axes = {ax, ay};
  const std::size_t frame = std::size_t(n_x) * n_x;
  sol.values.resize((n_steps + 1) * frame);
  for (int i = 0; i < n_x; ++i)
    for (int j = 0; j < n_x; ++j) {
      const double xy[2] = {ax[i], ay[j]};
      sol.values[std::size_t(i) * n_x + j] = p.initial(xy);
    }

  const int m = n_x - 2;
  const detail::ApplyFn apply = [&](std::span<const double> v, std::span<double> out) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const std::size_t q = std::size_t(i) * m + j;
        double acc = (1.0 + 2.0 * rx + 2.0 * ry) * v[q];
        if (i > 0) acc -= rx * v[q - m];
        if (i < m - 1) acc -= rx * v[q + m];
        if (j > 0) acc -= ry * v[q - 1];
        if (j < m - 1) acc -= ry * v[q + 1];
        out[q] = acc;
      }
  };

  std::vector<double> b(std::size_t(m) * m), x(std::size_t(m) * m);
  for (int n = 1; n <= n_steps; ++n) {
    const double t = grid.nodes[n];
    const std::size_t base = std::size_t(n) * frame;
    for (int i = 0; i < n_x; ++i)
      for (int j = 0; j < n_x; ++j) {
        if (i > 0 && i < n_x - 1 && j > 0 && j < n_x - 1) continue;
        const double xy[2] = {ax[i], ay[j]};
        sol.values[base + std::size_t(i) * n_x + j] = p.boundary(xy, t);
      }
    for (int i = 1; i <= m; ++i)
      for (int j = 1; j <= m; ++j) {
        const std::size_t node = std::size_t(i) * n_x + j;
        const std::size_t q = std::size_t(i - 1) * m + (j - 1);
        double hist = sol.values[base - frame + node];
        for (int l = 1; l < n; ++l) {
          const std::size_t cur = std::size_t(n - l) * frame + node;
          hist -= w.a[l] * (sol.values[cur] - sol.values[cur - frame]);
        }
        const double xy[2] = {ax[i], ay[j]};
        double acc = hist + gam * p.forcing(xy, t);
        if (i == 1) acc += rx * sol.values[base + node - n_x];
        if (i == m) acc += rx * sol.values[base + node + n_x];
        if (j == 1) acc += ry * sol.values[base + node - 1];
        if (j == m) acc += ry * sol.values[base + node + 1];
        b[q] = acc;
        x[q] = sol.values[base - frame + node];
      }
    detail::cg_solve(apply, b, x, 1e-12, 10 * n_x * n_x);
    for (int i = 1; i <= m; ++i)
      for (int j = 1; j <= m; ++j)
        sol.values[base + std::size_t(i) * n_x + j] = x[std::size_t(i - 1) * m + (j - 1)];
  }
  return sol;
}

void export_csv(const GridSolution& sol, std::ostream& out) {
  const std::size_t dim = sol.axes.size();
  std::string line = dim == 0 ? "t,u" : dim == 1 ? "t,x,u" : "t,x,y,u";
  line.push_back('\n');
  out << line;
  for (std::size_t n = 0; n < sol.times.size(); ++n) {
    const std::size_t ni = dim > 0 ? sol.axes[0].size() : 1;
    const std::size_t nj = dim > 1 ? sol.axes[1].size() : 1;
    for (std::size_t i = 0; i < ni; ++i)
      for (std::size_t j = 0; j < nj; ++j) {
        line.clear();
        append_double(line, sol.times[n]);
        if (dim > 0) {
          line.push_back(',');
          append_double(line, sol.axes[0][i]);
        }
        if (dim > 1) {
          line.push_back(',');
          append_double(line, sol.axes[1][j]);
        }
        line.push_back(',');
        append_double(line, sol.at(n, i, j));
        line.push_back('\n');
        out << line;
      }
  }
}

namespace detail {

std::vector<double> thomas_solve(std::span<const double> lower, std::span<const double> diag,
                                 std::span<const double> upper, std::span<const double> rhs) {
  const std::size_t n = diag.size();
  if (n == 0 || rhs.size() != n || lower.size() + 1 != n || upper.size() + 1 != n)
    throw std::invalid_argument("thomas_solve: inconsistent sizes");
  std::vector<double> cp(n - 1), dp(n), u(n);
  double den = diag[0];
  if (den == 0.0) throw NumericalError("tridiagonal pivot vanished", "thomas");
  if (n > 1) cp[0] = upper[0] / den;
  dp[0] = rhs[0] / den;
  for (std::size_t i = 1; i < n; ++i) {
    den = diag[i] - lower[i - 1] * cp[i - 1];
    if (den == 0.0) throw NumericalError("tridiagonal pivot vanished", "thomas");
    if (i < n - 1) cp[i] = upper[i] / den;
    dp[i] = (rhs[i] - lower[i - 1] * dp[i - 1]) / den;
  }
  u[n - 1] = dp[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) u[i] = dp[i] - cp[i] * u[i + 1];
  return u;
}

int cg_solve(const ApplyFn& apply, std::span<const double> b, std::span<double> x, double rel_tol,
             int max_iter) {
  const std::size_t n = b.size();
  if (x.size() != n) throw std::invalid_argument("cg_solve: size mismatch");
  double bnorm2 = 0.0;
  for (const double v : b) bnorm2 += v * v;
  if (bnorm2 == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return 0;
  }
  const double tol2 = rel_tol * rel_tol * bnorm2;

  std::vector<double> r(n), pvec(n), ap(n);
  apply(x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  double rs = 0.0;
  for (const double v : r) rs += v * v;
  pvec.assign(r.begin(), r.end());
  for (int it = 0; it < max_iter; ++it) {
    if (rs <= tol2) return it;
    apply(pvec, ap);
    double pap = 0.0;
    for (std::size_t i = 0; i < n; ++i) pap += pvec[i] * ap[i];
    const double alpha = rs / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * pvec[i];
      r[i] -= alpha * ap[i];
    }
    double rs_new = 0.0;
    for (const double v : r) rs_new += v * v;
    const double beta = rs_new / rs;
    for (std::size_t i = 0; i < n; ++i) pvec[i] = r[i] + beta * pvec[i];
    rs = rs_new;
  }
  if (rs <= tol2) return max_iter;
  throw ConvergenceError("conjugate gradient budget exhausted", std::sqrt(rs));
}

}  // namespace detail

}  // namespace pmnn
