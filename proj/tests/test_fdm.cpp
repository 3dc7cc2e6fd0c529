#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "pmnn/errors.hpp"
#include "pmnn/fdm.hpp"
#include "pmnn/problems.hpp"
#include "test_util.hpp"

using namespace pmnn;

namespace {

double max_error(const GridSolution& sol, const FractionalIVP& p) {
  double worst = 0.0;
  const std::size_t ni = sol.axes.empty() ? 1 : sol.axes[0].size();
  const std::size_t nj = sol.axes.size() > 1 ? sol.axes[1].size() : 1;
  std::vector<double> sp;
  for (std::size_t n = 0; n < sol.times.size(); ++n)
    for (std::size_t i = 0; i < ni; ++i)
      for (std::size_t j = 0; j < nj; ++j) {
        sp.clear();
        if (!sol.axes.empty()) sp.push_back(sol.axes[0][i]);
        if (sol.axes.size() > 1) sp.push_back(sol.axes[1][j]);
        worst = std::max(worst,
                         std::abs(sol.at(n, i, j) - p.exact_solution(sp, sol.times[n])));
      }
  return worst;
}

double final_time_error(const GridSolution& sol, const FractionalIVP& p) {
  double worst = 0.0;
  const std::size_t n = sol.times.size() - 1;
  const std::size_t ni = sol.axes.empty() ? 1 : sol.axes[0].size();
  const std::size_t nj = sol.axes.size() > 1 ? sol.axes[1].size() : 1;
  std::vector<double> sp;
  for (std::size_t i = 0; i < ni; ++i)
    for (std::size_t j = 0; j < nj; ++j) {
      sp.clear();
      if (!sol.axes.empty()) sp.push_back(sol.axes[0][i]);
      if (sol.axes.size() > 1) sp.push_back(sol.axes[1][j]);
      worst = std::max(worst,
                       std::abs(sol.at(n, i, j) - p.exact_solution(sp, sol.times[n])));
    }
  return worst;
}

std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

}  // namespace

TEST_CASE("scalar stepping converges to the known solution") {
  const FractionalIVP p = example1(0.5);
  const GridSolution a = fdm_solve_fode(p, 1024);
  const GridSolution b = fdm_solve_fode(p, 2048);
  CHECK(a.times.size() == 1025);
  CHECK(a.values.size() == 1025);
  CHECK(a.axes.empty());
  CHECK(max_error(a, p) <= 5e-3);
  const double ea = final_time_error(a, p);
  const double eb = final_time_error(b, p);
  CHECK(eb < ea);
  CHECK(eb <= 0.6 * ea);

  const GridSolution s = fdm_solve_fode_l2sigma(p, 1024);
  CHECK(max_error(s, p) <= 1e-4);
  CHECK(final_time_error(s, p) < ea);
}

TEST_CASE("scalar stepping reproduces steady states exactly") {
  FractionalIVP p(FractionalOrder(0.5));
  p.operator_L = OperatorKind::NegIdentity;
  p.forcing = [](std::span<const double>, double) { return 1.0; };
  p.initial = [](std::span<const double>) { return 1.0; };
  for (const GridSolution& sol : {fdm_solve_fode(p, 32), fdm_solve_fode_l2sigma(p, 32)})
    for (const double v : sol.values) CHECK(std::abs(v - 1.0) <= 1e-14);

  p.forcing = [](std::span<const double>, double) { return 0.0; };
  p.initial = [](std::span<const double>) { return 0.0; };
  for (const GridSolution& sol : {fdm_solve_fode(p, 32), fdm_solve_fode_l2sigma(p, 32)})
    for (const double v : sol.values) CHECK(v == 0.0);
}

TEST_CASE("one-dimensional diffusion matches the closed form") {
  const FractionalIVP p = example2(0.5);
  const GridSolution sol = fdm_solve_1d(p, 512, 64);
  CHECK(sol.times.size() == 513);
  CHECK(sol.axes.size() == 1);
  CHECK(sol.axes[0].size() == 64);
  CHECK(sol.axes[0].front() == 0.0);
  CHECK(sol.axes[0].back() == 1.0);
  CHECK(max_error(sol, p) <= 5e-2);
  CHECK(final_time_error(sol, p) <= 5e-3);

  for (std::size_t i = 0; i < 64; ++i) {
    const double x = sol.axes[0][i];
    CHECK(sol.at(0, i) == p.initial(std::span(&x, 1)));
  }
  for (std::size_t n = 0; n < sol.times.size(); ++n) {
    const double lo = sol.axes[0].front(), hi = sol.axes[0].back();
    CHECK(sol.at(n, 0) == p.boundary(std::span(&lo, 1), sol.times[n]));
    CHECK(sol.at(n, 63) == p.boundary(std::span(&hi, 1), sol.times[n]));
  }

  const GridSolution coarse = fdm_solve_1d(p, 256, 64);
  CHECK(final_time_error(sol, p) < final_time_error(coarse, p));
}

TEST_CASE("two-dimensional diffusion matches the closed form") {
  const FractionalIVP p = example3(0.5);
  const GridSolution sol = fdm_solve_2d(p, 256, 33);
  CHECK(sol.times.size() == 257);
  CHECK(sol.axes.size() == 2);
  CHECK(final_time_error(sol, p) <= 1e-2);

  for (std::size_t i = 0; i < 33; ++i)
    for (std::size_t j = 0; j < 33; ++j) {
      const double xy[2] = {sol.axes[0][i], sol.axes[1][j]};
      CHECK(sol.at(0, i, j) == p.initial(xy));
    }
  const double t_end = sol.times.back();
  for (std::size_t j = 0; j < 33; ++j) {
    const double xy[2] = {0.0, sol.axes[1][j]};
    CHECK(sol.at(256, 0, j) == p.boundary(xy, t_end));
  }
}

TEST_CASE("a y-independent 2-d problem reduces to the 1-d solver") {
  const FractionalIVP line = example2(0.5);
  const GridSolution strip = fdm_solve_1d(line, 16, 9);

  // Dirichlet data taken from the 1-d discrete solution itself, so the exact
  // reduction is not polluted by the time-stepping error of either solver.
  FractionalIVP q(FractionalOrder(0.5));
  q.spatial_dim = 2;
  q.operator_L = OperatorKind::LaplacianXY;
  q.forcing = [](std::span<const double>, double) { return 0.0; };
  q.initial = [&](std::span<const double> sp) { return line.initial(sp.first(1)); };
  q.boundary = [&](std::span<const double> sp, double t) {
    const auto n = std::size_t(std::llround(t * 16.0));
    const auto i = std::size_t(std::llround(sp[0] * 8.0));
    return strip.at(n, i);
  };

  const GridSolution plane = fdm_solve_2d(q, 16, 9);
  for (std::size_t n = 0; n <= 16; ++n)
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j)
        CHECK(std::abs(plane.at(n, i, j) - strip.at(n, i)) <= 1e-10);
}

TEST_CASE("tridiagonal and conjugate-gradient kernels agree with dense elimination") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t n = 8;

  std::vector<double> lower(n - 1), diag(n), upper(n - 1), rhs(n);
  for (auto& v : lower) v = u(gen);
  for (auto& v : upper) v = u(gen);
  for (auto& v : rhs) v = u(gen);
  for (std::size_t i = 0; i < n; ++i) diag[i] = 4.0 + u(gen);
  std::vector<std::vector<double>> tri(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    tri[i][i] = diag[i];
    if (i > 0) tri[i][i - 1] = lower[i - 1];
    if (i + 1 < n) tri[i][i + 1] = upper[i];
  }
  const auto t_fast = detail::thomas_solve(lower, diag, upper, rhs);
  const auto t_ref = dense_solve(tri, rhs);
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(t_fast[i] - t_ref[i]) <= 1e-10);

  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (auto& row : m)
    for (auto& v : row) v = u(gen);
  std::vector<std::vector<double>> spd(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) spd[i][j] += m[k][i] * m[k][j];
      if (i == j) spd[i][j] += 8.0;
    }
  std::vector<double> b(n);
  for (auto& v : b) v = u(gen);
  const detail::ApplyFn apply = [&](std::span<const double> v, std::span<double> out) {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = 0.0;
      for (std::size_t j = 0; j < n; ++j) out[i] += spd[i][j] * v[j];
    }
  };
  std::vector<double> x(n, 0.0);
  const int iters = detail::cg_solve(apply, b, x, 1e-12, 800);
  CHECK(iters <= 800);
  const auto ref = dense_solve(spd, b);
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(x[i] - ref[i]) <= 1e-8);

  std::vector<double> x2(n, 0.0);
  CHECK_THROWS_AS((void)detail::cg_solve(apply, b, x2, 1e-12, 1), ConvergenceError);
  try {
    std::vector<double> x3(n, 0.0);
    detail::cg_solve(apply, b, x3, 1e-12, 1);
  } catch (const ConvergenceError& e) {
    CHECK(e.best_estimate() > 0.0);
  }

  std::vector<double> zero(n, 0.0), xz(n, 1.0);
  CHECK(detail::cg_solve(apply, zero, xz, 1e-12, 10) == 0);
  for (const double v : xz) CHECK(v == 0.0);
}

TEST_CASE("csv export writes one row per grid point and round-trips") {
  const FractionalIVP p = example1(0.5);
  const GridSolution sol = fdm_solve_fode(p, 2);
  std::ostringstream out;
  export_csv(sol, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,u");
  int rows = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    const double t = std::stod(line.substr(0, comma));
    const double v = std::stod(line.substr(comma + 1));
    CHECK(t == sol.times[rows]);
    CHECK(v == sol.values[rows]);
    ++rows;
  }
  CHECK(rows == 3);

  const GridSolution grid = fdm_solve_1d(example2(0.5), 1, 3);
  std::ostringstream out2;
  export_csv(grid, out2);
  std::istringstream in2(out2.str());
  std::getline(in2, line);
  CHECK(line == "t,x,u");
  int rows2 = 0;
  while (std::getline(in2, line)) ++rows2;
  CHECK(rows2 == 6);
}

TEST_CASE("grid solver input validation") {
  const FractionalIVP fode = example1(0.5);
  const FractionalIVP pde = example2(0.5);
  CHECK_THROWS_AS((void)fdm_solve_fode(pde, 8), std::invalid_argument);
  CHECK_THROWS_AS((void)fdm_solve_fode(fode, 0), std::invalid_argument);
  CHECK_THROWS_AS((void)fdm_solve_fode_l2sigma(pde, 8), std::invalid_argument);
  CHECK_THROWS_AS((void)fdm_solve_1d(fode, 8, 8), std::invalid_argument);
  CHECK_THROWS_AS((void)fdm_solve_1d(pde, 8, 2), std::invalid_argument);
  CHECK_THROWS_AS((void)fdm_solve_1d(pde, 0, 8), std::invalid_argument);
  CHECK_THROWS_AS((void)fdm_solve_2d(pde, 8, 8), std::invalid_argument);
  CHECK_THROWS_AS((void)fdm_solve_2d(example3(0.5), 8, 2), std::invalid_argument);
  CHECK_THROWS_AS((void)detail::thomas_solve({}, {}, {}, {}), std::invalid_argument);
}
