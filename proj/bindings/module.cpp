#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmnn/caputo.hpp"
#include "pmnn/fdm.hpp"
#include "pmnn/problems.hpp"
#include "pmnn/solver.hpp"

namespace py = pybind11;

namespace {

pmnn::Scheme parse_scheme(const std::string& s) {
  if (s == "l1") return pmnn::Scheme::L1;
  if (s == "l2sigma") return pmnn::Scheme::L2Sigma;
  throw std::invalid_argument("unknown scheme: " + s);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Caputo discretization kernels and the network benchmark driver";

  m.def("gamma_fn", &pmnn::gamma_fn, py::arg("x"));

  m.def(
      "l1_weights",
      [](double alpha, int count) {
        return pmnn::l1_weights(pmnn::FractionalOrder(alpha), count).a;
      },
      py::arg("alpha"), py::arg("count"));

  m.def(
      "l2sigma_weight_row",
      [](double alpha, int n) {
        const auto row = pmnn::l2sigma_weight_row(pmnn::FractionalOrder(alpha), n);
        py::dict d;
        d["sigma"] = row.sigma;
        d["c"] = row.c;
        return d;
      },
      py::arg("alpha"), py::arg("n"));

  m.def(
      "caputo_l1",
      [](const std::vector<double>& samples, double alpha, double tau) {
        return pmnn::caputo_l1(samples, pmnn::FractionalOrder(alpha), tau);
      },
      py::arg("samples"), py::arg("alpha"), py::arg("tau"));

  m.def(
      "caputo_l2sigma",
      [](const std::vector<double>& samples, double alpha, double tau) {
        return pmnn::caputo_l2sigma(samples, pmnn::FractionalOrder(alpha), tau);
      },
      py::arg("samples"), py::arg("alpha"), py::arg("tau"));

  m.def(
      "caputo_power_oracle",
      [](double p, double alpha, double t) {
        return pmnn::caputo_power_oracle(p, pmnn::FractionalOrder(alpha), t);
      },
      py::arg("p"), py::arg("alpha"), py::arg("t"));

  m.def(
      "solve_json",
      [](int example, double alpha, const std::string& scheme, int nt, int nx,
         std::uint64_t seed, int hidden, int width, int max_iters) {
        const pmnn::FractionalIVP p = pmnn::example_by_id(example, alpha);
        pmnn::TrainOptions opt;
        opt.n_t = nt;
        opt.n_x = nx;
        opt.seed = seed;
        opt.net.hidden_layers = hidden;
        opt.net.width = width;
        opt.opt.max_iterations = max_iters;
        const auto [params, report] = pmnn::train(p, parse_scheme(scheme), opt);
        (void)params;
        return report.to_json();
      },
      py::arg("example"), py::arg("alpha") = 0.5, py::arg("scheme") = "l1", py::arg("nt") = 41,
      py::arg("nx") = 11, py::arg("seed") = std::uint64_t(42), py::arg("hidden") = 5,
      py::arg("width") = 20, py::arg("max_iters") = 5000,
      py::call_guard<py::gil_scoped_release>());

  m.def(
      "fdm_solve",
      [](int example, double alpha, const std::string& scheme, int nt, int nx) {
        const pmnn::FractionalIVP p = pmnn::example_by_id(example, alpha);
        if (nt < 2) throw std::invalid_argument("nt must be at least 2 nodes");
        pmnn::GridSolution sol;
        if (p.spatial_dim == 0) {
          sol = scheme == "l2sigma" ? pmnn::fdm_solve_fode_l2sigma(p, nt - 1)
                                    : pmnn::fdm_solve_fode(p, nt - 1);
        } else {
          if (scheme != "l1")
            throw std::invalid_argument("grid solver supports only the l1 scheme for PDEs");
          sol = p.spatial_dim == 1 ? pmnn::fdm_solve_1d(p, nt - 1, nx)
                                   : pmnn::fdm_solve_2d(p, nt - 1, nx);
        }
        py::dict d;
        d["times"] = sol.times;
        d["axes"] = sol.axes;
        d["values"] = sol.values;
        return d;
      },
      py::arg("example"), py::arg("alpha") = 0.5, py::arg("scheme") = "l1", py::arg("nt") = 41,
      py::arg("nx") = 11);
}
