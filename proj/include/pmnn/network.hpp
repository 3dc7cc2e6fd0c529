#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pmnn {

enum class Activation { Tanh };

/// Dense feed-forward architecture: input_dim -> width x hidden_layers -> 1.
struct NetworkSpec {
  int input_dim = 1;
  int hidden_layers = 5;
  int width = 20;
  Activation activation = Activation::Tanh;
};

/// All weights (row-major within a layer, layers in order) followed by all
/// biases (layers in order).
struct NetworkParams {
  NetworkSpec spec;
  std::vector<double> flat;
};

std::size_t param_count(const NetworkSpec& spec);

/// Glorot-scaled uniform weights, zero biases. The same (spec, seed) pair
/// always yields bit-identical parameters.
NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Network output with first and second derivatives with respect to the
/// tracked input coordinates (pure derivatives only, no mixed terms).
struct JetValue {
  double value = 0.0;
  std::array<double, 2> d1{};
  std::array<double, 2> d2{};
  int tracked = 0;
};

double forward(const NetworkParams& params, std::span<const double> input);

/// Exact input derivatives by truncated-Taylor (jet) propagation through
/// every layer: each neuron carries (value, d/dx_i, d2/dx_i2) and the tanh
/// chain rule is applied in closed form. At most 2 coordinates may be
/// tracked.
JetValue forward_jet(const NetworkParams& params, std::span<const double> input,
                     std::span<const int> tracked);

/// Binary snapshot: "PMNN" magic, version, dimensions, little-endian doubles.
void save_params(const NetworkParams& params, const std::string& path);
NetworkParams load_params(const std::string& path);

namespace detail {

/// Activation selector. Identity exists for tests only: it makes the whole
/// network affine, so jet components have closed-form expected values.
enum class ActKind { Tanh, Identity };

int layer_in(const NetworkSpec& s, int l);
int layer_out(const NetworkSpec& s, int l);
std::size_t weight_offset(const NetworkSpec& s, int l);
std::size_t bias_offset(const NetworkSpec& s, int l);

/// Doubles needed to cache one evaluation's per-layer state for the backward
/// pass, with m tracked coordinates.
std::size_t cache_size(const NetworkSpec& s, int m);

/// Forward jet propagation. `out` receives 1+2m values: value, first
/// derivatives, second derivatives. `cache` may be null when no backward pass
/// will follow.
void eval_jet(const NetworkSpec& s, ActKind act, const double* flat, const double* input,
              const int* tracked, int m, double* out, double* cache);

struct BackwardScratch {
  std::vector<double> hbar, zbar;
};

/// Reverse pass of eval_jet: accumulates d(seeds . out)/d(flat) into gflat.
/// `seeds` holds the adjoint of each out component (length 1+2m) and `cache`
/// must come from eval_jet on the same inputs.
void backward_jet(const NetworkSpec& s, ActKind act, const double* flat, const double* input,
                  const int* tracked, int m, const double* cache, const double* seeds,
                  double* gflat, BackwardScratch& scratch);

}  // namespace detail

}  // namespace pmnn
