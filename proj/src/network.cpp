#include "pmnn/network.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <stdexcept>

#include "pmnn/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "parameter snapshots assume a little-endian host");

namespace pmnn {

namespace detail {

int layer_in(const NetworkSpec& s, int l) { return l == 0 ? s.input_dim : s.width; }
int layer_out(const NetworkSpec& s, int l) { return l == s.hidden_layers ? 1 : s.width; }

std::size_t weight_offset(const NetworkSpec& s, int l) {
  std::size_t off = 0;
  for (int j = 0; j < l; ++j) off += std::size_t(layer_out(s, j)) * layer_in(s, j);
  return off;
}

std::size_t bias_offset(const NetworkSpec& s, int l) {
  std::size_t off = weight_offset(s, s.hidden_layers + 1);  // all weights
  for (int j = 0; j < l; ++j) off += layer_out(s, j);
  return off;
}

std::size_t cache_size(const NetworkSpec& s, int m) {
  return std::size_t(s.hidden_layers) * s.width * (1 + 4 * m);
}

namespace {

// Cache blocks per hidden layer: post-activation jets a (value, 1st, 2nd)
// followed by pre-activation jets z (1st, 2nd). The value of z is not stored;
// tanh'(z) and tanh''(z) are recovered from the stored tanh(z).
struct CacheMap {
  const NetworkSpec& s;
  int m;
  std::size_t stride() const { return std::size_t(s.width) * (1 + 4 * m); }
  std::size_t a_v(int l) const { return l * stride(); }
  std::size_t a_d1(int l, int i) const { return l * stride() + std::size_t(1 + i) * s.width; }
  std::size_t a_d2(int l, int i) const { return l * stride() + std::size_t(1 + m + i) * s.width; }
  std::size_t z_d1(int l, int i) const {
    return l * stride() + std::size_t(1 + 2 * m + i) * s.width;
  }
  std::size_t z_d2(int l, int i) const {
    return l * stride() + std::size_t(1 + 3 * m + i) * s.width;
  }
};

void check_finite(double v, const char* tag) {
  if (!std::isfinite(v)) throw NumericalError("non-finite network value", tag);
}

}  // namespace

void eval_jet(const NetworkSpec& s, ActKind act, const double* flat, const double* input,
              const int* tracked, int m, double* out, double* cache) {
  const int w = s.width, h = s.hidden_layers;
  const int comps = 1 + 2 * m;
  const int maxd = w > s.input_dim ? w : s.input_dim;
  thread_local std::vector<double> cur_buf, nxt_buf;
  cur_buf.assign(std::size_t(comps) * maxd, 0.0);
  nxt_buf.assign(std::size_t(comps) * maxd, 0.0);
  double* cur = cur_buf.data();
  double* nxt = nxt_buf.data();
  const CacheMap map{s, m};

  for (int i = 0; i < s.input_dim; ++i) cur[i] = input[i];
  for (int i = 0; i < m; ++i) cur[std::size_t(1 + i) * maxd + tracked[i]] = 1.0;

  int in = s.input_dim;
  for (int l = 0; l <= h; ++l) {
    const int outd = layer_out(s, l);
    const double* W = flat + weight_offset(s, l);
    const double* b = flat + bias_offset(s, l);
    for (int c = 0; c < comps; ++c) {
      const double* src = cur + std::size_t(c) * maxd;
      double* dst = nxt + std::size_t(c) * maxd;
      for (int o = 0; o < outd; ++o) {
        double acc = c == 0 ? b[o] : 0.0;
        const double* row = W + std::size_t(o) * in;
        for (int k = 0; k < in; ++k) acc += row[k] * src[k];
        dst[o] = acc;
      }
    }
    if (l == h) break;
    // activation with exact first/second derivative chain
    for (int o = 0; o < outd; ++o) {
      const double zv = nxt[o];
      const double T = act == ActKind::Tanh ? std::tanh(zv) : zv;
      const double D1 = act == ActKind::Tanh ? 1.0 - T * T : 1.0;
      const double D2 = act == ActKind::Tanh ? -2.0 * T * D1 : 0.0;
      if (cache) cache[map.a_v(l) + o] = T;
      for (int i = 0; i < m; ++i) {
        const double zf = nxt[std::size_t(1 + i) * maxd + o];
        const double zs = nxt[std::size_t(1 + m + i) * maxd + o];
        if (cache) {
          cache[map.z_d1(l, i) + o] = zf;
          cache[map.z_d2(l, i) + o] = zs;
        }
        const double af = D1 * zf;
        const double as = D2 * zf * zf + D1 * zs;
        nxt[std::size_t(1 + i) * maxd + o] = af;
        nxt[std::size_t(1 + m + i) * maxd + o] = as;
        if (cache) {
          cache[map.a_d1(l, i) + o] = af;
          cache[map.a_d2(l, i) + o] = as;
        }
      }
      nxt[o] = T;
    }
    std::swap(cur, nxt);
    in = w;
  }
  out[0] = nxt[0];
  check_finite(out[0], "network-eval");
  for (int i = 0; i < m; ++i) {
    out[1 + i] = nxt[std::size_t(1 + i) * maxd];
    out[1 + m + i] = nxt[std::size_t(1 + m + i) * maxd];
    check_finite(out[1 + i], "network-eval");
    check_finite(out[1 + m + i], "network-eval");
  }
}

void backward_jet(const NetworkSpec& s, ActKind act, const double* flat, const double* input,
                  const int* tracked, int m, const double* cache, const double* seeds,
                  double* gflat, BackwardScratch& scratch) {
  const int w = s.width, h = s.hidden_layers;
  const int comps = 1 + 2 * m;
  const CacheMap map{s, m};
  scratch.hbar.assign(std::size_t(comps) * w, 0.0);
  scratch.zbar.assign(std::size_t(comps) * w, 0.0);
  double* hbar = scratch.hbar.data();
  double* zbar = scratch.zbar.data();

  // output layer: linear 1 x w fed by the last hidden activations
  {
    const double* W = flat + weight_offset(s, h);
    double* gW = gflat + weight_offset(s, h);
    double* gb = gflat + bias_offset(s, h);
    const double* A = cache + map.a_v(h - 1);
    for (int j = 0; j < w; ++j) gW[j] += seeds[0] * A[j];
    for (int i = 0; i < m; ++i) {
      const double* Af = cache + map.a_d1(h - 1, i);
      const double* As = cache + map.a_d2(h - 1, i);
      for (int j = 0; j < w; ++j) gW[j] += seeds[1 + i] * Af[j] + seeds[1 + m + i] * As[j];
    }
    gb[0] += seeds[0];
    for (int c = 0; c < comps; ++c)
      for (int j = 0; j < w; ++j) hbar[std::size_t(c) * w + j] = W[j] * seeds[c];
  }

  for (int l = h - 1; l >= 0; --l) {
    // activation backward: hbar (post-activation adjoint) -> zbar
    for (int j = 0; j < w; ++j) {
      const double T = cache[map.a_v(l) + j];
      const double D1 = act == ActKind::Tanh ? 1.0 - T * T : 1.0;
      const double D2 = act == ActKind::Tanh ? -2.0 * T * D1 : 0.0;
      const double D2p = act == ActKind::Tanh ? -2.0 * D1 * (1.0 - 3.0 * T * T) : 0.0;
      double zv = hbar[j] * D1;
      for (int i = 0; i < m; ++i) {
        const double hf = hbar[std::size_t(1 + i) * w + j];
        const double hs = hbar[std::size_t(1 + m + i) * w + j];
        const double zf = cache[map.z_d1(l, i) + j];
        const double zs = cache[map.z_d2(l, i) + j];
        zv += hf * D2 * zf + hs * (D2p * zf * zf + D2 * zs);
        zbar[std::size_t(1 + i) * w + j] = hf * D1 + hs * 2.0 * D2 * zf;
        zbar[std::size_t(1 + m + i) * w + j] = hs * D1;
      }
      zbar[j] = zv;
    }

    const int in = layer_in(s, l);
    const double* W = flat + weight_offset(s, l);
    double* gW = gflat + weight_offset(s, l);
    double* gb = gflat + bias_offset(s, l);
    if (l > 0) {
      const double* Av = cache + map.a_v(l - 1);
      for (int j = 0; j < w; ++j) {
        double* row = gW + std::size_t(j) * in;
        const double zv = zbar[j];
        for (int k = 0; k < in; ++k) row[k] += zv * Av[k];
        gb[j] += zv;
      }
      for (int i = 0; i < m; ++i) {
        const double* Af = cache + map.a_d1(l - 1, i);
        const double* As = cache + map.a_d2(l - 1, i);
        for (int j = 0; j < w; ++j) {
          double* row = gW + std::size_t(j) * in;
          const double zf = zbar[std::size_t(1 + i) * w + j];
          const double zs = zbar[std::size_t(1 + m + i) * w + j];
          for (int k = 0; k < in; ++k) row[k] += zf * Af[k] + zs * As[k];
        }
      }
      for (int c = 0; c < comps; ++c) {
        double* hb = hbar + std::size_t(c) * w;
        const double* zb = zbar + std::size_t(c) * w;
        for (int k = 0; k < in; ++k) {
          double acc = 0.0;
          for (int j = 0; j < w; ++j) acc += W[std::size_t(j) * in + k] * zb[j];
          hb[k] = acc;
        }
      }
    } else {
      // first layer: the input jet is (input, one-hot, zero)
      for (int j = 0; j < w; ++j) {
        double* row = gW + std::size_t(j) * in;
        const double zv = zbar[j];
        for (int k = 0; k < in; ++k) row[k] += zv * input[k];
        for (int i = 0; i < m; ++i) row[tracked[i]] += zbar[std::size_t(1 + i) * w + j];
        gb[j] += zv;
      }
    }
  }
}

}  // namespace detail

std::size_t param_count(const NetworkSpec& s) {
  return detail::bias_offset(s, s.hidden_layers) + detail::layer_out(s, s.hidden_layers);
}

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  if (spec.input_dim < 1 || spec.hidden_layers < 1 || spec.width < 1)
    throw std::invalid_argument("network spec dimensions must be positive");
  NetworkParams p{spec, std::vector<double>(param_count(spec), 0.0)};
  std::mt19937_64 gen(seed);
  std::size_t idx = 0;
  for (int l = 0; l <= spec.hidden_layers; ++l) {
    const int in = detail::layer_in(spec, l), out = detail::layer_out(spec, l);
    const double scale = std::sqrt(6.0 / (in + out));
    for (int k = 0; k < in * out; ++k) {
      const double u = double(gen() >> 11) * 0x1.0p-53;  // uniform in [0,1)
      p.flat[idx++] = (2.0 * u - 1.0) * scale;
    }
  }
  return p;
}

namespace {

void check_input(const NetworkParams& p, std::span<const double> input) {
  if (static_cast<int>(input.size()) != p.spec.input_dim)
    throw std::invalid_argument("input length does not match the network input dimension");
  if (p.flat.size() != param_count(p.spec))
    throw std::invalid_argument("parameter vector length does not match the network spec");
}

}  // namespace

double forward(const NetworkParams& params, std::span<const double> input) {
  check_input(params, input);
  double out;
  detail::eval_jet(params.spec, detail::ActKind::Tanh, params.flat.data(), input.data(), nullptr,
                   0, &out, nullptr);
  return out;
}

JetValue forward_jet(const NetworkParams& params, std::span<const double> input,
                     std::span<const int> tracked) {
  check_input(params, input);
  const int m = static_cast<int>(tracked.size());
  if (m > 2) throw std::invalid_argument("at most 2 input coordinates may be tracked");
  for (int i = 0; i < m; ++i) {
    if (tracked[i] < 0 || tracked[i] >= params.spec.input_dim)
      throw std::invalid_argument("tracked index out of range");
    for (int j = 0; j < i; ++j)
      if (tracked[i] == tracked[j]) throw std::invalid_argument("tracked indices must be distinct");
  }
  double out[5];
  detail::eval_jet(params.spec, detail::ActKind::Tanh, params.flat.data(), input.data(),
                   tracked.data(), m, out, nullptr);
  JetValue jet;
  jet.value = out[0];
  jet.tracked = m;
  for (int i = 0; i < m; ++i) {
    jet.d1[i] = out[1 + i];
    jet.d2[i] = out[1 + m + i];
  }
  return jet;
}

namespace {
constexpr std::uint32_t kSnapshotVersion = 1;
}

void save_params(const NetworkParams& params, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  const std::uint32_t head[3] = {static_cast<std::uint32_t>(params.spec.input_dim),
                                 static_cast<std::uint32_t>(params.spec.hidden_layers),
                                 static_cast<std::uint32_t>(params.spec.width)};
  bool ok = std::fwrite("PMNN", 1, 4, f) == 4;
  ok = ok && std::fwrite(&kSnapshotVersion, sizeof kSnapshotVersion, 1, f) == 1;
  ok = ok && std::fwrite(head, sizeof head[0], 3, f) == 3;
  ok = ok && std::fwrite(params.flat.data(), sizeof(double), params.flat.size(), f) ==
                 params.flat.size();
  ok = (std::fclose(f) == 0) && ok;
  if (!ok) throw std::runtime_error("short write: " + path);
}

NetworkParams load_params(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  char magic[4];
  std::uint32_t version = 0, head[3] = {0, 0, 0};
  bool ok = std::fread(magic, 1, 4, f) == 4 && std::memcmp(magic, "PMNN", 4) == 0;
  ok = ok && std::fread(&version, sizeof version, 1, f) == 1 && version == kSnapshotVersion;
  ok = ok && std::fread(head, sizeof head[0], 3, f) == 3;
  if (!ok) {
    std::fclose(f);
    throw std::runtime_error("not a parameter snapshot: " + path);
  }
  NetworkSpec spec{static_cast<int>(head[0]), static_cast<int>(head[1]),
                   static_cast<int>(head[2]), Activation::Tanh};
  NetworkParams p{spec, std::vector<double>(param_count(spec))};
  const bool read_ok = std::fread(p.flat.data(), sizeof(double), p.flat.size(), f) ==
                       p.flat.size();
  std::fclose(f);
  if (!read_ok) throw std::runtime_error("truncated parameter snapshot: " + path);
  for (double v : p.flat)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite parameter in snapshot: " + path);
  return p;
}

}  // namespace pmnn
