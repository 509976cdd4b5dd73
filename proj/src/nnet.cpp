#include "gshare/nnet.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gshare {

ConvFilterBank::ConvFilterBank(std::size_t h, std::size_t d, std::size_t num_filters)
    : height(h), dim(d), weights(num_filters, h * d), bias(num_filters, 0.0) {
  if (h == 0 || d == 0 || num_filters == 0) {
    throw std::invalid_argument("ConvFilterBank: height, dim and filter count must be >= 1");
  }
}

void ConvFilterBank::randomize(Rng& rng) {
  const double fan_in = static_cast<double>(height * dim);
  const double fan_out = static_cast<double>(num_filters());
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& w : weights.values()) w = rng.uniform(-bound, bound);
  std::fill(bias.begin(), bias.end(), 0.0);
}

Matrix conv_forward(const Matrix& input, const ConvFilterBank& bank, Activation act,
                    std::size_t windows) {
  const std::size_t l = input.rows();
  const std::size_t h = bank.height;
  if (input.cols() != bank.dim) {
    throw std::invalid_argument("conv_forward: input dim " + std::to_string(input.cols()) +
                                " != filter dim " + std::to_string(bank.dim));
  }
  if (l < h) {
    throw std::invalid_argument("conv_forward: sequence length " + std::to_string(l) +
                                " shorter than filter height " + std::to_string(h));
  }
  const std::size_t all = l - h + 1;
  if (windows == 0 || windows > all) windows = all;
  const std::size_t span = h * bank.dim;
  Matrix maps(bank.num_filters(), windows);
  for (std::size_t f = 0; f < bank.num_filters(); ++f) {
    const auto w = bank.weights.row(f);
    for (std::size_t t = 0; t < windows; ++t) {
      // Window rows t..t+h-1 are contiguous in row-major storage.
      const double* x = input.values().data() + t * bank.dim;
      double acc = 0.0;
      for (std::size_t k = 0; k < span; ++k) acc += w[k] * x[k];
      acc += bank.bias[f];
      maps(f, t) = (act == Activation::relu && acc < 0.0) ? 0.0 : acc;
    }
  }
  return maps;
}

void conv_backward(const Matrix& input, const ConvFilterBank& bank, const Matrix& maps,
                   const Matrix& grad_maps, Activation act, ConvFilterBank& grad_bank,
                   Matrix& grad_input) {
  if (!maps.same_shape(grad_maps) || maps.rows() != bank.num_filters() ||
      !grad_input.same_shape(input) || !grad_bank.weights.same_shape(bank.weights)) {
    throw std::invalid_argument("conv_backward: shape mismatch");
  }
  const std::size_t span = bank.height * bank.dim;
  const std::size_t windows = maps.cols();
  if (windows + bank.height - 1 > input.rows()) {
    throw std::invalid_argument("conv_backward: more windows than the input supports");
  }
  for (std::size_t f = 0; f < bank.num_filters(); ++f) {
    const auto w = bank.weights.row(f);
    auto gw = grad_bank.weights.row(f);
    for (std::size_t t = 0; t < windows; ++t) {
      double g = grad_maps(f, t);
      if (act == Activation::relu && !(maps(f, t) > 0.0)) g = 0.0;
      if (g == 0.0) continue;
      const double* x = input.values().data() + t * bank.dim;
      double* gx = grad_input.values().data() + t * bank.dim;
      for (std::size_t k = 0; k < span; ++k) {
        gw[k] += g * x[k];
        gx[k] += g * w[k];
      }
      grad_bank.bias[f] += g;
    }
  }
}

PoolResult maxpool1(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("maxpool1: empty input");
  PoolResult r{v[0], 0};
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > r.value) r = {v[i], i};
  }
  return r;
}

std::vector<double> pool_backward(double upstream, std::size_t index, std::size_t length) {
  if (index >= length) throw std::invalid_argument("pool_backward: index out of range");
  std::vector<double> g(length, 0.0);
  g[index] = upstream;
  return g;
}

std::vector<double> softmax(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double z : logits) mx = std::max(mx, z);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    p[c] = std::exp(logits[c] - mx);
    sum += p[c];
  }
  for (auto& v : p) v /= sum;
  return p;
}

SoftmaxResult softmax_xent(std::span<const double> logits, int label) {
  if (logits.size() < 2) throw std::invalid_argument("softmax_xent: need at least 2 classes");
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw std::invalid_argument("softmax_xent: label " + std::to_string(label) +
                                " out of range");
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double z : logits) mx = std::max(mx, z);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double log_z = mx + std::log(sum);
  SoftmaxResult r;
  r.probs.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) r.probs[c] = std::exp(logits[c] - log_z);
  r.loss = log_z - logits[static_cast<std::size_t>(label)];
  return r;
}

std::vector<double> xent_backward(std::span<const double> probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
    throw std::invalid_argument("xent_backward: label out of range");
  }
  std::vector<double> g(probs.begin(), probs.end());
  g[static_cast<std::size_t>(label)] -= 1.0;
  return g;
}

std::vector<double> dropout(std::span<double> values, double rate, Mode mode,
                            std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  }
  std::vector<double> mask(values.size(), 1.0);
  if (mode == Mode::eval || rate == 0.0) return mask;
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < values.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    values[i] *= mask[i];
  }
  return mask;
}

void adadelta_update(std::span<double> param, std::span<const double> grad,
                     AdadeltaState& state, const AdadeltaConfig& cfg, std::size_t offset) {
  if (param.size() != grad.size() || offset + param.size() > state.size()) {
    throw std::invalid_argument("adadelta_update: shape mismatch");
  }
  const double rho = cfg.rho;
  const double eps = cfg.epsilon;
  double* eg = state.sq_grad.data() + offset;
  double* ex = state.sq_update.data() + offset;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    if (!std::isfinite(g)) {
      throw std::domain_error("adadelta_update: non-finite gradient at index " +
                              std::to_string(offset + i));
    }
    eg[i] = rho * eg[i] + (1.0 - rho) * g * g;
    const double dx = -(std::sqrt(ex[i] + eps) / std::sqrt(eg[i] + eps)) * g;
    ex[i] = rho * ex[i] + (1.0 - rho) * dx * dx;
    param[i] += dx;
  }
}

}  // namespace gshare
