#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gshare/matrix.hpp"
#include "gshare/random.hpp"

namespace gshare {

enum class Activation { identity, relu };

/// Filters of one height h over d-dimensional rows. Filter f occupies row f of
/// `weights`, laid out as h consecutive d-vectors.
struct ConvFilterBank {
  std::size_t height = 0;
  std::size_t dim = 0;
  Matrix weights;            // num_filters x (height * dim)
  std::vector<double> bias;  // num_filters

  ConvFilterBank() = default;
  ConvFilterBank(std::size_t height, std::size_t dim, std::size_t num_filters);

  std::size_t num_filters() const { return weights.rows(); }
  /// Glorot-uniform weights, zero bias.
  void randomize(Rng& rng);

  friend bool operator==(const ConvFilterBank&, const ConvFilterBank&) = default;
};

/// Feature maps, one row per filter: v_t = act(<filter, input[t..t+h)> + bias).
/// `windows` limits the evaluated start positions; 0 means all l - h + 1.
Matrix conv_forward(const Matrix& input, const ConvFilterBank& bank,
                    Activation act = Activation::relu, std::size_t windows = 0);

/// Accumulates parameter gradients into `grad_bank` and input gradients into
/// `grad_input` (same shape as `input`). `maps` are the forward outputs.
void conv_backward(const Matrix& input, const ConvFilterBank& bank, const Matrix& maps,
                   const Matrix& grad_maps, Activation act, ConvFilterBank& grad_bank,
                   Matrix& grad_input);

struct PoolResult {
  double value = 0.0;
  std::size_t index = 0;
};

/// Max over `v`; lowest index wins ties.
PoolResult maxpool1(std::span<const double> v);

/// Upstream gradient routed to `index`, zero elsewhere.
std::vector<double> pool_backward(double upstream, std::size_t index, std::size_t length);

struct SoftmaxResult {
  double loss = 0.0;
  std::vector<double> probs;
};

SoftmaxResult softmax_xent(std::span<const double> logits, int label);
std::vector<double> softmax(std::span<const double> logits);

/// d loss / d logits = probs - onehot(label).
std::vector<double> xent_backward(std::span<const double> probs, int label);

enum class Mode { train, eval };

/// Inverted dropout in place. Returns the per-element multiplier (0 or
/// 1 / (1 - rate)) for the backward pass; all ones in eval mode.
std::vector<double> dropout(std::span<double> values, double rate, Mode mode,
                            std::uint64_t seed);

struct AdadeltaConfig {
  double rho = 0.95;
  double epsilon = 1e-6;

  friend bool operator==(const AdadeltaConfig&, const AdadeltaConfig&) = default;
};

/// Running averages E[g^2] and E[dx^2] for one parameter tensor.
struct AdadeltaState {
  std::vector<double> sq_grad;
  std::vector<double> sq_update;

  AdadeltaState() = default;
  explicit AdadeltaState(std::size_t n) : sq_grad(n, 0.0), sq_update(n, 0.0) {}
  std::size_t size() const { return sq_grad.size(); }

  friend bool operator==(const AdadeltaState&, const AdadeltaState&) = default;
};

/// One Adadelta step over `param`. `offset` selects the slice of `state` that
/// lines up with `param` (used for row-wise updates).
void adadelta_update(std::span<double> param, std::span<const double> grad,
                     AdadeltaState& state, const AdadeltaConfig& cfg, std::size_t offset = 0);

}  // namespace gshare
