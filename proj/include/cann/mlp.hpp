#pragma once

// Dense feed-forward networks shared by the material property network and the
// spatial network: evaluation, analytic input Jacobian, batched training with
// RPROP- or Adam, and a versioned text serialization.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cann::mlp {

enum class Activation { tanh, logistic, linear };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

class MlpNet {
public:
  MlpNet() = default;

  // layer_sizes includes the input width; activations has one entry per weight layer.
  MlpNet(std::vector<std::size_t> layer_sizes, std::vector<Activation> activations);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  const std::vector<Activation>& activations() const { return acts_; }
  std::size_t n_layers() const { return acts_.size(); }
  std::size_t n_inputs() const { return sizes_.empty() ? 0 : sizes_.front(); }
  std::size_t n_outputs() const { return sizes_.empty() ? 0 : sizes_.back(); }
  std::size_t n_params() const { return params_.size(); }

  // All weights and biases, layer by layer: W_l (out x in, row-major) then b_l.
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> biases(std::size_t layer);
  std::span<const double> biases(std::size_t layer) const;

  std::vector<double> forward(std::span<const double> input) const;
  void forward(std::span<const double> input, std::span<double> output) const;

  // Row-major n_outputs x n_inputs matrix d(output)/d(input).
  std::vector<double> jacobian(std::span<const double> input) const;

  // Evaluates many samples at once through the SIMD kernels. `inputs` is
  // row-major (one sample per row); the result is row-major as well.
  std::vector<double> forward_batch(std::span<const double> inputs, std::size_t n_samples) const;

  // Weights ~ U[-range, range]; biases zero.
  void init_uniform(double range, std::uint64_t seed);
  // Weights ~ N(0, 2 / fan_in); biases zero.
  void init_he(std::uint64_t seed);

  friend bool operator==(const MlpNet&, const MlpNet&) = default;

private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }

  std::vector<std::size_t> sizes_;
  std::vector<Activation> acts_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Input/target pairs, both row-major.
struct Dataset {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::vector<double> inputs;
  std::vector<double> targets;

  Dataset() = default;
  Dataset(std::size_t in, std::size_t out) : n_in(in), n_out(out) {}

  std::size_t size() const { return n_in == 0 ? 0 : inputs.size() / n_in; }
  void add(std::span<const double> input, std::span<const double> target);
};

enum class Optimizer { rprop, adam };

struct TrainConfig {
  Optimizer optimizer = Optimizer::rprop;
  int epochs = 50;
  int iterations = 1;
  double learning_rate = 0.001;
  // 0 means full batch.
  std::size_t batch_size = 0;
  std::uint64_t shuffle_seed = 0;
  // false keeps every bias at its initial value.
  bool train_biases = true;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  double rprop_eta_plus = 1.2;
  double rprop_eta_minus = 0.5;
  double rprop_delta0 = 0.1;
  double rprop_delta_min = 1e-6;
  double rprop_delta_max = 50.0;

  void validate() const;
};

struct TrainResult {
  // One entry per epoch: mean over samples of 0.5 * ||y - t||^2, measured on
  // the forward pass that produced that epoch's gradient.
  std::vector<double> loss_trace;
};

// Holds optimizer state so that training can be resumed in several calls
// (the "iterations" of a protocol) without resetting moments or step sizes.
class Trainer {
public:
  Trainer(MlpNet& net, const Dataset& data, TrainConfig cfg);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // Runs `epochs` epochs and appends to the loss trace.
  void run(int epochs, std::vector<double>& loss_trace);

private:
  struct State;
  std::unique_ptr<State> state_;
};

// iterations x epochs training. A config with zero epochs leaves the net untouched.
TrainResult train(MlpNet& net, const Dataset& data, const TrainConfig& cfg);

void write(std::ostream& out, const MlpNet& net);
MlpNet read(std::istream& in);

} // namespace cann::mlp
