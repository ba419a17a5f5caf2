#include "cann/mlp.hpp"

#include "cann/error.hpp"
#include "cann/numfmt.hpp"
#include "cann/simd/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace cann::mlp {

std::string_view to_string(Activation a) {
  switch (a) {
  case Activation::tanh:
    return "tanh";
  case Activation::logistic:
    return "logistic";
  case Activation::linear:
    return "linear";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh")
    return Activation::tanh;
  if (name == "logistic")
    return Activation::logistic;
  if (name == "linear")
    return Activation::linear;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

namespace {

inline double activate(Activation a, double z) {
  switch (a) {
  case Activation::tanh:
    return std::tanh(z);
  case Activation::logistic:
    return 1.0 / (1.0 + std::exp(-z));
  case Activation::linear:
    break;
  }
  return z;
}

// Derivative written in terms of the activated value.
inline double activate_grad(Activation a, double y) {
  switch (a) {
  case Activation::tanh:
    return 1.0 - y * y;
  case Activation::logistic:
    return y * (1.0 - y);
  case Activation::linear:
    break;
  }
  return 1.0;
}

constexpr std::size_t kStackWidth = 64;

} // namespace

MlpNet::MlpNet(std::vector<std::size_t> layer_sizes, std::vector<Activation> activations)
    : sizes_(std::move(layer_sizes)), acts_(std::move(activations)) {
  if (sizes_.size() < 2)
    throw ConfigError("network needs at least an input and an output layer");
  if (acts_.size() != sizes_.size() - 1)
    throw ConfigError("activation count must equal the number of weight layers");
  if (std::any_of(sizes_.begin(), sizes_.end(), [](std::size_t s) { return s == 0; }))
    throw ConfigError("layer sizes must be positive");
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(off);
    off += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(off, 0.0);
}

std::span<double> MlpNet::weights(std::size_t layer) {
  return std::span<double>(params_).subspan(weight_offset(layer), sizes_[layer] * sizes_[layer + 1]);
}
std::span<const double> MlpNet::weights(std::size_t layer) const {
  return std::span<const double>(params_).subspan(weight_offset(layer),
                                                  sizes_[layer] * sizes_[layer + 1]);
}
std::span<double> MlpNet::biases(std::size_t layer) {
  return std::span<double>(params_).subspan(bias_offset(layer), sizes_[layer + 1]);
}
std::span<const double> MlpNet::biases(std::size_t layer) const {
  return std::span<const double>(params_).subspan(bias_offset(layer), sizes_[layer + 1]);
}

void MlpNet::forward(std::span<const double> input, std::span<double> output) const {
  if (input.size() != n_inputs() || output.size() != n_outputs())
    throw ConfigError("forward: dimension mismatch (got " + std::to_string(input.size()) +
                      " inputs, expected " + std::to_string(n_inputs()) + ")");
  const std::size_t widest = *std::max_element(sizes_.begin(), sizes_.end());
  std::array<double, kStackWidth> sa{}, sb{};
  std::vector<double> ha, hb;
  double* cur = sa.data();
  double* nxt = sb.data();
  if (widest > kStackWidth) {
    ha.resize(widest);
    hb.resize(widest);
    cur = ha.data();
    nxt = hb.data();
  }
  std::copy(input.begin(), input.end(), cur);
  for (std::size_t l = 0; l < acts_.size(); ++l) {
    const std::size_t n_in = sizes_[l];
    const std::size_t n_out = sizes_[l + 1];
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    for (std::size_t o = 0; o < n_out; ++o) {
      double z = b[o];
      for (std::size_t i = 0; i < n_in; ++i)
        z += w[o * n_in + i] * cur[i];
      nxt[o] = activate(acts_[l], z);
    }
    std::swap(cur, nxt);
  }
  std::copy(cur, cur + n_outputs(), output.begin());
}

std::vector<double> MlpNet::forward(std::span<const double> input) const {
  std::vector<double> out(n_outputs());
  forward(input, out);
  return out;
}

std::vector<double> MlpNet::jacobian(std::span<const double> input) const {
  if (input.size() != n_inputs())
    throw ConfigError("jacobian: dimension mismatch");
  const std::size_t n0 = n_inputs();
  // Forward-mode: carry d(activation)/d(input) as a (width x n0) block.
  std::vector<double> act(input.begin(), input.end());
  std::vector<double> tang(n0 * n0, 0.0);
  for (std::size_t i = 0; i < n0; ++i)
    tang[i * n0 + i] = 1.0;
  std::vector<double> next_act, next_tang;
  for (std::size_t l = 0; l < acts_.size(); ++l) {
    const std::size_t n_in = sizes_[l];
    const std::size_t n_out = sizes_[l + 1];
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    next_act.assign(n_out, 0.0);
    next_tang.assign(n_out * n0, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      double z = b[o];
      for (std::size_t i = 0; i < n_in; ++i)
        z += w[o * n_in + i] * act[i];
      const double y = activate(acts_[l], z);
      const double g = activate_grad(acts_[l], y);
      next_act[o] = y;
      for (std::size_t i = 0; i < n_in; ++i) {
        const double wi = w[o * n_in + i] * g;
        for (std::size_t j = 0; j < n0; ++j)
          next_tang[o * n0 + j] += wi * tang[i * n0 + j];
      }
    }
    act.swap(next_act);
    tang.swap(next_tang);
  }
  return tang;
}

namespace {

void apply_activation(const simd::KernelTable& k, Activation a, double* x, std::size_t n) {
  switch (a) {
  case Activation::tanh:
    k.tanh_inplace(x, n);
    break;
  case Activation::logistic:
    k.logistic_inplace(x, n);
    break;
  case Activation::linear:
    break;
  }
}

void apply_activation_backward(const simd::KernelTable& k, Activation a, const double* y,
                               double* delta, std::size_t n) {
  switch (a) {
  case Activation::tanh:
    k.tanh_backward(y, delta, n);
    break;
  case Activation::logistic:
    k.logistic_backward(y, delta, n);
    break;
  case Activation::linear:
    break;
  }
}

// Row-major (rows x cols) into feature-major (cols x rows).
std::vector<double> transpose(std::span<const double> src, std::size_t rows, std::size_t cols) {
  std::vector<double> dst(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      dst[c * rows + r] = src[r * cols + c];
  return dst;
}

} // namespace

std::vector<double> MlpNet::forward_batch(std::span<const double> inputs,
                                          std::size_t n_samples) const {
  if (inputs.size() != n_samples * n_inputs())
    throw ConfigError("forward_batch: dimension mismatch");
  const auto& k = simd::active();
  std::vector<double> cur = transpose(inputs, n_samples, n_inputs());
  std::vector<double> nxt;
  for (std::size_t l = 0; l < acts_.size(); ++l) {
    nxt.resize(sizes_[l + 1] * n_samples);
    k.affine_forward(cur.data(), n_samples, sizes_[l], params_.data() + weight_offset(l),
                     params_.data() + bias_offset(l), sizes_[l + 1], nxt.data());
    apply_activation(k, acts_[l], nxt.data(), nxt.size());
    cur.swap(nxt);
  }
  return transpose(cur, n_outputs(), n_samples);
}

void MlpNet::init_uniform(double range, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  for (std::size_t l = 0; l < acts_.size(); ++l) {
    for (double& w : weights(l))
      w = dist(rng);
    std::fill(biases(l).begin(), biases(l).end(), 0.0);
  }
}

void MlpNet::init_he(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < acts_.size(); ++l) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(sizes_[l])));
    for (double& w : weights(l))
      w = dist(rng);
    std::fill(biases(l).begin(), biases(l).end(), 0.0);
  }
}

void Dataset::add(std::span<const double> input, std::span<const double> target) {
  if (input.size() != n_in || target.size() != n_out)
    throw ConfigError("dataset: sample dimension mismatch");
  inputs.insert(inputs.end(), input.begin(), input.end());
  targets.insert(targets.end(), target.begin(), target.end());
}

void TrainConfig::validate() const {
  if (epochs < 1 || iterations < 1)
    throw ConfigError("training needs epochs >= 1 and iterations >= 1");
  if (optimizer == Optimizer::adam && !(learning_rate > 0.0))
    throw ConfigError("adam learning rate must be positive");
  if (optimizer == Optimizer::rprop && batch_size != 0)
    throw ConfigError("rprop is a full-batch method; batch_size must be 0");
}

struct Trainer::State {
  MlpNet& net;
  TrainConfig cfg;
  std::size_t n_samples;
  std::size_t n_in;
  std::size_t n_out;
  std::vector<double> x; // feature-major inputs
  std::vector<double> t; // feature-major targets

  std::vector<std::vector<double>> acts;   // per layer, feature-major
  std::vector<std::vector<double>> deltas; // per layer, feature-major
  std::vector<double> grad;
  std::vector<double> diff;

  // Adam
  std::vector<double> m, v;
  long step = 0;
  // RPROP
  std::vector<double> delta_step;
  std::vector<double> prev_grad;

  std::mt19937_64 shuffle_rng;
  std::vector<std::size_t> order;

  State(MlpNet& n, const Dataset& data, TrainConfig c)
      : net(n), cfg(c), n_samples(data.size()), n_in(data.n_in), n_out(data.n_out),
        shuffle_rng(c.shuffle_seed) {
    if (n_samples == 0)
      throw ConfigError("training dataset is empty");
    if (n_in != net.n_inputs() || n_out != net.n_outputs())
      throw ConfigError("training dataset dimensions do not match the network");
    x = transpose(data.inputs, n_samples, n_in);
    t = transpose(data.targets, n_samples, n_out);
    grad.assign(net.n_params(), 0.0);
    m.assign(net.n_params(), 0.0);
    v.assign(net.n_params(), 0.0);
    delta_step.assign(net.n_params(), cfg.rprop_delta0);
    prev_grad.assign(net.n_params(), 0.0);
    order.resize(n_samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
  }

  // Forward + backward on a feature-major batch; accumulates the mean-loss
  // gradient into `grad` and returns the mean loss.
  double gradient(const double* bx, const double* bt, std::size_t rows) {
    const auto& k = simd::active();
    const std::size_t L = net.n_layers();
    const auto& sizes = net.layer_sizes();
    const auto& act_kinds = net.activations();
    acts.resize(L);
    deltas.resize(L);
    const double* in = bx;
    for (std::size_t l = 0; l < L; ++l) {
      acts[l].resize(sizes[l + 1] * rows);
      k.affine_forward(in, rows, sizes[l], net.weights(l).data(), net.biases(l).data(),
                       sizes[l + 1], acts[l].data());
      apply_activation(k, act_kinds[l], acts[l].data(), acts[l].size());
      in = acts[l].data();
    }
    auto& top = deltas[L - 1];
    top.resize(n_out * rows);
    const double sumsq = k.diff_sumsq(acts[L - 1].data(), bt, top.data(), top.size());
    const double inv_n = 1.0 / static_cast<double>(rows);
    for (double& d : top)
      d *= inv_n;

    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t l = L; l-- > 0;) {
      apply_activation_backward(k, act_kinds[l], acts[l].data(), deltas[l].data(),
                                deltas[l].size());
      const double* a_prev = l == 0 ? bx : acts[l - 1].data();
      double* gw = grad.data() + (net.weights(l).data() - net.params().data());
      double* gb = grad.data() + (net.biases(l).data() - net.params().data());
      k.affine_backward_params(deltas[l].data(), a_prev, rows, sizes[l + 1], sizes[l], gw, gb);
      if (l > 0) {
        deltas[l - 1].resize(sizes[l] * rows);
        k.affine_backward_input(deltas[l].data(), rows, sizes[l + 1], net.weights(l).data(),
                                sizes[l], deltas[l - 1].data());
      }
    }
    if (!cfg.train_biases)
      for (std::size_t l = 0; l < L; ++l) {
        double* gb = grad.data() + (net.biases(l).data() - net.params().data());
        std::fill(gb, gb + sizes[l + 1], 0.0);
      }
    return 0.5 * sumsq * inv_n;
  }

  void adam_update() {
    ++step;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
    simd::active().adam_step(net.params().data(), grad.data(), m.data(), v.data(), grad.size(),
                             cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, bc1,
                             bc2);
  }

  // RPROP- (no weight backtracking).
  void rprop_update() {
    auto p = net.params();
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double g = grad[i];
      const double s = g * prev_grad[i];
      if (s > 0.0)
        delta_step[i] = std::min(delta_step[i] * cfg.rprop_eta_plus, cfg.rprop_delta_max);
      else if (s < 0.0)
        delta_step[i] = std::max(delta_step[i] * cfg.rprop_eta_minus, cfg.rprop_delta_min);
      if (g > 0.0)
        p[i] -= delta_step[i];
      else if (g < 0.0)
        p[i] += delta_step[i];
      prev_grad[i] = g;
    }
  }

  double epoch() {
    const bool full = cfg.batch_size == 0 || cfg.batch_size >= n_samples;
    if (full) {
      const double loss = gradient(x.data(), t.data(), n_samples);
      check(loss);
      if (cfg.optimizer == Optimizer::adam)
        adam_update();
      else
        rprop_update();
      return loss;
    }
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::vector<double> bx, bt;
    double weighted = 0.0;
    for (std::size_t start = 0; start < n_samples; start += cfg.batch_size) {
      const std::size_t rows = std::min(cfg.batch_size, n_samples - start);
      bx.assign(n_in * rows, 0.0);
      bt.assign(n_out * rows, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t s = order[start + r];
        for (std::size_t c = 0; c < n_in; ++c)
          bx[c * rows + r] = x[c * n_samples + s];
        for (std::size_t c = 0; c < n_out; ++c)
          bt[c * rows + r] = t[c * n_samples + s];
      }
      const double loss = gradient(bx.data(), bt.data(), rows);
      check(loss);
      adam_update();
      weighted += loss * static_cast<double>(rows);
    }
    return weighted / static_cast<double>(n_samples);
  }

  void check(double loss) const {
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "training diverged: loss is " << loss << " after " << step << " optimizer steps";
      throw NumericError(os.str());
    }
  }
};

Trainer::Trainer(MlpNet& net, const Dataset& data, TrainConfig cfg)
    : state_(std::make_unique<State>(net, data, cfg)) {}

Trainer::~Trainer() = default;

void Trainer::run(int epochs, std::vector<double>& loss_trace) {
  for (int e = 0; e < epochs; ++e)
    loss_trace.push_back(state_->epoch());
}

TrainResult train(MlpNet& net, const Dataset& data, const TrainConfig& cfg) {
  TrainResult result;
  if (cfg.epochs <= 0 || cfg.iterations <= 0)
    return result;
  cfg.validate();
  Trainer trainer(net, data, cfg);
  result.loss_trace.reserve(static_cast<std::size_t>(cfg.epochs) *
                            static_cast<std::size_t>(cfg.iterations));
  for (int it = 0; it < cfg.iterations; ++it)
    trainer.run(cfg.epochs, result.loss_trace);
  return result;
}

namespace {

constexpr std::string_view kMagic = "cann-mlp";
constexpr int kVersion = 1;

double number(const std::string& tok) {
  double v = 0.0;
  if (!parse_double(tok, v))
    throw ConfigError("network file: bad number '" + tok + "'");
  return v;
}

void expect(std::istream& in, std::string_view word) {
  std::string tok;
  if (!(in >> tok) || tok != word)
    throw ConfigError("network file: expected '" + std::string(word) + "', got '" + tok + "'");
}

} // namespace

void write(std::ostream& out, const MlpNet& net) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "sizes";
  for (std::size_t s : net.layer_sizes())
    out << ' ' << s;
  out << "\nactivations";
  for (Activation a : net.activations())
    out << ' ' << to_string(a);
  out << '\n';
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const std::size_t n_in = net.layer_sizes()[l];
    const std::size_t n_out = net.layer_sizes()[l + 1];
    out << "layer " << l << '\n';
    auto w = net.weights(l);
    for (std::size_t o = 0; o < n_out; ++o) {
      out << 'w';
      for (std::size_t i = 0; i < n_in; ++i)
        out << ' ' << fmt_double(w[o * n_in + i]);
      out << '\n';
    }
    out << 'b';
    for (double b : net.biases(l))
      out << ' ' << fmt_double(b);
    out << '\n';
  }
  out << "end\n";
}

MlpNet read(std::istream& in) {
  std::string tok;
  expect(in, kMagic);
  int version = 0;
  if (!(in >> version) || version != kVersion)
    throw ConfigError("network file: unsupported version " + std::to_string(version));

  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::istringstream sizes_line(line);
  sizes_line >> tok;
  if (tok != "sizes")
    throw ConfigError("network file: missing sizes line");
  std::vector<std::size_t> sizes;
  for (std::size_t s; sizes_line >> s;)
    sizes.push_back(s);

  std::getline(in, line);
  std::istringstream acts_line(line);
  acts_line >> tok;
  if (tok != "activations")
    throw ConfigError("network file: missing activations line");
  std::vector<Activation> acts;
  while (acts_line >> tok)
    acts.push_back(parse_activation(tok));

  MlpNet net(sizes, acts);
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    expect(in, "layer");
    std::size_t idx = 0;
    if (!(in >> idx) || idx != l)
      throw ConfigError("network file: layer index out of order");
    auto w = net.weights(l);
    const std::size_t n_in = sizes[l];
    for (std::size_t o = 0; o < sizes[l + 1]; ++o) {
      expect(in, "w");
      for (std::size_t i = 0; i < n_in; ++i) {
        if (!(in >> tok))
          throw ConfigError("network file: truncated weights");
        w[o * n_in + i] = number(tok);
      }
    }
    expect(in, "b");
    for (double& b : net.biases(l)) {
      if (!(in >> tok))
        throw ConfigError("network file: truncated biases");
      b = number(tok);
    }
  }
  expect(in, "end");
  return net;
}

} // namespace cann::mlp
