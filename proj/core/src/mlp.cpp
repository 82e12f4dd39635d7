#include "edgeiq/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace edgeiq {

namespace {

struct LayerDims {
  int rows;
  int cols;  // includes the bias column
};

LayerDims dims(const Topology& t, std::size_t layer) {
  return {t.layer_sizes[layer + 1], t.layer_sizes[layer] + 1};
}

/// Forward/backward scratch space reused across examples.
struct Workspace {
  std::vector<std::vector<double>> activations;  // a[0] = input
  std::vector<std::vector<double>> deltas;       // dJ/dz per layer output

  explicit Workspace(const Topology& t) {
    activations.resize(t.layer_sizes.size());
    deltas.resize(t.weight_layers());
    for (std::size_t l = 0; l < t.layer_sizes.size(); ++l) {
      activations[l].resize(t.layer_sizes[l]);
    }
    for (std::size_t l = 0; l < t.weight_layers(); ++l) {
      deltas[l].resize(t.layer_sizes[l + 1]);
    }
  }
};

double forward_pass(const MlpNetwork& net, std::span<const double> input,
                    Workspace& ws) {
  const auto& t = net.topology();
  std::copy(input.begin(), input.end(), ws.activations[0].begin());
  for (std::size_t l = 0; l < t.weight_layers(); ++l) {
    const auto d = dims(t, l);
    const auto& w = net.weights()[l];
    const auto& in = ws.activations[l];
    auto& out = ws.activations[l + 1];
    const bool last = l + 1 == t.weight_layers();
    for (int r = 0; r < d.rows; ++r) {
      const double* row = w.data() + static_cast<std::size_t>(r) * d.cols;
      double z = row[d.cols - 1];  // bias input fixed at 1
      for (int c = 0; c + 1 < d.cols; ++c) {
        z += row[c] * in[c];
      }
      out[r] = last ? z : tan_sigmoid(z);
    }
  }
  return ws.activations.back()[0];
}

/// Accumulates the gradient contribution of one example whose output error
/// derivative dJ/dy_hat is `upstream`.
void backward_pass(const MlpNetwork& net, Workspace& ws, double upstream,
                   std::vector<std::vector<double>>& grads) {
  const auto& t = net.topology();
  const std::size_t layers = t.weight_layers();

  ws.deltas[layers - 1][0] = upstream;  // identity output unit
  for (std::size_t l = layers - 1; l-- > 0;) {
    const auto d = dims(t, l + 1);
    const auto& w = net.weights()[l + 1];
    auto& delta = ws.deltas[l];
    const auto& next_delta = ws.deltas[l + 1];
    const auto& a = ws.activations[l + 1];
    for (int c = 0; c + 1 < d.cols; ++c) {
      double sum = 0.0;
      for (int r = 0; r < d.rows; ++r) {
        sum += w[static_cast<std::size_t>(r) * d.cols + c] * next_delta[r];
      }
      delta[c] = sum * (1.0 - a[c] * a[c]);  // tanh'
    }
  }

  for (std::size_t l = 0; l < layers; ++l) {
    const auto d = dims(t, l);
    const auto& in = ws.activations[l];
    const auto& delta = ws.deltas[l];
    auto& g = grads[l];
    for (int r = 0; r < d.rows; ++r) {
      double* grow = g.data() + static_cast<std::size_t>(r) * d.cols;
      const double dr = delta[r];
      for (int c = 0; c + 1 < d.cols; ++c) {
        grow[c] += dr * in[c];
      }
      grow[d.cols - 1] += dr;
    }
  }
}

std::vector<std::vector<double>> zero_like(const MlpNetwork& net) {
  std::vector<std::vector<double>> out;
  out.reserve(net.weights().size());
  for (const auto& w : net.weights()) out.emplace_back(w.size(), 0.0);
  return out;
}

/// Normalized input matrix plus targets, flattened for the training loop.
struct Prepared {
  std::size_t count = 0;
  std::size_t width = 0;
  std::vector<double> inputs;  // row-major count x width
  std::vector<double> targets;
};

Prepared prepare(const Dataset& data, int input_size) {
  Prepared p;
  p.count = data.examples.size();
  p.width = static_cast<std::size_t>(input_size);
  p.inputs.resize(p.count * p.width);
  p.targets.resize(p.count);
  for (std::size_t i = 0; i < p.count; ++i) {
    const auto& ex = data.examples[i];
    if (ex.x.size() != p.width) {
      throw std::invalid_argument(
          "example input width " + std::to_string(ex.x.size()) +
          " does not match the network input size " + std::to_string(p.width));
    }
    const auto normalized = data.normalization.apply(ex.x);
    std::copy(normalized.begin(), normalized.end(),
              p.inputs.begin() + static_cast<std::ptrdiff_t>(i * p.width));
    p.targets[i] = ex.y;
  }
  return p;
}

void validate_training_config(const TrainingConfig& cfg) {
  if (cfg.epochs <= 0) throw std::invalid_argument("epochs must be positive");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw std::invalid_argument("learning rate must be finite and >= 0");
  }
  if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in (0, 1)");
  }
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (cfg.batch_size < 0) throw std::invalid_argument("batch size must be >= 0");
}

}  // namespace

std::string Topology::name() const {
  std::string out;
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(layer_sizes[i]);
  }
  return out;
}

Topology Topology::parse(const std::string& name) {
  Topology t;
  std::istringstream in(name);
  std::string part;
  while (std::getline(in, part, '-')) {
    t.layer_sizes.push_back(std::stoi(part));
  }
  validate_topology(t);
  return t;
}

void validate_topology(const Topology& t) {
  if (t.layer_sizes.size() < 3) {
    throw std::invalid_argument("topology needs at least one hidden layer");
  }
  for (int s : t.layer_sizes) {
    if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
  }
  if (t.layer_sizes.back() != 1) {
    throw std::invalid_argument("output layer must have exactly one neuron");
  }
}

double tan_sigmoid(double x) {
  return -1.0 + 2.0 / (1.0 + std::exp(-2.0 * x));
}

Normalization Normalization::fit(std::span<const LabeledExample> examples) {
  if (examples.empty()) {
    throw std::invalid_argument("cannot fit normalization on no examples");
  }
  const std::size_t width = examples.front().x.size();
  Normalization norm;
  norm.min.assign(width, std::numeric_limits<double>::infinity());
  norm.max.assign(width, -std::numeric_limits<double>::infinity());
  for (const auto& ex : examples) {
    if (ex.x.size() != width) {
      throw std::invalid_argument("examples disagree on input width");
    }
    for (std::size_t i = 0; i < width; ++i) {
      norm.min[i] = std::min(norm.min[i], ex.x[i]);
      norm.max[i] = std::max(norm.max[i], ex.x[i]);
    }
  }
  return norm;
}

std::vector<double> Normalization::apply(std::span<const double> raw) const {
  if (raw.size() != min.size()) {
    throw std::invalid_argument("input width does not match normalization");
  }
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double span = max[i] - min[i];
    out[i] = span > 0.0 ? (raw[i] - min[i]) / span : 0.0;
  }
  return out;
}

Dataset Dataset::from_examples(std::vector<LabeledExample> examples) {
  Dataset d;
  d.normalization = Normalization::fit(examples);
  d.examples = std::move(examples);
  return d;
}

MlpNetwork MlpNetwork::zeros(const Topology& topology) {
  validate_topology(topology);
  MlpNetwork net;
  net.topology_ = topology;
  net.weights_.reserve(topology.weight_layers());
  for (std::size_t l = 0; l < topology.weight_layers(); ++l) {
    const auto d = dims(topology, l);
    net.weights_.emplace_back(
        static_cast<std::size_t>(d.rows) * d.cols, 0.0);
  }
  return net;
}

MlpNetwork MlpNetwork::glorot(const Topology& topology, std::uint64_t seed) {
  MlpNetwork net = zeros(topology);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < topology.weight_layers(); ++l) {
    const auto d = dims(topology, l);
    const int fan_in = topology.layer_sizes[l];
    const int fan_out = topology.layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    auto& w = net.weights_[l];
    for (int r = 0; r < d.rows; ++r) {
      for (int c = 0; c + 1 < d.cols; ++c) {
        w[static_cast<std::size_t>(r) * d.cols + c] = dist(rng);
      }
      // bias column stays zero
    }
  }
  return net;
}

double MlpNetwork::forward(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != topology_.input_size()) {
    throw std::invalid_argument("input size does not match the topology");
  }
  Workspace ws(topology_);
  return forward_pass(*this, input, ws);
}

double predict(const MlpNetwork& net, const Normalization& norm,
               std::span<const double> raw_input) {
  return net.forward(norm.apply(raw_input));
}

TrainResult train(const MlpNetwork& initial, const Dataset& data,
                  const TrainingConfig& cfg) {
  validate_training_config(cfg);
  if (data.examples.empty()) {
    throw std::invalid_argument("cannot train on an empty dataset");
  }

  MlpNetwork net = initial;
  const auto& t = net.topology();
  const Prepared p = prepare(data, t.input_size());

  const std::size_t batch =
      cfg.batch_size == 0 ? p.count
                          : std::min<std::size_t>(cfg.batch_size, p.count);

  Workspace ws(t);
  auto grads = zero_like(net);
  auto adam_m = zero_like(net);
  auto adam_v = zero_like(net);
  std::vector<std::size_t> order(p.count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(cfg.seed);

  std::vector<double> trace;
  trace.reserve(cfg.epochs);
  std::uint64_t step = 0;

  auto gate_reached = [&] {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < p.count; ++i) {
      const std::span<const double> input(p.inputs.data() + i * p.width,
                                          p.width);
      if (std::abs(forward_pass(net, input, ws) - p.targets[i]) < cfg.tol) {
        ++hits;
      }
    }
    return static_cast<double>(hits) / static_cast<double>(p.count) >=
           cfg.stop_at_ta;
  };
  if (cfg.stop_at_ta > 0.0 && gate_reached()) {
    return {std::move(net), std::move(trace)};
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < p.count) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
    }

    double epoch_sq_sum = 0.0;
    for (std::size_t begin = 0; begin < p.count; begin += batch) {
      const std::size_t end = std::min(begin + batch, p.count);
      const auto batch_count = static_cast<double>(end - begin);

      for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t idx = order[k];
        const std::span<const double> input(p.inputs.data() + idx * p.width,
                                            p.width);
        const double y_hat = forward_pass(net, input, ws);
        const double err = y_hat - p.targets[idx];
        epoch_sq_sum += err * err;
        backward_pass(net, ws, 2.0 * err / batch_count, grads);
      }

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t l = 0; l < grads.size(); ++l) {
        auto& w = net.weights()[l];
        auto& m = adam_m[l];
        auto& v = adam_v[l];
        const auto& g = grads[l];
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
          v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
          const double m_hat = m[i] / bc1;
          const double v_hat = v[i] / bc2;
          w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
      }
    }

    const double epoch_loss = epoch_sq_sum / static_cast<double>(p.count);
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError(
          "training diverged: non-finite loss at epoch " +
              std::to_string(epoch),
          epoch);
    }
    trace.push_back(epoch_loss);

    if (cfg.stop_at_ta > 0.0 && gate_reached()) break;
  }

  return {std::move(net), std::move(trace)};
}

double training_accuracy(const MlpNetwork& net, const Dataset& data,
                         double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (data.examples.empty()) {
    throw std::invalid_argument("training accuracy over an empty dataset");
  }
  const Prepared p = prepare(data, net.topology().input_size());
  Workspace ws(net.topology());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < p.count; ++i) {
    const std::span<const double> input(p.inputs.data() + i * p.width, p.width);
    const double y_hat = forward_pass(net, input, ws);
    if (std::abs(y_hat - p.targets[i]) < tol) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(p.count);
}

MlpNetwork average_weights(std::span<const MlpNetwork> nets) {
  if (nets.empty()) {
    throw std::invalid_argument("cannot average an empty network list");
  }
  const auto& topology = nets.front().topology();
  for (const auto& net : nets) {
    if (net.topology() != topology) {
      throw std::invalid_argument("averaged networks must share one topology");
    }
  }
  MlpNetwork out = MlpNetwork::zeros(topology);
  const double scale = 1.0 / static_cast<double>(nets.size());
  for (std::size_t l = 0; l < out.weights().size(); ++l) {
    auto& acc = out.weights()[l];
    for (const auto& net : nets) {
      const auto& w = net.weights()[l];
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w[i];
    }
    for (auto& v : acc) v *= scale;
  }
  return out;
}

double gradient_check(const MlpNetwork& net, const Dataset& data) {
  if (data.examples.empty()) {
    throw std::invalid_argument("gradient check needs examples");
  }
  const Prepared p = prepare(data, net.topology().input_size());
  Workspace ws(net.topology());

  auto full_loss = [&](const MlpNetwork& n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p.count; ++i) {
      const std::span<const double> input(p.inputs.data() + i * p.width,
                                          p.width);
      const double err = forward_pass(n, input, ws) - p.targets[i];
      sum += err * err;
    }
    return sum / static_cast<double>(p.count);
  };

  // Analytic gradient of the full-batch MSE.
  auto grads = zero_like(net);
  MlpNetwork work = net;
  for (std::size_t i = 0; i < p.count; ++i) {
    const std::span<const double> input(p.inputs.data() + i * p.width, p.width);
    const double err = forward_pass(work, input, ws) - p.targets[i];
    backward_pass(work, ws, 2.0 * err / static_cast<double>(p.count), grads);
  }

  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t l = 0; l < grads.size(); ++l) {
    auto& w = work.weights()[l];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double hi = full_loss(work);
      w[i] = saved - h;
      const double lo = full_loss(work);
      w[i] = saved;
      const double numeric = (hi - lo) / (2.0 * h);
      const double analytic = grads[l][i];
      const double denom = std::max(1e-8, std::abs(numeric) + std::abs(analytic));
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

void save_weights(std::ostream& out, const MlpNetwork& net) {
  out << "edgeiq-mlp v1\n";
  out << "topology";
  for (int s : net.topology().layer_sizes) out << ' ' << s;
  out << '\n';
  char buf[40];
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    const auto d = dims(net.topology(), l);
    out << "layer " << l << ' ' << d.rows << ' ' << d.cols << '\n';
    const auto& w = net.weights()[l];
    for (int r = 0; r < d.rows; ++r) {
      for (int c = 0; c < d.cols; ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g",
                      w[static_cast<std::size_t>(r) * d.cols + c]);
        out << buf << (c + 1 == d.cols ? '\n' : ' ');
      }
    }
  }
}

MlpNetwork load_weights(std::istream& in) {
  std::string magic, version;
  in >> magic >> version;
  if (magic != "edgeiq-mlp" || version != "v1") {
    throw std::invalid_argument("not an edgeiq-mlp v1 weight file");
  }
  std::string key;
  in >> key;
  if (key != "topology") throw std::invalid_argument("missing topology line");
  std::string rest;
  std::getline(in, rest);
  Topology t;
  std::istringstream ts(rest);
  int size;
  while (ts >> size) t.layer_sizes.push_back(size);
  validate_topology(t);

  MlpNetwork net = MlpNetwork::zeros(t);
  for (std::size_t l = 0; l < t.weight_layers(); ++l) {
    std::size_t index;
    int rows, cols;
    in >> key >> index >> rows >> cols;
    const auto d = dims(t, l);
    if (key != "layer" || index != l || rows != d.rows || cols != d.cols) {
      throw std::invalid_argument("weight file layer header mismatch");
    }
    auto& w = net.weights()[l];
    for (auto& value : w) {
      if (!(in >> value)) {
        throw std::invalid_argument("weight file truncated");
      }
    }
  }
  return net;
}

std::string serialize_weights(const MlpNetwork& net) {
  std::ostringstream out;
  save_weights(out, net);
  return out.str();
}

MlpNetwork parse_weights(const std::string& text) {
  std::istringstream in(text);
  return load_weights(in);
}

}  // namespace edgeiq
