#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgeiq/labeling.hpp"

namespace edgeiq {

/// Layer widths, input first, single output neuron last.
struct Topology {
  std::vector<int> layer_sizes;

  Topology() = default;
  Topology(std::initializer_list<int> sizes) : layer_sizes(sizes) {}
  explicit Topology(std::vector<int> sizes) : layer_sizes(std::move(sizes)) {}

  int input_size() const { return layer_sizes.front(); }
  std::size_t weight_layers() const { return layer_sizes.size() - 1; }
  bool operator==(const Topology&) const = default;

  /// "a-b-...-1" notation used by the CLI and reports.
  std::string name() const;
  static Topology parse(const std::string& name);
};

void validate_topology(const Topology& t);

/// Hidden-layer activation: g1(x) = -1 + 2 / (1 + exp(-2x)), the
/// hyperbolic tangent written in its logistic form.
double tan_sigmoid(double x);

/// Per-feature min-max scaling recorded from a training split.
struct Normalization {
  std::vector<double> min;
  std::vector<double> max;

  static Normalization fit(std::span<const LabeledExample> examples);
  std::vector<double> apply(std::span<const double> raw) const;
  bool operator==(const Normalization&) const = default;
};

/// Examples plus the normalization their trainer should use.
struct Dataset {
  std::vector<LabeledExample> examples;
  Normalization normalization;

  /// Fits the normalization on the examples themselves (training splits).
  static Dataset from_examples(std::vector<LabeledExample> examples);
};

/// Feed-forward network with tan-sigmoid hidden layers and an identity
/// output unit. Weight matrix j has shape sizes[j+1] x (sizes[j] + 1);
/// the last column of each row is the bias.
class MlpNetwork {
 public:
  MlpNetwork() = default;

  static MlpNetwork zeros(const Topology& topology);
  /// Glorot-style uniform init scaled by fan-in/fan-out, biases zero.
  static MlpNetwork glorot(const Topology& topology, std::uint64_t seed);

  const Topology& topology() const { return topology_; }
  std::vector<std::vector<double>>& weights() { return weights_; }
  const std::vector<std::vector<double>>& weights() const { return weights_; }

  /// Evaluates the network on an already-normalized input vector.
  double forward(std::span<const double> input) const;

  bool operator==(const MlpNetwork&) const = default;

 private:
  Topology topology_;
  std::vector<std::vector<double>> weights_;  // row-major per layer
};

/// Evaluates on a raw input, normalizing first.
double predict(const MlpNetwork& net, const Normalization& norm,
               std::span<const double> raw_input);

struct TrainingConfig {
  double learning_rate = 0.01;
  int epochs = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double tol = 0.01;    // output tolerance used for training accuracy
  int batch_size = 32;  // 0 runs full-batch epochs
  std::uint64_t seed = 0;
  /// When positive, training accuracy is evaluated after every epoch and
  /// the run stops at the first epoch whose TA reaches this value. The
  /// loss trace then ends at the stopping epoch.
  double stop_at_ta = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_ = -1;
};

struct TrainResult {
  MlpNetwork network;
  std::vector<double> loss_trace;  // one mean-squared-error entry per epoch
};

/// Adam on the MSE cost via backpropagation. Deterministic for a fixed
/// (initial weights, data, config): the same seed reproduces bit-identical
/// weights. Throws TrainingError when the loss stops being finite.
TrainResult train(const MlpNetwork& initial, const Dataset& data,
                  const TrainingConfig& cfg);

/// TA = (1/m) * sum(1{|y_hat - y| < tol}); the comparison is strict.
double training_accuracy(const MlpNetwork& net, const Dataset& data,
                         double tol);

/// Entrywise arithmetic mean of identically shaped networks.
MlpNetwork average_weights(std::span<const MlpNetwork> nets);

/// Max relative disagreement between backpropagated gradients and central
/// finite differences (step 1e-5) over every weight entry.
double gradient_check(const MlpNetwork& net, const Dataset& data);

// Versioned flat-text weight serialization.
void save_weights(std::ostream& out, const MlpNetwork& net);
MlpNetwork load_weights(std::istream& in);
std::string serialize_weights(const MlpNetwork& net);
MlpNetwork parse_weights(const std::string& text);

}  // namespace edgeiq
