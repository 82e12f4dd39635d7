#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "edgeiq/frame.hpp"
#include "edgeiq/labeling.hpp"
#include "edgeiq/metrics.hpp"
#include "edgeiq/mlp.hpp"
#include "edgeiq/profile.hpp"

namespace edgeiq {

enum class Architecture { centralized, distributed };

/// Which channel a run estimates and how expected outputs are labeled.
/// The default is the temperature rule: mean of the node readings, valid
/// inside [26, 31] degrees C, clamped to the nearer bound otherwise.
struct TargetSpec {
  SensorId channel = SensorId::temperature;
  double tol = 0.01;  // estimate-labeling tolerance, target units
  OperatingRange operating_range{-20.0, 85.0};
  std::function<std::pair<double, int>(const std::vector<double>&)> labeler;
};

TargetSpec temperature_target();

/// Examples per acquisition period: the architecture collects 19
/// measurements per period, so each period contributes 19 fused examples.
inline constexpr int kExamplesPerPeriod = 19;

struct MethodConfig {
  Architecture architecture = Architecture::centralized;
  double t_ac = 10.0;  // acquisition period, seconds
  Topology topology{3, 6, 6, 1};
  int epochs = 500;
  double learning_rate = 0.01;
  int batch_size = 32;
  double ta_gate = 0.85;
  double fscore_gate = 0.9;
  double train_fraction = 0.7;
  std::size_t initial_examples = 6460;  // phase-1 dataset size
  int retrain_period = 10;   // multiples of t_ac between retraining cycles
  int retrain_batch = 0;     // new examples per cycle; 0 means 10 * N
  int retrain_iterations = 0;
  int retrain_epochs = 0;    // 0 means the main epoch count
  int max_rounds = 5;        // gate retries before the run fails
  double latency_ms = 0.0;
  bool sequential = false;   // distributed only: train node models serially
  std::uint64_t seed = 1;
  TargetSpec target = temperature_target();
};

struct RoundMetrics {
  double ta = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
  double accuracy = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  ConfusionMatrix cm;
};

/// One test-set example with its prediction, for plot data.
struct TraceRow {
  std::vector<double> x;
  double y = 0.0;
  double y_hat = 0.0;
};

struct PhaseTiming {
  std::string phase;
  double seconds = 0.0;
};

struct RunReport {
  Architecture architecture = Architecture::centralized;
  std::string topology_name;
  int epochs = 0;
  std::uint64_t seed = 0;

  bool success = false;
  std::string failure_reason;
  int rounds_used = 1;

  RoundMetrics final_metrics;               // held-out test split only
  std::vector<RoundMetrics> retrain_metrics;  // one entry per cycle
  std::vector<double> loss_trace;           // first training round
  std::vector<TraceRow> forecast_trace;     // global forecast on test data
  std::vector<std::vector<std::pair<double, double>>> local_forecasts;

  std::vector<PhaseTiming> phase_timings;   // volatile, wall-clock
  std::vector<double> node_busy_seconds;    // compute time per node
  double training_window_seconds = 0.0;     // phase-2/3 training span
  std::optional<TimingPair> timing;         // filled by measure_speedup
};

/// Five-phase centralized method: nodes acquire and publish frames, the
/// central node fuses, labels, splits, trains to the TA gate, tests against
/// the F-score gate, then runs periodic warm-started retraining cycles.
RunReport run_centralized(const MethodConfig& cfg,
                          const std::vector<ProfileSpec>& profiles);

/// Seven-phase distributed method: every node trains locally to the TA
/// gate, slaves ship weights and test sets to the master, the master
/// averages weights entrywise, tests the pooled split against the F-score
/// gate, broadcasts on success, and re-averages on every retraining cycle.
RunReport run_distributed(const MethodConfig& cfg,
                          const std::vector<ProfileSpec>& profiles);

/// Runs the distributed training workload serially and in parallel with the
/// same seed and returns the two wall times (processors = node count).
TimingPair measure_speedup(const MethodConfig& cfg,
                           const std::vector<ProfileSpec>& profiles);

/// Cumulative compute seconds per node (acquisition encoding, training and
/// testing; time blocked on the transports does not count).
std::vector<double> busy_time_report(const RunReport& report);

/// The labeled examples the nodes of a run derive from these profiles, in
/// stream order. Outlier instants are dropped. The dataset builder and the
/// node simulation share this exact sequence.
std::vector<LabeledExample> fused_examples(
    const std::vector<ProfileSpec>& profiles, const MethodConfig& cfg,
    std::size_t count);

}  // namespace edgeiq
