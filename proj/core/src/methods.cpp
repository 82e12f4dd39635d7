#include "edgeiq/methods.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <ctime>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "edgeiq/frame.hpp"
#include "edgeiq/payload.hpp"
#include "edgeiq/rng.hpp"
#include "edgeiq/store.hpp"
#include "edgeiq/transport.hpp"

namespace edgeiq {

namespace {

using WallClock = std::chrono::steady_clock;

constexpr FrameTimestamp kSimEpoch{2023, 6, 15, 12, 0, 0, 0};

double wall_seconds(WallClock::time_point t0, WallClock::time_point t1) {
  return std::chrono::duration<double>(t1 - t0).count();
}

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * ts.tv_nsec;
}

/// Accumulates the CPU time this thread spends inside a compute section.
class BusySection {
 public:
  explicit BusySection(double& acc) : acc_(acc), t0_(thread_cpu_seconds()) {}
  ~BusySection() { acc_ += thread_cpu_seconds() - t0_; }

 private:
  double& acc_;
  double t0_;
};

// ---------------------------------------------------------------------------
// Seed streams. Every stochastic choice of a run derives from cfg.seed.

enum SeedStream : std::uint64_t {
  kSeedNode = 100,      // + node index: profile generation
  kSeedInit = 777,      // common weight init shared by all ranks
  kSeedSplit = 1000,    // + 131 * rank: initial 70/30 split
  kSeedTrain = 5000,    // + 131 * rank + round: batch shuffling
  kSeedGrow = 9000,     // + 131 * rank + round: splits of gate-retry data
};

// ---------------------------------------------------------------------------
// Acquisition streams and fusion

double channel_value(const SensorReading& r, SensorId channel) {
  switch (channel) {
    case SensorId::temperature: return r.temperature_c;
    case SensorId::relative_humidity: return r.rh_percent;
    case SensorId::illuminance: return r.illuminance_digital;
    case SensorId::co2: return r.co2_ppm;
    case SensorId::current: return r.current_digital;
    case SensorId::voc: return r.voc_ppb;
  }
  return 0.0;
}

std::unordered_map<std::uint32_t, std::size_t> node_index_map(
    const std::vector<ProfileSpec>& profiles) {
  std::unordered_map<std::uint32_t, std::size_t> map;
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    map[profiles[j].node_id] = j;
  }
  return map;
}

SensorFrame reading_frame(const SensorReading& r) {
  SensorFrame frame;
  frame.header.type = FrameType::sensor_data;
  frame.header.node_id = r.node_id;
  frame.header.sensor_count = 6;
  frame.timestamp = timestamp_add_seconds(kSimEpoch, r.t);
  frame.measurements = {
      {SensorId::temperature, static_cast<float>(r.temperature_c)},
      {SensorId::relative_humidity, static_cast<float>(r.rh_percent)},
      {SensorId::illuminance, static_cast<float>(r.illuminance_digital)},
      {SensorId::co2, static_cast<float>(r.co2_ppm)},
      {SensorId::current, static_cast<float>(r.current_digital)},
      {SensorId::voc, static_cast<float>(r.voc_ppb)},
  };
  return frame;
}

std::optional<double> frame_channel(const SensorFrame& frame, SensorId channel) {
  for (const auto& m : frame.measurements) {
    if (m.sensor == channel) return static_cast<double>(m.value);
  }
  return std::nullopt;
}

void store_frame(MeasurementStore& store, const SensorFrame& frame) {
  for (const auto& m : frame.measurements) {
    store.insert(frame.timestamp, frame.header.node_id, m.sensor,
                 static_cast<double>(m.value));
  }
}

/// Per-node acquisition stream on the example grid (t_ac / 19). Readings are
/// regenerated from index zero on demand; the generator is deterministic, so
/// every regeneration yields the same series.
struct NodeStream {
  const ProfileSpec* spec = nullptr;
  double grid = 0.0;
  std::uint64_t seed = 0;

  std::vector<SensorReading> upto(std::size_t count) const {
    auto readings = generate_profile(
        *spec, grid, (static_cast<double>(count) + 0.5) * grid, seed);
    readings.resize(count);
    return readings;
  }
};

NodeStream make_stream(const ProfileSpec& spec, const MethodConfig& cfg,
                       std::size_t node_index) {
  return NodeStream{&spec, cfg.t_ac / kExamplesPerPeriod,
                    mix_seed(cfg.seed, kSeedNode + node_index)};
}

/// Fuses one instant's channel values into a labeled example. Returns
/// nothing when an input violates the operating range (outlier rejection).
std::optional<LabeledExample> fuse_instant(const std::vector<double>& values,
                                           const TargetSpec& target) {
  if (!within_operating_range(values, target.operating_range)) {
    return std::nullopt;
  }
  auto [y, label] = target.labeler(values);
  LabeledExample ex;
  ex.x = values;
  ex.y = y;
  ex.label = label;
  return ex;
}

// ---------------------------------------------------------------------------
// Evaluation

RoundMetrics evaluate_on(const MlpNetwork& net, const Dataset& train_ds,
                         const std::vector<LabeledExample>& test, double tol) {
  RoundMetrics m;
  m.ta = training_accuracy(net, train_ds, tol);

  std::vector<int> expected, estimated;
  std::vector<double> y, y_hat;
  expected.reserve(test.size());
  estimated.reserve(test.size());
  for (const auto& ex : test) {
    const double p = net.forward(train_ds.normalization.apply(ex.x));
    expected.push_back(ex.label);
    estimated.push_back(label_estimate(ex.y, p, tol));
    y.push_back(ex.y);
    y_hat.push_back(p);
  }
  m.cm = confusion(expected, estimated);
  m.precision = precision(m.cm);
  m.recall = recall(m.cm);
  m.fscore = f_score(m.cm);
  m.accuracy = accuracy(m.cm);
  m.rmse = rmse(y, y_hat);
  m.mae = mae(y, y_hat);
  return m;
}

std::vector<TraceRow> forecast_rows(const MlpNetwork& net,
                                    const Dataset& train_ds,
                                    const std::vector<LabeledExample>& test) {
  std::vector<TraceRow> rows;
  rows.reserve(test.size());
  for (const auto& ex : test) {
    TraceRow row;
    row.x = ex.x;
    row.y = ex.y;
    row.y_hat = net.forward(train_ds.normalization.apply(ex.x));
    rows.push_back(std::move(row));
  }
  return rows;
}

int effective_retrain_batch(const MethodConfig& cfg, std::size_t node_count) {
  return cfg.retrain_batch > 0
             ? cfg.retrain_batch
             : 10 * static_cast<int>(node_count);
}

int effective_retrain_epochs(const MethodConfig& cfg) {
  return cfg.retrain_epochs > 0 ? cfg.retrain_epochs : cfg.epochs;
}

TrainingConfig trainer_config(const MethodConfig& cfg, int epochs,
                              std::uint64_t seed, double stop_at_ta = 0.0) {
  TrainingConfig t;
  t.learning_rate = cfg.learning_rate;
  t.epochs = epochs;
  t.tol = cfg.target.tol;
  t.batch_size = cfg.batch_size;
  t.seed = seed;
  t.stop_at_ta = stop_at_ta;
  return t;
}

void validate_config(const MethodConfig& cfg,
                     const std::vector<ProfileSpec>& profiles,
                     Architecture expected) {
  if (cfg.architecture != expected) {
    throw std::invalid_argument("method config names the other architecture");
  }
  if (profiles.empty()) {
    throw std::invalid_argument("at least one node profile is required");
  }
  if (!(cfg.ta_gate > 0.0) || !(cfg.fscore_gate > 0.0)) {
    throw std::invalid_argument("gates must be positive");
  }
  if (cfg.initial_examples == 0) {
    throw std::invalid_argument("initial_examples must be positive");
  }
  if (cfg.max_rounds < 1) {
    throw std::invalid_argument("max_rounds must be at least 1");
  }
  if (!cfg.target.labeler) {
    throw std::invalid_argument("target labeler is not set");
  }
  validate_topology(cfg.topology);
  if (cfg.topology.input_size() != static_cast<int>(profiles.size())) {
    throw std::invalid_argument(
        "topology input width must equal the node count");
  }
}

}  // namespace

TargetSpec temperature_target() {
  TargetSpec t;
  t.channel = SensorId::temperature;
  t.tol = 0.01;
  t.operating_range = {-20.0, 85.0};
  t.labeler = [](const std::vector<double>& x) -> std::pair<double, int> {
    if (x.size() == 3) return expected_output(x[0], x[1], x[2]);
    const double mean =
        std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    const LabelingRule rule;
    if (mean < rule.lo) return {rule.lo, 0};
    if (mean > rule.hi) return {rule.hi, 0};
    return {mean, 1};
  };
  return t;
}

std::vector<LabeledExample> fused_examples(
    const std::vector<ProfileSpec>& profiles, const MethodConfig& cfg,
    std::size_t count) {
  std::vector<std::vector<SensorReading>> readings;
  readings.reserve(profiles.size());
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    readings.push_back(make_stream(profiles[j], cfg, j).upto(count));
  }

  std::vector<LabeledExample> out;
  out.reserve(count);
  std::vector<double> values(profiles.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < profiles.size(); ++j) {
      // The wire format carries IEEE 754 singles; quantize identically.
      values[j] = static_cast<double>(
          static_cast<float>(channel_value(readings[j][i], cfg.target.channel)));
    }
    if (auto ex = fuse_instant(values, cfg.target)) {
      out.push_back(std::move(*ex));
    }
  }
  return out;
}

std::vector<double> busy_time_report(const RunReport& report) {
  return report.node_busy_seconds;
}

// ===========================================================================
// Centralized method
// ===========================================================================

namespace {

struct ControlCommand {
  bool stop = false;
  std::size_t begin = 0;
  std::size_t end = 0;
};

ControlCommand parse_control(const std::string& text) {
  ControlCommand cmd;
  std::istringstream in(text);
  std::string verb;
  in >> verb;
  if (verb == "stop") {
    cmd.stop = true;
  } else if (verb == "send") {
    in >> cmd.begin >> cmd.end;
  } else {
    throw std::invalid_argument("unknown control command: " + text);
  }
  return cmd;
}

/// Edge node loop for the centralized method: wait for a control request,
/// acquire the window, store locally, publish the encoded frames.
void edge_node_worker(Broker& broker,
                      std::shared_ptr<Broker::Subscription> control,
                      NodeStream stream, std::uint32_t node_id, double& busy) {
  MeasurementStore local_store;
  while (auto msg = control->receive()) {
    const auto cmd = parse_control(unpack_control(msg->payload));
    if (cmd.stop) break;
    const auto readings = stream.upto(cmd.end);
    for (std::size_t i = cmd.begin; i < cmd.end; ++i) {
      const auto frame = reading_frame(readings[i]);
      store_frame(local_store, frame);
      broker.publish("frames", encode_frame(frame), node_id);
    }
  }
}

}  // namespace

RunReport run_centralized(const MethodConfig& cfg,
                          const std::vector<ProfileSpec>& profiles) {
  validate_config(cfg, profiles, Architecture::centralized);
  const std::size_t node_count = profiles.size();

  RunReport report;
  report.architecture = Architecture::centralized;
  report.topology_name = cfg.topology.name();
  report.epochs = cfg.epochs;
  report.seed = cfg.seed;
  report.node_busy_seconds.assign(node_count, 0.0);

  Broker broker(cfg.latency_ms);
  auto frames_sub = broker.subscribe("frames");

  // Control subscriptions exist before any publish; there is no retention.
  std::vector<std::thread> workers;
  for (std::size_t j = 1; j < node_count; ++j) {
    auto control = broker.subscribe("control/" + std::to_string(j));
    workers.emplace_back(edge_node_worker, std::ref(broker), std::move(control),
                         make_stream(profiles[j], cfg, j),
                         profiles[j].node_id,
                         std::ref(report.node_busy_seconds[j]));
  }

  const auto t_run0 = WallClock::now();
  MeasurementStore global_store;
  NodeStream own_stream = make_stream(profiles[0], cfg, 0);
  const auto node_index = node_index_map(profiles);
  std::size_t cursor = 0;

  auto stop_nodes = [&] {
    for (std::size_t j = 1; j < node_count; ++j) {
      broker.publish("control/" + std::to_string(j), pack_control("stop"));
    }
    broker.stop();
    for (auto& w : workers) w.join();
  };

  // Requests the next `count` acquisition instants from every node, fuses
  // them by timestamp and returns the labeled examples (phases 1 and 2).
  auto request_examples = [&](std::size_t count) {
    const std::size_t begin = cursor;
    const std::size_t end = cursor + count;
    cursor = end;

    for (std::size_t j = 1; j < node_count; ++j) {
      broker.publish("control/" + std::to_string(j),
                     pack_control("send " + std::to_string(begin) + " " +
                                  std::to_string(end)));
    }

    std::map<std::int64_t, std::vector<double>> buckets;
    std::vector<std::int64_t> instant_keys;
    instant_keys.reserve(count);
    {
      const auto own = own_stream.upto(end);
      for (std::size_t i = begin; i < end; ++i) {
        const auto frame = reading_frame(own[i]);
        store_frame(global_store, frame);
        const auto key = timestamp_to_millis(frame.timestamp);
        auto& slot = buckets[key];
        slot.assign(node_count, std::numeric_limits<double>::quiet_NaN());
        slot[0] = static_cast<double>(static_cast<float>(
            channel_value(own[i], cfg.target.channel)));
        instant_keys.push_back(key);
      }
    }

    std::size_t pending = count * (node_count - 1);
    while (pending > 0) {
      auto msg = frames_sub->receive();
      if (!msg) throw TransportStopped();
      const auto frame = decode_frame(msg->payload);
      store_frame(global_store, frame);
      const auto value = frame_channel(frame, cfg.target.channel);
      const auto key = timestamp_to_millis(frame.timestamp);
      auto it = buckets.find(key);
      const auto idx = node_index.find(frame.header.node_id);
      if (it != buckets.end() && value && idx != node_index.end()) {
        it->second[idx->second] = *value;
      }
      --pending;
    }

    std::vector<LabeledExample> examples;
    examples.reserve(count);
    for (const auto key : instant_keys) {
      const auto& values = buckets[key];
      if (std::any_of(values.begin(), values.end(),
                      [](double v) { return std::isnan(v); })) {
        continue;  // frame for this instant lacked the channel
      }
      if (auto ex = fuse_instant(values, cfg.target)) {
        examples.push_back(std::move(*ex));
      }
    }
    return examples;
  };

  try {
    // Phase 1 + 2: bulk acquisition, fusion, labeling, 70/30 split.
    auto t0 = WallClock::now();
    auto examples = request_examples(cfg.initial_examples);
    if (examples.empty()) {
      throw std::runtime_error("no examples survived outlier rejection");
    }
    auto [train_examples, test_examples] =
        split_dataset(examples, cfg.train_fraction, mix_seed(cfg.seed, kSeedSplit));
    auto train_ds = Dataset::from_examples(std::move(train_examples));
    report.phase_timings.push_back(
        {"acquire+label+split", wall_seconds(t0, WallClock::now())});

    // Phase 3 + 4: train to the TA gate, test against the F-score gate,
    // pulling more data from the nodes after every failed round.
    MlpNetwork net = MlpNetwork::glorot(cfg.topology, mix_seed(cfg.seed, kSeedInit));
    const int extra = effective_retrain_batch(cfg, node_count);
    bool passed = false;
    double last_ta = 0.0;

    auto grow_dataset = [&](int round) {
      auto more = request_examples(static_cast<std::size_t>(extra));
      if (more.empty()) return;
      auto [more_train, more_test] = split_dataset(
          more, cfg.train_fraction, mix_seed(cfg.seed, kSeedGrow + round));
      auto merged = train_ds.examples;
      merged.insert(merged.end(), more_train.begin(), more_train.end());
      train_ds = Dataset::from_examples(std::move(merged));
      test_examples.insert(test_examples.end(), more_test.begin(),
                           more_test.end());
    };

    t0 = WallClock::now();
    for (int round = 0; round < cfg.max_rounds; ++round) {
      report.rounds_used = round + 1;
      {
        BusySection section(report.node_busy_seconds[0]);
        // Trains until the TA gate passes, at most cfg.epochs epochs.
        auto result = train(net, train_ds,
                            trainer_config(cfg, cfg.epochs,
                                           mix_seed(cfg.seed, kSeedTrain + round),
                                           cfg.ta_gate));
        net = std::move(result.network);
        if (round == 0) report.loss_trace = std::move(result.loss_trace);
        last_ta = training_accuracy(net, train_ds, cfg.target.tol);
      }
      if (last_ta < cfg.ta_gate) {
        report.failure_reason =
            "phase 3: TA " + std::to_string(last_ta) + " below gate " +
            std::to_string(cfg.ta_gate) + " in round " + std::to_string(round + 1);
        if (round + 1 < cfg.max_rounds) grow_dataset(round);
        continue;
      }
      {
        BusySection section(report.node_busy_seconds[0]);
        report.final_metrics = evaluate_on(net, train_ds, test_examples,
                                           cfg.target.tol);
      }
      if (report.final_metrics.fscore >= cfg.fscore_gate) {
        passed = true;
        report.failure_reason.clear();
        break;
      }
      report.failure_reason =
          "phase 4: F-score " + std::to_string(report.final_metrics.fscore) +
          " below gate " + std::to_string(cfg.fscore_gate) + " in round " +
          std::to_string(round + 1);
      if (round + 1 < cfg.max_rounds) grow_dataset(round);
    }
    report.phase_timings.push_back(
        {"train+test", wall_seconds(t0, WallClock::now())});
    report.training_window_seconds = report.phase_timings.back().seconds;

    if (passed) {
      // Phase 5: first global forecast, then periodic warm-started
      // retraining on fresh data.
      {
        BusySection section(report.node_busy_seconds[0]);
        report.forecast_trace = forecast_rows(net, train_ds, test_examples);
      }
      t0 = WallClock::now();
      for (int it = 0; it < cfg.retrain_iterations; ++it) {
        auto batch = request_examples(static_cast<std::size_t>(extra));
        if (batch.empty()) break;
        BusySection section(report.node_busy_seconds[0]);
        Dataset batch_ds;
        batch_ds.examples = std::move(batch);
        batch_ds.normalization = train_ds.normalization;
        auto result = train(
            net, batch_ds,
            trainer_config(cfg, effective_retrain_epochs(cfg),
                           mix_seed(cfg.seed, kSeedTrain + 100 + it),
                           cfg.ta_gate));
        net = std::move(result.network);
        report.retrain_metrics.push_back(
            evaluate_on(net, train_ds, test_examples, cfg.target.tol));
      }
      if (cfg.retrain_iterations > 0) {
        report.phase_timings.push_back(
            {"retrain-cycles", wall_seconds(t0, WallClock::now())});
      }
      report.success = true;
    }
  } catch (...) {
    stop_nodes();
    throw;
  }

  report.phase_timings.push_back({"total", wall_seconds(t_run0, WallClock::now())});
  stop_nodes();
  return report;
}

// ===========================================================================
// Distributed parallel method
// ===========================================================================

namespace {

/// One rank of the distributed method. The stages mirror the seven phases;
/// they run on a dedicated thread in parallel mode and are interleaved on
/// the caller's thread in sequential mode (buffered mailboxes make that
/// safe).
///
/// Symmetric ranks derive their splits and batch order from the shared run
/// seed, so identically configured nodes converge to the same weights and
/// phase-4 averaging operates at its fixed point. On a failed phase-5 test
/// the whole ensemble re-enters phase 2 from the averaged weights;
/// retraining only the master cannot move the average once the slave
/// weights are frozen.
class DistNode {
 public:
  DistNode(const MethodConfig& cfg, const std::vector<ProfileSpec>& profiles,
           Communicator& comm, int rank, std::size_t total_instants)
      : cfg_(cfg),
        profiles_(profiles),
        comm_(comm),
        rank_(rank),
        total_instants_(total_instants),
        stream_(make_stream(profiles[rank], cfg, rank)),
        node_index_(node_index_map(profiles)) {}

  double busy = 0.0;
  WallClock::time_point train_start{};
  WallClock::time_point train_end{};
  std::vector<double> first_loss_trace;
  std::vector<std::pair<double, double>> local_forecast;
  std::string failure;

  /// Phase 1a: acquire the whole planned stream, store it locally and send
  /// every frame to every peer.
  void stage_exchange() {
    own_readings_ = stream_.upto(total_instants_);
    for (const auto& reading : own_readings_) {
      const auto frame = reading_frame(reading);
      store_frame(store_, frame);
      const auto bytes = encode_frame(frame);
      for (int peer = 0; peer < static_cast<int>(profiles_.size()); ++peer) {
        if (peer != rank_) comm_.send(rank_, peer, bytes);
      }
    }
  }

  /// Phase 1b: receive the peers' frames, fuse by timestamp, label and
  /// store. Ends with the full example stream of this run.
  void stage_ingest() {
    const std::size_t node_count = profiles_.size();
    std::map<std::int64_t, std::vector<double>> buckets;
    {
      for (std::size_t i = 0; i < own_readings_.size(); ++i) {
        const auto key = timestamp_to_millis(
            timestamp_add_seconds(kSimEpoch, own_readings_[i].t));
        auto& slot = buckets[key];
        slot.assign(node_count, std::numeric_limits<double>::quiet_NaN());
        slot[static_cast<std::size_t>(rank_)] = static_cast<double>(
            static_cast<float>(channel_value(own_readings_[i],
                                             cfg_.target.channel)));
      }
    }

    std::size_t pending = total_instants_ * (node_count - 1);
    while (pending > 0) {
      auto msg = comm_.recv(rank_);
      if (!msg) throw TransportStopped();
      const auto frame = decode_frame(msg->payload);
      store_frame(store_, frame);
      const auto value = frame_channel(frame, cfg_.target.channel);
      auto it = buckets.find(timestamp_to_millis(frame.timestamp));
      const auto idx = node_index_.find(frame.header.node_id);
      if (it != buckets.end() && value && idx != node_index_.end()) {
        it->second[idx->second] = *value;
      }
      --pending;
    }

    examples_.reserve(total_instants_);
    for (std::size_t i = 0; i < own_readings_.size(); ++i) {
      const auto key = timestamp_to_millis(
          timestamp_add_seconds(kSimEpoch, own_readings_[i].t));
      const auto& values = buckets[key];
      if (std::any_of(values.begin(), values.end(),
                      [](double v) { return std::isnan(v); })) {
        continue;
      }
      if (auto ex = fuse_instant(values, cfg_.target)) {
        examples_.push_back(std::move(*ex));
      }
    }
    own_readings_.clear();
    own_readings_.shrink_to_fit();
  }

  /// Phase 2: split the local data and train until the TA gate passes,
  /// reading further slices of the local stream on failed rounds.
  void stage_train() {
    train_start = WallClock::now();
    BusySection section(busy);

    const std::size_t initial =
        std::min(cfg_.initial_examples, examples_.size());
    auto [train_part, test_part] = split_dataset(
        {examples_.begin(),
         examples_.begin() + static_cast<std::ptrdiff_t>(initial)},
        cfg_.train_fraction, mix_seed(cfg_.seed, kSeedSplit));
    train_ds_ = Dataset::from_examples(std::move(train_part));
    test_ = std::move(test_part);
    extra_cursor_ = initial;

    net_ = MlpNetwork::glorot(cfg_.topology, mix_seed(cfg_.seed, kSeedInit));
    train_to_gate(0);
    train_end = WallClock::now();
  }

  /// Phase 3: slaves ship weights and their test split to the master, and
  /// every node emits a local forecast from its own model.
  void stage_report() {
    BusySection section(busy);
    local_forecast.reserve(test_.size());
    for (const auto& ex : test_) {
      local_forecast.emplace_back(
          ex.y, net_.forward(train_ds_.normalization.apply(ex.x)));
    }
    if (rank_ != 0) {
      comm_.send(rank_, 0, pack_weights(net_));
      comm_.send(rank_, 0, pack_examples(test_));
    }
  }

  // ---- master-side aggregation protocol (phases 4-6) ----

  /// Receives the slaves' phase-3 weights and test splits.
  void master_collect() {
    for (int src = 1; src < static_cast<int>(profiles_.size()); ++src) {
      auto weights_msg = comm_.recv_from(0, src);
      auto test_msg = comm_.recv_from(0, src);
      if (!weights_msg || !test_msg) throw TransportStopped();
      slave_nets_.push_back(unpack_weights(weights_msg->payload));
      auto slave_test = unpack_examples(test_msg->payload);
      pooled_test_ = test_;
      // re-pool lazily below; keep slave tests separately
      slave_tests_.push_back(std::move(slave_test));
    }
  }

  /// One phase-4/5 round: average, test the pooled split, and broadcast
  /// either the final global weights or a retry request. Returns true when
  /// the F-score gate passed.
  bool master_round(RunReport& report, int round) {
    BusySection section(busy);
    std::vector<MlpNetwork> all;
    all.push_back(net_);
    for (const auto& n : slave_nets_) all.push_back(n);
    global_net_ = average_weights(all);

    pooled_test_ = test_;
    for (const auto& t : slave_tests_) {
      pooled_test_.insert(pooled_test_.end(), t.begin(), t.end());
    }
    report.final_metrics =
        evaluate_on(global_net_, train_ds_, pooled_test_, cfg_.target.tol);
    report.rounds_used = std::max(report.rounds_used, round + 1);

    const bool passed = report.final_metrics.fscore >= cfg_.fscore_gate;
    if (passed) {
      report.success = true;
      report.failure_reason.clear();
      report.forecast_trace =
          forecast_rows(global_net_, train_ds_, pooled_test_);
    } else {
      report.failure_reason =
          "phase 5: pooled F-score " +
          std::to_string(report.final_metrics.fscore) +
          " below gate in round " + std::to_string(round + 1);
    }
    const bool last = round + 1 >= cfg_.max_rounds;
    for (int peer = 1; peer < static_cast<int>(profiles_.size()); ++peer) {
      comm_.send(0, peer, pack_control(passed || last ? "final" : "retry"));
      comm_.send(0, peer, pack_weights(global_net_));
    }
    if (passed || last) net_ = global_net_;
    return passed || last;
  }

  /// Phase 6 failure path, every rank: re-enter phase 2 from the averaged
  /// weights with more local data.
  void retrain_from_global(const MlpNetwork& base, int round) {
    BusySection section(busy);
    net_ = base;
    grow_dataset(round);
    train_to_gate(round + 1);
  }

  /// Master-side counterpart of retrain_from_global plus collection of the
  /// slaves' refreshed weights.
  void master_recollect(int round) {
    retrain_from_global(global_net_, round);
    for (int src = 1; src < static_cast<int>(profiles_.size()); ++src) {
      auto msg = comm_.recv_from(0, src);
      if (!msg) throw TransportStopped();
      BusySection section(busy);
      slave_nets_[static_cast<std::size_t>(src) - 1] =
          unpack_weights(msg->payload);
    }
  }

  /// Slave side of one aggregation round. Returns true when the global
  /// model is final.
  bool slave_round(int round) {
    auto control_msg = comm_.recv_from(rank_, 0);
    auto weights_msg = comm_.recv_from(rank_, 0);
    if (!control_msg || !weights_msg) throw TransportStopped();
    const auto verdict = unpack_control(control_msg->payload);
    auto global = unpack_weights(weights_msg->payload);
    if (verdict == "final") {
      BusySection section(busy);
      net_ = std::move(global);
      return true;
    }
    retrain_from_global(global, round);
    comm_.send(rank_, 0, pack_weights(net_));
    return false;
  }

  // ---- phase 7: periodic retraining cycles ----

  /// Warm-starts from the current global weights on the next batch of
  /// fresh examples (every rank trains the same ten new examples).
  void train_iteration(int iteration) {
    BusySection section(busy);
    const auto slice = iteration_slice(iteration);
    if (slice.empty()) return;
    Dataset batch;
    batch.examples = slice;
    batch.normalization = train_ds_.normalization;
    auto result =
        train(net_, batch,
              trainer_config(cfg_, effective_retrain_epochs(cfg_),
                             mix_seed(cfg_.seed, kSeedTrain + 1000 + iteration),
                             cfg_.ta_gate));
    net_ = std::move(result.network);
  }

  void send_iteration_weights() { comm_.send(rank_, 0, pack_weights(net_)); }

  void master_iteration(RunReport& report) {
    std::vector<MlpNetwork> nets;
    nets.push_back(net_);
    for (int src = 1; src < static_cast<int>(profiles_.size()); ++src) {
      auto msg = comm_.recv_from(0, src);
      if (!msg) throw TransportStopped();
      nets.push_back(unpack_weights(msg->payload));
    }
    BusySection section(busy);
    global_net_ = average_weights(nets);
    report.retrain_metrics.push_back(
        evaluate_on(global_net_, train_ds_, pooled_test_, cfg_.target.tol));
    for (int peer = 1; peer < static_cast<int>(profiles_.size()); ++peer) {
      comm_.send(0, peer, pack_weights(global_net_));
    }
    net_ = global_net_;
  }

  void adopt_iteration_weights() {
    auto msg = comm_.recv_from(rank_, 0);
    if (!msg) throw TransportStopped();
    BusySection section(busy);
    net_ = unpack_weights(msg->payload);
  }

  double local_ta() const { return local_ta_; }
  const MlpNetwork& network() const { return net_; }

 private:
  /// Trains until the TA gate passes, appending stream slices after failed
  /// attempts (the shared retry budget of phases 2 and 6).
  void train_to_gate(int base_round) {
    for (int attempt = 0; attempt < cfg_.max_rounds; ++attempt) {
      auto result = train(
          net_, train_ds_,
          trainer_config(cfg_, cfg_.epochs,
                         mix_seed(cfg_.seed,
                                  kSeedTrain + base_round * 31 + attempt),
                         cfg_.ta_gate));
      net_ = std::move(result.network);
      if (base_round == 0 && attempt == 0 && rank_ == 0) {
        first_loss_trace = result.loss_trace;
      }
      local_ta_ = training_accuracy(net_, train_ds_, cfg_.target.tol);
      if (local_ta_ >= cfg_.ta_gate) {
        failure.clear();
        return;
      }
      failure = "rank " + std::to_string(rank_) + " phase 2: TA " +
                std::to_string(local_ta_) + " below gate after attempt " +
                std::to_string(attempt + 1);
      if (attempt + 1 < cfg_.max_rounds) grow_dataset(base_round * 31 + attempt);
    }
  }

  /// Appends the next unread slice of the local stream to the train/test
  /// splits.
  void grow_dataset(int round) {
    const auto extra = static_cast<std::size_t>(
        effective_retrain_batch(cfg_, profiles_.size()));
    const std::size_t begin = std::min(extra_cursor_, examples_.size());
    const std::size_t end = std::min(begin + extra, examples_.size());
    extra_cursor_ = end;
    if (begin == end) return;
    std::vector<LabeledExample> more(
        examples_.begin() + static_cast<std::ptrdiff_t>(begin),
        examples_.begin() + static_cast<std::ptrdiff_t>(end));
    auto [more_train, more_test] = split_dataset(
        more, cfg_.train_fraction, mix_seed(cfg_.seed, kSeedGrow + round));
    auto merged = train_ds_.examples;
    merged.insert(merged.end(), more_train.begin(), more_train.end());
    train_ds_ = Dataset::from_examples(std::move(merged));
    test_.insert(test_.end(), more_test.begin(), more_test.end());
  }

  /// Examples for retraining cycle i: after the initial dataset and the
  /// retry reserve, each cycle consumes the next ten fresh examples.
  std::vector<LabeledExample> iteration_slice(int iteration) const {
    const auto node_count = profiles_.size();
    const auto batch = static_cast<std::size_t>(
        effective_retrain_batch(cfg_, node_count));
    const std::size_t per_node = std::max<std::size_t>(1, batch / node_count);
    const std::size_t reserve =
        static_cast<std::size_t>(2 * cfg_.max_rounds) * batch;
    const std::size_t base = cfg_.initial_examples + reserve +
                             static_cast<std::size_t>(iteration) * per_node;
    const std::size_t begin = std::min(base, examples_.size());
    const std::size_t end = std::min(begin + per_node, examples_.size());
    return {examples_.begin() + static_cast<std::ptrdiff_t>(begin),
            examples_.begin() + static_cast<std::ptrdiff_t>(end)};
  }

  const MethodConfig& cfg_;
  const std::vector<ProfileSpec>& profiles_;
  Communicator& comm_;
  int rank_;
  std::size_t total_instants_;
  NodeStream stream_;
  std::unordered_map<std::uint32_t, std::size_t> node_index_;

  MeasurementStore store_;
  std::vector<SensorReading> own_readings_;
  std::vector<LabeledExample> examples_;
  Dataset train_ds_;
  std::vector<LabeledExample> test_;
  std::vector<std::vector<LabeledExample>> slave_tests_;
  std::vector<LabeledExample> pooled_test_;
  std::vector<MlpNetwork> slave_nets_;
  std::size_t extra_cursor_ = 0;
  MlpNetwork net_;
  MlpNetwork global_net_;
  double local_ta_ = 0.0;
};

}  // namespace

RunReport run_distributed(const MethodConfig& cfg,
                          const std::vector<ProfileSpec>& profiles) {
  validate_config(cfg, profiles, Architecture::distributed);
  const auto node_count = static_cast<int>(profiles.size());

  RunReport report;
  report.architecture = Architecture::distributed;
  report.topology_name = cfg.topology.name();
  report.epochs = cfg.epochs;
  report.seed = cfg.seed;

  const auto batch = static_cast<std::size_t>(
      effective_retrain_batch(cfg, profiles.size()));
  const std::size_t per_node = std::max<std::size_t>(
      1, batch / static_cast<std::size_t>(node_count));
  const std::size_t total_instants =
      cfg.initial_examples + 2 * cfg.max_rounds * batch +
      static_cast<std::size_t>(std::max(0, cfg.retrain_iterations)) * per_node;

  Communicator comm(node_count, cfg.latency_ms);
  std::vector<std::unique_ptr<DistNode>> nodes;
  for (int r = 0; r < node_count; ++r) {
    nodes.push_back(
        std::make_unique<DistNode>(cfg, profiles, comm, r, total_instants));
  }

  const auto t_run0 = WallClock::now();

  if (cfg.sequential) {
    // One execution context: the master works through every node's stages
    // in order (the sequential baseline of the speedup measurement).
    for (auto& node : nodes) node->stage_exchange();
    for (auto& node : nodes) node->stage_ingest();
    const auto t0 = WallClock::now();
    for (auto& node : nodes) node->stage_train();
    report.training_window_seconds = wall_seconds(t0, WallClock::now());
    for (auto& node : nodes) node->stage_report();
    nodes[0]->master_collect();
    for (int round = 0; round < cfg.max_rounds; ++round) {
      const bool done = nodes[0]->master_round(report, round);
      bool slaves_done = true;
      for (int r = 1; r < node_count; ++r) {
        slaves_done = nodes[r]->slave_round(round) && slaves_done;
      }
      if (done != slaves_done) {
        throw std::logic_error("aggregation protocol out of step");
      }
      if (done) break;
      nodes[0]->master_recollect(round);
    }
    if (report.success) {
      for (int it = 0; it < cfg.retrain_iterations; ++it) {
        for (auto& node : nodes) node->train_iteration(it);
        for (int r = 1; r < node_count; ++r) {
          nodes[r]->send_iteration_weights();
        }
        nodes[0]->master_iteration(report);
        for (int r = 1; r < node_count; ++r) nodes[r]->adopt_iteration_weights();
      }
    }
  } else {
    std::barrier sync(node_count);
    std::atomic<bool> proceed_iterations{false};
    std::vector<std::thread> threads;
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&](int rank) {
      try {
        auto& node = *nodes[rank];
        node.stage_exchange();
        node.stage_ingest();
        sync.arrive_and_wait();  // aligned training start for fair timing
        node.stage_train();
        node.stage_report();
        if (rank == 0) {
          node.master_collect();
          for (int round = 0; round < cfg.max_rounds; ++round) {
            if (node.master_round(report, round)) break;
            node.master_recollect(round);
          }
          proceed_iterations.store(report.success);
        } else {
          for (int round = 0; round < cfg.max_rounds; ++round) {
            if (node.slave_round(round)) break;
          }
        }
        sync.arrive_and_wait();
        if (proceed_iterations.load()) {
          for (int it = 0; it < cfg.retrain_iterations; ++it) {
            node.train_iteration(it);
            if (rank == 0) {
              node.master_iteration(report);
            } else {
              node.send_iteration_weights();
              node.adopt_iteration_weights();
            }
          }
        }
      } catch (...) {
        {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
        comm.shutdown();
        sync.arrive_and_drop();
      }
    };

    for (int r = 0; r < node_count; ++r) threads.emplace_back(worker, r);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);

    WallClock::time_point earliest = nodes[0]->train_start;
    WallClock::time_point latest = nodes[0]->train_end;
    for (const auto& node : nodes) {
      earliest = std::min(earliest, node->train_start);
      latest = std::max(latest, node->train_end);
    }
    report.training_window_seconds = wall_seconds(earliest, latest);
  }

  report.loss_trace = std::move(nodes[0]->first_loss_trace);
  for (const auto& node : nodes) {
    report.node_busy_seconds.push_back(node->busy);
    report.local_forecasts.push_back(node->local_forecast);
    if (!node->failure.empty() && report.failure_reason.empty()) {
      report.failure_reason = node->failure;
      report.success = false;
    }
  }
  report.phase_timings.push_back(
      {"training-window", report.training_window_seconds});
  report.phase_timings.push_back(
      {"total", wall_seconds(t_run0, WallClock::now())});
  return report;
}

TimingPair measure_speedup(const MethodConfig& cfg,
                           const std::vector<ProfileSpec>& profiles) {
  MethodConfig parallel_cfg = cfg;
  parallel_cfg.sequential = false;
  MethodConfig sequential_cfg = cfg;
  sequential_cfg.sequential = true;

  const auto parallel_report = run_distributed(parallel_cfg, profiles);
  const auto sequential_report = run_distributed(sequential_cfg, profiles);

  TimingPair t;
  t.t_s = sequential_report.training_window_seconds;
  t.t_p = parallel_report.training_window_seconds;
  t.processors = static_cast<int>(profiles.size());
  return t;
}

}  // namespace edgeiq
