#include "edgeiq/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "edgeiq/metrics.hpp"
#include "edgeiq/rng.hpp"
#include "edgeiq/sensors.hpp"

namespace edgeiq {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  return out;
}

const char* architecture_name(Architecture a) {
  return a == Architecture::centralized ? "centralized" : "distributed";
}

void append_metrics_row(std::ostream& out, const RunReport& r,
                        const char* kind, int iteration,
                        const RoundMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%s,%s,%d,%llu,%s,%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,"
                "%llu,%llu,%llu,%llu\n",
                architecture_name(r.architecture), r.topology_name.c_str(),
                r.epochs, static_cast<unsigned long long>(r.seed), kind,
                iteration, r.success ? 1 : 0, m.ta, m.precision, m.recall,
                m.fscore, m.accuracy, m.rmse, m.mae,
                static_cast<unsigned long long>(m.cm.tp),
                static_cast<unsigned long long>(m.cm.fp),
                static_cast<unsigned long long>(m.cm.fn),
                static_cast<unsigned long long>(m.cm.tn));
  out << buf;
}

}  // namespace

MethodConfig plan_config(const ExperimentPlan& plan, Architecture architecture,
                         std::uint64_t seed) {
  MethodConfig cfg;
  cfg.architecture = architecture;
  cfg.t_ac = plan.t_ac;
  cfg.topology = plan.topology;
  cfg.epochs = plan.epochs;
  cfg.batch_size = plan.batch_size;
  cfg.ta_gate = plan.ta_gate;
  cfg.fscore_gate = plan.fscore_gate;
  cfg.latency_ms = plan.latency_ms;
  cfg.retrain_iterations = plan.retrain_iterations;
  cfg.retrain_epochs = plan.retrain_epochs;
  cfg.initial_examples = plan.dataset_examples;
  cfg.seed = seed;
  return cfg;
}

DatasetBuildResult build_dataset(int exp_id, std::uint64_t seed,
                                 const std::filesystem::path& out_dir,
                                 double t_ac, std::size_t examples) {
  const auto profiles = builtin_experiment(exp_id);
  std::filesystem::create_directories(out_dir);

  MethodConfig cfg;
  cfg.t_ac = t_ac;
  cfg.seed = seed;
  cfg.initial_examples = examples;

  DatasetBuildResult result;
  const std::vector<ProfileSpec> profile_list(profiles.begin(), profiles.end());
  result.examples = fused_examples(profile_list, cfg, examples);

  const double grid = t_ac / kExamplesPerPeriod;
  for (std::size_t j = 0; j < profile_list.size(); ++j) {
    const auto series = generate_profile(
        profile_list[j], grid, (static_cast<double>(examples) + 0.5) * grid,
        mix_seed(seed, 100 + j));
    const auto path =
        out_dir / ("series_x" + std::to_string(j + 1) + ".csv");
    auto out = open_out(path);
    write_series_csv(out, series);
    result.files.push_back(path);
  }

  const auto labeled_path = out_dir / "labeled.csv";
  auto out = open_out(labeled_path);
  write_examples_csv(out, result.examples);
  result.files.push_back(labeled_path);
  return result;
}

TargetSpec illuminance_target() {
  TargetSpec t;
  t.channel = SensorId::illuminance;
  t.tol = 0.5;  // a valid estimate must round to the expected scale
  t.operating_range = {-1.0, 1024.0};
  t.labeler = [](const std::vector<double>& x) -> std::pair<double, int> {
    int lo_scale = 6, hi_scale = 0;
    double sum = 0.0;
    for (double v : x) {
      const int s = illuminance_scale(static_cast<std::uint32_t>(
          std::clamp(std::lround(v), 0l, 1023l)));
      lo_scale = std::min(lo_scale, s);
      hi_scale = std::max(hi_scale, s);
      sum += v;
    }
    const int mean_scale = illuminance_scale(static_cast<std::uint32_t>(
        std::clamp(std::lround(sum / static_cast<double>(x.size())), 0l, 1023l)));
    const int label = (hi_scale - lo_scale) <= 1 ? 1 : 0;
    return {static_cast<double>(mean_scale), label};
  };
  return t;
}

std::vector<std::filesystem::path> emit_plot_data(
    const RunReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> files;
  char buf[160];

  {
    const auto path = out_dir / "estimation_trace.csv";
    auto out = open_out(path);
    for (std::size_t i = 0; i < report.forecast_trace.size(); ++i) {
      const auto& row = report.forecast_trace[i];
      out << i;
      for (double v : row.x) {
        std::snprintf(buf, sizeof(buf), ",%.9g", v);
        out << buf;
      }
      std::snprintf(buf, sizeof(buf), ",%.9g\n", row.y_hat);
      out << buf;
    }
    files.push_back(path);
  }
  {
    const auto path = out_dir / "estimation_scatter.csv";
    auto out = open_out(path);
    for (const auto& row : report.forecast_trace) {
      std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", row.y, row.y_hat);
      out << buf;
    }
    files.push_back(path);
  }
  {
    const auto path = out_dir / "learning_curve.csv";
    auto out = open_out(path);
    for (std::size_t epoch = 0; epoch < report.loss_trace.size(); ++epoch) {
      std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", epoch,
                    report.loss_trace[epoch]);
      out << buf;
    }
    files.push_back(path);
  }
  return files;
}

void write_report_csv(std::ostream& out,
                      const std::vector<RunReport>& reports) {
  out << "method,topology,epochs,seed,kind,iteration,success,ta,precision,"
         "recall,fscore,accuracy,rmse,mae,tp,fp,fn,tn\n";
  for (const auto& r : reports) {
    append_metrics_row(out, r, "final", 0, r.final_metrics);
    for (std::size_t i = 0; i < r.retrain_metrics.size(); ++i) {
      append_metrics_row(out, r, "retrain", static_cast<int>(i + 1),
                         r.retrain_metrics[i]);
    }
  }
}

void write_report_table(std::ostream& out,
                        const std::vector<RunReport>& reports) {
  char buf[256];
  out << "method       topology        epochs  seed  TA    P     R     "
         "F     Acc   RMSE   MAE    status\n";
  for (const auto& r : reports) {
    const auto& m = r.final_metrics;
    std::snprintf(buf, sizeof(buf),
                  "%-12s %-15s %6d %5llu  %.2f  %.2f  %.2f  %.2f  %.2f  "
                  "%5.2f  %5.2f  %s\n",
                  architecture_name(r.architecture), r.topology_name.c_str(),
                  r.epochs, static_cast<unsigned long long>(r.seed), m.ta,
                  m.precision, m.recall, m.fscore, m.accuracy, m.rmse, m.mae,
                  r.success ? "pass" : "FAIL");
    out << buf;
    for (std::size_t i = 0; i < r.retrain_metrics.size(); ++i) {
      const auto& im = r.retrain_metrics[i];
      std::snprintf(buf, sizeof(buf),
                    "  iteration %-2zu                              "
                    "%.2f  %.2f  %.2f  %.2f  %.2f\n",
                    i + 1, im.ta, im.precision, im.recall, im.fscore,
                    im.accuracy);
      out << buf;
    }
    if (!r.failure_reason.empty()) {
      out << "  note: " << r.failure_reason << "\n";
    }
  }

  out << "\n# volatile (wall-clock measurements, excluded from report.csv)\n";
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%-12s seed %llu  training window %.3f s",
                  architecture_name(r.architecture),
                  static_cast<unsigned long long>(r.seed),
                  r.training_window_seconds);
    out << buf;
    out << "  busy(s):";
    for (double b : r.node_busy_seconds) {
      std::snprintf(buf, sizeof(buf), " %.3f", b);
      out << buf;
    }
    if (r.timing) {
      std::snprintf(buf, sizeof(buf),
                    "  T_s %.3f  T_p %.3f  speedup %.2f  efficiency %.2f",
                    r.timing->t_s, r.timing->t_p, speedup(*r.timing),
                    efficiency(*r.timing));
      out << buf;
    }
    out << "\n";
  }
}

void write_timings_csv(std::ostream& out,
                       const std::vector<RunReport>& reports) {
  out << "method,seed,training_window_s,total_s,busy_per_node_s,t_s,t_p,"
         "speedup,efficiency\n";
  char buf[256];
  for (const auto& r : reports) {
    double total = 0.0;
    for (const auto& pt : r.phase_timings) {
      if (pt.phase == "total") total = pt.seconds;
    }
    std::string busy;
    for (std::size_t i = 0; i < r.node_busy_seconds.size(); ++i) {
      if (i) busy += ';';
      std::snprintf(buf, sizeof(buf), "%.6f", r.node_busy_seconds[i]);
      busy += buf;
    }
    if (r.timing) {
      std::snprintf(buf, sizeof(buf), "%s,%llu,%.6f,%.6f,%s,%.6f,%.6f,%.4f,%.4f\n",
                    architecture_name(r.architecture),
                    static_cast<unsigned long long>(r.seed),
                    r.training_window_seconds, total, busy.c_str(),
                    r.timing->t_s, r.timing->t_p, speedup(*r.timing),
                    efficiency(*r.timing));
    } else {
      std::snprintf(buf, sizeof(buf), "%s,%llu,%.6f,%.6f,%s,,,,\n",
                    architecture_name(r.architecture),
                    static_cast<unsigned long long>(r.seed),
                    r.training_window_seconds, total, busy.c_str());
    }
    out << buf;
  }
}

namespace {

int execute_runs(const ExperimentPlan& plan,
                 const std::vector<Architecture>& architectures,
                 const TargetSpec* target_override) {
  if (plan.seeds.empty()) {
    throw std::invalid_argument("a plan needs at least one seed");
  }
  const auto profiles_array = builtin_experiment(plan.exp_id);
  const std::vector<ProfileSpec> profiles(profiles_array.begin(),
                                          profiles_array.end());
  std::filesystem::create_directories(plan.out_dir);

  std::vector<RunReport> reports;
  bool all_passed = true;
  for (const auto architecture : architectures) {
    for (const auto seed : plan.seeds) {
      MethodConfig cfg = plan_config(plan, architecture, seed);
      if (target_override) cfg.target = *target_override;
      RunReport report = architecture == Architecture::centralized
                             ? run_centralized(cfg, profiles)
                             : run_distributed(cfg, profiles);
      if (plan.with_speedup && architecture == Architecture::distributed &&
          seed == plan.seeds.front()) {
        report.timing = measure_speedup(cfg, profiles);
      }
      all_passed = all_passed && report.success;
      reports.push_back(std::move(report));
    }
  }

  {
    auto out = open_out(plan.out_dir / "report.csv");
    write_report_csv(out, reports);
  }
  {
    auto out = open_out(plan.out_dir / "report.txt");
    write_report_table(out, reports);
  }
  {
    auto out = open_out(plan.out_dir / "timings.csv");
    write_timings_csv(out, reports);
  }
  return all_passed ? 0 : 1;
}

}  // namespace

int run_plan(const ExperimentPlan& plan) {
  if (plan.exp_id == 2 && plan.method != PlanMethod::distributed) {
    throw std::invalid_argument(
        "experiment 2 runs only on the distributed architecture");
  }
  std::vector<Architecture> architectures;
  if (plan.method == PlanMethod::centralized ||
      plan.method == PlanMethod::both) {
    architectures.push_back(Architecture::centralized);
  }
  if (plan.method == PlanMethod::distributed ||
      plan.method == PlanMethod::both) {
    architectures.push_back(Architecture::distributed);
  }
  return execute_runs(plan, architectures, nullptr);
}

int illuminance_run(const ExperimentPlan& plan) {
  if (plan.method != PlanMethod::centralized) {
    throw std::invalid_argument("illuminance runs use the centralized method");
  }
  const auto name = plan.topology.name();
  if (name != "3-2-2-1" && name != "3-6-6-1") {
    throw std::invalid_argument(
        "illuminance runs support topologies 3-2-2-1 and 3-6-6-1, got " + name);
  }
  const auto target = illuminance_target();
  return execute_runs(plan, {Architecture::centralized}, &target);
}

}  // namespace edgeiq
