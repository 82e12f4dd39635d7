#pragma once

#include <cstdint>
#include <span>

namespace edgeiq {

/// Counts under the estimated-vs-expected labelling convention: tp counts
/// (estimated 1, expected 1), fp (1, 0), fn (0, 1), tn (0, 0).
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> expected,
                          std::span<const int> estimated);

// Degenerate denominators return 0 by convention.
double precision(const ConfusionMatrix& cm);
double recall(const ConfusionMatrix& cm);
double f_score(const ConfusionMatrix& cm);
double f_score(double precision, double recall);
double accuracy(const ConfusionMatrix& cm);

double rmse(std::span<const double> y, std::span<const double> y_hat);
double mae(std::span<const double> y, std::span<const double> y_hat);

struct TimingPair {
  double t_s = 0.0;    // sequential wall seconds
  double t_p = 0.0;    // parallel wall seconds
  int processors = 1;
};

double speedup(const TimingPair& t);
double efficiency(const TimingPair& t);

}  // namespace edgeiq
