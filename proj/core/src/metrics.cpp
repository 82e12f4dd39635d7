#include "edgeiq/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace edgeiq {

ConfusionMatrix confusion(std::span<const int> expected,
                          std::span<const int> estimated) {
  if (expected.size() != estimated.size()) {
    throw std::invalid_argument("confusion: label lists differ in length");
  }
  if (expected.empty()) {
    throw std::invalid_argument("confusion: empty label lists");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const bool exp = expected[i] != 0;
    const bool est = estimated[i] != 0;
    if (est && exp) ++cm.tp;
    else if (est && !exp) ++cm.fp;
    else if (!est && exp) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

double precision(const ConfusionMatrix& cm) {
  const auto denom = cm.tp + cm.fp;
  return denom == 0 ? 0.0 : static_cast<double>(cm.tp) / denom;
}

double recall(const ConfusionMatrix& cm) {
  const auto denom = cm.tp + cm.fn;
  return denom == 0 ? 0.0 : static_cast<double>(cm.tp) / denom;
}

double f_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
}

double f_score(const ConfusionMatrix& cm) {
  return f_score(precision(cm), recall(cm));
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) {
    throw std::invalid_argument("accuracy: empty confusion matrix");
  }
  return static_cast<double>(cm.tp + cm.tn) / total;
}

double rmse(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size() || y.empty()) {
    throw std::invalid_argument("rmse: vectors must be equal non-empty length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y_hat[i] - y[i];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size() || y.empty()) {
    throw std::invalid_argument("mae: vectors must be equal non-empty length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum += std::abs(y_hat[i] - y[i]);
  }
  return sum / static_cast<double>(y.size());
}

double speedup(const TimingPair& t) {
  if (!(t.t_s > 0.0) || !(t.t_p > 0.0)) {
    throw std::invalid_argument("speedup: processing times must be positive");
  }
  return t.t_s / t.t_p;
}

double efficiency(const TimingPair& t) {
  if (t.processors < 1) {
    throw std::invalid_argument("efficiency: processor count must be positive");
  }
  return speedup(t) / t.processors;
}

}  // namespace edgeiq
