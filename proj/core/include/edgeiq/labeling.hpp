#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

namespace edgeiq {

/// Valid range and clamp levels for expected outputs. The temperature
/// default marks means inside [26, 31] degrees Celsius as valid and clamps
/// everything else to the nearest bound.
struct LabelingRule {
  double lo = 26.0;
  double hi = 31.0;
};

struct LabeledExample {
  std::vector<double> x;  // node measurements, one entry per edge node
  double y = 0.0;         // expected output, target units
  int label = 0;          // 1 valid, 0 clamped/invalid

  bool operator==(const LabeledExample&) const = default;
};

/// Mean of the three inputs; in range it is returned as-is with label 1,
/// otherwise the nearer bound is returned with label 0.
std::pair<double, int> expected_output(double x1, double x2, double x3,
                                       const LabelingRule& rule = {});

/// 1 when |y - y_hat| <= tol (boundary inclusive), else 0.
int label_estimate(double y, double y_hat, double tol);

/// Seeded shuffle, then the first ceil(train_fraction * n) examples form the
/// training split and the remainder the test split.
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>>
split_dataset(const std::vector<LabeledExample>& data, double train_fraction,
              std::uint64_t seed);

/// Sensor operating range used for outlier rejection before labeling.
struct OperatingRange {
  double lo = -20.0;
  double hi = 85.0;
};

/// True when every input lies inside the operating range.
bool within_operating_range(const std::vector<double>& x,
                            const OperatingRange& range = {});

/// "x1,x2,...,y,label" records, one per line.
void write_examples_csv(std::ostream& out,
                        const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> read_examples_csv(std::istream& in);

}  // namespace edgeiq
