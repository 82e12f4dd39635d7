#include "edgeiq/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace edgeiq {

std::pair<double, int> expected_output(double x1, double x2, double x3,
                                       const LabelingRule& rule) {
  if (!std::isfinite(x1) || !std::isfinite(x2) || !std::isfinite(x3)) {
    throw std::invalid_argument("expected_output: inputs must be finite");
  }
  if (!(rule.lo < rule.hi)) {
    throw std::invalid_argument("labeling rule needs lo < hi");
  }
  const double mean = (x1 + x2 + x3) / 3.0;
  if (mean < rule.lo) return {rule.lo, 0};
  if (mean > rule.hi) return {rule.hi, 0};
  return {mean, 1};
}

int label_estimate(double y, double y_hat, double tol) {
  if (!std::isfinite(y) || !std::isfinite(y_hat)) {
    throw std::invalid_argument("label_estimate: values must be finite");
  }
  if (!(tol > 0.0)) {
    throw std::invalid_argument("label_estimate: tolerance must be positive");
  }
  return std::abs(y - y_hat) <= tol ? 1 : 0;
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>>
split_dataset(const std::vector<LabeledExample>& data, double train_fraction,
              std::uint64_t seed) {
  if (data.empty()) {
    throw std::invalid_argument("split_dataset: empty dataset");
  }
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
    throw std::invalid_argument("split_dataset: fraction must be in (0, 1)");
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto train_count = static_cast<std::size_t>(
      std::ceil(train_fraction * static_cast<double>(data.size())));

  std::vector<LabeledExample> train, test;
  train.reserve(train_count);
  test.reserve(data.size() - train_count);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < train_count ? train : test).push_back(data[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

bool within_operating_range(const std::vector<double>& x,
                            const OperatingRange& range) {
  return std::all_of(x.begin(), x.end(), [&](double v) {
    return std::isfinite(v) && v > range.lo && v < range.hi;
  });
}

void write_examples_csv(std::ostream& out,
                        const std::vector<LabeledExample>& examples) {
  char buf[40];
  for (const auto& ex : examples) {
    for (double v : ex.x) {
      std::snprintf(buf, sizeof(buf), "%.17g,", v);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g,%d\n", ex.y, ex.label);
    out << buf;
  }
}

std::vector<LabeledExample> read_examples_csv(std::istream& in) {
  std::vector<LabeledExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> fields;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      fields.push_back(std::stod(cell));
    }
    if (fields.size() < 3) {
      throw std::invalid_argument("example record needs x..., y, label");
    }
    LabeledExample ex;
    ex.label = static_cast<int>(fields.back());
    ex.y = fields[fields.size() - 2];
    ex.x.assign(fields.begin(), fields.end() - 2);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace edgeiq
