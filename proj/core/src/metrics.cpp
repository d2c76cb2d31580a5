#include "confope/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace confope {

namespace {

void check_inputs(const std::vector<double>& estimates, double truth,
                  const char* fn) {
  if (estimates.empty())
    throw std::invalid_argument(std::string(fn) + ": no estimates");
  if (truth == 0.0)
    throw std::invalid_argument(std::string(fn) + ": truth must be nonzero");
}

}  // namespace

double relative_bias(const std::vector<double>& estimates, double truth) {
  check_inputs(estimates, truth, "relative_bias");
  double acc = 0.0;
  for (double e : estimates) acc += e / truth;
  return std::abs(acc / static_cast<double>(estimates.size()) - 1.0);
}

double relative_mse(const std::vector<double>& estimates, double truth) {
  check_inputs(estimates, truth, "relative_mse");
  double acc = 0.0;
  for (double e : estimates) {
    const double rel = (e - truth) / truth;
    acc += rel * rel;
  }
  return acc / static_cast<double>(estimates.size());
}

double ci_halfwidth(const std::vector<double>& estimates, double truth) {
  check_inputs(estimates, truth, "ci_halfwidth");
  const std::size_t r = estimates.size();
  if (r < 2) return 0.0;
  double mean = 0.0;
  for (double e : estimates) mean += e / truth;
  mean /= static_cast<double>(r);
  double var = 0.0;
  for (double e : estimates) {
    const double d = e / truth - mean;
    var += d * d;
  }
  var /= static_cast<double>(r - 1);
  return 2.0 * std::sqrt(var / static_cast<double>(r));
}

}  // namespace confope
