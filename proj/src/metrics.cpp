#include "uwbresp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace uwbresp {

double cosine_similarity(const Waveform& a, const Waveform& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
  const Eigen::ArrayXd x = a.array() - a.mean();
  const Eigen::ArrayXd y = b.array() - b.mean();
  const double nx = std::sqrt((x * x).sum()), ny = std::sqrt((y * y).sum());
  if (!(nx > 0.0) || !(ny > 0.0)) throw std::invalid_argument("cosine_similarity: zero-norm input");
  return std::clamp((x * y).sum() / (nx * ny), -1.0, 1.0);
}

EventMatch match_events(const std::vector<double>& est, const std::vector<double>& truth, double gate) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < est.size(); ++i)
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const double d = std::abs(est[i] - truth[j]);
      if (d <= gate) pairs.emplace_back(d, i, j);
    }
  std::sort(pairs.begin(), pairs.end());
  std::vector<bool> used_e(est.size(), false), used_t(truth.size(), false);
  EventMatch m;
  for (const auto& [d, i, j] : pairs) {
    if (used_e[i] || used_t[j]) continue;
    used_e[i] = used_t[j] = true;
    m.errors.push_back(d);
    m.pairs.emplace_back(i, j);
  }
  m.false_alarms = static_cast<int>(std::count(used_e.begin(), used_e.end(), false));
  m.misses = static_cast<int>(std::count(used_t.begin(), used_t.end(), false));
  return m;
}

TimingErrors timing_errors(const CycleEvents& est, const CycleEvents& truth, double gate) {
  return {match_events(est.peak_times, truth.peak_times, gate),
          match_events(est.valley_times, truth.valley_times, gate)};
}

double rate_error(double est_hz, double truth_hz) { return std::abs(est_hz - truth_hz) * 60.0; }

double volume_error(double est, double truth) {
  if (!(truth > 0.0)) throw std::invalid_argument("volume_error: truth must be positive");
  return std::abs(est - truth) / truth;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
  const double hi = v[h];
  if (v.size() % 2) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h)));
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace uwbresp
