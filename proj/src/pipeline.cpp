#include "uwbresp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace uwbresp {

LoopbackResult loopback_filter(const ComplexMatrix& matrix, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("loopback beta must lie in (0, 1)");
  LoopbackResult out;
  out.clutter = matrix;
  const Index frames = matrix.frames();
  for (Index n = 1; n < frames; ++n) {
    out.clutter.i.col(n) = beta * out.clutter.i.col(n - 1) + (1.0 - beta) * matrix.i.col(n);
    out.clutter.q.col(n) = beta * out.clutter.q.col(n - 1) + (1.0 - beta) * matrix.q.col(n);
  }
  out.residual = matrix;
  out.residual.i -= out.clutter.i;
  out.residual.q -= out.clutter.q;
  return out;
}

void CfarParams::validate() const {
  if (train_cells < 1) throw std::invalid_argument("CFAR train_cells must be at least 1");
  if (guard_cells < 0) throw std::invalid_argument("CFAR guard_cells must be non-negative");
  if (!(threshold_scale > 0.0)) throw std::invalid_argument("CFAR threshold_scale must be positive");
}

Eigen::VectorXd cfar_statistic(const ComplexMatrix& residual) {
  if (residual.bins() == 0 || residual.frames() == 0) throw std::invalid_argument("CFAR input is empty");
  return (residual.i.array().square() + residual.q.array().square()).sqrt().rowwise().mean();
}

std::vector<Index> cfar_detect_statistic(const Eigen::VectorXd& statistic, const CfarParams& params) {
  params.validate();
  const Index n = statistic.size();
  if (n == 0) throw std::invalid_argument("CFAR input is empty");
  if (n < params.window_width()) {
    std::ostringstream os;
    os << "CFAR needs at least " << params.window_width() << " bins, got " << n;
    throw std::invalid_argument(os.str());
  }
  const Index near = params.guard_cells + 1;
  const Index far = params.guard_cells + params.train_cells;
  std::vector<Index> hits;
  for (Index b = 0; b < n; ++b) {
    double sum = 0.0;
    Index count = 0;
    for (Index d = near; d <= far; ++d) {
      if (b - d >= 0) sum += statistic(b - d), ++count;
      if (b + d < n) sum += statistic(b + d), ++count;
    }
    if (count > 0 && statistic(b) > params.threshold_scale * sum / static_cast<double>(count)) hits.push_back(b);
  }
  std::stable_sort(hits.begin(), hits.end(), [&](Index a, Index b) { return statistic(a) > statistic(b); });
  return hits;
}

std::vector<Index> cfar_detect(const ComplexMatrix& residual, const CfarParams& params) {
  return cfar_detect_statistic(cfar_statistic(residual), params);
}

SlowTimeWindow extract_window(const ComplexMatrix& matrix, Index center_bin, Index half_width) {
  if (half_width < 0 || center_bin - half_width < 0 || center_bin + half_width >= matrix.bins()) {
    std::ostringstream os;
    os << "window [" << center_bin - half_width << ", " << center_bin + half_width << "] outside bins [0, "
       << matrix.bins() - 1 << "]";
    throw std::out_of_range(os.str());
  }
  SlowTimeWindow w;
  const Index rows = 2 * half_width + 1;
  w.first_bin = center_bin - half_width;
  w.center_bin = center_bin;
  w.frame_rate = matrix.frame_rate;
  w.i = matrix.i.middleRows(w.first_bin, rows);
  w.q = matrix.q.middleRows(w.first_bin, rows);
  return w;
}

SlowTimeWindow rotate_iq(const SlowTimeWindow& window, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  SlowTimeWindow out = window;
  out.i = c * window.i - s * window.q;
  out.q = s * window.i + c * window.q;
  return out;
}

std::vector<SlowTimeWindow> augment(const SlowTimeWindow& window, int count) {
  if (count < 1) throw std::invalid_argument("augment count must be at least 1");
  std::vector<SlowTimeWindow> out;
  out.reserve(static_cast<std::size_t>(count));
  out.push_back(window);
  for (int k = 1; k < count; ++k) out.push_back(rotate_iq(window, 2.0 * kPi * k / count));
  return out;
}

Index locate_subject(const ComplexMatrix& matrix, const LocalizerConfig& config) {
  const auto lb = loopback_filter(matrix, config.beta);
  const Eigen::VectorXd stat = cfar_statistic(lb.residual);
  const auto hits = cfar_detect_statistic(stat, config.cfar);
  Index center = 0;
  if (!hits.empty()) {
    center = hits.front();
  } else {
    stat.maxCoeff(&center);
  }
  return center;
}

SlowTimeWindow preprocess(const ComplexMatrix& matrix, const LocalizerConfig& config) {
  const Index hw = config.half_width;
  if (matrix.bins() < 2 * hw + 1) throw std::invalid_argument("matrix has fewer bins than the window");
  const Index subject = locate_subject(matrix, config);
  SlowTimeWindow w = extract_window(matrix, std::clamp(subject, hw, matrix.bins() - 1 - hw), hw);
  w.subject_bin = subject;
  return w;
}

SlowTimeWindow normalize_window(const SlowTimeWindow& window) {
  SlowTimeWindow out = window;
  out.i.colwise() -= out.i.rowwise().mean();
  out.q.colwise() -= out.q.rowwise().mean();
  const double count = static_cast<double>(2 * out.i.size());
  const double rms = std::sqrt((out.i.squaredNorm() + out.q.squaredNorm()) / std::max(count, 1.0));
  if (rms > 0.0) {
    out.i /= rms;
    out.q /= rms;
  }
  return out;
}

Waveform standardize(const Waveform& w) {
  if (w.size() == 0) return w;
  Waveform out = w.array() - w.mean();
  const double sd = std::sqrt(out.squaredNorm() / static_cast<double>(w.size()));
  if (sd > 0.0) out /= sd;
  return out;
}

}  // namespace uwbresp
