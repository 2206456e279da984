#pragma once

#include <vector>

#include "uwbresp/types.hpp"

namespace uwbresp {

struct LoopbackResult {
  ComplexMatrix clutter;
  ComplexMatrix residual;
};

/// First-order recursive clutter estimate c_n = beta c_{n-1} + (1 - beta) r_n,
/// seeded with the first frame, and the clutter-subtracted residual.
LoopbackResult loopback_filter(const ComplexMatrix& matrix, double beta = 0.9);

struct CfarParams {
  Index train_cells = 8;
  Index guard_cells = 2;
  double threshold_scale = 3.0;

  void validate() const;
  Index window_width() const { return 2 * (train_cells + guard_cells) + 1; }
};

/// Time-mean magnitude of each fast-time bin.
Eigen::VectorXd cfar_statistic(const ComplexMatrix& residual);

/// Cell-averaging detection on a precomputed per-bin statistic. Train cells that
/// fall outside the bin range are dropped. Detections come back strongest first.
std::vector<Index> cfar_detect_statistic(const Eigen::VectorXd& statistic, const CfarParams& params);

std::vector<Index> cfar_detect(const ComplexMatrix& residual, const CfarParams& params);

SlowTimeWindow extract_window(const ComplexMatrix& matrix, Index center_bin, Index half_width);

/// Rotates every (I, Q) sample by theta in the I/Q plane.
SlowTimeWindow rotate_iq(const SlowTimeWindow& window, double theta);

/// `count` rotations at k * 2 pi / count; element 0 is the input itself.
std::vector<SlowTimeWindow> augment(const SlowTimeWindow& window, int count);

struct LocalizerConfig {
  double beta = 0.9;
  CfarParams cfar;
  Index half_width = 8;
};

/// Loopback filter plus CFAR; falls back to the strongest bin when nothing
/// crosses the threshold.
Index locate_subject(const ComplexMatrix& matrix, const LocalizerConfig& config);

/// Localizes the subject and extracts its window from the raw matrix. The
/// window centre is clamped so that all channels exist.
SlowTimeWindow preprocess(const ComplexMatrix& matrix, const LocalizerConfig& config);

/// Network input conditioning: removes each channel's complex mean and scales
/// both planes by their joint RMS. Commutes with rotate_iq.
SlowTimeWindow normalize_window(const SlowTimeWindow& window);

/// Zero mean, unit variance; a constant input maps to zeros.
Waveform standardize(const Waveform& w);

}  // namespace uwbresp
