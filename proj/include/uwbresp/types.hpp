#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace uwbresp {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Real, uniformly sampled 1-D sequence (displacement, flow or network output).
using Waveform = Eigen::VectorXd;

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

/// Lower and upper edge of the physiological breathing band in Hz.
inline constexpr double kBreathBandLow = 0.16;
inline constexpr double kBreathBandHigh = 0.6;

/// Radar signal matrix, fast-time bins x slow-time frames, stored as separate
/// in-phase and quadrature planes.
struct ComplexMatrix {
  Eigen::MatrixXd i;
  Eigen::MatrixXd q;
  double frame_rate = 50.0;
  double bin_spacing = 0.1;

  ComplexMatrix() = default;
  ComplexMatrix(Index bins, Index frames, double rate, double spacing)
      : i(Eigen::MatrixXd::Zero(bins, frames)),
        q(Eigen::MatrixXd::Zero(bins, frames)),
        frame_rate(rate),
        bin_spacing(spacing) {}

  Index bins() const { return i.rows(); }
  Index frames() const { return i.cols(); }
  std::complex<double> at(Index bin, Index frame) const { return {i(bin, frame), q(bin, frame)}; }
  void set(Index bin, Index frame, std::complex<double> v) {
    i(bin, frame) = v.real();
    q(bin, frame) = v.imag();
  }
  bool all_finite() const { return i.allFinite() && q.allFinite(); }
};

/// Multi-bin slow-time sub-matrix around the subject. Rows are fast-time bins,
/// columns are slow-time frames.
struct SlowTimeWindow {
  Eigen::MatrixXd i;
  Eigen::MatrixXd q;
  Index center_bin = 0;
  Index first_bin = 0;
  /// Detected subject bin; may differ from center_bin when the window was clamped.
  Index subject_bin = -1;
  double frame_rate = 50.0;

  Index channels() const { return i.rows(); }
  Index frames() const { return i.cols(); }
  bool all_finite() const { return i.allFinite() && q.allFinite(); }
};

}  // namespace uwbresp
