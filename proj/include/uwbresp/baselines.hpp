#pragma once

#include <stdexcept>
#include <vector>

#include "uwbresp/types.hpp"

namespace uwbresp {

/// Raised when a trace does not determine an arc: collinear, too few points, or
/// a fit residual above the usable threshold.
class ArcUnidentifiable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Complex slow-time trace of one window channel.
Eigen::VectorXcd channel_trace(const SlowTimeWindow& window, Index channel);

/// Channel of the localized subject bin inside the window.
Index subject_channel(const SlowTimeWindow& window);

Waveform project_amplitude(const Eigen::VectorXcd& trace);
Waveform project_phase(const Eigen::VectorXcd& trace);
Waveform project_amplitude(const SlowTimeWindow& window);
Waveform project_phase(const SlowTimeWindow& window);

/// Adds the 2 pi multiple that keeps successive differences within (-pi, pi].
Waveform unwrap(const Waveform& phase);

/// Second-order IIR section, transposed direct form II, a0 == 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

/// Butterworth band-pass as cascaded high-pass and low-pass sections.
std::vector<Biquad> butterworth_bandpass(double low_hz, double high_hz, double frame_rate, int order_per_edge = 6);

/// Zero-phase forward-backward filtering with odd reflection padding and
/// steady-state initial conditions.
Waveform filtfilt(const std::vector<Biquad>& sections, const Waveform& x, Index pad = -1);

Waveform bandpass_baseline(const Waveform& w, double frame_rate, double low_hz = kBreathBandLow,
                           double high_hz = kBreathBandHigh);

struct CircleFit {
  Eigen::Vector2d center;
  double radius = 0.0;
  double residual = 0.0;  // mean squared orthogonal distance
};

/// Algebraic fit refined by Gauss-Newton on the geometric distance.
CircleFit fit_circle(const Eigen::VectorXcd& trace);

struct EllipseFit {
  Eigen::Vector2d center;
  Eigen::Vector2d axes;  // semi-axes, a >= b
  double tilt = 0.0;     // radians, major axis direction
  double residual = 0.0; // mean squared orthogonal distance (Sampson approximation)
  bool circular = false; // circle fallback was used
};

/// Direct least-squares conic fit restricted to ellipses. Throws
/// ArcUnidentifiable for degenerate traces.
EllipseFit fit_ellipse(const Eigen::VectorXcd& trace);

struct ArcFitOptions {
  /// Ellipse used only when the trace subtends at least this angle around its circle centre.
  double min_ellipse_span = kPi;
  /// Maximum residual over squared radius before the arc counts as unidentifiable.
  double max_relative_residual = 0.1;
  bool enforce_residual = true;
};

/// Fits the arc, chooses circle or ellipse, and reports the final geometry.
EllipseFit fit_arc(const Eigen::VectorXcd& trace, const ArcFitOptions& options = {});

/// Recentred, arctangent-demodulated displacement lambda * phi / (4 pi), zero mean.
Waveform fit_ellipse_arctan(const Eigen::VectorXcd& trace, double wavelength, const ArcFitOptions& options = {},
                            EllipseFit* fit_out = nullptr);
Waveform fit_ellipse_arctan(const SlowTimeWindow& window, double wavelength, const ArcFitOptions& options = {},
                            EllipseFit* fit_out = nullptr);

}  // namespace uwbresp
