#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uwbresp/types.hpp"

namespace uwbresp {

struct RadarConfig {
  double carrier_frequency = 7.29e9;
  double frame_rate = 50.0;
  Index fast_time_bins = 138;
  /// Range resolution c / (2B) for a 1.5 GHz bandwidth.
  double bin_spacing = kSpeedOfLight / 2.0 / 1.5e9;
  /// Width of the Gaussian fast-time envelope; its standard deviation is half this value.
  double pulse_width_bins = 2.0;
  /// Standard deviation of the complex white noise, per component.
  double noise_std = 0.0;

  double wavelength() const { return kSpeedOfLight / carrier_frequency; }
  void validate() const;
};

enum class BreathKind { sinusoid, asymmetric, apnea };

struct RespirationProfile {
  BreathKind kind = BreathKind::sinusoid;
  double rate = 0.25;             // Hz
  double depth = 0.005;           // m
  double inhale_fraction = 0.5;   // asymmetric only
  double phase = 0.0;             // radians, shifts the cycle clock
  std::vector<std::pair<double, double>> apnea_spans;  // seconds
  /// Per-cycle depth multipliers in (0, 1]; cycled when shorter than the window.
  std::vector<double> cycle_depths;

  void validate(double duration) const;
};

enum class MotionKind { static_body, sporadic_burst, periodic_sway, strong_periodic, step_change, slow_roll };

inline constexpr MotionKind kAllMotionKinds[] = {MotionKind::static_body,     MotionKind::sporadic_burst,
                                                 MotionKind::periodic_sway,   MotionKind::strong_periodic,
                                                 MotionKind::step_change,     MotionKind::slow_roll};

std::string to_string(MotionKind kind);
MotionKind motion_kind_from_string(const std::string& name);
std::string to_string(BreathKind kind);
BreathKind breath_kind_from_string(const std::string& name);

/// Realized body-motion interference for one scene.
struct MotionProfile {
  MotionKind kind = MotionKind::static_body;
  /// Body background reflection, fast-time bins x frames.
  Eigen::MatrixXcd bbr_offset;
  /// Distance perturbation around the mean subject distance, metres per frame.
  Eigen::VectorXd distance_drift;
  /// Multiplier on the chest reflection strength, per frame.
  Eigen::VectorXd rcs;
  int bin_spread = 0;

  void validate(Index frames, Index bins) const;
};

struct ClutterReflector {
  double distance = 3.0;  // m
  double amplitude = 1.0;
};

struct Scene {
  double subject_distance = 1.0;  // mean distance, m
  double reflectivity = 1.0;      // chest reflection strength
  RespirationProfile respiration;
  MotionKind motion_kind = MotionKind::static_body;
  /// Scales the motion process amplitudes; 1 is the nominal level.
  double motion_intensity = 1.0;
  /// Stationary part of the body background reflection at the subject's range.
  std::complex<double> bbr_base{0.0, 0.0};
  std::vector<ClutterReflector> static_clutter;
  double duration = 20.0;  // s
  std::uint64_t rng_seed = 0;
  /// Overrides the generated motion process when set.
  std::optional<MotionProfile> motion;

  void validate() const;
};

/// Chest displacement z(n) for the given profile.
Waveform gen_respiration(const RespirationProfile& profile, double duration, double frame_rate);

/// Number of slow-time frames for a duration.
Index frame_count(double duration, double frame_rate);

/// Draws the motion traces for a scene from its seed.
MotionProfile gen_motion(const Scene& scene, const RadarConfig& config);

/// Gaussian fast-time envelope evaluated at a bin offset.
double pulse_envelope(double bin_offset, double pulse_width_bins);

struct SynthResult {
  ComplexMatrix matrix;
  Waveform truth;
  MotionProfile motion;
};

/// Synthesizes the signal matrix and ground-truth displacement for a scene.
SynthResult synth_matrix(const Scene& scene, const RadarConfig& config);

struct DatasetRecord {
  ComplexMatrix matrix;
  Waveform truth;
  std::size_t scene_index = 0;
  std::size_t window_index = 0;
  Scene scene;  // metadata; `motion` is not retained
};

struct Dataset {
  RadarConfig config;
  double window_s = 20.0;
  std::vector<DatasetRecord> records;
};

/// Synthesizes every scene and slices it into non-overlapping windows.
Dataset make_dataset(const std::vector<Scene>& scenes, const RadarConfig& config, double window_s = 20.0);

/// Parameter ranges for randomly drawn scenes.
struct SceneSampler {
  double duration = 20.0;
  double min_distance = 0.5;
  double max_distance = 2.0;
  double min_rate = 0.16;
  double max_rate = 0.6;
  double min_depth = 0.002;
  double max_depth = 0.005;
  double min_reflectivity = 0.6;
  double max_reflectivity = 1.2;
  double asymmetric_fraction = 0.4;
  double apnea_fraction = 0.1;
  int clutter_count = 3;
};

/// Draws a reproducible scene for the given motion kind.
Scene sample_scene(MotionKind kind, std::uint64_t seed, const SceneSampler& sampler = {});

}  // namespace uwbresp
