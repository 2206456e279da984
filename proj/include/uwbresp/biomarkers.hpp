#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uwbresp/types.hpp"

namespace uwbresp {

struct RateEstimate {
  double hz = 0.0;
  /// In-band peak magnitude over the strongest non-DC magnitude of the whole spectrum.
  double in_band_dominance = 0.0;
  /// Set when the in-band peak is weaker than half the global peak.
  bool low_dominance = false;
};

/// Respiratory rate from the Hann-windowed spectrum restricted to the
/// breathing band, refined by a parabola through the log-magnitude.
RateEstimate estimate_rate_fft(const Waveform& w, double frame_rate);

struct CycleEvents {
  std::vector<double> peak_times;    // s
  std::vector<double> valley_times;  // s
  std::vector<Index> peak_index;
  std::vector<Index> valley_index;
  /// Number of equal-height same-type neighbours resolved by keeping the earlier one.
  int ties_resolved = 0;

  bool alternates() const;
};

inline constexpr double kMinCycleSeconds = 1.0 / kBreathBandHigh;

/// Peaks and valleys with prominence >= 0.5 std, spaced at least
/// `min_separation`, forced to alternate.
CycleEvents detect_cycles(const Waveform& w, double frame_rate, double min_separation = kMinCycleSeconds);

struct Timings {
  std::vector<double> t_tc;       // successive peak differences
  std::vector<double> t_i;        // each peak minus its preceding valley
  std::vector<double> t_e;        // each valley minus its preceding peak
  // Peak-to-peak cycles: valley v_k between p_k and p_{k+1}.
  std::vector<double> cycle_t_i;  // p_{k+1} - v_k
  std::vector<double> cycle_t_e;  // v_k - p_k
  std::vector<double> ie_ratio;   // cycle_t_i / cycle_t_e
  std::vector<double> rate_instantaneous;  // 1 / t_tc
  std::string reason;             // non-empty when the events were insufficient

  bool empty() const { return t_tc.empty(); }
};

Timings compute_timings(const CycleEvents& ev);

/// Peak value minus preceding valley value, one entry per peak that has one.
std::vector<double> tidal_volume(const Waveform& w, const CycleEvents& ev);

/// Smooth noise-robust differentiator taps b_1..b_M for an odd window of N >= 5 points.
std::vector<double> differentiator_coefficients(int taps);

/// q(n) = (c / h) sum_k b_k (w(n+k) - w(n-k)), with point-symmetric reflection at the edges.
Waveform flow(const Waveform& w, int taps = 7, double h = 0.02, double c = 1.0);

struct LoopPoint {
  double volume;
  double flow;
};

std::vector<LoopPoint> flow_volume_loop(const Waveform& volume, const Waveform& flow);

/// Scales each axis of a loop by its maximum magnitude.
std::vector<LoopPoint> normalize_loop(const std::vector<LoopPoint>& loop);

struct LoopStats {
  double area = 0.0;       // shoelace area of the normalized loop
  double asymmetry = 0.0;  // (peak inspiratory flow - peak expiratory flow) / their sum
};

LoopStats loop_stats(const std::vector<LoopPoint>& loop);

struct BiomarkerReport {
  RateEstimate rate_fft;
  CycleEvents events;
  Timings timings;
  std::vector<double> tidal_volume;
  Waveform flow;
  double frame_rate = 50.0;

  nlohmann::json to_json() const;
  /// One row per peak-to-peak cycle.
  std::string cycles_csv() const;
};

BiomarkerReport analyze(const Waveform& w, double frame_rate, int flow_taps = 7);

}  // namespace uwbresp
