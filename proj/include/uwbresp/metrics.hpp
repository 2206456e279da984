#pragma once

#include <utility>
#include <vector>

#include "uwbresp/biomarkers.hpp"
#include "uwbresp/types.hpp"

namespace uwbresp {

/// dot(a, b) / (|a| |b|) after removing each mean. Throws on length mismatch
/// or a zero-norm (constant) input.
double cosine_similarity(const Waveform& a, const Waveform& b);

struct EventMatch {
  std::vector<double> errors;  // |t_est - t_true| of matched pairs, s
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (estimate, truth) positions, same order as errors
  int misses = 0;              // true events left unmatched
  int false_alarms = 0;        // estimated events left unmatched
};

/// Greedy nearest-first pairing of two timestamp lists within `gate` seconds.
EventMatch match_events(const std::vector<double>& est, const std::vector<double>& truth,
                        double gate = kMinCycleSeconds);

struct TimingErrors {
  EventMatch peaks;
  EventMatch valleys;
};

TimingErrors timing_errors(const CycleEvents& est, const CycleEvents& truth, double gate = kMinCycleSeconds);

/// Absolute rate difference in breaths per minute.
double rate_error(double est_hz, double truth_hz);

/// |est - truth| / truth; truth must be positive.
double volume_error(double est, double truth);

double median(std::vector<double> v);
double mean(const std::vector<double>& v);

}  // namespace uwbresp
