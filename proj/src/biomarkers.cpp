#include "uwbresp/biomarkers.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>

#include <unsupported/Eigen/FFT>

namespace uwbresp {

RateEstimate estimate_rate_fft(const Waveform& w, double frame_rate) {
  const Index n = w.size();
  const double min_seconds = 2.0 / kBreathBandLow;
  if (static_cast<double>(n) / frame_rate < min_seconds - 1e-9) {
    std::ostringstream os;
    os << "rate estimation needs at least " << min_seconds << " s, got " << static_cast<double>(n) / frame_rate;
    throw std::invalid_argument(os.str());
  }
  std::vector<double> x(static_cast<std::size_t>(n));
  const double mean = w.mean();
  for (Index k = 0; k < n; ++k)
    x[static_cast<std::size_t>(k)] = (w(k) - mean) * (0.5 - 0.5 * std::cos(2.0 * kPi * k / static_cast<double>(n)));
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, x);

  const Index half = n / 2;
  Eigen::VectorXd mag(half + 1);
  for (Index k = 0; k <= half; ++k) mag(k) = std::abs(spec[static_cast<std::size_t>(k)]);

  const double df = frame_rate / static_cast<double>(n);
  const Index k_lo = std::max<Index>(1, static_cast<Index>(std::ceil(kBreathBandLow / df - 1e-9)));
  const Index k_hi = std::min<Index>(half - 1, static_cast<Index>(std::floor(kBreathBandHigh / df + 1e-9)));
  Index best = k_lo;
  for (Index k = k_lo; k <= k_hi; ++k)
    if (mag(k) > mag(best)) best = k;

  RateEstimate out;
  const double global = mag.tail(half).maxCoeff();
  const double floor = 1e-300 + 1e-12 * global;
  const double a = std::log(mag(best - 1) + floor), b = std::log(mag(best) + floor), c = std::log(mag(best + 1) + floor);
  const double denom = a - 2.0 * b + c;
  const double delta = denom < 0.0 ? std::clamp(0.5 * (a - c) / denom, -0.5, 0.5) : 0.0;
  out.hz = std::clamp((static_cast<double>(best) + delta) * df, kBreathBandLow, kBreathBandHigh);
  out.in_band_dominance = global > 0.0 ? mag(best) / global : 0.0;
  out.low_dominance = out.in_band_dominance < 0.5;
  return out;
}

bool CycleEvents::alternates() const {
  std::vector<std::pair<double, int>> all;
  for (double t : peak_times) all.emplace_back(t, 1);
  for (double t : valley_times) all.emplace_back(t, -1);
  std::sort(all.begin(), all.end());
  for (std::size_t k = 1; k < all.size(); ++k)
    if (all[k].second == all[k - 1].second) return false;
  return true;
}

namespace {

Eigen::VectorXd gaussian_smooth(const Waveform& w, double sigma) {
  const Index n = w.size();
  const Index radius = std::max<Index>(1, static_cast<Index>(std::ceil(4.0 * sigma)));
  Eigen::VectorXd kernel(2 * radius + 1);
  for (Index k = -radius; k <= radius; ++k) kernel(k + radius) = std::exp(-0.5 * (k / sigma) * (k / sigma));
  kernel /= kernel.sum();
  auto at = [&](Index k) {
    // Even reflection about the end samples.
    while (k < 0 || k >= n) k = k < 0 ? -k : 2 * (n - 1) - k;
    return w(k);
  };
  Eigen::VectorXd out(n);
  for (Index t = 0; t < n; ++t) {
    double s = 0.0;
    for (Index k = -radius; k <= radius; ++k) s += kernel(k + radius) * at(t + k);
    out(t) = s;
  }
  return out;
}

struct Extremum {
  Index index;
  double height;  // signed so that larger is more extreme
  bool peak;
};

std::vector<Extremum> find_extrema(const Eigen::VectorXd& x, bool peaks, double min_prominence, Index min_distance) {
  const Index n = x.size();
  const double sign = peaks ? 1.0 : -1.0;
  auto h = [&](Index k) { return sign * x(k); };
  std::vector<Extremum> cand;
  for (Index i = 1; i + 1 < n; ++i) {
    if (!(h(i) > h(i - 1) && h(i) >= h(i + 1))) continue;
    double left_min = h(i), right_min = h(i);
    for (Index j = i - 1; j >= 0 && h(j) <= h(i); --j) left_min = std::min(left_min, h(j));
    for (Index j = i + 1; j < n && h(j) <= h(i); ++j) right_min = std::min(right_min, h(j));
    const double prominence = h(i) - std::max(left_min, right_min);
    if (prominence >= min_prominence) cand.push_back({i, h(i), peaks});
  }
  // Greedy suppression by height; ties favour the earlier index.
  std::vector<std::size_t> order(cand.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cand[a].height > cand[b].height; });
  std::vector<bool> removed(cand.size(), false);
  std::vector<Extremum> kept;
  for (std::size_t oi : order) {
    if (removed[oi]) continue;
    kept.push_back(cand[oi]);
    for (std::size_t j = 0; j < cand.size(); ++j)
      if (j != oi && std::abs(cand[j].index - cand[oi].index) < min_distance) removed[j] = true;
  }
  std::sort(kept.begin(), kept.end(), [](const Extremum& a, const Extremum& b) { return a.index < b.index; });
  return kept;
}

double refine(const Eigen::VectorXd& x, Index i) {
  if (i <= 0 || i + 1 >= x.size()) return static_cast<double>(i);
  const double a = x(i - 1), b = x(i), c = x(i + 1);
  const double denom = a - 2.0 * b + c;
  if (denom == 0.0) return static_cast<double>(i);
  return static_cast<double>(i) + std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
}

}  // namespace

CycleEvents detect_cycles(const Waveform& w, double frame_rate, double min_separation) {
  CycleEvents ev;
  const Index n = w.size();
  if (n < 3) return ev;
  const double sd = std::sqrt((w.array() - w.mean()).square().mean());
  if (!(sd > 0.0)) return ev;

  // Smoothing biases the extrema of asymmetric cycles, so it is scaled by the
  // sample noise, read off the second differences (robust MAD estimate).
  std::vector<double> d2(static_cast<std::size_t>(n - 2));
  for (Index k = 1; k + 1 < n; ++k) d2[static_cast<std::size_t>(k - 1)] = std::abs(w(k + 1) - 2.0 * w(k) + w(k - 1));
  std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2), d2.end());
  const double noise = d2[d2.size() / 2] / 0.6745 / std::sqrt(6.0);
  const double max_sigma = std::max(1.0, min_separation * frame_rate / 8.0);
  const double sigma = 1.0 + (max_sigma - 1.0) * std::min(1.0, noise / (0.02 * sd));
  const Eigen::VectorXd x = gaussian_smooth(w, sigma);
  const double sx = std::sqrt((x.array() - x.mean()).square().mean());
  const Index min_distance = std::max<Index>(1, static_cast<Index>(std::llround(min_separation * frame_rate)));
  auto peaks = find_extrema(x, true, 0.5 * sx, min_distance);
  auto valleys = find_extrema(x, false, 0.5 * sx, min_distance);

  std::vector<Extremum> all;
  all.insert(all.end(), peaks.begin(), peaks.end());
  all.insert(all.end(), valleys.begin(), valleys.end());
  std::sort(all.begin(), all.end(), [](const Extremum& a, const Extremum& b) { return a.index < b.index; });

  std::vector<Extremum> seq;
  for (const auto& e : all) {
    if (!seq.empty() && seq.back().peak == e.peak) {
      if (e.height > seq.back().height) seq.back() = e;
      else if (e.height == seq.back().height) ++ev.ties_resolved;
      continue;
    }
    seq.push_back(e);
  }
  for (const auto& e : seq) {
    const double t = refine(x, e.index) / frame_rate;
    if (e.peak) {
      ev.peak_times.push_back(t);
      ev.peak_index.push_back(e.index);
    } else {
      ev.valley_times.push_back(t);
      ev.valley_index.push_back(e.index);
    }
  }
  return ev;
}

Timings compute_timings(const CycleEvents& ev) {
  Timings out;
  const auto& p = ev.peak_times;
  const auto& v = ev.valley_times;
  if (p.size() < 2) {
    out.reason = "need at least two peaks, found " + std::to_string(p.size());
    return out;
  }
  for (std::size_t k = 1; k < p.size(); ++k) {
    out.t_tc.push_back(p[k] - p[k - 1]);
    out.rate_instantaneous.push_back(1.0 / (p[k] - p[k - 1]));
  }
  auto last_before = [](const std::vector<double>& xs, double t) -> const double* {
    const double* best = nullptr;
    for (const double& x : xs)
      if (x < t) best = &x;
    return best;
  };
  for (double tp : p)
    if (const double* tv = last_before(v, tp)) out.t_i.push_back(tp - *tv);
  for (double tv : v)
    if (const double* tp = last_before(p, tv)) out.t_e.push_back(tv - *tp);
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    const double* tv = last_before(v, p[k + 1]);
    if (tv == nullptr || *tv <= p[k]) {
      out.cycle_t_i.push_back(std::nan(""));
      out.cycle_t_e.push_back(std::nan(""));
      out.ie_ratio.push_back(std::nan(""));
      continue;
    }
    out.cycle_t_i.push_back(p[k + 1] - *tv);
    out.cycle_t_e.push_back(*tv - p[k]);
    out.ie_ratio.push_back(out.cycle_t_i.back() / out.cycle_t_e.back());
  }
  return out;
}

std::vector<double> tidal_volume(const Waveform& w, const CycleEvents& ev) {
  std::vector<double> out;
  for (Index pi : ev.peak_index) {
    Index prev = -1;
    for (Index vi : ev.valley_index)
      if (vi < pi) prev = vi;
    if (prev >= 0) out.push_back(w(pi) - w(prev));
  }
  return out;
}

std::vector<double> differentiator_coefficients(int taps) {
  if (taps < 5 || taps % 2 == 0) throw std::invalid_argument("differentiator needs an odd number of taps >= 5");
  const int m = (taps - 3) / 2;
  const int big_m = (taps - 1) / 2;
  auto binom = [](int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
    return r;
  };
  const double scale = std::ldexp(1.0, -(2 * m + 1));
  std::vector<double> b(static_cast<std::size_t>(big_m));
  for (int k = 1; k <= big_m; ++k) b[static_cast<std::size_t>(k - 1)] = scale * (binom(2 * m, m - k + 1) - binom(2 * m, m - k - 1));
  return b;
}

Waveform flow(const Waveform& w, int taps, double h, double c) {
  const auto b = differentiator_coefficients(taps);
  const Index n = w.size();
  const Index big_m = static_cast<Index>(b.size());
  if (n <= taps) throw std::invalid_argument("waveform must be longer than the differentiator window");
  if (!(h > 0.0)) throw std::invalid_argument("sample interval must be positive");
  auto at = [&](Index k) {
    if (k < 0) return 2.0 * w(0) - w(-k);
    if (k >= n) return 2.0 * w(n - 1) - w(2 * (n - 1) - k);
    return w(k);
  };
  Waveform q(n);
  for (Index t = 0; t < n; ++t) {
    double s = 0.0;
    for (Index k = 1; k <= big_m; ++k) s += b[static_cast<std::size_t>(k - 1)] * (at(t + k) - at(t - k));
    q(t) = c / h * s;
  }
  return q;
}

std::vector<LoopPoint> flow_volume_loop(const Waveform& volume, const Waveform& flow_trace) {
  if (volume.size() != flow_trace.size()) throw std::invalid_argument("volume and flow must have equal lengths");
  std::vector<LoopPoint> loop(static_cast<std::size_t>(volume.size()));
  for (Index k = 0; k < volume.size(); ++k) loop[static_cast<std::size_t>(k)] = {volume(k), flow_trace(k)};
  return loop;
}

std::vector<LoopPoint> normalize_loop(const std::vector<LoopPoint>& loop) {
  double vmax = 0.0, fmax = 0.0;
  for (const auto& p : loop) {
    vmax = std::max(vmax, std::abs(p.volume));
    fmax = std::max(fmax, std::abs(p.flow));
  }
  std::vector<LoopPoint> out = loop;
  for (auto& p : out) {
    if (vmax > 0.0) p.volume /= vmax;
    if (fmax > 0.0) p.flow /= fmax;
  }
  return out;
}

LoopStats loop_stats(const std::vector<LoopPoint>& loop) {
  LoopStats s;
  if (loop.size() < 3) return s;
  const auto norm = normalize_loop(loop);
  double area2 = 0.0;
  double fmax = 0.0, fmin = 0.0;
  for (std::size_t k = 0; k < norm.size(); ++k) {
    const auto& a = norm[k];
    const auto& b = norm[(k + 1) % norm.size()];
    area2 += a.volume * b.flow - b.volume * a.flow;
    fmax = std::max(fmax, loop[k].flow);
    fmin = std::min(fmin, loop[k].flow);
  }
  s.area = 0.5 * std::abs(area2);
  const double span = fmax - fmin;
  s.asymmetry = span > 0.0 ? (fmax + fmin) / span : 0.0;
  return s;
}

nlohmann::json BiomarkerReport::to_json() const {
  auto clean = [](const std::vector<double>& xs) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : xs) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
    return a;
  };
  return nlohmann::json{{"frame_rate", frame_rate},
                        {"rate_fft_hz", rate_fft.hz},
                        {"rate_fft_bpm", rate_fft.hz * 60.0},
                        {"in_band_dominance", rate_fft.in_band_dominance},
                        {"low_dominance", rate_fft.low_dominance},
                        {"peak_times", clean(events.peak_times)},
                        {"valley_times", clean(events.valley_times)},
                        {"ties_resolved", events.ties_resolved},
                        {"t_tc", clean(timings.t_tc)},
                        {"t_i", clean(timings.cycle_t_i)},
                        {"t_e", clean(timings.cycle_t_e)},
                        {"ie_ratio", clean(timings.ie_ratio)},
                        {"rate_instantaneous", clean(timings.rate_instantaneous)},
                        {"tidal_volume", clean(tidal_volume)},
                        {"timing_note", timings.reason}};
}

std::string BiomarkerReport::cycles_csv() const {
  std::ostringstream os;
  os << "cycle,t_tc,t_i,t_e,ie_ratio,rate_hz,tidal_volume\n";
  for (std::size_t k = 0; k < timings.t_tc.size(); ++k) {
    os << k << ',' << timings.t_tc[k] << ',' << timings.cycle_t_i[k] << ',' << timings.cycle_t_e[k] << ','
       << timings.ie_ratio[k] << ',' << timings.rate_instantaneous[k] << ',';
    if (k < tidal_volume.size()) os << tidal_volume[k];
    os << '\n';
  }
  return os.str();
}

BiomarkerReport analyze(const Waveform& w, double frame_rate, int flow_taps) {
  BiomarkerReport r;
  r.frame_rate = frame_rate;
  r.rate_fft = estimate_rate_fft(w, frame_rate);
  r.events = detect_cycles(w, frame_rate);
  r.timings = compute_timings(r.events);
  r.tidal_volume = tidal_volume(w, r.events);
  r.flow = flow(w, flow_taps, 1.0 / frame_rate, 1.0);
  return r;
}

}  // namespace uwbresp
