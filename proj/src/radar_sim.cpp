#include "uwbresp/radar_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uwbresp/rng.hpp"

namespace uwbresp {

namespace {

std::invalid_argument bad(const std::string& what) { return std::invalid_argument(what); }

constexpr std::uint64_t kMotionStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kSceneStream = 3;

/// Sum of random in-band sinusoids, scaled to unit RMS.
class BandNoise {
 public:
  BandNoise(Rng& rng, double f_lo, double f_hi, int components = 6) {
    for (int k = 0; k < components; ++k) {
      freq_.push_back(uniform(rng, f_lo, f_hi));
      phase_.push_back(uniform(rng, 0.0, 2.0 * kPi));
      amp_.push_back(uniform(rng, 0.5, 1.0));
    }
    double power = 0.0;
    for (double a : amp_) power += 0.5 * a * a;
    scale_ = 1.0 / std::sqrt(power);
  }

  double operator()(double t) const {
    double v = 0.0;
    for (std::size_t k = 0; k < freq_.size(); ++k) v += amp_[k] * std::sin(2.0 * kPi * freq_[k] * t + phase_[k]);
    return v * scale_;
  }

 private:
  std::vector<double> freq_, phase_, amp_;
  double scale_ = 1.0;
};

/// Raised-cosine ramp from 0 to 1 over [t0, t0 + width].
double smooth_step(double t, double t0, double width) {
  if (t <= t0) return 0.0;
  if (t >= t0 + width) return 1.0;
  return 0.5 * (1.0 - std::cos(kPi * (t - t0) / width));
}

/// Hann-shaped gate that is non-zero on [t0, t0 + width].
double burst_gate(double t, double t0, double width) {
  if (t <= t0 || t >= t0 + width) return 0.0;
  return std::sin(kPi * (t - t0) / width);
}

std::complex<double> polar_unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

}  // namespace

void RadarConfig::validate() const {
  if (!(carrier_frequency > 0.0)) throw bad("carrier_frequency must be positive");
  if (!(frame_rate > 0.0)) throw bad("frame_rate must be positive");
  if (fast_time_bins < 1) throw bad("fast_time_bins must be at least 1");
  if (!(bin_spacing > 0.0)) throw bad("bin_spacing must be positive");
  if (!(pulse_width_bins > 0.0)) throw bad("pulse_width_bins must be positive");
  if (!(noise_std >= 0.0)) throw bad("noise_std must be non-negative");
}

void RespirationProfile::validate(double duration) const {
  if (!(rate >= kBreathBandLow && rate <= kBreathBandHigh)) {
    std::ostringstream os;
    os << "respiration rate " << rate << " Hz outside [" << kBreathBandLow << ", " << kBreathBandHigh << "]";
    throw bad(os.str());
  }
  if (!(depth > 0.0)) throw bad("respiration depth must be positive");
  if (!(inhale_fraction > 0.0 && inhale_fraction < 1.0)) throw bad("inhale_fraction must lie in (0, 1)");
  for (double m : cycle_depths)
    if (!(m > 0.0 && m <= 1.0)) throw bad("cycle depth multipliers must lie in (0, 1]");
  auto spans = apnea_spans;
  std::sort(spans.begin(), spans.end());
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto [s, e] = spans[k];
    if (!(s >= 0.0 && e > s && e <= duration)) throw bad("apnea span must satisfy 0 <= start < end <= duration");
    if (k > 0 && s < spans[k - 1].second) throw bad("apnea spans overlap");
  }
}

void MotionProfile::validate(Index frames, Index bins) const {
  if (distance_drift.size() != frames || rcs.size() != frames) throw bad("motion traces must have one value per frame");
  if (bbr_offset.rows() != bins || bbr_offset.cols() != frames) throw bad("bbr_offset must be bins x frames");
  if (distance_drift.size() > 0 && distance_drift.cwiseAbs().maxCoeff() > 0.5)
    throw bad("distance drift exceeds the 0.5 m movement scope");
  if (rcs.size() > 0 && !(rcs.minCoeff() > 0.0)) throw bad("rcs trace must be positive");
  if (bin_spread < 0) throw bad("bin_spread must be non-negative");
}

void Scene::validate() const {
  if (!(subject_distance >= 0.5 && subject_distance <= 2.0)) throw bad("subject_distance must lie in [0.5, 2.0] m");
  if (!(reflectivity > 0.0)) throw bad("reflectivity must be positive");
  if (!(duration > 0.0)) throw bad("duration must be positive");
  if (!(motion_intensity >= 0.0)) throw bad("motion_intensity must be non-negative");
  respiration.validate(duration);
}

std::string to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::static_body: return "static";
    case MotionKind::sporadic_burst: return "sporadic-burst";
    case MotionKind::periodic_sway: return "periodic-sway";
    case MotionKind::strong_periodic: return "strong-periodic";
    case MotionKind::step_change: return "step-change";
    case MotionKind::slow_roll: return "slow-roll";
  }
  return "unknown";
}

MotionKind motion_kind_from_string(const std::string& name) {
  for (MotionKind k : kAllMotionKinds)
    if (to_string(k) == name) return k;
  throw bad("unknown motion kind '" + name + "'");
}

std::string to_string(BreathKind kind) {
  switch (kind) {
    case BreathKind::sinusoid: return "sinusoid";
    case BreathKind::asymmetric: return "asymmetric";
    case BreathKind::apnea: return "apnea";
  }
  return "unknown";
}

BreathKind breath_kind_from_string(const std::string& name) {
  for (BreathKind k : {BreathKind::sinusoid, BreathKind::asymmetric, BreathKind::apnea})
    if (to_string(k) == name) return k;
  throw bad("unknown breath kind '" + name + "'");
}

Index frame_count(double duration, double frame_rate) {
  return static_cast<Index>(std::llround(duration * frame_rate));
}

double pulse_envelope(double bin_offset, double pulse_width_bins) {
  const double sigma = 0.5 * pulse_width_bins;
  const double x = bin_offset / sigma;
  return std::exp(-0.5 * x * x);
}

Waveform gen_respiration(const RespirationProfile& profile, double duration, double frame_rate) {
  if (!(duration > 0.0)) throw bad("duration must be positive");
  if (!(frame_rate > 0.0)) throw bad("frame_rate must be positive");
  profile.validate(duration);

  const Index n_frames = frame_count(duration, frame_rate);
  const bool sine_shaped = profile.kind != BreathKind::asymmetric;
  const double p = sine_shaped ? 0.5 : profile.inhale_fraction;
  // A sine starts a quarter cycle after its valley.
  const double cycle_offset = profile.phase / (2.0 * kPi) + (sine_shaped ? 0.25 : 0.0);

  auto multiplier = [&](long long k) {
    const auto& m = profile.cycle_depths;
    if (m.empty()) return 1.0;
    const long long s = static_cast<long long>(m.size());
    return m[static_cast<std::size_t>(((k % s) + s) % s)];
  };

  auto shape = [&](double t) {
    const double u = profile.rate * t + cycle_offset;
    const double kf = std::floor(u);
    const long long k = static_cast<long long>(kf);
    const double psi = u - kf;
    const double peak = profile.depth * multiplier(k);
    if (psi < p) {
      const double lo = -peak;
      return lo + (peak - lo) * 0.5 * (1.0 - std::cos(kPi * psi / p));
    }
    const double next_lo = -profile.depth * multiplier(k + 1);
    return peak - (peak - next_lo) * 0.5 * (1.0 - std::cos(kPi * (psi - p) / (1.0 - p)));
  };

  std::vector<std::pair<Index, Index>> holds;
  for (const auto& [s, e] : profile.apnea_spans)
    holds.emplace_back(frame_count(s, frame_rate), std::min(frame_count(e, frame_rate), n_frames - 1));
  std::sort(holds.begin(), holds.end());

  Waveform z(n_frames);
  Index paused = 0;
  std::size_t h = 0;
  for (Index n = 0; n < n_frames; ++n) {
    while (h < holds.size() && n > holds[h].second) {
      paused += holds[h].second - holds[h].first;
      ++h;
    }
    Index effective = n - paused;
    if (h < holds.size() && n >= holds[h].first) effective = holds[h].first - paused;
    z(n) = shape(static_cast<double>(effective) / frame_rate);
  }
  return z;
}

MotionProfile gen_motion(const Scene& scene, const RadarConfig& config) {
  const Index n_frames = frame_count(scene.duration, config.frame_rate);
  const Index n_bins = config.fast_time_bins;
  const double fs = config.frame_rate;
  const double s = scene.motion_intensity;
  const double alpha = scene.reflectivity;
  Rng rng(mix_seed(scene.rng_seed, kMotionStream));

  MotionProfile m;
  m.kind = scene.motion_kind;
  m.distance_drift = Eigen::VectorXd::Zero(n_frames);
  m.rcs = Eigen::VectorXd::Ones(n_frames);
  Eigen::VectorXcd center = Eigen::VectorXcd::Constant(n_frames, scene.bbr_base);
  // Limb echoes as (bin offset, complex trace).
  std::vector<std::pair<double, Eigen::VectorXcd>> limbs;

  auto time = [&](Index n) { return static_cast<double>(n) / fs; };

  switch (scene.motion_kind) {
    case MotionKind::static_body: break;

    case MotionKind::sporadic_burst: {
      // Poisson-gated band-limited bursts, e.g. typing: arms move, torso barely does.
      std::vector<std::pair<double, double>> bursts;
      double t = 0.0;
      std::exponential_distribution<double> gap(0.25);
      while (true) {
        t += gap(rng);
        if (t >= scene.duration) break;
        const double width = uniform(rng, 0.5, 2.0);
        bursts.emplace_back(t, width);
        t += width;
      }
      BandNoise ni(rng, 0.5, 3.0), nq(rng, 0.5, 3.0), nd(rng, 0.5, 3.0), nr(rng, 0.5, 3.0), nl(rng, 0.5, 3.0);
      const double limb_phase = uniform(rng, 0.0, 2.0 * kPi);
      Eigen::VectorXcd limb = Eigen::VectorXcd::Zero(n_frames);
      for (Index n = 0; n < n_frames; ++n) {
        double gate = 0.0;
        for (const auto& [t0, w] : bursts) gate = std::max(gate, burst_gate(time(n), t0, w));
        const double tn = time(n);
        center(n) += s * 0.6 * alpha * gate * std::complex<double>(ni(tn), nq(tn));
        m.distance_drift(n) = s * 0.0005 * gate * nd(tn);
        m.rcs(n) = 1.0 + 0.05 * s * gate * nr(tn);
        limb(n) = s * 0.5 * alpha * gate * polar_unit(limb_phase + 3.0 * nl(tn));
      }
      limbs.emplace_back(-1.0, limb);
      m.bin_spread = 1;
      break;
    }

    case MotionKind::periodic_sway: {
      const double f = uniform(rng, 1.0, 1.6);
      const double amp = s * uniform(rng, 0.003, 0.008);
      const double p0 = uniform(rng, 0.0, 2.0 * kPi), p1 = uniform(rng, 0.0, 2.0 * kPi);
      const double p2 = uniform(rng, 0.0, 2.0 * kPi), p3 = uniform(rng, 0.0, 2.0 * kPi);
      const auto dir = polar_unit(uniform(rng, 0.0, 2.0 * kPi));
      Eigen::VectorXcd limb(n_frames);
      for (Index n = 0; n < n_frames; ++n) {
        const double w = 2.0 * kPi * f * time(n);
        m.distance_drift(n) = amp * std::sin(w + p0);
        m.rcs(n) = 1.0 + 0.1 * s * std::sin(w + p1);
        center(n) += s * 0.3 * alpha * dir * std::sin(w + p2);
        limb(n) = s * 0.3 * alpha * polar_unit(w + p3);
      }
      limbs.emplace_back(1.0, limb);
      m.bin_spread = 1;
      break;
    }

    case MotionKind::strong_periodic: {
      // Gait: vertical bounce at the step rate, fore-aft sway at the stride rate.
      const double f = uniform(rng, 1.4, 2.0);
      const double a_step = s * uniform(rng, 0.008, 0.02);
      const double a_stride = s * uniform(rng, 0.003, 0.008);
      const double p0 = uniform(rng, 0.0, 2.0 * kPi), p1 = uniform(rng, 0.0, 2.0 * kPi);
      const double p2 = uniform(rng, 0.0, 2.0 * kPi), p3 = uniform(rng, 0.0, 2.0 * kPi);
      const auto dir = polar_unit(uniform(rng, 0.0, 2.0 * kPi));
      std::vector<Eigen::VectorXcd> limb(4, Eigen::VectorXcd(n_frames));
      std::vector<double> limb_phase(4);
      for (double& lp : limb_phase) lp = uniform(rng, 0.0, 2.0 * kPi);
      for (Index n = 0; n < n_frames; ++n) {
        const double w = 2.0 * kPi * f * time(n);
        m.distance_drift(n) = a_step * std::sin(w + p0) + a_stride * std::sin(0.5 * w + p1);
        m.rcs(n) = 1.0 + 0.25 * s * std::sin(w + p2);
        center(n) += s * 0.6 * alpha * dir * (std::sin(w + p3) + 0.5 * std::sin(2.0 * w + p3));
        for (std::size_t k = 0; k < limb.size(); ++k)
          limb[k](n) = s * 0.5 * alpha * (0.5 + 0.5 * std::sin(0.5 * w + limb_phase[k])) *
                       polar_unit(limb_phase[k] + 4.0 * std::sin(0.5 * w + limb_phase[k]));
      }
      const double offsets[] = {-2.0, -1.0, 1.0, 2.0};
      for (std::size_t k = 0; k < limb.size(); ++k) limbs.emplace_back(offsets[k], limb[k]);
      m.bin_spread = 2;
      break;
    }

    case MotionKind::step_change: {
      // Standing up or sitting down: one posture transition, then a new steady state.
      const double t0 = uniform(rng, 0.25, 0.75) * scene.duration;
      const double width = uniform(rng, 1.0, 2.0);
      const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      double delta = sign * s * uniform(rng, 0.05, 0.2);
      if (scene.subject_distance + delta < 0.3) delta = -delta;
      const double rcs_after = uniform(rng, 0.6, 1.4);
      const auto bbr_after = alpha * uniform(rng, 0.2, 1.0) * polar_unit(uniform(rng, 0.0, 2.0 * kPi));
      BandNoise ni(rng, 0.5, 3.0), nq(rng, 0.5, 3.0);
      const double limb_phase = uniform(rng, 0.0, 2.0 * kPi);
      Eigen::VectorXcd limb(n_frames);
      for (Index n = 0; n < n_frames; ++n) {
        const double tn = time(n);
        const double ramp = smooth_step(tn, t0, width);
        const double gate = burst_gate(tn, t0 - 0.25, width + 0.5);
        m.distance_drift(n) = delta * ramp;
        m.rcs(n) = 1.0 + (rcs_after - 1.0) * ramp;
        center(n) = (1.0 - ramp) * scene.bbr_base + ramp * bbr_after +
                    s * 0.5 * alpha * gate * std::complex<double>(ni(tn), nq(tn));
        limb(n) = s * 0.5 * alpha * gate * polar_unit(limb_phase + 10.0 * ramp);
      }
      limbs.emplace_back(-1.0, limb);
      m.bin_spread = 1;
      break;
    }

    case MotionKind::slow_roll: {
      // Turning over: slow posture drift with changing aspect and reflectivity.
      BandNoise nd(rng, 0.01, 0.1), nr(rng, 0.01, 0.1), na(rng, 0.01, 0.1), nm(rng, 0.01, 0.1);
      const double drift_rms = s * uniform(rng, 0.01, 0.02);
      const double limb_phase = uniform(rng, 0.0, 2.0 * kPi);
      Eigen::VectorXcd limb(n_frames);
      for (Index n = 0; n < n_frames; ++n) {
        const double tn = time(n);
        m.distance_drift(n) = std::clamp(drift_rms * nd(tn), -0.5, 0.5);
        m.rcs(n) = std::exp(0.3 * s * nr(tn));
        center(n) = scene.bbr_base * (1.0 + 0.3 * s * nm(tn)) * polar_unit(2.0 * s * na(tn));
        limb(n) = s * 0.3 * alpha * polar_unit(limb_phase + 6.0 * na(tn));
      }
      limbs.emplace_back(1.0, limb);
      m.bin_spread = 1;
      break;
    }
  }

  m.bbr_offset = Eigen::MatrixXcd::Zero(n_bins, n_frames);
  const double reach = 2.5 * config.pulse_width_bins;
  for (Index n = 0; n < n_frames; ++n) {
    const double c = (scene.subject_distance + m.distance_drift(n)) / config.bin_spacing;
    auto spread = [&](double pos, std::complex<double> value) {
      const Index lo = std::max<Index>(0, static_cast<Index>(std::ceil(pos - reach)));
      const Index hi = std::min<Index>(n_bins - 1, static_cast<Index>(std::floor(pos + reach)));
      for (Index b = lo; b <= hi; ++b)
        m.bbr_offset(b, n) += value * pulse_envelope(static_cast<double>(b) - pos, config.pulse_width_bins);
    };
    spread(c, center(n));
    for (const auto& [offset, trace] : limbs) spread(c + offset, trace(n));
  }
  return m;
}

SynthResult synth_matrix(const Scene& scene, const RadarConfig& config) {
  config.validate();
  scene.validate();
  const double fs = config.frame_rate;
  const Index n_frames = frame_count(scene.duration, fs);
  const Index n_bins = config.fast_time_bins;
  if (n_frames < 1) throw bad("scene shorter than one frame");

  SynthResult out;
  out.truth = gen_respiration(scene.respiration, scene.duration, fs);
  out.motion = scene.motion ? *scene.motion : gen_motion(scene, config);
  out.motion.validate(n_frames, n_bins);

  const double k = 4.0 * kPi / config.wavelength();
  const double reach = 2.5 * config.pulse_width_bins;
  ComplexMatrix& r = out.matrix;
  r = ComplexMatrix(n_bins, n_frames, fs, config.bin_spacing);

  for (Index n = 0; n < n_frames; ++n) {
    const double distance = scene.subject_distance + out.motion.distance_drift(n);
    const double pos = distance / config.bin_spacing;
    if (pos < 0.0 || pos > static_cast<double>(n_bins - 1)) {
      std::ostringstream os;
      os << "subject at frame " << n << " (" << distance << " m) lies outside the fast-time range";
      throw bad(os.str());
    }
    const std::complex<double> chest =
        scene.reflectivity * out.motion.rcs(n) * polar_unit(k * (distance + out.truth(n)));
    const Index lo = std::max<Index>(0, static_cast<Index>(std::ceil(pos - reach)));
    const Index hi = std::min<Index>(n_bins - 1, static_cast<Index>(std::floor(pos + reach)));
    for (Index b = lo; b <= hi; ++b) {
      const auto v = chest * pulse_envelope(static_cast<double>(b) - pos, config.pulse_width_bins);
      r.i(b, n) += v.real();
      r.q(b, n) += v.imag();
    }
  }
  r.i += out.motion.bbr_offset.real();
  r.q += out.motion.bbr_offset.imag();

  for (const auto& c : scene.static_clutter) {
    const double pos = c.distance / config.bin_spacing;
    const auto phasor = c.amplitude * polar_unit(k * c.distance);
    const Index lo = std::max<Index>(0, static_cast<Index>(std::ceil(pos - reach)));
    const Index hi = std::min<Index>(n_bins - 1, static_cast<Index>(std::floor(pos + reach)));
    for (Index b = lo; b <= hi; ++b) {
      const auto v = phasor * pulse_envelope(static_cast<double>(b) - pos, config.pulse_width_bins);
      r.i.row(b).array() += v.real();
      r.q.row(b).array() += v.imag();
    }
  }

  if (config.noise_std > 0.0) {
    Rng rng(mix_seed(scene.rng_seed, kNoiseStream));
    std::normal_distribution<double> noise(0.0, config.noise_std);
    for (Index n = 0; n < n_frames; ++n)
      for (Index b = 0; b < n_bins; ++b) {
        r.i(b, n) += noise(rng);
        r.q(b, n) += noise(rng);
      }
  }
  return out;
}

Dataset make_dataset(const std::vector<Scene>& scenes, const RadarConfig& config, double window_s) {
  const double exact = window_s * config.frame_rate;
  const Index w = static_cast<Index>(std::llround(exact));
  if (!(window_s > 0.0) || std::abs(exact - static_cast<double>(w)) > 1e-9 || w < 1)
    throw bad("window_s x frame_rate must be a positive integer");

  Dataset ds;
  ds.config = config;
  ds.window_s = window_s;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const Index n_frames = frame_count(scenes[si].duration, config.frame_rate);
    if (n_frames < w) {
      std::ostringstream os;
      os << "scene " << si << " (" << scenes[si].duration << " s) is shorter than one " << window_s << " s window";
      throw bad(os.str());
    }
    SynthResult syn = synth_matrix(scenes[si], config);
    for (Index k = 0; k + w <= n_frames; k += w) {
      DatasetRecord rec;
      rec.matrix = ComplexMatrix(config.fast_time_bins, w, config.frame_rate, config.bin_spacing);
      rec.matrix.i = syn.matrix.i.middleCols(k, w);
      rec.matrix.q = syn.matrix.q.middleCols(k, w);
      rec.truth = syn.truth.segment(k, w);
      rec.scene_index = si;
      rec.window_index = static_cast<std::size_t>(k / w);
      rec.scene = scenes[si];
      rec.scene.motion.reset();
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

Scene sample_scene(MotionKind kind, std::uint64_t seed, const SceneSampler& sp) {
  Rng rng(mix_seed(seed, kSceneStream));
  Scene sc;
  sc.rng_seed = seed;
  sc.motion_kind = kind;
  sc.duration = sp.duration;
  sc.subject_distance = uniform(rng, sp.min_distance, sp.max_distance);
  sc.reflectivity = uniform(rng, sp.min_reflectivity, sp.max_reflectivity);

  RespirationProfile& rp = sc.respiration;
  rp.rate = uniform(rng, sp.min_rate, sp.max_rate);
  rp.depth = uniform(rng, sp.min_depth, sp.max_depth);
  rp.phase = uniform(rng, 0.0, 2.0 * kPi);
  const double pick = uniform(rng, 0.0, 1.0);
  const double inhale = uniform(rng, 0.3, 0.45);
  if (pick < sp.asymmetric_fraction) {
    rp.kind = BreathKind::asymmetric;
    rp.inhale_fraction = inhale;
  } else if (pick < sp.asymmetric_fraction + sp.apnea_fraction) {
    rp.kind = BreathKind::apnea;
  }
  const double apnea_len = uniform(rng, 3.0, 6.0);
  const double apnea_start = uniform(rng, 0.0, std::max(0.0, sp.duration - apnea_len));
  if (rp.kind == BreathKind::apnea && sp.duration > apnea_len)
    rp.apnea_spans.emplace_back(apnea_start, apnea_start + apnea_len);
  rp.cycle_depths.resize(5);
  for (double& m : rp.cycle_depths) m = uniform(rng, 0.75, 1.0);

  sc.bbr_base = sc.reflectivity * uniform(rng, 0.2, 1.0) * polar_unit(uniform(rng, 0.0, 2.0 * kPi));
  for (int c = 0; c < sp.clutter_count; ++c) {
    ClutterReflector cr;
    cr.distance = uniform(rng, 2.5, 8.0);
    cr.amplitude = uniform(rng, 0.5, 2.0);
    sc.static_clutter.push_back(cr);
  }
  return sc;
}

}  // namespace uwbresp
