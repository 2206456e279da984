#include <doctest.h>

#include <chrono>
#include <cmath>

#include "uwbresp/radar_sim.hpp"

using namespace uwbresp;

namespace {

Scene quiet_scene(double distance = 1.0, double depth = 0.005) {
  Scene s;
  s.subject_distance = distance;
  s.respiration.rate = 0.25;
  s.respiration.depth = depth;
  s.rng_seed = 7;
  return s;
}

double wrap(double a) { return std::remainder(a, 2.0 * kPi); }

}  // namespace

TEST_CASE("sinusoid respiration is an exact sine") {
  RespirationProfile p;
  p.rate = 0.25;
  p.depth = 1.0;
  const Waveform z = gen_respiration(p, 20.0, 50.0);
  REQUIRE(z.size() == 1000);
  double worst = 0.0;
  for (Index n = 0; n < z.size(); ++n) worst = std::max(worst, std::abs(z(n) - std::sin(2.0 * kPi * 0.25 * n / 50.0)));
  CHECK(worst < 1e-12);
  CHECK(z.maxCoeff() <= 1.0);
  CHECK(z.minCoeff() >= -1.0);
}

TEST_CASE("asymmetric cycle rises for inhale_fraction of the period") {
  RespirationProfile p;
  p.kind = BreathKind::asymmetric;
  p.rate = 0.2;
  p.depth = 1.0;
  p.inhale_fraction = 0.4;
  const Waveform z = gen_respiration(p, 20.0, 50.0);
  for (int cycle = 0; cycle < 4; ++cycle) {
    Index arg;
    z.segment(cycle * 250, 250).maxCoeff(&arg);
    CHECK(arg == 100);
    CHECK(z(cycle * 250) == doctest::Approx(-1.0));
  }
}

TEST_CASE("apnea span holds the value at its start") {
  RespirationProfile p;
  p.rate = 0.25;
  p.depth = 1.0;
  p.apnea_spans = {{5.0, 10.0}};
  const Waveform z = gen_respiration(p, 20.0, 50.0);
  for (Index n = 250; n <= 500; ++n) CHECK(z(n) == z(250));
}

TEST_CASE("respiration rejects rates outside the band") {
  RespirationProfile p;
  p.rate = 0.8;
  CHECK_THROWS_AS(gen_respiration(p, 20.0, 50.0), std::invalid_argument);
  p.rate = 0.1;
  CHECK_THROWS_AS(gen_respiration(p, 20.0, 50.0), std::invalid_argument);
}

TEST_CASE("static noise-free synthesis follows the signal model pointwise") {
  RadarConfig cfg;
  const Scene s = quiet_scene(10 * cfg.bin_spacing);
  const auto t0 = std::chrono::steady_clock::now();
  const SynthResult r = synth_matrix(s, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 1.0);
  REQUIRE(r.matrix.frames() == 1000);
  const double k = 4.0 * kPi / cfg.wavelength();
  double amp_err = 0.0, phase_err = 0.0;
  for (Index n = 0; n < 1000; ++n) {
    const auto v = r.matrix.at(10, n);
    amp_err = std::max(amp_err, std::abs(std::abs(v) - s.reflectivity));
    phase_err = std::max(phase_err, std::abs(wrap(std::arg(v) - k * (s.subject_distance + r.truth(n)))));
  }
  CHECK(amp_err < 1e-9);
  CHECK(phase_err < 1e-9);
}

TEST_CASE("subject trace is a circular arc of the expected angle") {
  RadarConfig cfg;
  const Scene s = quiet_scene(10 * cfg.bin_spacing, 0.002);
  const SynthResult r = synth_matrix(s, cfg);
  double lo = 1e9, hi = -1e9;
  const std::complex<double> ref = r.matrix.at(10, 0);
  for (Index n = 0; n < 1000; ++n) {
    const double a = std::arg(r.matrix.at(10, n) / ref);
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  CHECK(hi - lo == doctest::Approx(4.0 * kPi / cfg.wavelength() * 2.0 * 0.002).epsilon(1e-6));
}

TEST_CASE("zero depth gives a constant trace") {
  RadarConfig cfg;
  Scene s = quiet_scene();
  MotionProfile m;
  m.distance_drift = Eigen::VectorXd::Zero(1000);
  m.rcs = Eigen::VectorXd::Ones(1000);
  m.bbr_offset = Eigen::MatrixXcd::Zero(cfg.fast_time_bins, 1000);
  s.motion = m;
  s.respiration.depth = 1e-300;
  const SynthResult r = synth_matrix(s, cfg);
  for (Index b = 0; b < r.matrix.bins(); ++b) {
    CHECK((r.matrix.i.row(b).array() - r.matrix.i(b, 0)).abs().maxCoeff() < 1e-12);
    CHECK((r.matrix.q.row(b).array() - r.matrix.q(b, 0)).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("energy stays near the subject bin") {
  RadarConfig cfg;
  const Scene s = quiet_scene(1.23);
  const SynthResult r = synth_matrix(s, cfg);
  const double pos = s.subject_distance / cfg.bin_spacing;
  double near = 0.0, total = 0.0;
  for (Index b = 0; b < r.matrix.bins(); ++b) {
    const double e = (r.matrix.i.row(b).array() - r.matrix.i.row(b).mean()).square().sum() +
                     (r.matrix.q.row(b).array() - r.matrix.q.row(b).mean()).square().sum();
    total += e;
    if (std::abs(b - pos) <= cfg.pulse_width_bins) near += e;
  }
  CHECK(near / total >= 0.95);
}

TEST_CASE("identical scenes give bit-identical matrices") {
  RadarConfig cfg;
  cfg.noise_std = 0.05;
  for (MotionKind kind : kAllMotionKinds) {
    const Scene s = sample_scene(kind, 99);
    const auto a = synth_matrix(s, cfg), b = synth_matrix(s, cfg);
    CHECK(a.matrix.i == b.matrix.i);
    CHECK(a.matrix.q == b.matrix.q);
    CHECK(a.truth == b.truth);
  }
}

TEST_CASE("every motion kind respects the scope bounds") {
  RadarConfig cfg;
  for (MotionKind kind : kAllMotionKinds)
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Scene s = sample_scene(kind, seed);
      CHECK(s.subject_distance >= 0.5);
      CHECK(s.subject_distance <= 2.0);
      const MotionProfile m = gen_motion(s, cfg);
      CHECK(m.distance_drift.cwiseAbs().maxCoeff() <= 0.5);
      CHECK(m.rcs.minCoeff() > 0.0);
      CHECK(synth_matrix(s, cfg).matrix.all_finite());
    }
}

TEST_CASE("make_dataset slices scenes into windows") {
  RadarConfig cfg;
  Scene s = quiet_scene();
  s.duration = 60.0;
  const Dataset ds = make_dataset({s}, cfg, 20.0);
  REQUIRE(ds.records.size() == 3);
  const SynthResult full = synth_matrix(s, cfg);
  for (std::size_t w = 0; w < 3; ++w) {
    CHECK(ds.records[w].window_index == w);
    CHECK(ds.records[w].matrix.frames() == 1000);
    CHECK(ds.records[w].matrix.i == full.matrix.i.middleCols(1000 * static_cast<Index>(w), 1000));
    CHECK(ds.records[w].truth == full.truth.segment(1000 * static_cast<Index>(w), 1000));
  }
  s.duration = 10.0;
  CHECK_THROWS_AS(make_dataset({s}, cfg, 20.0), std::invalid_argument);
}

TEST_CASE("wavelength follows the carrier") {
  RadarConfig cfg;
  CHECK(std::abs(cfg.wavelength() - kSpeedOfLight / 7.29e9) / cfg.wavelength() < 1e-12);
  cfg.carrier_frequency = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("drift beyond the fast-time range is rejected") {
  RadarConfig cfg;
  cfg.fast_time_bins = 12;
  Scene s = quiet_scene(2.0);
  CHECK_THROWS_AS(synth_matrix(s, cfg), std::invalid_argument);
}
