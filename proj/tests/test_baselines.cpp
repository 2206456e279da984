#include <doctest.h>

#include <cmath>

#include "uwbresp/baselines.hpp"
#include "uwbresp/biomarkers.hpp"
#include "uwbresp/metrics.hpp"
#include "uwbresp/pipeline.hpp"
#include "uwbresp/radar_sim.hpp"
#include "uwbresp/rng.hpp"

using namespace uwbresp;

namespace {

Waveform tone(double hz, Index n, double fs, double amp = 1.0) {
  Waveform w(n);
  for (Index k = 0; k < n; ++k) w(k) = amp * std::sin(2.0 * kPi * hz * k / fs);
  return w;
}

// Least-squares amplitude of a tone over the interior.
double tone_gain(const Waveform& y, double hz, double fs, Index skip) {
  Eigen::MatrixXd a(y.size() - 2 * skip, 2);
  for (Index k = skip; k < y.size() - skip; ++k) {
    a(k - skip, 0) = std::sin(2.0 * kPi * hz * k / fs);
    a(k - skip, 1) = std::cos(2.0 * kPi * hz * k / fs);
  }
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(y.segment(skip, y.size() - 2 * skip));
  return c.norm();
}

Eigen::VectorXcd arc(Eigen::Vector2d center, double radius, const Waveform& phase) {
  Eigen::VectorXcd t(phase.size());
  for (Index n = 0; n < phase.size(); ++n) t(n) = std::complex<double>(center.x(), center.y()) + std::polar(radius, phase(n));
  return t;
}

}  // namespace

TEST_CASE("projections on a circular trace") {
  const Waveform ph = Waveform::LinSpaced(400, 0.0, 0.05 * 399);
  const Eigen::VectorXcd t = arc({0, 0}, 2.0, ph);
  CHECK((project_amplitude(t).array() - 2.0).abs().maxCoeff() < 1e-12);
  const Waveform p = project_phase(t);
  for (Index n = 1; n < p.size(); ++n) CHECK(p(n) - p(n - 1) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("unwrap removes 2 pi jumps") {
  Waveform w = Waveform::LinSpaced(100, 0.0, 30.0);
  Waveform wrapped = w;
  for (Index n = 0; n < w.size(); ++n) wrapped(n) = std::remainder(w(n), 2.0 * kPi);
  CHECK((unwrap(wrapped).array() - w.array() + (w(0) - unwrap(wrapped)(0))).abs().maxCoeff() < 1e-12);
}

TEST_CASE("projections under global rotation") {
  Rng rng(1);
  Eigen::VectorXcd t(50);
  for (Index n = 0; n < 50; ++n) t(n) = {1.0 + 0.1 * normal(rng), 0.5 + 0.1 * normal(rng)};
  const std::complex<double> rot = std::polar(1.0, 0.8);
  const Eigen::VectorXcd r = t * rot;
  CHECK((project_amplitude(r) - project_amplitude(t)).cwiseAbs().maxCoeff() < 1e-12);
  const Waveform dp = project_phase(r) - project_phase(t);
  CHECK((dp.array() - dp(0)).abs().maxCoeff() < 1e-9);
  CHECK(std::remainder(dp(0) - 0.8, 2.0 * kPi) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("static subject phase has the breathing period") {
  RadarConfig cfg;
  Scene s;
  s.subject_distance = 1.1;
  s.respiration.rate = 0.3;
  s.respiration.depth = 0.004;
  const auto r = synth_matrix(s, cfg);
  const SlowTimeWindow w = preprocess(r.matrix, {});
  const CycleEvents ev = detect_cycles(project_phase(w), cfg.frame_rate);
  REQUIRE(ev.peak_times.size() >= 3);
  const Timings t = compute_timings(ev);
  for (double p : t.t_tc) CHECK(std::abs(p - 1.0 / 0.3) <= 1.0 / cfg.frame_rate + 1e-9);
}

TEST_CASE("bandpass probe response") {
  const double fs = 50.0;
  const Index n = 3000;
  for (double hz : {0.25, 0.3, 0.35, 0.4}) {
    const Waveform y = bandpass_baseline(tone(hz, n, fs), fs);
    CHECK(std::abs(tone_gain(y, hz, fs, 500) - 1.0) < 0.01);
  }
  for (double hz : {0.02, 2.0}) CHECK(tone_gain(bandpass_baseline(tone(hz, n, fs), fs), hz, fs, 500) < 0.01);
  const Waveform dc = bandpass_baseline(Waveform::Constant(n, 5.0), fs);
  CHECK(dc.cwiseAbs().maxCoeff() < 0.01 * 5.0);
  CHECK(bandpass_baseline(Waveform::Zero(n), fs).cwiseAbs().maxCoeff() == 0.0);
  CHECK(bandpass_baseline(tone(0.3, 1000, fs), fs).size() == 1000);
}

TEST_CASE("filtfilt has zero phase") {
  const double fs = 50.0;
  const Waveform x = tone(0.3, 3000, fs);
  const Waveform y = filtfilt(butterworth_bandpass(0.16, 0.6, fs), x);
  Index best = 0;
  double score = -1e9;
  for (Index lag = -10; lag <= 10; ++lag) {
    const double c = x.segment(500 + lag, 2000).dot(y.segment(500, 2000));
    if (c > score) score = c, best = lag;
  }
  CHECK(best == 0);
}

TEST_CASE("circle fit recovers a known offset") {
  const Waveform ph = 0.8 * tone(0.25, 1000, 50.0).array() + 0.3;
  const Eigen::VectorXcd t = arc({0.5, 0.3}, 1.0, ph);
  const CircleFit c = fit_circle(t);
  CHECK((c.center - Eigen::Vector2d(0.5, 0.3)).norm() < 1e-6);
  CHECK(c.radius == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("ellipse-arctan demodulation of a synthetic arc") {
  RadarConfig cfg;
  const double lambda = cfg.wavelength(), depth = 0.004;
  const Waveform z = depth * tone(0.25, 1000, 50.0).array();
  const Waveform ph = (4.0 * kPi / lambda) * (1.0 + z.array());
  const Eigen::VectorXcd t = arc({0.5, 0.3}, 0.8, ph);
  EllipseFit fit;
  const Waveform d = fit_ellipse_arctan(t, lambda, {}, &fit);
  CHECK((fit.center - Eigen::Vector2d(0.5, 0.3)).norm() < 1e-6);
  const Waveform zc = z.array() - z.mean();
  CHECK((d - zc).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("full circle and full ellipse") {
  const Waveform ph = Waveform::LinSpaced(500, 0.0, 2.0 * kPi * 499.0 / 500.0);
  const EllipseFit c = fit_arc(arc({-1.2, 0.7}, 0.9, ph));
  CHECK((c.center - Eigen::Vector2d(-1.2, 0.7)).norm() < 1e-9);

  Eigen::VectorXcd e(500);
  const double tilt = 0.4;
  for (Index n = 0; n < 500; ++n) {
    const double u = 2.0 * std::cos(ph(n)), v = 0.7 * std::sin(ph(n));
    e(n) = {0.3 + std::cos(tilt) * u - std::sin(tilt) * v, -0.2 + std::sin(tilt) * u + std::cos(tilt) * v};
  }
  const EllipseFit f = fit_ellipse(e);
  CHECK((f.center - Eigen::Vector2d(0.3, -0.2)).norm() < 1e-9);
  CHECK(f.axes(0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(f.axes(1) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(std::remainder(f.tilt - tilt, kPi) == doctest::Approx(0.0).scale(1.0));
  CHECK(f.residual < 1e-12);
}

TEST_CASE("degenerate and drifting traces are unidentifiable") {
  Eigen::VectorXcd line(100);
  for (Index n = 0; n < 100; ++n) line(n) = {0.01 * n, 0.02 * n};
  CHECK_THROWS_AS(fit_arc(line), ArcUnidentifiable);
  CHECK_THROWS_AS(fit_ellipse(line), ArcUnidentifiable);
  CHECK_THROWS_AS(fit_arc(Eigen::VectorXcd::Constant(3, {1.0, 1.0})), ArcUnidentifiable);

  // arc whose centre jitters by more than its radius (mean-reverting, std ~0.46)
  Rng rng(5);
  const Waveform ph = 0.8 * tone(0.25, 1000, 50.0).array();
  Eigen::VectorXcd t = arc({0, 0}, 0.3, ph);
  std::complex<double> drift = 0.0;
  for (Index n = 0; n < t.size(); ++n) {
    drift = 0.9 * drift + std::complex<double>(0.2 * normal(rng), 0.2 * normal(rng));
    t(n) += drift;
  }
  CHECK_THROWS_AS(fit_arc(t), ArcUnidentifiable);
  ArcFitOptions forced;
  forced.enforce_residual = false;
  CHECK_NOTHROW(fit_arc(t, forced));
}

TEST_CASE("ellipse-arctan on static noise-free scenes") {
  RadarConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = sample_scene(MotionKind::static_body, seed);
    const auto r = synth_matrix(s, cfg);
    const SlowTimeWindow w = preprocess(r.matrix, {});
    CHECK(cosine_similarity(fit_ellipse_arctan(w, cfg.wavelength()), r.truth) >= 0.99);
  }
}
