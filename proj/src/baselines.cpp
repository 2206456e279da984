#include "uwbresp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>

namespace uwbresp {

Eigen::VectorXcd channel_trace(const SlowTimeWindow& window, Index channel) {
  if (channel < 0 || channel >= window.channels()) throw std::out_of_range("channel outside window");
  Eigen::VectorXcd t(window.frames());
  for (Index n = 0; n < window.frames(); ++n) t(n) = {window.i(channel, n), window.q(channel, n)};
  return t;
}

Index subject_channel(const SlowTimeWindow& window) {
  const Index bin = window.subject_bin >= 0 ? window.subject_bin : window.center_bin;
  return std::clamp<Index>(bin - window.first_bin, 0, window.channels() - 1);
}

Waveform project_amplitude(const Eigen::VectorXcd& trace) { return trace.cwiseAbs(); }

Waveform project_phase(const Eigen::VectorXcd& trace) {
  Waveform p(trace.size());
  for (Index n = 0; n < trace.size(); ++n) p(n) = std::arg(trace(n));
  return unwrap(p);
}

Waveform project_amplitude(const SlowTimeWindow& window) {
  return project_amplitude(channel_trace(window, subject_channel(window)));
}

Waveform project_phase(const SlowTimeWindow& window) {
  return project_phase(channel_trace(window, subject_channel(window)));
}

Waveform unwrap(const Waveform& phase) {
  Waveform out = phase;
  double offset = 0.0;
  for (Index n = 1; n < phase.size(); ++n) {
    const double d = phase(n) - phase(n - 1);
    offset -= 2.0 * kPi * std::ceil((d - kPi) / (2.0 * kPi));
    out(n) = phase(n) + offset;
  }
  return out;
}

namespace {

// Analog (b2 s^2 + b1 s + b0) / (s^2 + a1 s + a0) through the bilinear map with s = k (1 - z^-1) / (1 + z^-1).
Biquad bilinear(double b2, double b1, double b0, double a1, double a0, double k) {
  const double k2 = k * k;
  const double d = k2 + a1 * k + a0;
  return {(b2 * k2 + b1 * k + b0) / d, 2.0 * (b0 - b2 * k2) / d, (b2 * k2 - b1 * k + b0) / d, 2.0 * (a0 - k2) / d,
          (k2 - a1 * k + a0) / d};
}

void append_butterworth(std::vector<Biquad>& out, double hz, double fs, int order, bool highpass) {
  const double k = 2.0 * fs;
  const double w = k * std::tan(kPi * hz / fs);
  for (int s = 0; s < order / 2; ++s) {
    const double damp = 2.0 * std::sin(kPi * (2 * s + 1) / (2.0 * order));
    if (highpass)
      out.push_back(bilinear(1.0, 0.0, 0.0, damp * w, w * w, k));
    else
      out.push_back(bilinear(0.0, 0.0, w * w, damp * w, w * w, k));
  }
}

Waveform run_cascade(const std::vector<Biquad>& sections, const Waveform& x) {
  Waveform y = x;
  if (y.size() == 0) return y;
  double level = x(0);
  for (const auto& s : sections) {
    const double g = s.dc_gain();
    double z2 = s.b2 * level - s.a2 * g * level;
    double z1 = s.b1 * level - s.a1 * g * level + z2;
    for (Index n = 0; n < y.size(); ++n) {
      const double in = y(n);
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      y(n) = out;
    }
    level *= g;
  }
  return y;
}

}  // namespace

std::vector<Biquad> butterworth_bandpass(double low_hz, double high_hz, double frame_rate, int order_per_edge) {
  if (!(frame_rate > 0.0)) throw std::invalid_argument("frame rate must be positive");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < frame_rate / 2.0))
    throw std::invalid_argument("band edges must satisfy 0 < low < high < Nyquist");
  if (order_per_edge < 2 || order_per_edge % 2) throw std::invalid_argument("order per edge must be even and >= 2");
  std::vector<Biquad> out;
  append_butterworth(out, low_hz, frame_rate, order_per_edge, true);
  append_butterworth(out, high_hz, frame_rate, order_per_edge, false);
  return out;
}

Waveform filtfilt(const std::vector<Biquad>& sections, const Waveform& x, Index pad) {
  const Index n = x.size();
  if (n == 0) return x;
  if (pad < 0) pad = 3 * (2 * static_cast<Index>(sections.size()) + 1);
  pad = std::min(pad, n - 1);
  Waveform ext(n + 2 * pad);
  for (Index k = 0; k < pad; ++k) {
    ext(pad - 1 - k) = 2.0 * x(0) - x(k + 1);
    ext(pad + n + k) = 2.0 * x(n - 1) - x(n - 2 - k);
  }
  ext.segment(pad, n) = x;
  Waveform y = run_cascade(sections, ext);
  y.reverseInPlace();
  y = run_cascade(sections, y);
  y.reverseInPlace();
  return y.segment(pad, n);
}

Waveform bandpass_baseline(const Waveform& w, double frame_rate, double low_hz, double high_hz) {
  const auto sections = butterworth_bandpass(low_hz, high_hz, frame_rate);
  const Index pad = static_cast<Index>(std::lround(3.0 * frame_rate / low_hz));
  return filtfilt(sections, w, pad);
}

namespace {

struct Points {
  Eigen::VectorXd x, y;
  Eigen::Vector2d mean;
  double scale = 1.0;
};

// Centred and scaled to unit RMS radius for conditioning.
Points normalized_points(const Eigen::VectorXcd& trace) {
  if (trace.size() < 5) throw ArcUnidentifiable("arc fit needs at least 5 samples");
  if (!trace.allFinite()) throw ArcUnidentifiable("trace contains non-finite samples");
  Points p;
  p.x = trace.real();
  p.y = trace.imag();
  p.mean = {p.x.mean(), p.y.mean()};
  p.x.array() -= p.mean.x();
  p.y.array() -= p.mean.y();
  const double rms = std::sqrt((p.x.squaredNorm() + p.y.squaredNorm()) / static_cast<double>(trace.size()));
  if (!(rms > 0.0)) throw ArcUnidentifiable("trace is a single point");
  p.scale = rms;
  p.x /= rms;
  p.y /= rms;
  Eigen::Matrix2d cov;
  cov << p.x.dot(p.x), p.x.dot(p.y), p.x.dot(p.y), p.y.dot(p.y);
  const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(cov, Eigen::EigenvaluesOnly).eigenvalues();
  if (ev(0) <= 1e-12 * ev(1)) throw ArcUnidentifiable("trace is collinear");
  return p;
}

double circle_residual(const Points& p, const Eigen::Vector2d& c, double r) {
  const Eigen::ArrayXd rho = ((p.x.array() - c.x()).square() + (p.y.array() - c.y()).square()).sqrt();
  return (rho - r).square().mean();
}

double arc_span(const Eigen::VectorXcd& trace, const Eigen::Vector2d& center) {
  std::vector<double> ang(static_cast<std::size_t>(trace.size()));
  for (Index n = 0; n < trace.size(); ++n)
    ang[static_cast<std::size_t>(n)] = std::atan2(trace(n).imag() - center.y(), trace(n).real() - center.x());
  std::sort(ang.begin(), ang.end());
  double gap = ang.front() + 2.0 * kPi - ang.back();
  for (std::size_t k = 1; k < ang.size(); ++k) gap = std::max(gap, ang[k] - ang[k - 1]);
  return 2.0 * kPi - gap;
}

}  // namespace

CircleFit fit_circle(const Eigen::VectorXcd& trace) {
  const Points p = normalized_points(trace);
  const Index n = p.x.size();
  Eigen::MatrixXd a(n, 3);
  a.col(0) = 2.0 * p.x;
  a.col(1) = 2.0 * p.y;
  a.col(2).setOnes();
  const Eigen::VectorXd rhs = p.x.array().square() + p.y.array().square();
  const Eigen::Vector3d sol = a.colPivHouseholderQr().solve(rhs);
  Eigen::Vector2d c(sol(0), sol(1));
  double r = std::sqrt(std::max(sol(2) + c.squaredNorm(), 0.0));
  if (!c.allFinite() || !(r > 0.0)) throw ArcUnidentifiable("algebraic circle fit failed");

  double res = circle_residual(p, c, r);
  for (int it = 0; it < 50; ++it) {
    Eigen::MatrixXd j(n, 3);
    Eigen::VectorXd d(n);
    for (Index k = 0; k < n; ++k) {
      const double dx = p.x(k) - c.x(), dy = p.y(k) - c.y();
      const double rho = std::max(std::hypot(dx, dy), 1e-300);
      j(k, 0) = -dx / rho;
      j(k, 1) = -dy / rho;
      j(k, 2) = -1.0;
      d(k) = rho - r;
    }
    const Eigen::Vector3d step = j.colPivHouseholderQr().solve(-d);
    const Eigen::Vector2d c2 = c + step.head<2>();
    const double r2 = r + step(2);
    if (!step.allFinite() || !(r2 > 0.0)) break;
    const double res2 = circle_residual(p, c2, r2);
    if (!(res2 <= res)) break;
    const bool small = step.norm() < 1e-14 * (1.0 + r);
    c = c2;
    r = r2;
    res = res2;
    if (small) break;
  }

  CircleFit out;
  out.center = p.mean + p.scale * c;
  out.radius = p.scale * r;
  out.residual = p.scale * p.scale * res;
  return out;
}

EllipseFit fit_ellipse(const Eigen::VectorXcd& trace) {
  const Points p = normalized_points(trace);
  const Index n = p.x.size();
  Eigen::MatrixXd d1(n, 3), d2(n, 3);
  d1.col(0) = p.x.array().square();
  d1.col(1) = p.x.array() * p.y.array();
  d1.col(2) = p.y.array().square();
  d2.col(0) = p.x;
  d2.col(1) = p.y;
  d2.col(2).setOnes();
  const Eigen::Matrix3d s1 = d1.transpose() * d1;
  const Eigen::Matrix3d s2 = d1.transpose() * d2;
  const Eigen::Matrix3d s3 = d2.transpose() * d2;
  const Eigen::Matrix3d t = -s3.ldlt().solve(s2.transpose());
  const Eigen::Matrix3d m0 = s1 + s2 * t;
  Eigen::Matrix3d m;
  m.row(0) = m0.row(2) / 2.0;
  m.row(1) = -m0.row(1);
  m.row(2) = m0.row(0) / 2.0;
  if (!m.allFinite()) throw ArcUnidentifiable("ellipse scatter matrix is singular");

  Eigen::EigenSolver<Eigen::Matrix3d> es(m);
  Eigen::Vector3d a1;
  bool found = false;
  double best = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d v = es.eigenvectors().col(k).real();
    const double cond = 4.0 * v(0) * v(2) - v(1) * v(1);
    if (cond > best) {
      best = cond;
      a1 = v;
      found = true;
    }
  }
  if (!found) throw ArcUnidentifiable("no elliptical conic fits the trace");
  const Eigen::Vector3d a2 = t * a1;
  const double A = a1(0), B = a1(1), C = a1(2), D = a2(0), E = a2(1), F = a2(2);

  const double det = 4.0 * A * C - B * B;
  const Eigen::Vector2d c((B * E - 2.0 * C * D) / det, (B * D - 2.0 * A * E) / det);
  // Value of the conic at its centre sets the axis lengths.
  const double f0 = A * c.x() * c.x() + B * c.x() * c.y() + C * c.y() * c.y() + D * c.x() + E * c.y() + F;
  Eigen::Matrix2d q;
  q << A, B / 2.0, B / 2.0, C;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> qs(q);
  const Eigen::Vector2d lam = qs.eigenvalues();  // ascending: first is the major axis
  const double sa = -f0 / lam(0), sb = -f0 / lam(1);
  if (!(sa > 0.0 && sb > 0.0) || !c.allFinite()) throw ArcUnidentifiable("conic is not a real ellipse");

  EllipseFit out;
  const Eigen::Vector2d major = qs.eigenvectors().col(0);
  out.tilt = std::atan2(major.y(), major.x());
  out.center = p.mean + p.scale * c;
  out.axes = {p.scale * std::sqrt(sa), p.scale * std::sqrt(sb)};

  double acc = 0.0;
  for (Index k = 0; k < n; ++k) {
    const double x = p.x(k), y = p.y(k);
    const double f = A * x * x + B * x * y + C * y * y + D * x + E * y + F;
    const double gx = 2.0 * A * x + B * y + D, gy = B * x + 2.0 * C * y + E;
    acc += f * f / std::max(gx * gx + gy * gy, 1e-300);
  }
  out.residual = p.scale * p.scale * acc / static_cast<double>(n);
  return out;
}

EllipseFit fit_arc(const Eigen::VectorXcd& trace, const ArcFitOptions& options) {
  const CircleFit circle = fit_circle(trace);
  EllipseFit out;
  out.center = circle.center;
  out.axes = {circle.radius, circle.radius};
  out.residual = circle.residual;
  out.circular = true;
  if (arc_span(trace, circle.center) >= options.min_ellipse_span) {
    try {
      const EllipseFit e = fit_ellipse(trace);
      if (e.residual < circle.residual) out = e;
    } catch (const ArcUnidentifiable&) {
    }
  }
  const double rel = out.residual / (out.axes(0) * out.axes(1));
  if (options.enforce_residual && !(rel <= options.max_relative_residual))
    throw ArcUnidentifiable("arc fit residual " + std::to_string(rel) + " exceeds threshold");
  return out;
}

Waveform fit_ellipse_arctan(const Eigen::VectorXcd& trace, double wavelength, const ArcFitOptions& options,
                            EllipseFit* fit_out) {
  if (!(wavelength > 0.0)) throw std::invalid_argument("wavelength must be positive");
  const EllipseFit fit = fit_arc(trace, options);
  if (fit_out) *fit_out = fit;
  const double c = std::cos(fit.tilt), s = std::sin(fit.tilt);
  Waveform phase(trace.size());
  for (Index n = 0; n < trace.size(); ++n) {
    const double dx = trace(n).real() - fit.center.x(), dy = trace(n).imag() - fit.center.y();
    // Rotate into the axis frame and map the ellipse onto a circle before taking the angle.
    const double u = (c * dx + s * dy) / fit.axes(0);
    const double v = (-s * dx + c * dy) / fit.axes(1);
    phase(n) = std::atan2(v, u) + fit.tilt;
  }
  Waveform disp = unwrap(phase) * (wavelength / (4.0 * kPi));
  disp.array() -= disp.mean();
  return disp;
}

Waveform fit_ellipse_arctan(const SlowTimeWindow& window, double wavelength, const ArcFitOptions& options,
                            EllipseFit* fit_out) {
  return fit_ellipse_arctan(channel_trace(window, subject_channel(window)), wavelength, options, fit_out);
}

}  // namespace uwbresp
