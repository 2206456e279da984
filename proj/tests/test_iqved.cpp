#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "uwbresp/iqved.hpp"
#include "uwbresp/rng.hpp"

using namespace uwbresp;

namespace {

NetworkConfig tiny_config() {
  NetworkConfig c;
  c.encoder_channels = {3, 4};
  c.decoder_channels = {4, 3};
  c.latent_dim = 4;
  c.input_channels = 2;
  c.frames = 14;
  return c;
}

NetworkConfig small_config() {
  NetworkConfig c;
  c.encoder_channels = {4, 4, 8, 8, 8};
  c.decoder_channels = {8, 8, 8, 4, 4};
  c.latent_dim = 8;
  c.input_channels = 3;
  c.frames = 100;
  return c;
}

SlowTimeWindow random_window(Index channels, Index frames, Rng& rng) {
  SlowTimeWindow w;
  w.i.resize(channels, frames);
  w.q.resize(channels, frames);
  for (Index c = 0; c < frames; ++c)
    for (Index r = 0; r < channels; ++r) {
      w.i(r, c) = normal(rng);
      w.q(r, c) = normal(rng);
    }
  return w;
}

LatentGaussian gaussian(std::vector<double> mean, std::vector<double> std) {
  LatentGaussian g;
  g.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<Index>(mean.size()));
  g.log_var = Eigen::Map<Eigen::VectorXd>(std.data(), static_cast<Index>(std.size())).array().square().log();
  return g;
}

}  // namespace

TEST_CASE("reconstruction loss examples") {
  Waveform a = Waveform::LinSpaced(10, -1.0, 2.0);
  CHECK(loss_reconstruction(a, a) == 0.0);
  Waveform impulse = Waveform::Zero(10);
  impulse(3) = 1.0;
  CHECK(loss_reconstruction(impulse, Waveform::Zero(10)) == 1.0);
  CHECK(loss_reconstruction(a.array() + 0.1, a) == doctest::Approx(0.01 * 10));
  CHECK_THROWS_AS(loss_reconstruction(a, Waveform::Zero(9)), std::invalid_argument);
}

TEST_CASE("KL closed form examples") {
  CHECK(loss_kl(gaussian({0, 0, 0}, {1, 1, 1})) == doctest::Approx(0.0));
  CHECK(loss_kl(gaussian({1}, {1})) == doctest::Approx(0.5));
  const double kl = loss_kl(gaussian({0}, {2}));
  CHECK(std::abs(kl - 0.8069) < 1e-4);
  CHECK(kl == doctest::Approx(0.5 * (4.0 - 1.0 - std::log(4.0))).epsilon(1e-14));
}

TEST_CASE("KL matches a Monte-Carlo estimate") {
  // E_q[log q(x) - log p(x)] for q = N(0.7, 1.6^2), p = N(0, 1)
  const double m = 0.7, s = 1.6;
  Rng rng(77);
  const int n = 400000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double e = normal(rng), x = m + s * e;
    const double v = -0.5 * e * e - std::log(s) + 0.5 * x * x;
    sum += v;
    sq += v * v;
  }
  const double mc = sum / n, se = std::sqrt((sq / n - mc * mc) / n);
  CHECK(std::abs(loss_kl(gaussian({m}, {s})) - mc) < 4.0 * se);
}

TEST_CASE("Wasserstein closed form examples") {
  CHECK(loss_wasserstein(gaussian({1, 2}, {0.5, 3}), gaussian({1, 2}, {0.5, 3})) == 0.0);
  CHECK(loss_wasserstein(gaussian({1, 0}, {1, 1}), gaussian({0, 0}, {1, 1})) == doctest::Approx(1.0));
  CHECK(loss_wasserstein(gaussian({0}, {2}), gaussian({0}, {1})) == doctest::Approx(1.0));
}

TEST_CASE("Wasserstein matches the sorted-sample transport cost") {
  // In one dimension the optimal coupling pairs order statistics.
  Rng rng(5);
  const int n = 200000;
  std::vector<double> a(n), b(n);
  for (auto& v : a) v = 0.3 + 1.5 * normal(rng);
  for (auto& v : b) v = -0.4 + 0.6 * normal(rng);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double cost = 0.0;
  for (int k = 0; k < n; ++k) cost += (a[k] - b[k]) * (a[k] - b[k]);
  cost /= n;
  CHECK(loss_wasserstein(gaussian({0.3}, {1.5}), gaussian({-0.4}, {0.6})) == doctest::Approx(cost).epsilon(0.02));
}

TEST_CASE("loss_total examples") {
  CHECK(loss_total(LossParts{}, 3.0, 2e-4) == 0.0);
  CHECK(loss_total(LossParts{1, 1, 1, 1}, 3.0, 2e-4) == doctest::Approx(7.0002).epsilon(1e-12));
  CHECK(loss_total(LossParts{2.5, 4, 5, 6}, 0.0, 0.0) == 2.5);
}

TEST_CASE("sample_latent") {
  const LatentGaussian g = gaussian({0.5, -1.0, 2.0}, {0.3, 1.0, 2.0});
  CHECK(sample_latent(g, Eigen::VectorXd::Zero(3)) == g.mean);
  LatentGaussian tight = g;
  tight.log_var.setConstant(-kLogVarClamp);
  CHECK((sample_latent(tight, Eigen::VectorXd::Constant(3, 3.0)) - g.mean).cwiseAbs().maxCoeff() < 0.03);

  Rng rng(12);
  const int n = 100000;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(3), e(3);
  for (int k = 0; k < n; ++k) {
    for (int d = 0; d < 3; ++d) e(d) = normal(rng);
    acc += sample_latent(g, e);
  }
  const Eigen::VectorXd emp = acc / n;
  for (int d = 0; d < 3; ++d) CHECK(std::abs(emp(d) - g.mean(d)) < 3.0 * g.std()(d) / std::sqrt(double(n)));
}

TEST_CASE("config validation") {
  NetworkConfig c;
  CHECK(c.padded_frames() == 1024);
  c.encoder_channels = {32, 64};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = NetworkConfig{};
  c.latent_dim = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  TrainConfig t;
  t.gamma = 1.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = TrainConfig{};
  t.eta = -1.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("full-width shapes") {
  NetworkConfig c;
  IqVed<float> net(c);
  net.init(1);
  Rng rng(1);
  const SlowTimeWindow w = random_window(17, 1000, rng);
  const auto [gi, gq] = encode(net, w);
  CHECK(gi.mean.size() == 64);
  CHECK(gq.log_var.size() == 64);
  const Mat<float> out = net.decode(Mat<float>::Zero(64, 1), false);
  CHECK(out.rows() == 1);
  CHECK(out.cols() == 1024);
  CHECK(infer(net, w).size() == 1000);
}

TEST_CASE("encoding is deterministic and batch-independent in evaluation mode") {
  IqVed<float> net(small_config());
  net.init(3);
  Rng rng(2);
  const SlowTimeWindow a = random_window(3, 100, rng), b = random_window(3, 100, rng);
  const auto e1 = encode(net, a), e2 = encode(net, a);
  CHECK(e1.first.mean == e2.first.mean);
  CHECK(e1.second.log_var == e2.second.log_var);
  const auto batch = make_batch<float>({&a, &a, &b}, {}, net.config());
  const auto [mi, li] = net.encode_i(batch.i, false);
  CHECK((mi.col(0).cast<double>() - e1.first.mean).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(mi.col(0) == mi.col(1));
  CHECK(infer(net, a) == infer(net, a));
}

TEST_CASE("zero network decodes to zero") {
  IqVed<float> net(small_config());
  for (auto* p : net.params()) p->value.setZero();
  const Mat<float> out = net.decode(Mat<float>::Random(8, 2), false);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("padding and crop round trip for several lengths") {
  for (Index frames : {32, 50, 100, 129}) {
    NetworkConfig c = small_config();
    c.frames = frames;
    IqVed<float> net(c);
    net.init(4);
    Rng rng(frames);
    CHECK(infer(net, random_window(3, frames, rng)).size() == frames);
  }
}

TEST_CASE("analytic gradients match central differences") {
  const NetworkConfig c = tiny_config();
  IqVed<double> net(c);
  net.init(5);
  Rng rng(3);
  for (auto* p : net.params())
    for (Index k = 0; k < p->value.size(); ++k) p->value(k) += 0.1 * normal(rng);
  const Index len = c.padded_frames();
  Batch<double> b;
  b.i = Mat<double>::Zero(2, len);
  b.q = b.i;
  b.truth.resize(c.frames, 1);
  for (Index t = 0; t < c.frames; ++t) {
    for (int ch = 0; ch < 2; ++ch) {
      b.i(ch, t) = normal(rng);
      b.q(ch, t) = normal(rng);
    }
    b.truth(t, 0) = normal(rng);
  }
  Mat<double> ni(4, 1), nq(4, 1);
  for (int k = 0; k < 4; ++k) {
    ni(k, 0) = normal(rng);
    nq(k, 0) = normal(rng);
  }
  const double gamma = 3.0, eta = 0.5;
  auto loss = [&] {
    IqVed<double> copy = net;
    return copy.forward_backward(b, ni, nq, gamma, eta).total(gamma, eta);
  };
  net.zero_grad();
  net.forward_backward(b, ni, nq, gamma, eta);
  auto ps = net.params();
  double worst = 0.0;
  Index checked = 0;
  for (auto* p : ps) {
    const Mat<double> grad = p->grad;
    for (Index k = 0; k < p->value.size(); ++k) {
      const double v = p->value(k), h = 1e-6;
      p->value(k) = v + h;
      const double up = loss();
      p->value(k) = v - h;
      const double down = loss();
      p->value(k) = v;
      const double fd = (up - down) / (2 * h), an = grad(k);
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4}));
      ++checked;
    }
  }
  CHECK(checked == net.parameter_count());
  CHECK(worst < 1e-3);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  IqVed<float> net(small_config());
  net.init(8);
  Rng rng(9);
  std::vector<TrainSample> data;
  for (int k = 0; k < 6; ++k) data.push_back({random_window(3, 100, rng), Waveform::Random(100)});
  std::vector<Mat<float>> before;
  for (auto* p : net.params()) before.push_back(p->value);
  TrainConfig t;
  t.learning_rate = 0.0;
  t.epochs = 1;
  t.batch_size = 4;
  train(net, data, t);
  const auto after = net.params();
  bool same = true;
  for (std::size_t k = 0; k < after.size(); ++k) same = same && after[k]->value == before[k];
  CHECK(same);
}

TEST_CASE("training is deterministic given the seed") {
  Rng rng(10);
  std::vector<TrainSample> data;
  for (int k = 0; k < 10; ++k) data.push_back({random_window(3, 100, rng), Waveform::Random(100)});
  TrainConfig t;
  t.epochs = 3;
  t.batch_size = 4;
  t.learning_rate = 1e-3;
  t.augment_count = 60;
  auto run = [&] {
    IqVed<float> net(small_config());
    net.init(t.rng_seed);
    const auto h = train(net, data, t);
    std::vector<double> out;
    for (const auto& e : h) out.push_back(e.total);
    return std::make_pair(out, infer(net, data[0].window));
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("divergence aborts with diagnostics") {
  Rng rng(11);
  std::vector<TrainSample> data;
  for (int k = 0; k < 4; ++k) data.push_back({random_window(3, 100, rng), Waveform::Random(100)});
  data[1].truth(5) = std::nan("");
  IqVed<float> net(small_config());
  net.init(1);
  TrainConfig t;
  t.epochs = 1;
  t.batch_size = 4;
  CHECK_THROWS_AS(train(net, data, t), TrainingDiverged);
}

TEST_CASE("latent fusion order does not matter") {
  IqVed<float> net(small_config());
  net.init(6);
  Rng rng(12);
  const SlowTimeWindow w = random_window(3, 100, rng);
  const auto [gi, gq] = encode(net, w);
  const Mat<float> a = gi.mean.cast<float>() + gq.mean.cast<float>();
  const Mat<float> b = gq.mean.cast<float>() + gi.mean.cast<float>();
  CHECK(net.decode(a, false) == net.decode(b, false));
}
