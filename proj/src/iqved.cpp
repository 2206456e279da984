#include "uwbresp/iqved.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "uwbresp/pipeline.hpp"

namespace uwbresp {

Index NetworkConfig::padded_frames() const {
  const Index unit = Index(1) << stages();
  return (frames + unit - 1) / unit * unit;
}

void NetworkConfig::validate() const {
  if (encoder_channels.empty() || encoder_channels.size() != decoder_channels.size())
    throw std::invalid_argument("encoder and decoder need the same, non-zero number of stages");
  for (Index c : encoder_channels)
    if (c < 1) throw std::invalid_argument("encoder channel counts must be positive");
  for (Index c : decoder_channels)
    if (c < 1) throw std::invalid_argument("decoder channel counts must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw std::invalid_argument("kernel_size must be odd");
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be at least 1");
  if (input_channels < 1) throw std::invalid_argument("input_channels must be at least 1");
  if (frames < 1) throw std::invalid_argument("frames must be at least 1");
  if (!(leaky_slope >= 0.0)) throw std::invalid_argument("leaky_slope must be non-negative");
  if (!(std::abs(initial_log_var) <= kLogVarClamp)) throw std::invalid_argument("initial_log_var must lie within the clamp");
}

void TrainConfig::validate() const {
  if (!(gamma > 1.0)) throw std::invalid_argument("gamma must exceed 1");
  if (!(eta >= 0.0)) throw std::invalid_argument("eta must be non-negative");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be at least 2");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw std::invalid_argument("adam_beta2 must lie in [0, 1)");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (augment_count < 1) throw std::invalid_argument("augment_count must be at least 1");
  if (!(grad_clip >= 0.0)) throw std::invalid_argument("grad_clip must be non-negative");
  if (warmup_epochs < 0) throw std::invalid_argument("warmup_epochs must be non-negative");
}

Eigen::VectorXd sample_latent(const LatentGaussian& g, const Eigen::VectorXd& noise) {
  if (noise.size() != g.mean.size()) throw std::invalid_argument("noise dimension must equal latent_dim");
  const Eigen::VectorXd lv = g.log_var.cwiseMax(-kLogVarClamp).cwiseMin(kLogVarClamp);
  return g.mean + ((0.5 * lv.array()).exp() * noise.array()).matrix();
}

double loss_reconstruction(const Waveform& output, const Waveform& truth) {
  if (output.size() != truth.size()) throw std::invalid_argument("reconstruction loss: length mismatch");
  return (output - truth).squaredNorm();
}

double loss_kl(const LatentGaussian& g) {
  if (!g.valid()) throw std::invalid_argument("invalid latent Gaussian");
  return 0.5 * (g.log_var.array().exp() + g.mean.array().square() - 1.0 - g.log_var.array()).sum();
}

double loss_wasserstein(const LatentGaussian& gi, const LatentGaussian& gq) {
  if (!gi.valid() || !gq.valid() || gi.mean.size() != gq.mean.size())
    throw std::invalid_argument("wasserstein loss needs valid Gaussians of equal dimension");
  return (gi.mean - gq.mean).squaredNorm() + (gi.std() - gq.std()).squaredNorm();
}

namespace {

void check_finite(const LossParts& p, int epoch, std::size_t batch) {
  const double v[] = {p.rc, p.kl_i, p.kl_q, p.da};
  for (double x : v)
    if (!std::isfinite(x)) {
      std::ostringstream os;
      os << "training diverged at epoch " << epoch << ", batch " << batch << ": L_RC=" << p.rc << " L_IR=" << p.kl_i
         << " L_QR=" << p.kl_q << " L_DA=" << p.da;
      throw TrainingDiverged(os.str());
    }
}

}  // namespace

std::vector<EpochStats> train(IqVed<float>& net, const std::vector<TrainSample>& data, const TrainConfig& config,
                              const std::function<void(const EpochStats&)>& on_epoch) {
  config.validate();
  const NetworkConfig& nc = net.config();
  const std::size_t n = data.size();
  if (n < 2) throw std::invalid_argument("training needs at least two windows");
  for (const auto& s : data)
    if (s.window.channels() != nc.input_channels || s.window.frames() != nc.frames || s.truth.size() != nc.frames)
      throw std::invalid_argument("training window shape does not match the network input");

  Rng order_rng(mix_seed(config.rng_seed, 21));
  Rng noise_rng(mix_seed(config.rng_seed, 22));
  Rng rot_rng(mix_seed(config.rng_seed, 23));
  auto params = net.params();
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const float mu = static_cast<float>(config.momentum), b2 = static_cast<float>(config.adam_beta2);
  std::vector<std::size_t> order(n);
  std::vector<EpochStats> history;
  long step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = n - 1; k > 0; --k) std::swap(order[k], order[uniform_index(order_rng, k + 1)]);
    const double ramp = config.warmup_epochs > 0 ? std::min(1.0, double(epoch) / config.warmup_epochs) : 1.0;
    const double gamma = ramp * config.gamma, eta = ramp * config.eta;
    const float lr = static_cast<float>(
        config.cosine_decay ? 0.5 * config.learning_rate * (1.0 + std::cos(kPi * (epoch - 1) / config.epochs))
                            : config.learning_rate);

    EpochStats stats;
    stats.epoch = epoch;
    std::size_t seen = 0;
    for (std::size_t start = 0, b = 0; start < n; start += bs, ++b) {
      const std::size_t stop = std::min(n, start + bs);
      if (stop - start < 2) break;  // batch statistics need two windows
      std::vector<const SlowTimeWindow*> wins;
      std::vector<const Waveform*> truths;
      std::vector<double> rot;
      for (std::size_t k = start; k < stop; ++k) {
        wins.push_back(&data[order[k]].window);
        truths.push_back(&data[order[k]].truth);
        const auto r = config.augment_count > 1 ? uniform_index(rot_rng, std::uint64_t(config.augment_count)) : 0;
        rot.push_back(2.0 * kPi * double(r) / double(config.augment_count));
      }
      const Batch<float> batch = make_batch<float>(wins, truths, nc, rot);
      const Index cols = static_cast<Index>(stop - start);
      Mat<float> ni(nc.latent_dim, cols), nq(nc.latent_dim, cols);
      for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < nc.latent_dim; ++r) ni(r, c) = static_cast<float>(normal(noise_rng));
      for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < nc.latent_dim; ++r) nq(r, c) = static_cast<float>(normal(noise_rng));

      net.zero_grad();
      const LossParts parts = net.forward_backward(batch, ni, nq, gamma, eta);
      check_finite(parts, epoch, b);

      float scale = 1.0f;
      if (config.grad_clip > 0.0) {
        double sq = 0.0;
        for (auto* p : params) sq += p->grad.template cast<double>().squaredNorm();
        const double norm = std::sqrt(sq);
        if (!std::isfinite(norm)) throw TrainingDiverged("non-finite gradient at epoch " + std::to_string(epoch));
        if (norm > config.grad_clip) scale = static_cast<float>(config.grad_clip / norm);
      }
      ++step;
      if (config.optimizer == Optimizer::adam) {
        const float c1 = 1.0f - std::pow(mu, float(step)), c2 = 1.0f - std::pow(b2, float(step));
        const float a = lr * std::sqrt(c2) / c1;
        for (auto* p : params) {
          p->velocity = mu * p->velocity + (1.0f - mu) * scale * p->grad;
          p->second = b2 * p->second + (1.0f - b2) * (scale * p->grad).cwiseAbs2();
          p->value.array() -= a * p->velocity.array() / (p->second.array().sqrt() + 1e-8f);
        }
      } else {
        for (auto* p : params) {
          p->velocity = mu * p->velocity + scale * p->grad;
          p->value -= lr * p->velocity;
        }
      }

      const double w = double(cols);
      stats.loss.rc += w * parts.rc;
      stats.loss.kl_i += w * parts.kl_i;
      stats.loss.kl_q += w * parts.kl_q;
      stats.loss.da += w * parts.da;
      seen += stop - start;
    }
    const double inv = 1.0 / double(std::max<std::size_t>(seen, 1));
    stats.loss.rc *= inv;
    stats.loss.kl_i *= inv;
    stats.loss.kl_q *= inv;
    stats.loss.da *= inv;
    stats.total = stats.loss.total(config.gamma, config.eta);
    check_finite(stats.loss, epoch, 0);
    for (auto* p : params)
      if (!p->value.allFinite()) throw TrainingDiverged("non-finite parameters after epoch " + std::to_string(epoch));
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return history;
}

std::vector<Waveform> infer(IqVed<float>& net, const std::vector<SlowTimeWindow>& windows, Index chunk) {
  const NetworkConfig& nc = net.config();
  const Index len = nc.padded_frames();
  std::vector<Waveform> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += static_cast<std::size_t>(chunk)) {
    const std::size_t stop = std::min(windows.size(), start + static_cast<std::size_t>(chunk));
    std::vector<const SlowTimeWindow*> wins;
    for (std::size_t k = start; k < stop; ++k) wins.push_back(&windows[k]);
    const Batch<float> b = make_batch<float>(wins, {}, nc);
    const Mat<float> mi = net.encode_i(b.i, false).first;
    const Mat<float> mq = net.encode_q(b.q, false).first;
    const Mat<float> y = net.decode(mi + mq, false);
    for (std::size_t k = 0; k < wins.size(); ++k) {
      const Waveform w = y.block(0, Index(k) * len, 1, nc.frames).transpose().cast<double>();
      out.push_back(standardize(w));
    }
  }
  return out;
}

Waveform infer(IqVed<float>& net, const SlowTimeWindow& window) { return infer(net, std::vector{window}).front(); }

std::pair<LatentGaussian, LatentGaussian> encode(IqVed<float>& net, const SlowTimeWindow& window) {
  const Batch<float> b = make_batch<float>({&window}, {}, net.config());
  auto [mi, li] = net.encode_i(b.i, false);
  auto [mq, lq] = net.encode_q(b.q, false);
  return {LatentGaussian{mi.col(0).cast<double>(), li.col(0).cast<double>()},
          LatentGaussian{mq.col(0).cast<double>(), lq.col(0).cast<double>()}};
}

}  // namespace uwbresp
