#pragma once

#include <functional>
#include <string>
#include <vector>

#include "uwbresp/nn.hpp"
#include "uwbresp/types.hpp"

namespace uwbresp {

struct NetworkConfig {
  std::vector<Index> encoder_channels{32, 64, 128, 256, 512};
  std::vector<Index> decoder_channels{512, 256, 128, 64, 32};
  Index kernel_size = 3;
  Index latent_dim = 64;
  double leaky_slope = 0.01;
  Index input_channels = 17;
  Index frames = 1000;
  /// Starting bias of the log-variance outputs; weights are Xavier either way.
  double initial_log_var = 0.0;

  Index stages() const { return static_cast<Index>(encoder_channels.size()); }
  /// Frames rounded up to a multiple of 2^stages.
  Index padded_frames() const;
  void validate() const;
};

enum class Optimizer { sgd, adam };

struct TrainConfig {
  double gamma = 3.0;
  double eta = 2e-4;
  Index batch_size = 64;
  double learning_rate = 0.01;
  Optimizer optimizer = Optimizer::sgd;
  /// SGD momentum, or Adam's beta1.
  double momentum = 0.9;
  double adam_beta2 = 0.999;
  /// Learning rate follows a half cosine down to zero over the run.
  bool cosine_decay = false;
  int epochs = 10;
  std::uint64_t rng_seed = 1;
  /// Rotations k * 2 pi / count available to each window; 1 disables augmentation.
  int augment_count = 1;
  /// Global gradient-norm ceiling; 0 disables clipping.
  double grad_clip = 0.0;
  /// Epochs over which the KL and alignment weights ramp linearly from 0.
  int warmup_epochs = 0;

  void validate() const;
};

/// Diagonal Gaussian stored as mean and log-variance.
struct LatentGaussian {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_var;

  Eigen::VectorXd std() const { return (0.5 * log_var.array()).exp(); }
  bool valid() const { return mean.size() == log_var.size() && mean.allFinite() && log_var.allFinite(); }
};

Eigen::VectorXd sample_latent(const LatentGaussian& g, const Eigen::VectorXd& noise);

double loss_reconstruction(const Waveform& output, const Waveform& truth);
double loss_kl(const LatentGaussian& g);
double loss_wasserstein(const LatentGaussian& gi, const LatentGaussian& gq);

struct LossParts {
  double rc = 0.0;
  double kl_i = 0.0;
  double kl_q = 0.0;
  double da = 0.0;

  double total(double gamma, double eta) const { return rc + gamma * (kl_i + kl_q) + eta * da; }
};

inline double loss_total(const LossParts& p, double gamma, double eta) { return p.total(gamma, eta); }

inline constexpr double kLogVarClamp = 10.0;

template <typename Scalar>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const NetworkConfig& c) : length_(c.padded_frames()), initial_log_var_(c.initial_log_var) {
    Index in = c.input_channels;
    for (Index ch : c.encoder_channels) {
      conv_.emplace_back(in, ch, c.kernel_size, false);
      norm_.emplace_back(ch);
      act_.emplace_back(c.leaky_slope);
      in = ch;
    }
    final_len_ = length_ >> c.stages();
    head_ = nn::Linear<Scalar>(in * final_len_, 2 * c.latent_dim);
    latent_ = c.latent_dim;
    last_channels_ = in;
  }

  void init(Rng& rng) {
    for (auto& cv : conv_) cv.init(rng);
    head_.init(rng);
    head_.bias.value.bottomRows(latent_).setConstant(static_cast<Scalar>(initial_log_var_));
  }

  /// x: channels x (batch * padded length). Returns mean and clamped log-variance, latent x batch.
  std::pair<Mat<Scalar>, Mat<Scalar>> forward(const Mat<Scalar>& x, bool training) {
    if (x.cols() % length_) throw std::invalid_argument("encoder input length mismatch");
    batch_ = x.cols() / length_;
    Mat<Scalar> h = x;
    Index len = length_;
    for (std::size_t s = 0; s < conv_.size(); ++s) {
      h = conv_[s].forward(h, len);
      h = norm_[s].forward(h, training);
      h = act_[s].forward(h);
      h = nn::avg_pool2(h);
      len /= 2;
    }
    const Mat<Scalar> out = head_.forward(nn::reshape(h, last_channels_ * final_len_, batch_));
    Mat<Scalar> lv = out.bottomRows(latent_);
    clamped_ = lv.array().abs() > Scalar(kLogVarClamp);
    lv = lv.cwiseMax(Scalar(-kLogVarClamp)).cwiseMin(Scalar(kLogVarClamp));
    return {out.topRows(latent_), lv};
  }

  /// Gradients with respect to mean and clamped log-variance.
  Mat<Scalar> backward(const Mat<Scalar>& dmean, const Mat<Scalar>& dlogvar) {
    Mat<Scalar> dout(2 * latent_, batch_);
    dout.topRows(latent_) = dmean;
    dout.bottomRows(latent_) = clamped_.select(Mat<Scalar>::Zero(latent_, batch_), dlogvar);
    Mat<Scalar> dh = nn::reshape(head_.backward(dout), last_channels_, batch_ * final_len_);
    for (std::size_t s = conv_.size(); s-- > 0;) {
      dh = nn::avg_pool2_backward(dh);
      dh = act_[s].backward(dh);
      dh = norm_[s].backward(dh);
      dh = conv_[s].backward(dh);
    }
    return dh;
  }

  void params(nn::ParamList<Scalar>& out) {
    for (std::size_t s = 0; s < conv_.size(); ++s) {
      conv_[s].params(out);
      norm_[s].params(out);
    }
    head_.params(out);
  }

  std::vector<nn::BatchNorm<Scalar>*> norms() {
    std::vector<nn::BatchNorm<Scalar>*> out;
    for (auto& n : norm_) out.push_back(&n);
    return out;
  }

 private:
  std::vector<nn::Conv1d<Scalar>> conv_;
  std::vector<nn::BatchNorm<Scalar>> norm_;
  std::vector<nn::LeakyRelu<Scalar>> act_;
  nn::Linear<Scalar> head_;
  Index length_ = 0, final_len_ = 0, latent_ = 0, last_channels_ = 0, batch_ = 0;
  double initial_log_var_ = 0.0;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> clamped_;
};

template <typename Scalar>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const NetworkConfig& c) : length_(c.padded_frames()) {
    first_channels_ = c.decoder_channels.front();
    start_len_ = length_ >> c.stages();
    fc_ = nn::Linear<Scalar>(c.latent_dim, first_channels_ * start_len_);
    Index in = first_channels_;
    for (Index ch : c.decoder_channels) {
      conv_.emplace_back(in, ch, c.kernel_size, true);
      norm_.emplace_back(ch);
      act_.emplace_back(c.leaky_slope);
      in = ch;
    }
    out_ = nn::Conv1d<Scalar>(in, 1, c.kernel_size, false);
  }

  void init(Rng& rng) {
    fc_.init(rng);
    for (auto& cv : conv_) cv.init(rng);
    out_.init(rng);
  }

  /// z: latent x batch. Returns 1 x (batch * padded length).
  Mat<Scalar> forward(const Mat<Scalar>& z, bool training) {
    batch_ = z.cols();
    Mat<Scalar> h = nn::reshape(fc_.forward(z), first_channels_, batch_ * start_len_);
    Index len = start_len_;
    for (std::size_t s = 0; s < conv_.size(); ++s) {
      h = conv_[s].forward(h, len);
      h = nn::upsample2(h);
      len *= 2;
      h = norm_[s].forward(h, training);
      h = act_[s].forward(h);
    }
    return out_.forward(h, len);
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy) {
    Mat<Scalar> dh = out_.backward(dy);
    for (std::size_t s = conv_.size(); s-- > 0;) {
      dh = act_[s].backward(dh);
      dh = norm_[s].backward(dh);
      dh = nn::upsample2_backward(dh);
      dh = conv_[s].backward(dh);
    }
    return fc_.backward(nn::reshape(dh, first_channels_ * start_len_, batch_));
  }

  void params(nn::ParamList<Scalar>& out) {
    fc_.params(out);
    for (std::size_t s = 0; s < conv_.size(); ++s) {
      conv_[s].params(out);
      norm_[s].params(out);
    }
    out_.params(out);
  }

  std::vector<nn::BatchNorm<Scalar>*> norms() {
    std::vector<nn::BatchNorm<Scalar>*> out;
    for (auto& n : norm_) out.push_back(&n);
    return out;
  }

 private:
  nn::Linear<Scalar> fc_;
  std::vector<nn::Conv1d<Scalar>> conv_;
  std::vector<nn::BatchNorm<Scalar>> norm_;
  std::vector<nn::LeakyRelu<Scalar>> act_;
  nn::Conv1d<Scalar> out_;
  Index length_ = 0, start_len_ = 0, first_channels_ = 0, batch_ = 0;
};

/// A minibatch in network layout: streams are channels x (batch * padded
/// frames), truth is frames x batch.
template <typename Scalar>
struct Batch {
  Mat<Scalar> i;
  Mat<Scalar> q;
  Mat<Scalar> truth;
};

template <typename Scalar>
class IqVed {
 public:
  IqVed() = default;
  explicit IqVed(const NetworkConfig& config) : config_(config) {
    config_.validate();
    enc_i_ = Encoder<Scalar>(config_);
    enc_q_ = Encoder<Scalar>(config_);
    dec_ = Decoder<Scalar>(config_);
  }

  void init(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 11));
    enc_i_.init(rng);
    enc_q_.init(rng);
    dec_.init(rng);
  }

  const NetworkConfig& config() const { return config_; }

  /// Fixed parameter order: I encoder, Q encoder, decoder; within each, layer
  /// by layer with weight before bias (gamma before beta).
  nn::ParamList<Scalar> params() {
    nn::ParamList<Scalar> out;
    enc_i_.params(out);
    enc_q_.params(out);
    dec_.params(out);
    return out;
  }

  /// Normalization layers in the same order as params().
  std::vector<nn::BatchNorm<Scalar>*> norms() {
    std::vector<nn::BatchNorm<Scalar>*> out;
    for (auto* n : enc_i_.norms()) out.push_back(n);
    for (auto* n : enc_q_.norms()) out.push_back(n);
    for (auto* n : dec_.norms()) out.push_back(n);
    return out;
  }

  Index parameter_count() {
    Index n = 0;
    for (auto* p : params()) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto* p : params()) p->grad.setZero();
  }

  std::pair<Mat<Scalar>, Mat<Scalar>> encode_i(const Mat<Scalar>& x, bool training) { return enc_i_.forward(x, training); }
  std::pair<Mat<Scalar>, Mat<Scalar>> encode_q(const Mat<Scalar>& x, bool training) { return enc_q_.forward(x, training); }
  Mat<Scalar> decode(const Mat<Scalar>& z, bool training) { return dec_.forward(z, training); }

  /// Training-mode forward and backward over one batch; gradients of the
  /// batch-mean loss accumulate into the parameters. `noise_*` are standard
  /// normal, latent x batch.
  LossParts forward_backward(const Batch<Scalar>& b, const Mat<Scalar>& noise_i, const Mat<Scalar>& noise_q,
                             double gamma, double eta) {
    const Index batch = b.truth.cols();
    const Index frames = b.truth.rows();
    const Index len = config_.padded_frames();
    auto [mi, li] = enc_i_.forward(b.i, true);
    auto [mq, lq] = enc_q_.forward(b.q, true);
    const Mat<Scalar> si = (Scalar(0.5) * li.array()).exp().matrix();
    const Mat<Scalar> sq = (Scalar(0.5) * lq.array()).exp().matrix();
    const Mat<Scalar> z = mi + si.cwiseProduct(noise_i) + mq + sq.cwiseProduct(noise_q);
    const Mat<Scalar> out = dec_.forward(z, true);

    const Scalar inv_b = Scalar(1) / static_cast<Scalar>(batch);
    const auto g = static_cast<Scalar>(gamma), e = static_cast<Scalar>(eta);
    LossParts parts;
    Mat<Scalar> dout = Mat<Scalar>::Zero(1, out.cols());
    for (Index k = 0; k < batch; ++k) {
      const auto diff = out.block(0, k * len, 1, frames).transpose() - b.truth.col(k);
      parts.rc += static_cast<double>(diff.squaredNorm());
      dout.block(0, k * len, 1, frames) = (Scalar(2) * inv_b) * diff.transpose();
    }
    auto kl = [](const Mat<Scalar>& m, const Mat<Scalar>& l) {
      return 0.5 * static_cast<double>((l.array().exp() + m.array().square() - Scalar(1) - l.array()).sum());
    };
    parts.kl_i = kl(mi, li);
    parts.kl_q = kl(mq, lq);
    parts.da = static_cast<double>((mi - mq).squaredNorm() + (si - sq).squaredNorm());
    parts.rc /= static_cast<double>(batch);
    parts.kl_i /= static_cast<double>(batch);
    parts.kl_q /= static_cast<double>(batch);
    parts.da /= static_cast<double>(batch);

    const Mat<Scalar> dz = dec_.backward(dout);
    const Mat<Scalar> dm_align = (Scalar(2) * e * inv_b) * (mi - mq);
    const Mat<Scalar> ds_align = (Scalar(2) * e * inv_b) * (si - sq);
    const Mat<Scalar> dmi = dz + (g * inv_b) * mi + dm_align;
    const Mat<Scalar> dmq = dz + (g * inv_b) * mq - dm_align;
    const Mat<Scalar> dsi = dz.cwiseProduct(noise_i) + ds_align;
    const Mat<Scalar> dsq = dz.cwiseProduct(noise_q) - ds_align;
    const Mat<Scalar> dli = (Scalar(0.5) * dsi.cwiseProduct(si)).array() +
                            (Scalar(0.5) * g * inv_b) * (li.array().exp() - Scalar(1));
    const Mat<Scalar> dlq = (Scalar(0.5) * dsq.cwiseProduct(sq)).array() +
                            (Scalar(0.5) * g * inv_b) * (lq.array().exp() - Scalar(1));
    enc_i_.backward(dmi, dli);
    enc_q_.backward(dmq, dlq);
    return parts;
  }

 private:
  NetworkConfig config_;
  Encoder<Scalar> enc_i_;
  Encoder<Scalar> enc_q_;
  Decoder<Scalar> dec_;
};

/// Pads each window's I and Q planes to the network length and stacks a batch.
template <typename Scalar>
Batch<Scalar> make_batch(const std::vector<const SlowTimeWindow*>& windows, const std::vector<const Waveform*>& truths,
                         const NetworkConfig& config, const std::vector<double>& rotations = {}) {
  const Index len = config.padded_frames();
  const Index n = static_cast<Index>(windows.size());
  Batch<Scalar> b;
  b.i = Mat<Scalar>::Zero(config.input_channels, n * len);
  b.q = Mat<Scalar>::Zero(config.input_channels, n * len);
  b.truth = Mat<Scalar>::Zero(config.frames, truths.empty() ? 0 : n);
  for (Index k = 0; k < n; ++k) {
    const SlowTimeWindow& w = *windows[static_cast<std::size_t>(k)];
    if (w.channels() != config.input_channels || w.frames() != config.frames)
      throw std::invalid_argument("window shape does not match the network input");
    const double th = rotations.empty() ? 0.0 : rotations[static_cast<std::size_t>(k)];
    const double c = std::cos(th), s = std::sin(th);
    b.i.block(0, k * len, w.channels(), w.frames()) = (c * w.i - s * w.q).template cast<Scalar>();
    b.q.block(0, k * len, w.channels(), w.frames()) = (s * w.i + c * w.q).template cast<Scalar>();
    if (!truths.empty()) b.truth.col(k) = truths[static_cast<std::size_t>(k)]->template cast<Scalar>();
  }
  return b;
}

struct EpochStats {
  int epoch = 0;
  LossParts loss;
  double total = 0.0;
};

struct TrainSample {
  SlowTimeWindow window;  // network-conditioned (see normalize_window)
  Waveform truth;         // standardized
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minibatch SGD with momentum on the composite loss. Deterministic given
/// the config seed. Each epoch visits every window once; with augmentation
/// each visit draws one of the `augment_count` rotations.
std::vector<EpochStats> train(IqVed<float>& net, const std::vector<TrainSample>& data, const TrainConfig& config,
                              const std::function<void(const EpochStats&)>& on_epoch = {});

/// Deterministic inference: decodes the sum of the latent means with frozen
/// normalization and standardizes the output.
Waveform infer(IqVed<float>& net, const SlowTimeWindow& window);
std::vector<Waveform> infer(IqVed<float>& net, const std::vector<SlowTimeWindow>& windows, Index chunk = 64);

/// Latent Gaussians of both streams for one conditioned window.
std::pair<LatentGaussian, LatentGaussian> encode(IqVed<float>& net, const SlowTimeWindow& window);

}  // namespace uwbresp
