#pragma once

// Minimal 1-D convolutional building blocks with hand-written backward passes.
// Activations are channels x (batch * length), column-major, so each sample
// occupies a contiguous run of `length` columns.

#include <cmath>
#include <vector>

#include "uwbresp/rng.hpp"
#include "uwbresp/types.hpp"

namespace uwbresp::nn {

template <typename Scalar>
struct Param {
  Mat<Scalar> value;
  Mat<Scalar> grad;
  Mat<Scalar> velocity;  // momentum, or Adam's first moment
  Mat<Scalar> second;    // Adam's second moment

  void resize(Index rows, Index cols) {
    value = Mat<Scalar>::Zero(rows, cols);
    grad = Mat<Scalar>::Zero(rows, cols);
    velocity = Mat<Scalar>::Zero(rows, cols);
    second = Mat<Scalar>::Zero(rows, cols);
  }
};

template <typename Scalar>
using ParamList = std::vector<Param<Scalar>*>;

template <typename Scalar>
void xavier_uniform(Mat<Scalar>& w, Index fan_in, Index fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Index c = 0; c < w.cols(); ++c)
    for (Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<Scalar>(uniform(rng, -a, a));
}

/// Same-length 1-D convolution, odd kernel, zero padding (k - 1) / 2.
/// Weight block k (columns k*in .. k*in+in-1) multiplies x[t + k - pad], or
/// x[t + pad - k] when `transposed` (stride-1 transposed convolution).
template <typename Scalar>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(Index in, Index out, Index kernel, bool transposed) : in_(in), out_(out), k_(kernel), transposed_(transposed) {
    if (in < 1 || out < 1 || kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("bad Conv1d shape");
    weight.resize(out, kernel * in);
    bias.resize(out, 1);
  }

  void init(Rng& rng) { xavier_uniform(weight.value, in_ * k_, out_ * k_, rng); }

  Mat<Scalar> forward(const Mat<Scalar>& x, Index length) {
    if (x.rows() != in_ || length < 1 || x.cols() % length) throw std::invalid_argument("Conv1d input shape mismatch");
    length_ = length;
    col_ = im2col(x, length);
    Mat<Scalar> y = weight.value * col_;
    y.colwise() += bias.value.col(0);
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy) {
    weight.grad.noalias() += dy * col_.transpose();
    bias.grad.col(0) += dy.rowwise().sum();
    const Mat<Scalar> dcol = weight.value.transpose() * dy;
    return col2im(dcol, length_);
  }

  void params(ParamList<Scalar>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Param<Scalar> weight;
  Param<Scalar> bias;

 private:
  Index shift(Index k) const {
    const Index pad = (k_ - 1) / 2;
    return transposed_ ? pad - k : k - pad;
  }

  Mat<Scalar> im2col(const Mat<Scalar>& x, Index len) const {
    const Index batch = x.cols() / len;
    Mat<Scalar> col = Mat<Scalar>::Zero(k_ * in_, x.cols());
    for (Index k = 0; k < k_; ++k) {
      const Index s = shift(k);
      const Index t0 = std::max<Index>(0, -s), t1 = std::min(len, len - s);
      if (t1 <= t0) continue;
      for (Index b = 0; b < batch; ++b)
        col.block(k * in_, b * len + t0, in_, t1 - t0) = x.block(0, b * len + t0 + s, in_, t1 - t0);
    }
    return col;
  }

  Mat<Scalar> col2im(const Mat<Scalar>& col, Index len) const {
    const Index batch = col.cols() / len;
    Mat<Scalar> dx = Mat<Scalar>::Zero(in_, col.cols());
    for (Index k = 0; k < k_; ++k) {
      const Index s = shift(k);
      const Index t0 = std::max<Index>(0, -s), t1 = std::min(len, len - s);
      if (t1 <= t0) continue;
      for (Index b = 0; b < batch; ++b)
        dx.block(0, b * len + t0 + s, in_, t1 - t0) += col.block(k * in_, b * len + t0, in_, t1 - t0);
    }
    return dx;
  }

  Index in_ = 0, out_ = 0, k_ = 3;
  bool transposed_ = false;
  Index length_ = 0;
  Mat<Scalar> col_;
};

/// Per-channel normalization over batch and time. Training mode uses batch
/// statistics and updates running estimates; evaluation mode uses the latter.
template <typename Scalar>
class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(Index channels, double momentum = 0.1, double eps = 1e-5) : momentum_(momentum), eps_(eps) {
    gamma.resize(channels, 1);
    beta.resize(channels, 1);
    gamma.value.setOnes();
    running_mean = Vec<Scalar>::Zero(channels);
    running_var = Vec<Scalar>::Ones(channels);
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, bool training) {
    const Index n = x.cols();
    Vec<Scalar> mean, var;
    if (training) {
      if (n < 2) throw std::invalid_argument("BatchNorm needs at least two values per channel in training");
      mean = x.rowwise().mean();
      var = (x.colwise() - mean).array().square().rowwise().mean();
      const Scalar m = static_cast<Scalar>(momentum_);
      running_mean = (Scalar(1) - m) * running_mean + m * mean;
      running_var = (Scalar(1) - m) * running_var + m * var * static_cast<Scalar>(double(n) / double(n - 1));
    } else {
      mean = running_mean;
      var = running_var;
    }
    inv_std_ = (var.array() + static_cast<Scalar>(eps_)).rsqrt();
    xhat_ = (x.colwise() - mean).array().colwise() * inv_std_.array();
    Mat<Scalar> y = xhat_.array().colwise() * gamma.value.col(0).array();
    y.colwise() += beta.value.col(0);
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy) {
    const Scalar n = static_cast<Scalar>(dy.cols());
    gamma.grad.col(0) += (dy.array() * xhat_.array()).rowwise().sum().matrix();
    beta.grad.col(0) += dy.rowwise().sum();
    const Mat<Scalar> dxhat = dy.array().colwise() * gamma.value.col(0).array();
    const Vec<Scalar> s1 = dxhat.rowwise().sum();
    const Vec<Scalar> s2 = (dxhat.array() * xhat_.array()).rowwise().sum();
    Mat<Scalar> dx = (n * dxhat.array()).colwise() - s1.array();
    dx.array() -= xhat_.array().colwise() * s2.array();
    return dx.array().colwise() * (inv_std_.array() / n);
  }

  void params(ParamList<Scalar>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }

  Param<Scalar> gamma;
  Param<Scalar> beta;
  Vec<Scalar> running_mean;
  Vec<Scalar> running_var;

 private:
  double momentum_ = 0.1, eps_ = 1e-5;
  Vec<Scalar> inv_std_;
  Mat<Scalar> xhat_;
};

template <typename Scalar>
class LeakyRelu {
 public:
  explicit LeakyRelu(double slope = 0.01) : slope_(static_cast<Scalar>(slope)) {}

  Mat<Scalar> forward(const Mat<Scalar>& x) {
    positive_ = x.array() > Scalar(0);
    return positive_.select(x, slope_ * x);
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy) const { return positive_.select(dy, slope_ * dy); }

 private:
  Scalar slope_;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> positive_;
};

template <typename Scalar>
using StridedCols = Eigen::Map<const Mat<Scalar>, 0, Eigen::OuterStride<>>;
template <typename Scalar>
using StridedColsMut = Eigen::Map<Mat<Scalar>, 0, Eigen::OuterStride<>>;

/// Averages adjacent time steps; per-sample lengths must be even.
template <typename Scalar>
Mat<Scalar> avg_pool2(const Mat<Scalar>& x) {
  const Index r = x.rows(), n = x.cols() / 2;
  Mat<Scalar> y = StridedCols<Scalar>(x.data(), r, n, Eigen::OuterStride<>(2 * r));
  y += StridedCols<Scalar>(x.data() + r, r, n, Eigen::OuterStride<>(2 * r));
  return Scalar(0.5) * y;
}

template <typename Scalar>
Mat<Scalar> avg_pool2_backward(const Mat<Scalar>& dy) {
  const Index r = dy.rows(), n = dy.cols();
  Mat<Scalar> dx(r, 2 * n);
  StridedColsMut<Scalar>(dx.data(), r, n, Eigen::OuterStride<>(2 * r)) = Scalar(0.5) * dy;
  StridedColsMut<Scalar>(dx.data() + r, r, n, Eigen::OuterStride<>(2 * r)) = Scalar(0.5) * dy;
  return dx;
}

/// Nearest-neighbour x2 upsampling in time.
template <typename Scalar>
Mat<Scalar> upsample2(const Mat<Scalar>& x) {
  const Index r = x.rows(), n = x.cols();
  Mat<Scalar> y(r, 2 * n);
  StridedColsMut<Scalar>(y.data(), r, n, Eigen::OuterStride<>(2 * r)) = x;
  StridedColsMut<Scalar>(y.data() + r, r, n, Eigen::OuterStride<>(2 * r)) = x;
  return y;
}

template <typename Scalar>
Mat<Scalar> upsample2_backward(const Mat<Scalar>& dy) {
  const Index r = dy.rows(), n = dy.cols() / 2;
  Mat<Scalar> dx = StridedCols<Scalar>(dy.data(), r, n, Eigen::OuterStride<>(2 * r));
  dx += StridedCols<Scalar>(dy.data() + r, r, n, Eigen::OuterStride<>(2 * r));
  return dx;
}

/// Reinterprets channels x (batch * length) as (channels * length) x batch and back;
/// both layouts share the same memory order.
template <typename Scalar>
Mat<Scalar> reshape(const Mat<Scalar>& x, Index rows, Index cols) {
  if (rows * cols != x.size()) throw std::invalid_argument("reshape size mismatch");
  return Eigen::Map<const Mat<Scalar>>(x.data(), rows, cols);
}

template <typename Scalar>
class Linear {
 public:
  Linear() = default;
  Linear(Index in, Index out) : in_(in), out_(out) {
    weight.resize(out, in);
    bias.resize(out, 1);
  }

  void init(Rng& rng) { xavier_uniform(weight.value, in_, out_, rng); }

  Mat<Scalar> forward(const Mat<Scalar>& x) {
    if (x.rows() != in_) throw std::invalid_argument("Linear input shape mismatch");
    x_ = x;
    Mat<Scalar> y = weight.value * x;
    y.colwise() += bias.value.col(0);
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy) {
    weight.grad.noalias() += dy * x_.transpose();
    bias.grad.col(0) += dy.rowwise().sum();
    return weight.value.transpose() * dy;
  }

  void params(ParamList<Scalar>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Param<Scalar> weight;
  Param<Scalar> bias;

 private:
  Index in_ = 0, out_ = 0;
  Mat<Scalar> x_;
};

}  // namespace uwbresp::nn
