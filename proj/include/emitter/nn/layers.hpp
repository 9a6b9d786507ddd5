// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <span>
#include <string>

#include "emitter/nn/parameter.hpp"

namespace emitter::nn {

// Inverted dropout mask: 0 with probability p, else 1/(1-p).
inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = keep(rng) ? scale : 0.0;
  return m;
}

// Identity at inference (or p == 0); masks and rescales while training.
inline Matrix dropout(const Matrix& x, double p, bool training, Rng& rng, Matrix* mask_out = nullptr) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must lie in [0, 1)");
  if (!training || p == 0.0) {
    if (mask_out) *mask_out = Matrix::Ones(x.rows(), x.cols());
    return x;
  }
  Matrix mask = dropout_mask(x.rows(), x.cols(), p, rng);
  Matrix y = (x.array() * mask.array()).matrix();
  if (mask_out) *mask_out = std::move(mask);
  return y;
}

// Fully connected layer y = x W^T + b with W: out x in.
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, const std::string& name, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    W_ = Parameter(name + ".W", uniform_matrix(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in), bound, rng));
    b_ = Parameter(name + ".b", Matrix::Zero(static_cast<Eigen::Index>(out), 1));
  }

  std::size_t in_features() const { return static_cast<std::size_t>(W_.value.cols()); }
  std::size_t out_features() const { return static_cast<std::size_t>(W_.value.rows()); }
  Parameter& W() { return W_; }
  Parameter& b() { return b_; }
  const Parameter& W() const { return W_; }
  const Parameter& b() const { return b_; }
  ParameterList parameters() { return {&W_, &b_}; }

  Matrix forward(const Matrix& x) const {
    if (x.cols() != W_.value.cols()) throw ConfigError("linear layer input width mismatch");
    Matrix y = x * W_.value.transpose();
    add_bias(y, b_.value);
    return y;
  }

  Matrix backward(const Matrix& x, const Matrix& dy) {
    W_.grad.noalias() += dy.transpose() * x;
    b_.grad += column_sums(dy);
    return dy * W_.value;
  }

 private:
  Parameter W_, b_;
};

// Lookup table mapping integer ids to learned vectors.
class Embedding {
 public:
  Embedding() = default;
  Embedding(std::size_t vocabulary, std::size_t dim, const std::string& name, Rng& rng)
      : table_(name + ".E", normal_matrix(static_cast<Eigen::Index>(vocabulary), static_cast<Eigen::Index>(dim), 1.0, rng)) {}

  std::size_t vocabulary() const { return static_cast<std::size_t>(table_.value.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(table_.value.cols()); }
  Parameter& table() { return table_; }
  ParameterList parameters() { return {&table_}; }

  Matrix forward(std::span<const Eigen::Index> ids) const {
    Matrix out(static_cast<Eigen::Index>(ids.size()), table_.value.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] < 0 || ids[r] >= table_.value.rows()) throw ConfigError("embedding id out of range");
      out.row(static_cast<Eigen::Index>(r)) = table_.value.row(ids[r]);
    }
    return out;
  }

  void backward(std::span<const Eigen::Index> ids, const Matrix& dy) {
    for (std::size_t r = 0; r < ids.size(); ++r) table_.grad.row(ids[r]) += dy.row(static_cast<Eigen::Index>(r));
  }

 private:
  Parameter table_;
};

inline Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

inline Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  return (x.array() > 0.0).select(dy, Matrix::Zero(dy.rows(), dy.cols()));
}

// Row-wise softmax with max subtraction.
inline Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(r).array() - m).exp().matrix();
    out.row(r) = e / e.sum();
  }
  return out;
}

}  // namespace emitter::nn
