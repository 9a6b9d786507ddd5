// SPDX-License-Identifier: Apache-2.0
//
// LSTM and GRU layers with full backpropagation through time over packed
// variable-length batches.
//
// A PackedSequence holds a batch whose rows are sorted by decreasing length:
// step t only contains the rows still running at t (a prefix of the batch).
// Finished rows are never touched again, so padding a sequence has no effect
// on any output or gradient.
#pragma once

#include <algorithm>
#include <cassert>
#include <optional>
#include <string>
#include <vector>

#include "emitter/nn/layers.hpp"
#include "emitter/nn/parameter.hpp"

namespace emitter::nn {

struct PackedSequence {
  std::vector<Matrix> steps;  // steps[t]: active(t) x features, active non-increasing

  std::size_t time_steps() const { return steps.size(); }
  Eigen::Index batch() const { return steps.empty() ? 0 : steps.front().rows(); }
  Eigen::Index active(std::size_t t) const { return t < steps.size() ? steps[t].rows() : 0; }

  // Length of every row (rows ordered by decreasing length).
  std::vector<std::size_t> lengths() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(batch()), 0);
    for (std::size_t t = 0; t < steps.size(); ++t)
      for (Eigen::Index r = 0; r < steps[t].rows(); ++r) out[static_cast<std::size_t>(r)] = t + 1;
    return out;
  }

  static PackedSequence zeros_like(const PackedSequence& other, Eigen::Index features) {
    PackedSequence out;
    out.steps.reserve(other.steps.size());
    for (const auto& s : other.steps) out.steps.push_back(Matrix::Zero(s.rows(), features));
    return out;
  }
};

// Standard LSTM cell, gate blocks stacked in the order input, forget, cell, output:
//   i = s(W_i x + U_i h + b_i), f = s(...), g = tanh(...), o = s(...)
//   c' = f*c + i*g,  h' = o*tanh(c')
class LstmLayer {
 public:
  static constexpr std::size_t kGates = 4;

  struct StepCache {
    Matrix x, h_prev, c_prev, i, f, g, o, tanh_c;
  };
  struct Cache {
    std::vector<StepCache> steps;
  };

  LstmLayer() = default;

  // Weights uniform in +-1/sqrt(h), forget-gate bias 1, other biases 0.
  LstmLayer(std::size_t input_size, std::size_t hidden_size, const std::string& name, Rng& rng)
      : input_size_(input_size), hidden_size_(hidden_size) {
    const auto h = static_cast<Eigen::Index>(hidden_size);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    W_ = Parameter(name + ".W", uniform_matrix(kGates * h, static_cast<Eigen::Index>(input_size), bound, rng));
    U_ = Parameter(name + ".U", uniform_matrix(kGates * h, h, bound, rng));
    Matrix b = Matrix::Zero(kGates * h, 1);
    b.middleRows(h, h).setOnes();
    b_ = Parameter(name + ".b", b);
  }

  std::size_t input_size() const { return input_size_; }
  std::size_t hidden_size() const { return hidden_size_; }
  Parameter& W() { return W_; }
  Parameter& U() { return U_; }
  Parameter& b() { return b_; }
  const Parameter& W() const { return W_; }
  const Parameter& U() const { return U_; }
  const Parameter& b() const { return b_; }
  ParameterList parameters() { return {&W_, &U_, &b_}; }

  // One time step for a block of rows.
  void step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev, Matrix& h, Matrix& c,
            StepCache* cache = nullptr) const {
    const auto hs = static_cast<Eigen::Index>(hidden_size_);
    Matrix z = x * W_.value.transpose();
    z.noalias() += h_prev * U_.value.transpose();
    add_bias(z, b_.value);
    Matrix i = sigmoid(z.leftCols(hs));
    Matrix f = sigmoid(z.middleCols(hs, hs));
    Matrix g = tanh(z.middleCols(2 * hs, hs));
    Matrix o = sigmoid(z.rightCols(hs));
    c = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
    Matrix tc = tanh(c);
    h = (o.array() * tc.array()).matrix();
    if (cache) *cache = {x, h_prev, c_prev, std::move(i), std::move(f), std::move(g), std::move(o), std::move(tc)};
  }

  // Zero initial state. `final_h` receives each row's hidden state at its last step.
  PackedSequence forward(const PackedSequence& in, Matrix* final_h = nullptr, Cache* cache = nullptr) const {
    const auto B = in.batch();
    const auto hs = static_cast<Eigen::Index>(hidden_size_);
    Matrix h = Matrix::Zero(B, hs), c = Matrix::Zero(B, hs);
    PackedSequence out;
    out.steps.reserve(in.time_steps());
    if (cache) cache->steps.assign(in.time_steps(), {});
    for (std::size_t t = 0; t < in.time_steps(); ++t) {
      const auto k = in.active(t);
      if (in.steps[t].cols() != static_cast<Eigen::Index>(input_size_)) throw ConfigError("lstm input width mismatch");
      Matrix h_new, c_new;
      step(in.steps[t], h.topRows(k), c.topRows(k), h_new, c_new, cache ? &cache->steps[t] : nullptr);
      h.topRows(k) = h_new;
      c.topRows(k) = c_new;
      out.steps.push_back(std::move(h_new));
    }
    if (final_h) *final_h = h;
    return out;
  }

  // Accumulates parameter gradients; returns d(loss)/d(inputs). Either upstream
  // term may be absent (treated as zero).
  PackedSequence backward(const Cache& cache, const PackedSequence* d_out, const Matrix* d_final) {
    const auto T = cache.steps.size();
    const auto B = T ? cache.steps.front().x.rows() : 0;
    const auto hs = static_cast<Eigen::Index>(hidden_size_);
    Matrix dh_carry = Matrix::Zero(B, hs), dc_carry = Matrix::Zero(B, hs);
    PackedSequence d_in;
    d_in.steps.resize(T);
    for (std::size_t t = T; t-- > 0;) {
      const auto& s = cache.steps[t];
      const auto k = s.x.rows();
      const auto k_next = t + 1 < T ? cache.steps[t + 1].x.rows() : 0;
      if (d_final) dh_carry.middleRows(k_next, k - k_next) += d_final->middleRows(k_next, k - k_next);
      Matrix dh = dh_carry.topRows(k);
      if (d_out) dh += d_out->steps[t];
      const auto tc = s.tanh_c.array();
      Eigen::ArrayXXd dc = dc_carry.topRows(k).array() + dh.array() * s.o.array() * (1.0 - tc.square());
      Matrix dz(k, kGates * hs);
      dz.leftCols(hs) = (dc * s.g.array() * s.i.array() * (1.0 - s.i.array())).matrix();
      dz.middleCols(hs, hs) = (dc * s.c_prev.array() * s.f.array() * (1.0 - s.f.array())).matrix();
      dz.middleCols(2 * hs, hs) = (dc * s.i.array() * (1.0 - s.g.array().square())).matrix();
      dz.rightCols(hs) = (dh.array() * tc * s.o.array() * (1.0 - s.o.array())).matrix();
      W_.grad.noalias() += dz.transpose() * s.x;
      U_.grad.noalias() += dz.transpose() * s.h_prev;
      b_.grad += column_sums(dz);
      d_in.steps[t] = dz * W_.value;
      dh_carry.topRows(k) = dz * U_.value;
      dc_carry.topRows(k) = (dc * s.f.array()).matrix();
    }
    return d_in;
  }

 private:
  std::size_t input_size_ = 0;
  std::size_t hidden_size_ = 0;
  Parameter W_, U_, b_;
};

// GRU cell, gate blocks stacked as reset, update, candidate:
//   r = s(W_r x + U_r h + b_r), z = s(W_z x + U_z h + b_z)
//   n = tanh(W_n x + b_n + r*(U_n h)),  h' = (1-z)*n + z*h
class GruLayer {
 public:
  static constexpr std::size_t kGates = 3;

  struct StepCache {
    Matrix x, h_prev, r, z, n, un;
  };
  struct Cache {
    std::vector<StepCache> steps;
  };

  GruLayer() = default;

  GruLayer(std::size_t input_size, std::size_t hidden_size, const std::string& name, Rng& rng)
      : input_size_(input_size), hidden_size_(hidden_size) {
    const auto h = static_cast<Eigen::Index>(hidden_size);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    W_ = Parameter(name + ".W", uniform_matrix(kGates * h, static_cast<Eigen::Index>(input_size), bound, rng));
    U_ = Parameter(name + ".U", uniform_matrix(kGates * h, h, bound, rng));
    b_ = Parameter(name + ".b", Matrix::Zero(kGates * h, 1));
  }

  std::size_t input_size() const { return input_size_; }
  std::size_t hidden_size() const { return hidden_size_; }
  Parameter& W() { return W_; }
  Parameter& U() { return U_; }
  Parameter& b() { return b_; }
  ParameterList parameters() { return {&W_, &U_, &b_}; }

  void step(const Matrix& x, const Matrix& h_prev, Matrix& h, StepCache* cache = nullptr) const {
    const auto hs = static_cast<Eigen::Index>(hidden_size_);
    Matrix a = x * W_.value.transpose();
    add_bias(a, b_.value);
    Matrix u = h_prev * U_.value.transpose();
    Matrix r = sigmoid(a.leftCols(hs) + u.leftCols(hs));
    Matrix z = sigmoid(a.middleCols(hs, hs) + u.middleCols(hs, hs));
    Matrix un = u.rightCols(hs);
    Matrix n = tanh((a.rightCols(hs).array() + r.array() * un.array()).matrix());
    h = ((1.0 - z.array()) * n.array() + z.array() * h_prev.array()).matrix();
    if (cache) *cache = {x, h_prev, std::move(r), std::move(z), std::move(n), std::move(un)};
  }

  PackedSequence forward(const PackedSequence& in, Matrix* final_h = nullptr, Cache* cache = nullptr) const {
    const auto B = in.batch();
    const auto hs = static_cast<Eigen::Index>(hidden_size_);
    Matrix h = Matrix::Zero(B, hs);
    PackedSequence out;
    out.steps.reserve(in.time_steps());
    if (cache) cache->steps.assign(in.time_steps(), {});
    for (std::size_t t = 0; t < in.time_steps(); ++t) {
      const auto k = in.active(t);
      if (in.steps[t].cols() != static_cast<Eigen::Index>(input_size_)) throw ConfigError("gru input width mismatch");
      Matrix h_new;
      step(in.steps[t], h.topRows(k), h_new, cache ? &cache->steps[t] : nullptr);
      h.topRows(k) = h_new;
      out.steps.push_back(std::move(h_new));
    }
    if (final_h) *final_h = h;
    return out;
  }

  PackedSequence backward(const Cache& cache, const PackedSequence* d_out, const Matrix* d_final) {
    const auto T = cache.steps.size();
    const auto B = T ? cache.steps.front().x.rows() : 0;
    const auto hs = static_cast<Eigen::Index>(hidden_size_);
    Matrix dh_carry = Matrix::Zero(B, hs);
    PackedSequence d_in;
    d_in.steps.resize(T);
    for (std::size_t t = T; t-- > 0;) {
      const auto& s = cache.steps[t];
      const auto k = s.x.rows();
      const auto k_next = t + 1 < T ? cache.steps[t + 1].x.rows() : 0;
      if (d_final) dh_carry.middleRows(k_next, k - k_next) += d_final->middleRows(k_next, k - k_next);
      Matrix dh = dh_carry.topRows(k);
      if (d_out) dh += d_out->steps[t];
      const auto z = s.z.array();
      const auto n = s.n.array();
      const auto r = s.r.array();
      Eigen::ArrayXXd dan = dh.array() * (1.0 - z) * (1.0 - n.square());
      Eigen::ArrayXXd dar = dan * s.un.array() * r * (1.0 - r);
      Eigen::ArrayXXd daz = dh.array() * (s.h_prev.array() - n) * z * (1.0 - z);
      Matrix da(k, kGates * hs), du(k, kGates * hs);
      da << dar.matrix(), daz.matrix(), dan.matrix();
      du << dar.matrix(), daz.matrix(), (dan * r).matrix();
      W_.grad.noalias() += da.transpose() * s.x;
      b_.grad += column_sums(da);
      U_.grad.noalias() += du.transpose() * s.h_prev;
      d_in.steps[t] = da * W_.value;
      dh_carry.topRows(k) = (dh.array() * z).matrix() + du * U_.value;
    }
    return d_in;
  }

 private:
  std::size_t input_size_ = 0;
  std::size_t hidden_size_ = 0;
  Parameter W_, U_, b_;
};

// L stacked recurrent layers with inverted dropout between consecutive layers.
template <typename Layer>
class RecurrentStack {
 public:
  struct Cache {
    std::vector<typename Layer::Cache> layers;
    std::vector<PackedSequence> masks;  // masks[l]: dropout applied to layer l's output (l < L-1)
  };

  RecurrentStack() = default;

  RecurrentStack(std::size_t input_size, std::size_t hidden_size, std::size_t num_layers, double dropout,
                 const std::string& name, Rng& rng)
      : dropout_(dropout) {
    if (num_layers < 1) throw ConfigError("recurrent stack needs at least one layer");
    for (std::size_t l = 0; l < num_layers; ++l) {
      layers_.emplace_back(l == 0 ? input_size : hidden_size, hidden_size, name + ".l" + std::to_string(l), rng);
    }
  }

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t hidden_size() const { return layers_.front().hidden_size(); }
  std::size_t input_size() const { return layers_.front().input_size(); }
  Layer& layer(std::size_t l) { return layers_[l]; }
  const Layer& layer(std::size_t l) const { return layers_[l]; }

  ParameterList parameters() {
    ParameterList out;
    for (auto& l : layers_)
      for (auto* p : l.parameters()) out.push_back(p);
    return out;
  }

  // Returns the top layer's outputs; `final_h` gets the top layer's state at
  // each row's last valid step.
  PackedSequence forward(const PackedSequence& in, bool training, Rng* rng, Matrix* final_h,
                         Cache* cache) const {
    if (cache) {
      cache->layers.assign(layers_.size(), {});
      cache->masks.clear();
    }
    PackedSequence x = in;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const bool top = l + 1 == layers_.size();
      PackedSequence y = layers_[l].forward(x, top ? final_h : nullptr, cache ? &cache->layers[l] : nullptr);
      if (!top && training && dropout_ > 0.0) {
        PackedSequence mask;
        for (auto& step : y.steps) {
          mask.steps.push_back(dropout_mask(step.rows(), step.cols(), dropout_, *rng));
          step.array() *= mask.steps.back().array();
        }
        if (cache) cache->masks.push_back(std::move(mask));
      }
      x = std::move(y);
    }
    return x;
  }

  PackedSequence backward(const Cache& cache, const PackedSequence* d_out, const Matrix* d_final) {
    PackedSequence d = layers_.back().backward(cache.layers.back(), d_out, d_final);
    for (std::size_t l = layers_.size() - 1; l-- > 0;) {
      if (l < cache.masks.size()) {
        for (std::size_t t = 0; t < d.steps.size(); ++t) d.steps[t].array() *= cache.masks[l].steps[t].array();
      }
      d = layers_[l].backward(cache.layers[l], &d, nullptr);
    }
    return d;
  }

 private:
  std::vector<Layer> layers_;
  double dropout_ = 0.0;
};

using LstmStack = RecurrentStack<LstmLayer>;
using GruStack = RecurrentStack<GruLayer>;

}  // namespace emitter::nn
