// SPDX-License-Identifier: Apache-2.0
//
// Sequence classifiers: the attribute-specific LSTM model (one recurrent stack
// per normalized input channel, hidden readouts concatenated, FC head) and the
// architectures it is compared against (joint LSTM, discretized-input GRU and
// the min/max statistics MLP).
#pragma once

#include <algorithm>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "emitter/config.hpp"
#include "emitter/normalize.hpp"
#include "emitter/nn/layers.hpp"
#include "emitter/nn/loss.hpp"
#include "emitter/nn/recurrent.hpp"

namespace emitter {

enum class Architecture { attribute_specific_lstm, joint_lstm, gru_discretized, stats_mlp };

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::attribute_specific_lstm: return "attribute_specific_lstm";
    case Architecture::joint_lstm: return "joint_lstm";
    case Architecture::gru_discretized: return "gru_discretized";
    case Architecture::stats_mlp: return "stats_mlp";
  }
  return "?";
}

inline Architecture parse_architecture(const std::string& token) {
  for (auto a : {Architecture::attribute_specific_lstm, Architecture::joint_lstm, Architecture::gru_discretized,
                 Architecture::stats_mlp}) {
    if (token == to_string(a)) return a;
  }
  throw ConfigError("unknown architecture '" + token + "'");
}

// How a recurrent stack's T x h output is reduced before the FC head.
enum class Readout { last, mean };

inline std::string to_string(Readout r) { return r == Readout::last ? "last" : "mean"; }

inline Readout parse_readout(const std::string& token) {
  if (token == "last") return Readout::last;
  if (token == "mean") return Readout::mean;
  throw ConfigError("unknown readout '" + token + "'");
}

struct ModelConfig {
  Architecture architecture = Architecture::attribute_specific_lstm;
  NormSpec norm{};
  std::size_t num_attributes = kNumAttributes;
  std::size_t layers = 2;
  std::size_t hidden = 64;
  double dropout = 0.5;
  std::size_t num_classes = 17;
  std::size_t embedding = 32;          // gru_discretized
  bool use_rf = false;                 // gru_discretized: feed RF as well as PRI and PW
  std::vector<std::size_t> mlp_hidden{64, 64};  // stats_mlp
  Readout readout = Readout::last;

  std::size_t input_channels() const {
    return norm.scheme == NormScheme::minmax_perseq ? 2 * num_attributes : num_attributes;
  }

  void validate() const {
    if (layers < 1) throw ConfigError("model needs at least one recurrent layer");
    if (hidden < 1) throw ConfigError("hidden size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (num_classes < 2) throw ConfigError("need at least two classes");
    if (num_attributes < 1) throw ConfigError("need at least one attribute");
    const bool discrete = norm.scheme == NormScheme::discretize;
    if (architecture == Architecture::gru_discretized) {
      if (!discrete) throw ConfigError("gru_discretized requires the discretize normalization scheme");
      if (embedding < 1 || norm.bins < 1) throw ConfigError("gru_discretized needs bins and embedding size >= 1");
      if (!use_rf && num_attributes < 2) throw ConfigError("gru_discretized without rf needs PRI and PW");
    } else if (discrete) {
      throw ConfigError(to_string(architecture) + " cannot consume discretized inputs");
    }
    if (architecture == Architecture::stats_mlp && norm.scheme == NormScheme::minmax_perseq) {
      throw ConfigError("stats_mlp takes a single normalization (minmax, standardize or none)");
    }
    if (architecture == Architecture::stats_mlp) {
      for (auto h : mlp_hidden)
        if (h < 1) throw ConfigError("mlp hidden sizes must be >= 1");
    }
  }

  std::string to_text(const std::string& prefix = "model.") const {
    std::ostringstream out;
    out << prefix << "arch = " << to_string(architecture) << '\n';
    out << prefix << "norm = " << to_string(norm.scheme) << '\n';
    out << prefix << "bins = " << norm.bins << '\n';
    out << prefix << "attributes = " << num_attributes << '\n';
    out << prefix << "layers = " << layers << '\n';
    out << prefix << "hidden = " << hidden << '\n';
    out << prefix << "dropout = " << format_double(dropout) << '\n';
    out << prefix << "classes = " << num_classes << '\n';
    out << prefix << "embedding = " << embedding << '\n';
    out << prefix << "use_rf = " << (use_rf ? "true" : "false") << '\n';
    out << prefix << "mlp_hidden =";
    for (auto h : mlp_hidden) out << ' ' << h;
    out << '\n';
    out << prefix << "readout = " << to_string(readout) << '\n';
    return out.str();
  }

  // Missing keys fall back to `base`.
  static ModelConfig from_config(const KeyValueConfig& kv, const std::string& prefix = "model.") {
    return from_config(kv, prefix, ModelConfig{});
  }

  static ModelConfig from_config(const KeyValueConfig& kv, const std::string& prefix, const ModelConfig& base) {
    ModelConfig c = base;
    if (auto v = kv.take(prefix + "arch")) c.architecture = parse_architecture(*v);
    if (auto v = kv.take(prefix + "norm")) c.norm.scheme = parse_norm_scheme(*v);
    c.norm.bins = kv.get_int<std::size_t>(prefix + "bins", c.norm.bins);
    c.num_attributes = kv.get_int<std::size_t>(prefix + "attributes", c.num_attributes);
    c.layers = kv.get_int<std::size_t>(prefix + "layers", c.layers);
    c.hidden = kv.get_int<std::size_t>(prefix + "hidden", c.hidden);
    c.dropout = kv.get_double(prefix + "dropout", c.dropout);
    c.num_classes = kv.get_int<std::size_t>(prefix + "classes", c.num_classes);
    c.embedding = kv.get_int<std::size_t>(prefix + "embedding", c.embedding);
    c.use_rf = kv.get_bool(prefix + "use_rf", c.use_rf);
    if (auto v = kv.take(prefix + "mlp_hidden")) {
      c.mlp_hidden.clear();
      for (const auto& tok : KeyValueConfig::split_list(*v)) {
        std::size_t h = 0;
        if (!parse_int(tok, h)) throw ConfigError("bad mlp_hidden entry '" + tok + "'");
        c.mlp_hidden.push_back(h);
      }
    }
    if (auto v = kv.take(prefix + "readout")) c.readout = parse_readout(*v);
    return c;
  }
};

// Right-padded batch of normalized sequences with their valid lengths.
struct NormalizedBatch {
  std::vector<Matrix> inputs;  // per sample: max_length x channels, zero beyond lengths[i]
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> labels;

  std::size_t size() const { return inputs.size(); }
  std::size_t channels() const { return inputs.empty() ? 0 : static_cast<std::size_t>(inputs.front().cols()); }

  template <typename Range>
  static NormalizedBatch from(const Range& sequences) {
    NormalizedBatch b;
    Eigen::Index max_len = 0;
    for (const NormalizedSequence& s : sequences) max_len = std::max(max_len, static_cast<Eigen::Index>(s.valid_length));
    for (const NormalizedSequence& s : sequences) {
      Matrix m = Matrix::Zero(max_len, s.channels.cols());
      m.topRows(static_cast<Eigen::Index>(s.valid_length)) = s.channels.topRows(static_cast<Eigen::Index>(s.valid_length));
      b.inputs.push_back(std::move(m));
      b.lengths.push_back(s.valid_length);
      b.labels.push_back(s.label);
    }
    return b;
  }

  static NormalizedBatch single(const NormalizedSequence& s) { return from(std::vector<NormalizedSequence>{s}); }
};

struct Prediction {
  std::size_t label = 0;
  Vector probabilities;
};

inline std::size_t argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  std::size_t best = 0;
  for (Eigen::Index c = 1; c < row.size(); ++c)
    if (row(c) > row(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(c);
  return best;
}

class SequenceClassifier {
 public:
  // Everything backward() needs from one forward pass.
  struct Cache {
    std::vector<std::size_t> order;  // sorted position -> batch index
    std::vector<std::size_t> sorted_lengths;
    std::vector<nn::LstmStack::Cache> lstm;
    std::vector<nn::GruStack::Cache> gru;
    std::vector<std::vector<std::vector<Eigen::Index>>> ids;  // [step][attribute] embedding ids
    std::vector<nn::PackedSequence> stack_outputs;              // mean readout only
    std::vector<Matrix> mlp_inputs;                             // input of each hidden layer
    std::vector<Matrix> mlp_preacts;
    Matrix features;       // FC input after dropout (sorted order for recurrent models)
    Matrix feature_mask;
  };

  SequenceClassifier() = default;

  static SequenceClassifier build(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    SequenceClassifier m;
    m.cfg_ = cfg;
    auto rng = make_rng(seed, "init");
    const auto channels = cfg.input_channels();
    std::size_t features = 0;
    switch (cfg.architecture) {
      case Architecture::attribute_specific_lstm:
        for (std::size_t k = 0; k < channels; ++k) {
          m.lstm_.emplace_back(1, cfg.hidden, cfg.layers, cfg.dropout, "stack" + std::to_string(k), rng);
          m.stack_channels_.push_back({static_cast<Eigen::Index>(k)});
        }
        features = channels * cfg.hidden;
        break;
      case Architecture::joint_lstm: {
        m.lstm_.emplace_back(channels, cfg.hidden, cfg.layers, cfg.dropout, "stack0", rng);
        std::vector<Eigen::Index> all(channels);
        std::iota(all.begin(), all.end(), 0);
        m.stack_channels_.push_back(all);
        features = cfg.hidden;
        break;
      }
      case Architecture::gru_discretized: {
        const std::size_t used = cfg.use_rf ? cfg.num_attributes : 2;
        std::vector<Eigen::Index> cols;
        for (std::size_t a = 0; a < used; ++a) {
          m.embeddings_.emplace_back(cfg.norm.bins, cfg.embedding, "emb" + std::to_string(a), rng);
          cols.push_back(static_cast<Eigen::Index>(a));
        }
        m.stack_channels_.push_back(cols);
        m.gru_.emplace_back(used * cfg.embedding, cfg.hidden, cfg.layers, cfg.dropout, "stack0", rng);
        features = cfg.hidden;
        break;
      }
      case Architecture::stats_mlp: {
        std::size_t in = 2 * channels;
        for (std::size_t l = 0; l < cfg.mlp_hidden.size(); ++l) {
          m.mlp_.emplace_back(in, cfg.mlp_hidden[l], "mlp" + std::to_string(l), rng);
          in = cfg.mlp_hidden[l];
        }
        features = in;
        break;
      }
    }
    m.fc_ = nn::Linear(features, cfg.num_classes, "fc", rng);
    if (m.is_recurrent() && features != m.stack_channels_.size() * cfg.hidden &&
        cfg.architecture != Architecture::gru_discretized) {
      throw ConfigError("feature width does not match stack count");
    }
    return m;
  }

  const ModelConfig& config() const { return cfg_; }
  std::size_t num_stacks() const { return lstm_.size() + gru_.size(); }
  std::size_t feature_width() const { return fc_.in_features(); }
  const nn::Linear& head() const { return fc_; }
  nn::LstmStack& lstm_stack(std::size_t k) { return lstm_[k]; }
  const nn::LstmStack& lstm_stack(std::size_t k) const { return lstm_[k]; }

  nn::ParameterList parameters() {
    nn::ParameterList out;
    for (auto& e : embeddings_)
      for (auto* p : e.parameters()) out.push_back(p);
    for (auto& s : lstm_)
      for (auto* p : s.parameters()) out.push_back(p);
    for (auto& s : gru_)
      for (auto* p : s.parameters()) out.push_back(p);
    for (auto& l : mlp_)
      for (auto* p : l.parameters()) out.push_back(p);
    for (auto* p : fc_.parameters()) out.push_back(p);
    return out;
  }

  std::size_t parameter_count() const { return nn::count_parameters(const_cast<SequenceClassifier*>(this)->parameters()); }

  // Pre-softmax scores, one row per batch sample in batch order. `rng` is
  // required when training with dropout > 0.
  Matrix forward(const NormalizedBatch& batch, bool training, Rng* rng = nullptr, Cache* cache = nullptr) const {
    if (batch.size() == 0) return Matrix(0, static_cast<Eigen::Index>(cfg_.num_classes));
    if (batch.channels() != cfg_.input_channels()) {
      throw ConfigError("batch has " + std::to_string(batch.channels()) + " channels, model expects " +
                        std::to_string(cfg_.input_channels()));
    }
    if (training && cfg_.dropout > 0.0 && !rng) throw ConfigError("training forward pass needs an rng");
    Cache local;
    Cache& c = cache ? *cache : local;
    c = Cache{};
    if (cfg_.architecture == Architecture::stats_mlp) return forward_mlp(batch, training, rng, c);

    c.order.resize(batch.size());
    std::iota(c.order.begin(), c.order.end(), 0);
    std::stable_sort(c.order.begin(), c.order.end(),
                     [&](std::size_t a, std::size_t b) { return batch.lengths[a] > batch.lengths[b]; });
    for (auto i : c.order) c.sorted_lengths.push_back(batch.lengths[i]);
    const auto B = static_cast<Eigen::Index>(batch.size());

    std::vector<Matrix> readouts;
    if (cfg_.architecture == Architecture::gru_discretized) {
      auto packed = embed(batch, c);
      Matrix final_h;
      c.gru.resize(1);
      auto out = gru_[0].forward(packed, training, rng, &final_h, cache ? &c.gru[0] : nullptr);
      readouts.push_back(readout(out, final_h, c));
      if (cfg_.readout == Readout::mean && cache) c.stack_outputs.push_back(std::move(out));
    } else {
      c.lstm.resize(lstm_.size());
      for (std::size_t k = 0; k < lstm_.size(); ++k) {
        auto packed = pack(batch, c, stack_channels_[k]);
        Matrix final_h;
        auto out = lstm_[k].forward(packed, training, rng, &final_h, cache ? &c.lstm[k] : nullptr);
        readouts.push_back(readout(out, final_h, c));
        if (cfg_.readout == Readout::mean && cache) c.stack_outputs.push_back(std::move(out));
      }
    }
    Matrix features(B, static_cast<Eigen::Index>(fc_.in_features()));
    Eigen::Index col = 0;
    for (const auto& r : readouts) {
      features.middleCols(col, r.cols()) = r;
      col += r.cols();
    }
    c.features = nn::dropout(features, cfg_.dropout, training, *rng_or_dummy(rng), &c.feature_mask);
    Matrix sorted_logits = fc_.forward(c.features);
    Matrix logits(B, sorted_logits.cols());
    for (std::size_t r = 0; r < c.order.size(); ++r) logits.row(static_cast<Eigen::Index>(c.order[r])) = sorted_logits.row(static_cast<Eigen::Index>(r));
    return logits;
  }

  // Accumulates parameter gradients for d(loss)/d(logits) given in batch order.
  void backward(const Cache& c, const Matrix& d_logits) {
    if (cfg_.architecture == Architecture::stats_mlp) return backward_mlp(c, d_logits);
    const auto B = static_cast<Eigen::Index>(c.order.size());
    Matrix d_sorted(B, d_logits.cols());
    for (std::size_t r = 0; r < c.order.size(); ++r) d_sorted.row(static_cast<Eigen::Index>(r)) = d_logits.row(static_cast<Eigen::Index>(c.order[r]));
    Matrix d_features = fc_.backward(c.features, d_sorted);
    d_features.array() *= c.feature_mask.array();
    const auto h = static_cast<Eigen::Index>(cfg_.hidden);
    if (cfg_.architecture == Architecture::gru_discretized) {
      Matrix d_final = d_features;
      auto d_in = backward_stack(gru_[0], c.gru[0], c, 0, d_final);
      backward_embed(c, d_in);
      return;
    }
    for (std::size_t k = 0; k < lstm_.size(); ++k) {
      Matrix d_final = d_features.middleCols(static_cast<Eigen::Index>(k) * h, h);
      backward_stack(lstm_[k], c.lstm[k], c, k, d_final);
    }
  }

  Matrix infer(const NormalizedBatch& batch) const { return forward(batch, false); }

  Prediction predict(const PulseSequence& seq, const DomainStats& stats) const {
    auto norm = normalize_scheme(seq, stats, cfg_.norm);
    Matrix probs = nn::softmax(infer(NormalizedBatch::single(norm)));
    return {argmax_lowest(probs.row(0)), probs.row(0).transpose()};
  }

 private:
  bool is_recurrent() const { return cfg_.architecture != Architecture::stats_mlp; }

  static Rng* rng_or_dummy(Rng* rng) {
    thread_local Rng dummy{0};
    return rng ? rng : &dummy;
  }

  static std::vector<Eigen::Index> active_counts(const Cache& c) {
    const std::size_t T = c.sorted_lengths.empty() ? 0 : c.sorted_lengths.front();
    std::vector<Eigen::Index> k(T, 0);
    for (auto len : c.sorted_lengths)
      for (std::size_t t = 0; t < len; ++t) ++k[t];
    return k;
  }

  nn::PackedSequence pack(const NormalizedBatch& batch, const Cache& c, const std::vector<Eigen::Index>& cols) const {
    const auto k = active_counts(c);
    nn::PackedSequence p;
    p.steps.reserve(k.size());
    for (std::size_t t = 0; t < k.size(); ++t) {
      Matrix step(k[t], static_cast<Eigen::Index>(cols.size()));
      for (Eigen::Index r = 0; r < k[t]; ++r) {
        const auto& in = batch.inputs[c.order[static_cast<std::size_t>(r)]];
        for (std::size_t j = 0; j < cols.size(); ++j) step(r, static_cast<Eigen::Index>(j)) = in(static_cast<Eigen::Index>(t), cols[j]);
      }
      p.steps.push_back(std::move(step));
    }
    return p;
  }

  nn::PackedSequence embed(const NormalizedBatch& batch, Cache& c) const {
    const auto k = active_counts(c);
    const auto E = static_cast<Eigen::Index>(cfg_.embedding);
    nn::PackedSequence p;
    c.ids.assign(k.size(), {});
    for (std::size_t t = 0; t < k.size(); ++t) {
      Matrix step(k[t], E * static_cast<Eigen::Index>(embeddings_.size()));
      c.ids[t].resize(embeddings_.size());
      for (std::size_t a = 0; a < embeddings_.size(); ++a) {
        auto& ids = c.ids[t][a];
        for (Eigen::Index r = 0; r < k[t]; ++r) {
          const double v = batch.inputs[c.order[static_cast<std::size_t>(r)]](static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a));
          ids.push_back(static_cast<Eigen::Index>(v));
        }
        step.middleCols(static_cast<Eigen::Index>(a) * E, E) = embeddings_[a].forward(ids);
      }
      p.steps.push_back(std::move(step));
    }
    return p;
  }

  void backward_embed(const Cache& c, const nn::PackedSequence& d_in) {
    const auto E = static_cast<Eigen::Index>(cfg_.embedding);
    for (std::size_t t = 0; t < d_in.steps.size(); ++t)
      for (std::size_t a = 0; a < embeddings_.size(); ++a)
        embeddings_[a].backward(c.ids[t][a], d_in.steps[t].middleCols(static_cast<Eigen::Index>(a) * E, E));
  }

  Matrix readout(const nn::PackedSequence& out, const Matrix& final_h, const Cache& c) const {
    if (cfg_.readout == Readout::last) return final_h;
    Matrix pooled = Matrix::Zero(final_h.rows(), final_h.cols());
    for (const auto& step : out.steps) pooled.topRows(step.rows()) += step;
    for (std::size_t r = 0; r < c.sorted_lengths.size(); ++r)
      pooled.row(static_cast<Eigen::Index>(r)) /= static_cast<double>(c.sorted_lengths[r]);
    return pooled;
  }

  template <typename Stack, typename StackCache>
  nn::PackedSequence backward_stack(Stack& stack, const StackCache& sc, const Cache& c, std::size_t k,
                                    const Matrix& d_readout) {
    if (cfg_.readout == Readout::last) return stack.backward(sc, nullptr, &d_readout);
    auto d_out = nn::PackedSequence::zeros_like(c.stack_outputs[k], d_readout.cols());
    for (auto& step : d_out.steps) {
      for (Eigen::Index r = 0; r < step.rows(); ++r)
        step.row(r) = d_readout.row(r) / static_cast<double>(c.sorted_lengths[static_cast<std::size_t>(r)]);
    }
    return stack.backward(sc, &d_out, nullptr);
  }

  // Per-channel minimum then maximum over the valid steps: [min_0..min_{K-1}, max_0..max_{K-1}].
  static Matrix sequence_statistics(const NormalizedBatch& batch) {
    const auto K = static_cast<Eigen::Index>(batch.channels());
    Matrix out(static_cast<Eigen::Index>(batch.size()), 2 * K);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto valid = batch.inputs[i].topRows(static_cast<Eigen::Index>(batch.lengths[i]));
      out.row(static_cast<Eigen::Index>(i)).head(K) = valid.colwise().minCoeff();
      out.row(static_cast<Eigen::Index>(i)).tail(K) = valid.colwise().maxCoeff();
    }
    return out;
  }

  Matrix forward_mlp(const NormalizedBatch& batch, bool training, Rng* rng, Cache& c) const {
    Matrix x = sequence_statistics(batch);
    for (const auto& layer : mlp_) {
      c.mlp_inputs.push_back(x);
      Matrix z = layer.forward(x);
      x = nn::relu(z);
      c.mlp_preacts.push_back(std::move(z));
    }
    c.features = nn::dropout(x, cfg_.dropout, training, *rng_or_dummy(rng), &c.feature_mask);
    return fc_.forward(c.features);
  }

  void backward_mlp(const Cache& c, const Matrix& d_logits) {
    Matrix d = fc_.backward(c.features, d_logits);
    d.array() *= c.feature_mask.array();
    for (std::size_t l = mlp_.size(); l-- > 0;) {
      d = nn::relu_backward(c.mlp_preacts[l], d);
      d = mlp_[l].backward(c.mlp_inputs[l], d);
    }
  }

  ModelConfig cfg_;
  std::vector<std::vector<Eigen::Index>> stack_channels_;
  std::vector<nn::LstmStack> lstm_;
  std::vector<nn::GruStack> gru_;
  std::vector<nn::Embedding> embeddings_;
  std::vector<nn::Linear> mlp_;
  nn::Linear fc_;
};

}  // namespace emitter
