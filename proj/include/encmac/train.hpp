// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "encmac/array_sim.hpp"
#include "encmac/circuit.hpp"
#include "encmac/errors.hpp"
#include "encmac/fit.hpp"
#include "encmac/quant.hpp"
#include "encmac/rng.hpp"
#include "encmac/search.hpp"

namespace encmac {

// ---------------------------------------------------------------------------
// Datasets

struct Dataset {
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::vector<std::vector<double>> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

// Seeded Gaussian blobs, one cluster per class, features in roughly [-1, 1].
inline Dataset make_blobs(std::size_t per_class, std::size_t dim,
                          std::size_t classes, std::uint64_t seed,
                          double spread = 0.15) {
  Dataset data;
  data.feature_dim = dim;
  data.num_classes = classes;
  SplitMix64 rng(hash_mix(seed ^ 0xb10b5eed0ddf00d5ull));
  std::vector<std::vector<double>> centers(classes, std::vector<double>(dim));
  for (auto& c : centers) {
    for (double& x : c) x = rng.uniform01() * 1.6 - 0.8;
  }
  for (std::size_t cls = 0; cls < classes; ++cls) {
    for (std::size_t i = 0; i < per_class; ++i) {
      std::vector<double> f(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        f[d] = centers[cls][d] + spread * rng.normal();
      }
      data.features.push_back(std::move(f));
      data.labels.push_back(static_cast<int>(cls));
    }
  }
  return data;
}

// CSV rows are `feature,...,feature,label`.
inline std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double f : data.features[i]) {
      out += format_double(f);
      out += ',';
    }
    out += std::to_string(data.labels[i]);
    out += '\n';
  }
  return out;
}

inline Dataset dataset_from_csv(const std::string& content) {
  Dataset data;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> fields;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) fields.push_back(std::stod(tok));
    if (fields.size() < 2) throw contract_error("dataset row needs features and a label");
    int label = static_cast<int>(std::llround(fields.back()));
    fields.pop_back();
    if (data.feature_dim == 0) data.feature_dim = fields.size();
    if (fields.size() != data.feature_dim) {
      throw contract_error("inconsistent feature dimension in dataset");
    }
    data.features.push_back(std::move(fields));
    data.labels.push_back(label);
    data.num_classes = std::max<std::size_t>(data.num_classes,
                                             static_cast<std::size_t>(label) + 1);
  }
  return data;
}

// ---------------------------------------------------------------------------
// Float reference network (provides weights to quantize and a calibration
// pass for activation scales)

struct FloatDense {
  std::size_t in = 0, out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;
};

struct ToyFloatNet {
  std::vector<FloatDense> layers;
};

namespace detail {

inline void softmax_ce_grad(const std::vector<double>& scores, int label,
                            std::vector<double>& grad, double& loss) {
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double denom = 0.0;
  for (double s : scores) denom += std::exp(s - mx);
  loss = std::log(denom) + mx - scores[static_cast<std::size_t>(label)];
  grad.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    grad[i] = std::exp(scores[i] - mx) / denom;
  }
  grad[static_cast<std::size_t>(label)] -= 1.0;
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n,
                                                 SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = rng.bounded(i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace detail

// Plain SGD on softmax cross-entropy with ReLU hidden layers.
inline ToyFloatNet train_float_net(const std::vector<std::size_t>& dims,
                                   const Dataset& data, std::size_t epochs,
                                   double lr, std::uint64_t seed) {
  if (dims.size() < 2) throw contract_error("network needs at least two dims");
  if (dims.front() != data.feature_dim || dims.back() != data.num_classes) {
    throw contract_error("network dims do not match dataset");
  }
  SplitMix64 rng(hash_mix(seed ^ 0xf10a7f10a7f10a75ull));
  ToyFloatNet net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    FloatDense d;
    d.in = dims[l];
    d.out = dims[l + 1];
    d.w.resize(d.in * d.out);
    d.b.assign(d.out, 0.0);
    double scale = std::sqrt(2.0 / static_cast<double>(d.in));
    for (double& x : d.w) x = rng.normal() * scale;
    net.layers.push_back(std::move(d));
  }

  std::size_t n_layers = net.layers.size();
  std::vector<std::vector<double>> acts(n_layers + 1), pre(n_layers);
  std::vector<std::vector<double>> grad(n_layers + 1);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    auto order = detail::shuffled_indices(data.size(), rng);
    for (std::size_t s : order) {
      acts[0] = data.features[s];
      for (std::size_t l = 0; l < n_layers; ++l) {
        const FloatDense& d = net.layers[l];
        pre[l].assign(d.out, 0.0);
        for (std::size_t o = 0; o < d.out; ++o) {
          double acc = d.b[o];
          const double* row = d.w.data() + o * d.in;
          for (std::size_t i = 0; i < d.in; ++i) acc += row[i] * acts[l][i];
          pre[l][o] = acc;
        }
        acts[l + 1] = pre[l];
        if (l + 1 < n_layers) {
          for (double& x : acts[l + 1]) x = std::max(0.0, x);
        }
      }
      double loss;
      detail::softmax_ce_grad(acts[n_layers], data.labels[s], grad[n_layers], loss);
      for (std::size_t l = n_layers; l-- > 0;) {
        FloatDense& d = net.layers[l];
        grad[l].assign(d.in, 0.0);
        for (std::size_t o = 0; o < d.out; ++o) {
          double g = grad[l + 1][o];
          double* row = d.w.data() + o * d.in;
          for (std::size_t i = 0; i < d.in; ++i) {
            grad[l][i] += g * row[i];
            row[i] -= lr * g * acts[l][i];
          }
          d.b[o] -= lr * g;
        }
        if (l > 0) {
          for (std::size_t i = 0; i < d.in; ++i) {
            if (pre[l - 1][i] <= 0.0) grad[l][i] = 0.0;
          }
        }
      }
    }
  }
  return net;
}

// ---------------------------------------------------------------------------
// Quantized network

struct QuantDense {
  std::size_t in = 0, out = 0;
  std::vector<unsigned> weight_codes;  // out x in, row-major
  QuantScheme weight_scheme;
  double weight_scale = 1.0;  // real weight = weight_scale * decode(code)
  std::vector<double> bias;
};

struct ToyNetwork {
  QuantScheme activation_scheme;  // shared by every layer input
  std::vector<double> act_scales;  // per layer input, size == layers.size()
  std::vector<QuantDense> layers;

  void validate() const {
    if (layers.empty()) throw contract_error("network has no layers");
    if (act_scales.size() != layers.size()) {
      throw contract_error("need one activation scale per layer");
    }
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      if (layers[l].out != layers[l + 1].in) {
        throw contract_error("layer dimensions do not chain");
      }
    }
    for (const QuantDense& d : layers) {
      for (unsigned c : d.weight_codes) {
        if (c >= d.weight_scheme.levels()) {
          throw contract_error("weight code out of range for its scheme");
        }
      }
    }
  }
};

// Quantizes the float net: per-layer symmetric weight scale for uniform
// schemes (codebooks are taken to be in weight units already), activation
// scales calibrated from a float forward pass over the calibration set.
inline ToyNetwork quantize_network(const ToyFloatNet& net,
                                   const QuantScheme& activation_scheme,
                                   const QuantScheme& weight_scheme,
                                   const Dataset& calibration) {
  if (activation_scheme.kind != SchemeKind::kUniformSigned) {
    throw contract_error("activation scheme must be uniform-signed");
  }
  if (activation_scheme.width != weight_scheme.width) {
    throw contract_error("activation and weight schemes must share one width");
  }
  ToyNetwork q;
  q.activation_scheme = activation_scheme;
  double act_max_code =
      static_cast<double>((std::size_t{1} << (activation_scheme.width - 1)) - 1);

  for (const FloatDense& d : net.layers) {
    QuantDense qd;
    qd.in = d.in;
    qd.out = d.out;
    qd.weight_scheme = weight_scheme;
    qd.bias = d.b;
    if (weight_scheme.kind == SchemeKind::kUniformSigned) {
      double wmax = 0.0;
      for (double w : d.w) wmax = std::max(wmax, std::fabs(w));
      double wmax_code =
          static_cast<double>((std::size_t{1} << (weight_scheme.width - 1)) - 1);
      qd.weight_scale = wmax > 0.0 ? wmax / wmax_code : 1.0;
    } else {
      qd.weight_scale = 1.0;
    }
    qd.weight_codes.resize(d.w.size());
    for (std::size_t i = 0; i < d.w.size(); ++i) {
      qd.weight_codes[i] = encode_operand(weight_scheme, d.w[i] / qd.weight_scale);
    }
    q.layers.push_back(std::move(qd));
  }

  // Activation scales from the float net's per-layer input ranges.
  std::vector<double> maxima(net.layers.size(), 0.0);
  for (const auto& f : calibration.features) {
    std::vector<double> a = f;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      for (double x : a) maxima[l] = std::max(maxima[l], std::fabs(x));
      const FloatDense& d = net.layers[l];
      std::vector<double> nxt(d.out);
      for (std::size_t o = 0; o < d.out; ++o) {
        double acc = d.b[o];
        for (std::size_t i = 0; i < d.in; ++i) acc += d.w[o * d.in + i] * a[i];
        nxt[o] = l + 1 < net.layers.size() ? std::max(0.0, acc) : acc;
      }
      a = std::move(nxt);
    }
  }
  for (double m : maxima) {
    q.act_scales.push_back(m > 0.0 ? m / act_max_code : 1.0);
  }
  q.validate();
  return q;
}

// ---------------------------------------------------------------------------
// Inference

// Decoded product for every operand pair; index = code1 * 2^W + code2.
struct ProductLut {
  QuantScheme scheme1, scheme2;
  std::size_t width = 0;
  std::vector<double> values;

  double at(unsigned code1, unsigned code2) const {
    return values[(static_cast<std::size_t>(code1) << width) | code2];
  }
};

inline ProductLut exact_product_lut(const QuantScheme& s1,
                                    const QuantScheme& s2) {
  ProductTable table = build_product_table(s1, s2);
  ProductLut lut;
  lut.scheme1 = s1;
  lut.scheme2 = s2;
  lut.width = table.operand_width;
  lut.values = table.values;
  return lut;
}

// Bit-exact to encoded_multiply on every pair: entries are the correctly
// rounded decode of the circuit's output bits.
inline ProductLut encoded_product_lut(const Encoding& encoding) {
  ProductTable table = build_product_table(encoding.scheme1, encoding.scheme2);
  BitMatrix bits = eval_circuit(encoding.circuit, table);
  ProductLut lut;
  lut.scheme1 = encoding.scheme1;
  lut.scheme2 = encoding.scheme2;
  lut.width = table.operand_width;
  lut.values.resize(table.rows());
  ExactSum sum;
  for (std::size_t k = 0; k < table.rows(); ++k) {
    sum.reset();
    for (std::size_t j = 0; j < bits.cols(); ++j) {
      if (bits.get(k, j)) sum.add(encoding.weights[j]);
    }
    lut.values[k] = sum.result();
  }
  return lut;
}

namespace detail {

struct ForwardState {
  // Per layer: input activation codes and pre-activation values, per sample.
  std::vector<std::vector<std::vector<unsigned>>> codes;
  std::vector<std::vector<std::vector<double>>> pre;
  std::vector<std::vector<double>> scores;
};

inline void quantized_forward(const ToyNetwork& net, const ProductLut& lut,
                              const std::vector<std::vector<double>>& features,
                              ForwardState& state) {
  std::size_t n_layers = net.layers.size();
  std::size_t batch = features.size();
  state.codes.assign(n_layers, {});
  state.pre.assign(n_layers, {});
  for (auto& c : state.codes) c.resize(batch);
  for (auto& p : state.pre) p.resize(batch);
  state.scores.resize(batch);

  ExactSum mac;
  for (std::size_t s = 0; s < batch; ++s) {
    std::vector<double> act = features[s];
    for (std::size_t l = 0; l < n_layers; ++l) {
      const QuantDense& d = net.layers[l];
      if (act.size() != d.in) throw contract_error("feature width mismatch");
      std::vector<unsigned>& codes = state.codes[l][s];
      codes.resize(d.in);
      double scale = net.act_scales[l];
      for (std::size_t i = 0; i < d.in; ++i) {
        codes[i] = encode_operand(net.activation_scheme, act[i] / scale);
      }
      std::vector<double>& pre = state.pre[l][s];
      pre.resize(d.out);
      double out_scale = scale * d.weight_scale;
      for (std::size_t o = 0; o < d.out; ++o) {
        mac.reset();
        const unsigned* wrow = d.weight_codes.data() + o * d.in;
        for (std::size_t i = 0; i < d.in; ++i) {
          mac.add(lut.at(codes[i], wrow[i]));
        }
        pre[o] = mac.result() * out_scale + d.bias[o];
      }
      if (l + 1 < n_layers) {
        act.resize(d.out);
        for (std::size_t o = 0; o < d.out; ++o) act[o] = std::max(0.0, pre[o]);
      } else {
        state.scores[s] = pre;
      }
    }
  }
}

}  // namespace detail

// Class scores for a batch of real-valued inputs under the given product
// lookup (exact or encoded).
inline std::vector<std::vector<double>> infer(
    const ToyNetwork& net, const ProductLut& lut,
    const std::vector<std::vector<double>>& features) {
  net.validate();
  if (lut.scheme1 != net.activation_scheme) {
    throw contract_error("lut operand-1 scheme does not match activations");
  }
  for (const QuantDense& d : net.layers) {
    if (lut.scheme2 != d.weight_scheme) {
      throw contract_error("lut operand-2 scheme does not match layer weights");
    }
  }
  detail::ForwardState state;
  detail::quantized_forward(net, lut, features, state);
  return state.scores;
}

inline std::vector<std::vector<double>> infer(
    const ToyNetwork& net, const Encoding& encoding,
    const std::vector<std::vector<double>>& features) {
  return infer(net, encoded_product_lut(encoding), features);
}

inline double accuracy_of(const std::vector<std::vector<double>>& scores,
                          const std::vector<int>& labels) {
  std::size_t hits = 0;
  for (std::size_t s = 0; s < scores.size(); ++s) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < scores[s].size(); ++i) {
      if (scores[s][i] > scores[s][arg]) arg = i;
    }
    if (static_cast<int>(arg) == labels[s]) ++hits;
  }
  return scores.empty() ? 0.0
                        : static_cast<double>(hits) /
                              static_cast<double>(scores.size());
}

inline double dataset_accuracy(const ToyNetwork& net, const ProductLut& lut,
                               const Dataset& data) {
  return accuracy_of(infer(net, lut, data.features), data.labels);
}

// ---------------------------------------------------------------------------
// Position-weight fine-tuning

struct FinetuneConfig {
  double lr = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(lr >= 0.0)) throw contract_error("learning rate must be >= 0");
    if (batch_size < 1) throw contract_error("batch size must be >= 1");
  }
};

struct FinetuneResult {
  Encoding encoding;  // updated weights, same circuit, recomputed rmse
  std::vector<double> loss_curve;            // mean batch loss per epoch
  std::vector<double> train_accuracy_curve;  // after each epoch
  double pre_accuracy = 0.0;
  double post_accuracy = 0.0;
};

// SGD on the position weights only. The MAC output is linear in s (gradient =
// per-bit counts), activation quantizers backpropagate straight through, and
// weight codes plus the circuit stay frozen. The returned weights are the
// best epoch checkpoint by training accuracy, the initial weights included,
// so fine-tuning never hands back something worse than it started with.
inline FinetuneResult finetune_position_weights(const ToyNetwork& net,
                                                const Encoding& encoding,
                                                const Dataset& data,
                                                const FinetuneConfig& cfg) {
  net.validate();
  cfg.validate();
  if (encoding.scheme1 != net.activation_scheme) {
    throw contract_error("encoding operand-1 scheme does not match activations");
  }
  for (const QuantDense& d : net.layers) {
    if (encoding.scheme2 != d.weight_scheme) {
      throw contract_error("encoding operand-2 scheme does not match weights");
    }
  }

  std::size_t m = encoding.output_width();
  std::size_t n_layers = net.layers.size();
  ProductTable table = build_product_table(encoding.scheme1, encoding.scheme2);
  BitMatrix pair_bits = eval_circuit(encoding.circuit, table);
  auto pair_row = [&](unsigned c1, unsigned c2) {
    return (static_cast<std::size_t>(c1) << table.operand_width) | c2;
  };

  // Real-valued weight matrices for propagating gradients between layers.
  std::vector<std::vector<double>> w_real(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const QuantDense& d = net.layers[l];
    w_real[l].resize(d.weight_codes.size());
    for (std::size_t i = 0; i < d.weight_codes.size(); ++i) {
      w_real[l][i] =
          d.weight_scale * decode_operand(d.weight_scheme, d.weight_codes[i]);
    }
  }

  PositionWeights s = encoding.weights;
  auto lut_for = [&](const PositionWeights& weights) {
    ProductLut lut;
    lut.scheme1 = encoding.scheme1;
    lut.scheme2 = encoding.scheme2;
    lut.width = table.operand_width;
    lut.values.resize(table.rows());
    ExactSum sum;
    for (std::size_t k = 0; k < table.rows(); ++k) {
      sum.reset();
      for (std::size_t j = 0; j < m; ++j) {
        if (pair_bits.get(k, j)) sum.add(weights[j]);
      }
      lut.values[k] = sum.result();
    }
    return lut;
  };

  FinetuneResult result;
  result.pre_accuracy = dataset_accuracy(net, lut_for(s), data);
  PositionWeights best_s = s;
  double best_acc = result.pre_accuracy;

  SplitMix64 rng(hash_mix(cfg.seed ^ 0x5e7f17e5e7f17e55ull));
  detail::ForwardState state;
  std::vector<double> grad_s(m);
  std::vector<double> score_grad;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order = detail::shuffled_indices(data.size(), rng);
    double epoch_loss_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::vector<double>> batch_features;
      std::vector<int> batch_labels;
      for (std::size_t i = start; i < stop; ++i) {
        batch_features.push_back(data.features[order[i]]);
        batch_labels.push_back(data.labels[order[i]]);
      }
      ProductLut lut = lut_for(s);
      detail::quantized_forward(net, lut, batch_features, state);

      std::fill(grad_s.begin(), grad_s.end(), 0.0);
      double batch_loss_sum = 0.0;
      double inv_batch = 1.0 / static_cast<double>(batch_features.size());
      for (std::size_t b = 0; b < batch_features.size(); ++b) {
        double loss;
        detail::softmax_ce_grad(state.scores[b], batch_labels[b], score_grad,
                                loss);
        batch_loss_sum += loss;
        // d loss / d pre of the current layer, walked backwards.
        std::vector<double> dpre = score_grad;
        for (double& g : dpre) g *= inv_batch;
        for (std::size_t l = n_layers; l-- > 0;) {
          const QuantDense& d = net.layers[l];
          double out_scale = net.act_scales[l] * d.weight_scale;
          const auto& codes = state.codes[l][b];
          for (std::size_t o = 0; o < d.out; ++o) {
            double dz = dpre[o] * out_scale;
            if (dz == 0.0) continue;
            const unsigned* wrow = d.weight_codes.data() + o * d.in;
            for (std::size_t i = 0; i < d.in; ++i) {
              std::size_t row = pair_row(codes[i], wrow[i]);
              for (std::size_t j = 0; j < m; ++j) {
                if (pair_bits.get(row, j)) grad_s[j] += dz;
              }
            }
          }
          if (l == 0) break;
          // Straight through the activation quantizer, then the ReLU mask.
          std::vector<double> dact(d.in, 0.0);
          for (std::size_t o = 0; o < d.out; ++o) {
            double g = dpre[o];
            if (g == 0.0) continue;
            const double* row = w_real[l].data() + o * d.in;
            for (std::size_t i = 0; i < d.in; ++i) dact[i] += g * row[i];
          }
          const auto& prev_pre = state.pre[l - 1][b];
          dpre.assign(d.in, 0.0);
          for (std::size_t i = 0; i < d.in; ++i) {
            dpre[i] = prev_pre[i] > 0.0 ? dact[i] : 0.0;
          }
        }
      }
      if (!std::isfinite(batch_loss_sum)) {
        throw training_diverged_error("loss became non-finite during fine-tuning");
      }
      for (std::size_t j = 0; j < m; ++j) s[j] -= cfg.lr * grad_s[j];
      epoch_loss_total += batch_loss_sum;
    }
    result.loss_curve.push_back(epoch_loss_total /
                                static_cast<double>(data.size()));
    double acc = dataset_accuracy(net, lut_for(s), data);
    result.train_accuracy_curve.push_back(acc);
    if (acc > best_acc) {
      best_acc = acc;
      best_s = s;
    }
  }

  result.encoding = encoding;
  result.encoding.weights = best_s;
  BitMatrix b = eval_circuit(encoding.circuit, table);
  result.encoding.rmse = rmse_of(b, best_s, table.values);
  result.post_accuracy = best_acc;
  return result;
}

// ---------------------------------------------------------------------------
// Codebooks and the task-specific pipeline

// Lloyd's k-means on scalars, quantile-seeded, returns sorted levels. Empty
// clusters keep their previous center.
inline std::vector<double> kmeans_codebook(const std::vector<double>& values,
                                           std::size_t k, std::size_t iters = 30) {
  if (values.empty()) throw contract_error("k-means needs at least one value");
  if (k < 1) throw contract_error("k-means needs at least one cluster");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> centers(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t idx = (2 * c + 1) * sorted.size() / (2 * k);
    centers[c] = sorted[std::min(idx, sorted.size() - 1)];
  }
  std::vector<double> sums(k);
  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < iters; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), std::size_t{0});
    for (double v : sorted) {
      std::size_t best = 0;
      double best_d = std::fabs(v - centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        double d = std::fabs(v - centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      sums[best] += v;
      counts[best]++;
    }
    bool moved = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double nc = sums[c] / static_cast<double>(counts[c]);
      if (nc != centers[c]) moved = true;
      centers[c] = nc;
    }
    if (!moved) break;
  }
  std::sort(centers.begin(), centers.end());
  return centers;
}

struct NonuniformPipelineConfig {
  std::size_t width = 4;  // codebook operand width
  std::optional<std::vector<double>> codebook;  // k-means on weights if absent
  SearchConfig search;            // width bounds / budget / master seed
  double target_rmse_rel = 0.35;  // target = rel * value_rms(table) if
                                  // search.target_rmse is 0
};

struct NonuniformPipelineReport {
  Encoding encoding;
  SearchTrace trace;
  std::size_t chosen_width = 0;
  double target_rmse = 0.0;
  double accuracy_exact = 0.0;
  double accuracy_encoded = 0.0;
  QuantScheme weight_scheme;
};

// Task-specific flow: learn (or accept) a weight codebook, build the mixed
// uniform-activation x codebook-weight product table, binary-search the
// output width against the target policy, and report toy accuracies.
inline NonuniformPipelineReport nonuniform_pipeline(
    const ToyFloatNet& float_net, const Dataset& data,
    const NonuniformPipelineConfig& cfg) {
  std::vector<double> codebook;
  if (cfg.codebook) {
    codebook = *cfg.codebook;
  } else {
    std::vector<double> all_weights;
    for (const FloatDense& d : float_net.layers) {
      all_weights.insert(all_weights.end(), d.w.begin(), d.w.end());
    }
    codebook = kmeans_codebook(all_weights, std::size_t{1} << cfg.width);
  }
  QuantScheme weight_scheme = QuantScheme::nonuniform(cfg.width, codebook);
  QuantScheme act_scheme = QuantScheme::uniform_signed(cfg.width);

  NonuniformPipelineReport report;
  report.weight_scheme = weight_scheme;
  ToyNetwork net = quantize_network(float_net, act_scheme, weight_scheme, data);
  ProductTable table = build_product_table(act_scheme, weight_scheme);

  SearchConfig search = cfg.search;
  if (search.target_rmse <= 0.0) {
    search.target_rmse = cfg.target_rmse_rel * value_rms(table);
  }
  report.target_rmse = search.target_rmse;
  SearchResult res = width_binary_search(table, search);
  report.encoding = res.encoding;
  report.trace = res.trace;
  report.chosen_width = res.trace.chosen_width;
  report.accuracy_exact =
      dataset_accuracy(net, exact_product_lut(act_scheme, weight_scheme), data);
  report.accuracy_encoded =
      dataset_accuracy(net, encoded_product_lut(res.encoding), data);
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json network_to_json(const ToyNetwork& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const QuantDense& d : net.layers) {
    layers.push_back({{"in", d.in},
                      {"out", d.out},
                      {"weight_codes", d.weight_codes},
                      {"weight_scheme", scheme_to_json(d.weight_scheme)},
                      {"weight_scale", d.weight_scale},
                      {"bias", d.bias}});
  }
  return nlohmann::json{
      {"activation_scheme", scheme_to_json(net.activation_scheme)},
      {"act_scales", net.act_scales},
      {"layers", std::move(layers)}};
}

inline ToyNetwork network_from_json(const nlohmann::json& j) {
  ToyNetwork net;
  net.activation_scheme = scheme_from_json(j.at("activation_scheme"));
  net.act_scales = j.at("act_scales").get<std::vector<double>>();
  for (const auto& lj : j.at("layers")) {
    QuantDense d;
    d.in = lj.at("in").get<std::size_t>();
    d.out = lj.at("out").get<std::size_t>();
    d.weight_codes = lj.at("weight_codes").get<std::vector<unsigned>>();
    d.weight_scheme = scheme_from_json(lj.at("weight_scheme"));
    d.weight_scale = lj.at("weight_scale").get<double>();
    d.bias = lj.at("bias").get<std::vector<double>>();
    if (d.weight_codes.size() != d.in * d.out || d.bias.size() != d.out) {
      throw contract_error("checkpoint layer dimensions are inconsistent");
    }
    net.layers.push_back(std::move(d));
  }
  net.validate();
  return net;
}

}  // namespace encmac
