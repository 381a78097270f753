// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "encmac/circuit.hpp"
#include "encmac/errors.hpp"
#include "encmac/fit.hpp"
#include "encmac/quant.hpp"

namespace encmac {

// Gate-count anchor for a synthesized conventional signed multiplier; 417 at
// 8 bits, scaled quadratically for narrower operands.
inline constexpr std::size_t kTraditionalMultGates8Bit = 417;

inline std::size_t traditional_multiplier_gates(std::size_t operand_width) {
  double scaled = static_cast<double>(kTraditionalMultGates8Bit) *
                  static_cast<double>(operand_width * operand_width) / 64.0;
  return static_cast<std::size_t>(std::llround(scaled));
}

// Smallest per-bit counter width that can hold N one-bit addends.
inline std::size_t min_accumulator_width(std::size_t n) {
  std::size_t w = 0;
  while ((std::size_t{1} << w) < n + 1) ++w;
  return w;
}

struct ArrayConfig {
  std::size_t n = 1;                  // array dimension N
  double clock_period = 1.0;          // abstract time units per cycle
  std::size_t accumulator_width = 0;  // 0 selects the minimum safe width

  std::size_t effective_accumulator_width() const {
    std::size_t min_w = min_accumulator_width(n);
    if (accumulator_width == 0) return min_w;
    if (accumulator_width < min_w) {
      throw contract_error("accumulator width " +
                           std::to_string(accumulator_width) +
                           " cannot hold " + std::to_string(n) +
                           " one-bit addends");
    }
    return accumulator_width;
  }
};

struct CostProxy {
  std::size_t multiplier_gates_total = 0;
  std::size_t accumulator_bits = 0;
  std::size_t decoder_ops = 0;
};

struct ArraySimReport {
  // outputs[q] is the n x n result for input matrix q, row-major.
  std::vector<std::vector<double>> outputs;
  std::size_t first_result_latency_cycles = 0;
  std::size_t total_cycles = 0;
  double throughput = 0.0;  // matrices per time unit
  CostProxy cost;
  // Per column: histogram over observed per-bit-position counts (0..N).
  std::vector<std::vector<std::size_t>> bit_count_histograms;
  std::size_t max_bit_count = 0;
};

// Circuit output bits and decoded value for one operand pair.
struct EncodedProduct {
  std::vector<std::uint8_t> bits;
  double value = 0.0;
};

inline EncodedProduct encoded_multiply(const Encoding& encoding, unsigned code1,
                                       unsigned code2) {
  if (code1 >= encoding.scheme1.levels() || code2 >= encoding.scheme2.levels()) {
    throw std::out_of_range("operand code out of range for encoding");
  }
  EncodedProduct p;
  p.bits = eval_circuit_row(encoding.circuit, code1, code2);
  p.value = decode_value(p.bits, encoding.weights);
  return p;
}

namespace detail {

// Packed output bits for every operand pair; pair index = code1 * 2^W + code2.
class PairBitsLut {
 public:
  explicit PairBitsLut(const Encoding& encoding) {
    width_ = encoding.circuit.operand_width;
    m_ = encoding.output_width();
    ProductTable table = build_product_table(encoding.scheme1, encoding.scheme2);
    bits_ = eval_circuit(encoding.circuit, table);
  }

  std::size_t output_width() const { return m_; }
  std::size_t operand_width() const { return width_; }

  void accumulate_counts(unsigned code1, unsigned code2,
                         std::vector<std::uint32_t>& counts) const {
    std::size_t row = (static_cast<std::size_t>(code1) << width_) | code2;
    for (std::size_t j = 0; j < m_; ++j) {
      counts[j] += bits_.get(row, j) ? 1u : 0u;
    }
  }

 private:
  std::size_t width_ = 0;
  std::size_t m_ = 0;
  BitMatrix bits_;
};

// Decode per-bit counts to a value: correctly rounded sum of s_j * count_j in
// ascending bit order. Counts are exact integers, products are added exactly,
// so this equals the correctly rounded per-product reference bit for bit.
inline double decode_counts(std::span<const std::uint32_t> counts,
                            std::span<const double> weights) {
  ExactSum sum;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j]) sum.add_product(weights[j], static_cast<double>(counts[j]));
  }
  return sum.result();
}

}  // namespace detail

// Column MAC the way the hardware computes it: per-bit-position counts over
// the N products first, then one weighted decode of the counts.
inline double column_mac(const Encoding& encoding,
                         std::span<const unsigned> weight_codes,
                         std::span<const unsigned> activation_codes) {
  if (weight_codes.size() != activation_codes.size()) {
    throw contract_error("weight/activation length mismatch");
  }
  std::size_t m = encoding.output_width();
  std::vector<std::uint32_t> counts(m, 0);
  for (std::size_t i = 0; i < weight_codes.size(); ++i) {
    auto bits = eval_circuit_row(encoding.circuit, activation_codes[i],
                                 weight_codes[i]);
    for (std::size_t j = 0; j < m; ++j) counts[j] += bits[j];
  }
  return detail::decode_counts(counts, encoding.weights);
}

namespace detail {

// Transaction-level cycle loop shared by both array flavors. One activation
// row is consumed per cycle; a consumed row's column results become visible
// `drain` cycles later. Returns (first full matrix done, all matrices done).
template <typename RowFn>
inline std::pair<std::size_t, std::size_t> run_cycle_loop(std::size_t n,
                                                          std::size_t matrices,
                                                          std::size_t drain,
                                                          RowFn&& on_row) {
  std::size_t total_rows = n * matrices;
  std::size_t first_done = 0, all_done = 0;
  std::size_t fed = 0;
  std::size_t completed = 0;
  for (std::size_t cycle = 1; completed < total_rows; ++cycle) {
    if (fed < total_rows) {
      on_row(fed / n, fed % n);  // (matrix index, row index) consumed now
      ++fed;
    }
    // Rows fed at cycle c complete at cycle c + drain.
    if (cycle > drain) {
      ++completed;
      if (completed == n && first_done == 0) first_done = cycle;
      if (completed == total_rows) all_done = cycle;
    }
  }
  return {first_done, all_done};
}

}  // namespace detail

// Cost proxy for an N x N encoded MAC array: per-PE multiplier gates, per
// column M counters of the accumulator width, and a decoder doing M weight
// multiplies plus an (M-1)-add tree.
inline CostProxy array_cost_proxy(const ArrayConfig& cfg,
                                  const Encoding& encoding) {
  CostProxy cost;
  std::size_t m = encoding.output_width();
  cost.multiplier_gates_total = cfg.n * cfg.n * gate_count(encoding.circuit).total;
  cost.accumulator_bits = cfg.n * m * cfg.effective_accumulator_width();
  cost.decoder_ops = cfg.n * (m + (m - 1));
  return cost;
}

inline CostProxy traditional_cost_proxy(const ArrayConfig& cfg,
                                        std::size_t operand_width) {
  CostProxy cost;
  cost.multiplier_gates_total =
      cfg.n * cfg.n * traditional_multiplier_gates(operand_width);
  return cost;
}

// Encoded MAC array: weights preloaded, activation rows streamed one per
// cycle with no per-matrix re-skewing, products flow through the column's
// bit-wise accumulator without inter-row product registers, so a consumed row
// drains in N-1 cycles. out[q] = inputs[q] x Wmat, each column via column_mac.
inline ArraySimReport simulate_encoded_array(
    const ArrayConfig& cfg, const Encoding& encoding,
    const std::vector<std::vector<unsigned>>& weight_rows,
    const std::vector<std::vector<std::vector<unsigned>>>& inputs) {
  std::size_t n = cfg.n;
  if (weight_rows.size() != n) throw contract_error("weight matrix must be N x N");
  for (const auto& row : weight_rows) {
    if (row.size() != n) throw contract_error("weight matrix must be N x N");
  }
  if (inputs.empty()) throw contract_error("need at least one input matrix");
  for (const auto& mat : inputs) {
    if (mat.size() != n) throw contract_error("input matrices must be N x N");
    for (const auto& row : mat) {
      if (row.size() != n) throw contract_error("input matrices must be N x N");
    }
  }
  std::size_t m = encoding.output_width();
  std::size_t acc_width = cfg.effective_accumulator_width();
  std::uint32_t counter_cap = (std::uint32_t{1} << acc_width) - 1;

  detail::PairBitsLut lut(encoding);
  ArraySimReport report;
  report.outputs.assign(inputs.size(), std::vector<double>(n * n, 0.0));
  report.bit_count_histograms.assign(n, std::vector<std::size_t>(n + 1, 0));

  std::vector<std::uint32_t> counts(m);
  auto on_row = [&](std::size_t q, std::size_t r) {
    const auto& act_row = inputs[q][r];
    for (std::size_t c = 0; c < n; ++c) {
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        lut.accumulate_counts(act_row[i], weight_rows[i][c], counts);
      }
      for (std::uint32_t cnt : counts) {
        if (cnt > counter_cap) {
          throw contract_error("bit-position counter overflow");
        }
        report.bit_count_histograms[c][cnt]++;
        report.max_bit_count = std::max<std::size_t>(report.max_bit_count, cnt);
      }
      report.outputs[q][r * n + c] = detail::decode_counts(counts, encoding.weights);
    }
  };
  auto [first, total] = detail::run_cycle_loop(n, inputs.size(), n - 1, on_row);
  report.first_result_latency_cycles = first;
  report.total_cycles = total;
  report.throughput = static_cast<double>(inputs.size()) /
                      (static_cast<double>(total) * cfg.clock_period);
  report.cost = array_cost_proxy(cfg, encoding);
  return report;
}

// Conventional weight-stationary systolic baseline: activations are skewed
// across N-1 cycles and partial sums ripple through N-1 inter-row registers,
// so a consumed row drains in 2(N-1) cycles. Functional output is the exact
// integer matmul of the decoded operands.
inline ArraySimReport simulate_traditional_array(
    const ArrayConfig& cfg, const QuantScheme& activation_scheme,
    const QuantScheme& weight_scheme,
    const std::vector<std::vector<unsigned>>& weight_rows,
    const std::vector<std::vector<std::vector<unsigned>>>& inputs) {
  if (activation_scheme.kind != SchemeKind::kUniformSigned ||
      weight_scheme.kind != SchemeKind::kUniformSigned) {
    throw contract_error(
        "the traditional baseline models two's-complement operands only");
  }
  std::size_t n = cfg.n;
  if (weight_rows.size() != n) throw contract_error("weight matrix must be N x N");
  for (const auto& row : weight_rows) {
    if (row.size() != n) throw contract_error("weight matrix must be N x N");
  }
  if (inputs.empty()) throw contract_error("need at least one input matrix");

  ArraySimReport report;
  report.outputs.assign(inputs.size(), std::vector<double>(n * n, 0.0));

  auto on_row = [&](std::size_t q, std::size_t r) {
    const auto& act_row = inputs[q][r];
    if (act_row.size() != n) throw contract_error("input matrices must be N x N");
    for (std::size_t c = 0; c < n; ++c) {
      std::int64_t acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        std::int64_t a = static_cast<std::int64_t>(
            decode_operand(activation_scheme, act_row[i]));
        std::int64_t w = static_cast<std::int64_t>(
            decode_operand(weight_scheme, weight_rows[i][c]));
        acc += a * w;
      }
      report.outputs[q][r * n + c] = static_cast<double>(acc);
    }
  };
  auto [first, total] =
      detail::run_cycle_loop(n, inputs.size(), 2 * (n - 1), on_row);
  report.first_result_latency_cycles = first;
  report.total_cycles = total;
  report.throughput = static_cast<double>(inputs.size()) /
                      (static_cast<double>(total) * cfg.clock_period);
  report.cost = traditional_cost_proxy(cfg, activation_scheme.width);
  return report;
}

inline nlohmann::json cost_proxy_to_json(const CostProxy& c) {
  return nlohmann::json{{"multiplier_gates_total", c.multiplier_gates_total},
                        {"accumulator_bits", c.accumulator_bits},
                        {"decoder_ops", c.decoder_ops}};
}

inline nlohmann::json report_to_json(const ArraySimReport& r) {
  return nlohmann::json{
      {"first_result_latency_cycles", r.first_result_latency_cycles},
      {"total_cycles", r.total_cycles},
      {"throughput_per_time_unit", r.throughput},
      {"cost_proxy", cost_proxy_to_json(r.cost)},
      {"max_bit_count", r.max_bit_count}};
}

}  // namespace encmac
