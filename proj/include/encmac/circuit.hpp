// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "encmac/errors.hpp"
#include "encmac/quant.hpp"
#include "encmac/rng.hpp"

namespace encmac {

// Single-level gate library. SET ties the output high, IN is a plain wire;
// everything else is a standard Boolean gate reading operand bits directly.
enum class GateKind : std::uint8_t {
  kSet = 0,
  kIn = 1,
  kNot = 2,
  kAnd2 = 3,
  kOr2 = 4,
  kNand2 = 5,
  kNand3 = 6,
  kXor3 = 7,
};

inline constexpr std::size_t kNumGateKinds = 8;

inline constexpr std::size_t gate_arity(GateKind k) {
  switch (k) {
    case GateKind::kSet:
      return 0;
    case GateKind::kIn:
    case GateKind::kNot:
      return 1;
    case GateKind::kAnd2:
    case GateKind::kOr2:
    case GateKind::kNand2:
      return 2;
    case GateKind::kNand3:
    case GateKind::kXor3:
      return 3;
  }
  return 0;
}

inline const char* gate_kind_name(GateKind k) {
  static constexpr const char* kNames[kNumGateKinds] = {
      "SET", "IN", "NOT", "AND2", "OR2", "NAND2", "NAND3", "XOR3"};
  return kNames[static_cast<std::size_t>(k)];
}

inline GateKind gate_kind_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kNumGateKinds; ++i) {
    GateKind k = static_cast<GateKind>(i);
    if (name == gate_kind_name(k)) return k;
  }
  throw contract_error("unknown gate kind: " + name);
}

// One output bit: a gate kind plus the operand-bit indices it reads.
// Index convention: 0..W-1 are operand-1 bits LSB first, W..2W-1 operand-2
// bits LSB first. Repeated indices within one gate are legal.
struct GateSpec {
  GateKind kind = GateKind::kSet;
  std::vector<std::uint8_t> inputs;  // length == gate_arity(kind)

  bool operator==(const GateSpec&) const = default;
};

// M independent single-level gates; gate j drives output bit j.
struct SampledCircuit {
  std::size_t operand_width = 0;
  std::vector<GateSpec> gates;

  std::size_t output_width() const { return gates.size(); }

  void validate() const {
    if (operand_width < 1 || operand_width > kMaxOperandWidth) {
      throw contract_error("circuit operand width out of range");
    }
    for (const GateSpec& g : gates) {
      if (g.inputs.size() != gate_arity(g.kind)) {
        throw contract_error(std::string("gate ") + gate_kind_name(g.kind) +
                             " expects " +
                             std::to_string(gate_arity(g.kind)) +
                             " inputs, got " + std::to_string(g.inputs.size()));
      }
      for (std::uint8_t idx : g.inputs) {
        if (idx >= 2 * operand_width) {
          throw contract_error("gate input index " + std::to_string(idx) +
                               " out of range [0, " +
                               std::to_string(2 * operand_width) + ")");
        }
      }
    }
  }

  bool operator==(const SampledCircuit&) const = default;
};

inline std::uint8_t eval_gate(const GateSpec& g,
                              std::span<const std::uint8_t> operand_bits) {
  auto in = [&](std::size_t i) -> std::uint8_t {
    return operand_bits[g.inputs[i]] & 1u;
  };
  switch (g.kind) {
    case GateKind::kSet:
      return 1;
    case GateKind::kIn:
      return in(0);
    case GateKind::kNot:
      return in(0) ^ 1u;
    case GateKind::kAnd2:
      return in(0) & in(1);
    case GateKind::kOr2:
      return in(0) | in(1);
    case GateKind::kNand2:
      return (in(0) & in(1)) ^ 1u;
    case GateKind::kNand3:
      return (in(0) & in(1) & in(2)) ^ 1u;
    case GateKind::kXor3:
      return in(0) ^ in(1) ^ in(2);
  }
  return 0;
}

// Operand-bit vector for a (code1, code2) pair under the index convention.
inline std::vector<std::uint8_t> operand_bits_of(unsigned code1, unsigned code2,
                                                 std::size_t width) {
  std::vector<std::uint8_t> bits(2 * width);
  for (std::size_t i = 0; i < width; ++i) {
    bits[i] = (code1 >> i) & 1u;
    bits[width + i] = (code2 >> i) & 1u;
  }
  return bits;
}

// Dense bit matrix, one row per truth-table row and one column per output
// bit. Stored column-major as packed 64-bit words so whole columns can be
// combined with single word ops.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows),
        cols_(cols),
        words_per_col_((rows + 63) / 64),
        words_(words_per_col_ * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t words_per_col() const { return words_per_col_; }

  bool get(std::size_t row, std::size_t col) const {
    return (words_[col * words_per_col_ + (row >> 6)] >> (row & 63)) & 1u;
  }
  void set(std::size_t row, std::size_t col, bool value) {
    std::uint64_t& w = words_[col * words_per_col_ + (row >> 6)];
    std::uint64_t mask = std::uint64_t{1} << (row & 63);
    w = value ? (w | mask) : (w & ~mask);
  }

  std::uint64_t* col_words(std::size_t col) {
    return words_.data() + col * words_per_col_;
  }
  const std::uint64_t* col_words(std::size_t col) const {
    return words_.data() + col * words_per_col_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t words_per_col_ = 0;
  std::vector<std::uint64_t> words_;
};

// Packed columns of the 2W operand bits across all table rows, in table row
// order. Shared input to circuit evaluation.
inline std::vector<std::vector<std::uint64_t>> packed_operand_columns(
    std::size_t width) {
  std::size_t rows = std::size_t{1} << (2 * width);
  std::size_t words = (rows + 63) / 64;
  std::vector<std::vector<std::uint64_t>> cols(
      2 * width, std::vector<std::uint64_t>(words, 0));
  for (std::size_t k = 0; k < rows; ++k) {
    unsigned code1 = static_cast<unsigned>(k >> width);
    unsigned code2 = static_cast<unsigned>(k & ((std::size_t{1} << width) - 1));
    for (std::size_t i = 0; i < width; ++i) {
      if ((code1 >> i) & 1u) cols[i][k >> 6] |= std::uint64_t{1} << (k & 63);
      if ((code2 >> i) & 1u)
        cols[width + i][k >> 6] |= std::uint64_t{1} << (k & 63);
    }
  }
  return cols;
}

// Evaluates the circuit on every table row. Row order matches the table.
inline BitMatrix eval_circuit(const SampledCircuit& circuit,
                              const ProductTable& table) {
  if (circuit.operand_width != table.operand_width) {
    throw contract_error("circuit operand width " +
                         std::to_string(circuit.operand_width) +
                         " does not match table width " +
                         std::to_string(table.operand_width));
  }
  circuit.validate();
  std::size_t rows = table.rows();
  std::size_t words = (rows + 63) / 64;
  auto inputs = packed_operand_columns(circuit.operand_width);

  BitMatrix out(rows, circuit.output_width());
  std::uint64_t tail_mask = (rows & 63)
                                ? ((std::uint64_t{1} << (rows & 63)) - 1)
                                : ~std::uint64_t{0};
  for (std::size_t j = 0; j < circuit.output_width(); ++j) {
    const GateSpec& g = circuit.gates[j];
    std::uint64_t* dst = out.col_words(j);
    auto src = [&](std::size_t i) -> const std::uint64_t* {
      return inputs[g.inputs[i]].data();
    };
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t v = 0;
      switch (g.kind) {
        case GateKind::kSet:
          v = ~std::uint64_t{0};
          break;
        case GateKind::kIn:
          v = src(0)[w];
          break;
        case GateKind::kNot:
          v = ~src(0)[w];
          break;
        case GateKind::kAnd2:
          v = src(0)[w] & src(1)[w];
          break;
        case GateKind::kOr2:
          v = src(0)[w] | src(1)[w];
          break;
        case GateKind::kNand2:
          v = ~(src(0)[w] & src(1)[w]);
          break;
        case GateKind::kNand3:
          v = ~(src(0)[w] & src(1)[w] & src(2)[w]);
          break;
        case GateKind::kXor3:
          v = src(0)[w] ^ src(1)[w] ^ src(2)[w];
          break;
      }
      if (w + 1 == words) v &= tail_mask;
      dst[w] = v;
    }
  }
  return out;
}

// Output bits of the circuit for one operand pair, LSB-first (bit j = gate j).
inline std::vector<std::uint8_t> eval_circuit_row(const SampledCircuit& circuit,
                                                  unsigned code1,
                                                  unsigned code2) {
  auto bits = operand_bits_of(code1, code2, circuit.operand_width);
  std::vector<std::uint8_t> out(circuit.output_width());
  for (std::size_t j = 0; j < circuit.output_width(); ++j) {
    out[j] = eval_gate(circuit.gates[j], bits);
  }
  return out;
}

// Uniform random circuit: each gate kind from the 8-kind library, each input
// index uniform over [0, 2W) independently. Fully determined by the rng seed.
inline SampledCircuit sample_circuit(SplitMix64& rng, std::size_t width,
                                     std::size_t output_width) {
  if (width < 1 || width > kMaxOperandWidth) {
    throw contract_error("operand width out of range");
  }
  if (output_width < 1) {
    throw contract_error("output width must be at least 1");
  }
  SampledCircuit c;
  c.operand_width = width;
  c.gates.resize(output_width);
  for (GateSpec& g : c.gates) {
    g.kind = static_cast<GateKind>(rng.bounded(kNumGateKinds));
    g.inputs.resize(gate_arity(g.kind));
    for (std::uint8_t& idx : g.inputs) {
      idx = static_cast<std::uint8_t>(rng.bounded(2 * width));
    }
  }
  return c;
}

struct GateCount {
  std::array<std::size_t, kNumGateKinds> per_kind{};
  // SET and IN excluded: a tie-high and a wire synthesize to no gate.
  std::size_t total = 0;
};

inline GateCount gate_count(const SampledCircuit& circuit) {
  GateCount gc;
  for (const GateSpec& g : circuit.gates) {
    gc.per_kind[static_cast<std::size_t>(g.kind)]++;
    if (g.kind != GateKind::kSet && g.kind != GateKind::kIn) gc.total++;
  }
  return gc;
}

// Support-compressed view of a gate: the sorted unique operand-bit positions
// it actually reads plus its truth table over those positions. Assignment bit
// i of `table` corresponds to support[i].
struct GateFunction {
  std::array<std::uint8_t, 3> support{};
  std::uint8_t support_size = 0;
  std::uint8_t table = 0;  // 2^support_size valid bits
};

inline GateFunction gate_function(const GateSpec& g, std::size_t width) {
  GateFunction f;
  std::array<std::uint8_t, 3> uniq{};
  std::size_t n = 0;
  for (std::uint8_t idx : g.inputs) {
    bool seen = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (uniq[i] == idx) seen = true;
    }
    if (!seen) uniq[n++] = idx;
  }
  std::sort(uniq.begin(), uniq.begin() + n);
  f.support_size = static_cast<std::uint8_t>(n);
  f.support = uniq;
  std::vector<std::uint8_t> bits(2 * width, 0);
  for (std::uint8_t a = 0; a < (1u << n); ++a) {
    for (std::size_t i = 0; i < n; ++i) bits[uniq[i]] = (a >> i) & 1u;
    if (eval_gate(g, bits)) f.table |= static_cast<std::uint8_t>(1u << a);
  }
  return f;
}

inline nlohmann::json circuit_to_json(const SampledCircuit& c) {
  nlohmann::json gates = nlohmann::json::array();
  for (const GateSpec& g : c.gates) {
    gates.push_back({{"kind", gate_kind_name(g.kind)},
                     {"inputs", std::vector<int>(g.inputs.begin(), g.inputs.end())}});
  }
  return nlohmann::json{{"operand_width", c.operand_width},
                        {"output_width", c.output_width()},
                        {"gates", std::move(gates)}};
}

inline SampledCircuit circuit_from_json(const nlohmann::json& j) {
  SampledCircuit c;
  c.operand_width = j.at("operand_width").get<std::size_t>();
  for (const auto& gj : j.at("gates")) {
    GateSpec g;
    g.kind = gate_kind_from_name(gj.at("kind").get<std::string>());
    for (const auto& idx : gj.at("inputs")) {
      g.inputs.push_back(static_cast<std::uint8_t>(idx.get<unsigned>()));
    }
    c.gates.push_back(std::move(g));
  }
  if (j.contains("output_width") &&
      j.at("output_width").get<std::size_t>() != c.output_width()) {
    throw contract_error("circuit output_width does not match gate list");
  }
  c.validate();
  return c;
}

}  // namespace encmac
