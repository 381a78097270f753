// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "encmac/errors.hpp"
#include "encmac/exact_sum.hpp"
#include "encmac/io.hpp"

namespace encmac {

// Largest supported operand width. Product tables are materialized in full
// (2^(2W) rows), so 8 bits caps the table at 65536 rows.
inline constexpr std::size_t kMaxOperandWidth = 8;

enum class SchemeKind { kUniformSigned, kNonuniformCodebook };

inline const char* scheme_kind_name(SchemeKind k) {
  return k == SchemeKind::kUniformSigned ? "uniform-signed"
                                         : "nonuniform-codebook";
}

// How an operand code maps to a real value: either two's-complement integers
// or a lookup into a codebook of 2^W levels indexed by the raw unsigned code.
struct QuantScheme {
  SchemeKind kind = SchemeKind::kUniformSigned;
  std::size_t width = 8;
  std::vector<double> codebook;  // size 2^width iff nonuniform

  static QuantScheme uniform_signed(std::size_t width) {
    QuantScheme s;
    s.kind = SchemeKind::kUniformSigned;
    s.width = width;
    s.validate();
    return s;
  }

  static QuantScheme nonuniform(std::size_t width,
                                std::vector<double> codebook) {
    QuantScheme s;
    s.kind = SchemeKind::kNonuniformCodebook;
    s.width = width;
    s.codebook = std::move(codebook);
    s.validate();
    return s;
  }

  std::size_t levels() const { return std::size_t{1} << width; }

  void validate() const {
    if (width < 1 || width > kMaxOperandWidth) {
      throw unsupported_size_error("operand width " + std::to_string(width) +
                                   " out of supported range [1, " +
                                   std::to_string(kMaxOperandWidth) + "]");
    }
    if (kind == SchemeKind::kNonuniformCodebook) {
      if (codebook.size() != levels()) {
        throw contract_error("codebook must have exactly 2^width entries, got " +
                             std::to_string(codebook.size()));
      }
      for (double v : codebook) {
        if (!std::isfinite(v)) {
          throw contract_error("codebook values must be finite");
        }
      }
    } else if (!codebook.empty()) {
      throw contract_error("uniform-signed scheme must not carry a codebook");
    }
  }

  std::string description() const {
    return std::string(scheme_kind_name(kind)) + " w" + std::to_string(width);
  }

  bool operator==(const QuantScheme&) const = default;
};

// Real value represented by `code` under `scheme`.
inline double decode_operand(const QuantScheme& scheme, unsigned code) {
  if (code >= scheme.levels()) {
    throw std::out_of_range("operand code " + std::to_string(code) +
                            " out of range for width " +
                            std::to_string(scheme.width));
  }
  if (scheme.kind == SchemeKind::kUniformSigned) {
    std::int64_t half = std::int64_t{1} << (scheme.width - 1);
    std::int64_t v = static_cast<std::int64_t>(code);
    if (v >= half) v -= std::int64_t{1} << scheme.width;
    return static_cast<double>(v);
  }
  return scheme.codebook[code];
}

// Quantizes a real to the nearest representable code of `scheme`. Uniform
// schemes round-half-away and saturate; codebook schemes pick the nearest
// level (ties to the lower code).
inline unsigned encode_operand(const QuantScheme& scheme, double value) {
  if (scheme.kind == SchemeKind::kUniformSigned) {
    std::int64_t half = std::int64_t{1} << (scheme.width - 1);
    std::int64_t q = static_cast<std::int64_t>(std::llround(value));
    if (q < -half) q = -half;
    if (q > half - 1) q = half - 1;
    if (q < 0) q += std::int64_t{1} << scheme.width;
    return static_cast<unsigned>(q);
  }
  unsigned best = 0;
  double best_dist = std::fabs(value - scheme.codebook[0]);
  for (unsigned c = 1; c < scheme.levels(); ++c) {
    double d = std::fabs(value - scheme.codebook[c]);
    if (d < best_dist) {
      best_dist = d;
      best = c;
    }
  }
  return best;
}

// Exhaustive multiplication truth table: one row per (code1, code2) pair in
// ascending lexicographic order, value = decode(code1) * decode(code2).
struct ProductTable {
  QuantScheme scheme1;
  QuantScheme scheme2;
  std::size_t operand_width = 0;
  std::vector<double> values;  // 2^(2W), index = code1 * 2^W + code2

  std::size_t rows() const { return values.size(); }
  unsigned code1_of(std::size_t row) const {
    return static_cast<unsigned>(row >> operand_width);
  }
  unsigned code2_of(std::size_t row) const {
    return static_cast<unsigned>(row & ((std::size_t{1} << operand_width) - 1));
  }
  std::size_t row_of(unsigned code1, unsigned code2) const {
    return (static_cast<std::size_t>(code1) << operand_width) | code2;
  }
};

inline ProductTable build_product_table(const QuantScheme& s1,
                                        const QuantScheme& s2) {
  s1.validate();
  s2.validate();
  if (s1.width != s2.width) {
    throw contract_error("operand widths must match: " +
                         std::to_string(s1.width) + " vs " +
                         std::to_string(s2.width));
  }
  ProductTable table;
  table.scheme1 = s1;
  table.scheme2 = s2;
  table.operand_width = s1.width;
  std::size_t levels = s1.levels();
  table.values.resize(levels * levels);
  std::vector<double> d1(levels), d2(levels);
  for (unsigned c = 0; c < levels; ++c) {
    d1[c] = decode_operand(s1, c);
    d2[c] = decode_operand(s2, c);
  }
  for (unsigned c1 = 0; c1 < levels; ++c1) {
    for (unsigned c2 = 0; c2 < levels; ++c2) {
      double v = d1[c1] * d2[c2];
      if (v == 0.0) v = 0.0;  // canonicalize -0 so renderings agree
      table.values[table.row_of(c1, c2)] = v;
    }
  }
  return table;
}

// Root of the mean squared value over the table; the natural scale for
// relative RMSE targets.
inline double value_rms(const ProductTable& table) {
  ExactSum sum;
  for (double v : table.values) sum.add_product(v, v);
  return std::sqrt(sum.result() / static_cast<double>(table.rows()));
}

inline std::string code_bits_string(unsigned code, std::size_t width) {
  std::string s(width, '0');
  for (std::size_t i = 0; i < width; ++i) {
    if ((code >> i) & 1u) s[width - 1 - i] = '1';  // MSB first
  }
  return s;
}

// CSV rendering: header `code1,code2,value`, codes as fixed-width binary
// strings (MSB first), values as shortest round-trip decimals.
inline std::string table_to_csv(const ProductTable& table) {
  std::string out = "code1,code2,value\n";
  for (std::size_t k = 0; k < table.rows(); ++k) {
    out += code_bits_string(table.code1_of(k), table.operand_width);
    out += ',';
    out += code_bits_string(table.code2_of(k), table.operand_width);
    out += ',';
    out += format_double(table.values[k]);
    out += '\n';
  }
  return out;
}

inline nlohmann::json scheme_to_json(const QuantScheme& s) {
  nlohmann::json j;
  j["kind"] = scheme_kind_name(s.kind);
  j["width"] = s.width;
  if (s.kind == SchemeKind::kNonuniformCodebook) j["codebook"] = s.codebook;
  return j;
}

inline QuantScheme scheme_from_json(const nlohmann::json& j) {
  QuantScheme s;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "uniform-signed") {
    s.kind = SchemeKind::kUniformSigned;
  } else if (kind == "nonuniform-codebook") {
    s.kind = SchemeKind::kNonuniformCodebook;
  } else {
    throw contract_error("unknown scheme kind: " + kind);
  }
  s.width = j.at("width").get<std::size_t>();
  if (j.contains("codebook")) {
    s.codebook = j.at("codebook").get<std::vector<double>>();
  }
  s.validate();
  return s;
}

}  // namespace encmac
