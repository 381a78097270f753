// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "encmac/circuit.hpp"
#include "encmac/errors.hpp"
#include "encmac/exact_sum.hpp"
#include "encmac/quant.hpp"

namespace encmac {

// Position weights: s[j] is the real value output bit j contributes when set.
using PositionWeights = std::vector<double>;

// Correctly rounded dot product of a 0/1 bit vector with the weights.
inline double decode_value(std::span<const std::uint8_t> bits,
                           std::span<const double> weights) {
  if (bits.size() != weights.size()) {
    throw contract_error("bit/weight length mismatch: " +
                         std::to_string(bits.size()) + " vs " +
                         std::to_string(weights.size()));
  }
  ExactSum sum;
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] & 1u) sum.add(weights[j]);
  }
  return sum.result();
}

// Normal-equations view of a least-squares system ||B s - v||_2:
// gram = B^T B (row-major m x m), rhs = B^T v, value_sq = ||v||^2, rows = K.
struct NormalEquations {
  std::size_t m = 0;
  std::vector<double> gram;
  std::vector<double> rhs;
  double value_sq = 0.0;
  std::size_t rows = 0;
};

namespace detail {

// In-place lower Cholesky. Returns false on a non-positive (or numerically
// vanishing) pivot, which is how rank deficiency announces itself here.
inline bool cholesky_factor(std::vector<double>& a, std::size_t m) {
  double max_diag = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    max_diag = std::max(max_diag, std::fabs(a[i * m + i]));
  }
  double tol = max_diag * 1e-10;
  for (std::size_t j = 0; j < m; ++j) {
    double d = a[j * m + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * m + k] * a[j * m + k];
    if (!(d > tol)) return false;
    double root = std::sqrt(d);
    a[j * m + j] = root;
    for (std::size_t i = j + 1; i < m; ++i) {
      double s = a[i * m + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * m + k] * a[j * m + k];
      a[i * m + j] = s / root;
    }
  }
  return true;
}

inline void cholesky_solve(const std::vector<double>& chol, std::size_t m,
                           const std::vector<double>& b,
                           std::vector<double>& x) {
  x = b;
  for (std::size_t i = 0; i < m; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= chol[i * m + k] * x[k];
    x[i] = s / chol[i * m + i];
  }
  for (std::size_t ii = m; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < m; ++k) s -= chol[k * m + ii] * x[k];
    x[ii] = s / chol[ii * m + ii];
  }
}

inline void sym_matvec(const std::vector<double>& a, std::size_t m,
                       const std::vector<double>& x, std::vector<double>& y) {
  y.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* row = a.data() + i * m;
    for (std::size_t k = 0; k < m; ++k) acc += row[k] * x[k];
    y[i] = acc;
  }
}

inline double inf_norm(const std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n = std::max(n, std::fabs(x));
  return n;
}

}  // namespace detail

// Least-squares minimizer of ||B s - v||_2 from its normal equations.
// Plain Cholesky first; when a non-positive pivot betrays rank deficiency the
// system is re-factored with a ridge of lambda = 1e-8 * trace(G)/m and the
// solution is polished by iterated refinement on the unregularized equations.
// B^T v lies in range(B^T B), so the refinement converges to the minimum-norm
// least-squares solution and drives the residual orthogonality B^T(Bs - v)
// toward rounding level.
inline PositionWeights solve_normal_equations(const NormalEquations& eq) {
  std::size_t m = eq.m;
  if (m == 0) return {};
  std::vector<double> factor = eq.gram;
  bool regularized = false;
  if (!detail::cholesky_factor(factor, m)) {
    double trace = 0.0;
    for (std::size_t i = 0; i < m; ++i) trace += eq.gram[i * m + i];
    double lambda = 1e-8 * trace / static_cast<double>(m);
    if (!(lambda > 0.0)) lambda = 1e-12;
    factor = eq.gram;
    for (std::size_t i = 0; i < m; ++i) factor[i * m + i] += lambda;
    if (!detail::cholesky_factor(factor, m)) {
      // Zero matrix (e.g. all-zero columns); the minimum-norm answer is 0.
      return PositionWeights(m, 0.0);
    }
    regularized = true;
  }

  std::vector<double> s(m, 0.0), r = eq.rhs, delta, gs;
  double rhs_scale = detail::inf_norm(eq.rhs);
  double prev_norm = std::numeric_limits<double>::infinity();
  std::size_t max_iter = regularized ? 64 : 3;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    detail::cholesky_solve(factor, m, r, delta);
    for (std::size_t i = 0; i < m; ++i) s[i] += delta[i];
    detail::sym_matvec(eq.gram, m, s, gs);
    for (std::size_t i = 0; i < m; ++i) r[i] = eq.rhs[i] - gs[i];
    double norm = detail::inf_norm(r);
    if (norm <= rhs_scale * 1e-15 || !(norm < prev_norm * 0.5)) break;
    prev_norm = norm;
  }
  return s;
}

inline NormalEquations normal_equations_from(const BitMatrix& b,
                                             std::span<const double> v) {
  if (b.rows() != v.size()) {
    throw contract_error("bit matrix rows " + std::to_string(b.rows()) +
                         " do not match value vector length " +
                         std::to_string(v.size()));
  }
  if (b.rows() == 0) throw contract_error("empty system");
  NormalEquations eq;
  eq.m = b.cols();
  eq.rows = b.rows();
  eq.gram.assign(eq.m * eq.m, 0.0);
  eq.rhs.assign(eq.m, 0.0);
  std::size_t words = b.words_per_col();
  for (std::size_t j = 0; j < eq.m; ++j) {
    const std::uint64_t* cj = b.col_words(j);
    for (std::size_t l = j; l < eq.m; ++l) {
      const std::uint64_t* cl = b.col_words(l);
      std::size_t count = 0;
      for (std::size_t w = 0; w < words; ++w) {
        count += static_cast<std::size_t>(__builtin_popcountll(cj[w] & cl[w]));
      }
      eq.gram[j * eq.m + l] = static_cast<double>(count);
      eq.gram[l * eq.m + j] = static_cast<double>(count);
    }
    // B^T v restricted to rows where column j is set, in row order.
    double acc = 0.0;
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t bits = cj[w];
      while (bits) {
        std::size_t row = (w << 6) + static_cast<std::size_t>(__builtin_ctzll(bits));
        acc += v[row];
        bits &= bits - 1;
      }
    }
    eq.rhs[j] = acc;
  }
  ExactSum vsq;
  for (double x : v) vsq.add_product(x, x);
  eq.value_sq = vsq.result();
  return eq;
}

// Least-squares fit of the position weights for bit matrix B against the
// reference value vector.
inline PositionWeights fit_position_weights(const BitMatrix& b,
                                            std::span<const double> v) {
  return solve_normal_equations(normal_equations_from(b, v));
}

// Definitional RMSE: sqrt(mean over rows of (decoded - v)^2), decoding each
// row with the correctly rounded dot product.
inline double rmse_of(const BitMatrix& b, const PositionWeights& weights,
                      std::span<const double> v) {
  if (b.rows() != v.size() || b.cols() != weights.size()) {
    throw contract_error("rmse_of dimension mismatch");
  }
  if (b.rows() == 0) return 0.0;
  ExactSum row_sum;
  double total = 0.0;
  for (std::size_t k = 0; k < b.rows(); ++k) {
    row_sum.reset();
    for (std::size_t j = 0; j < b.cols(); ++j) {
      if (b.get(k, j)) row_sum.add(weights[j]);
    }
    double err = row_sum.result() - v[k];
    total += err * err;
  }
  return std::sqrt(total / static_cast<double>(b.rows()));
}

// RMSE via the quadratic form s^T G s - 2 s^T c + ||v||^2. Cheap enough to
// score every sampled circuit; cancellation noise near zero is clamped.
inline double rmse_from_normal_equations(const NormalEquations& eq,
                                         const PositionWeights& s) {
  std::vector<double> gs;
  detail::sym_matvec(eq.gram, eq.m, s, gs);
  double sgs = 0.0, sc = 0.0;
  for (std::size_t i = 0; i < eq.m; ++i) {
    sgs += s[i] * gs[i];
    sc += s[i] * eq.rhs[i];
  }
  double sq = sgs - 2.0 * sc + eq.value_sq;
  if (sq < 0.0) sq = 0.0;
  return std::sqrt(sq / static_cast<double>(eq.rows));
}

// A sampled circuit with its fitted position weights: the persisted artifact
// of the search.
struct Encoding {
  SampledCircuit circuit;
  PositionWeights weights;
  double rmse = 0.0;
  QuantScheme scheme1;
  QuantScheme scheme2;
  std::uint64_t seed = 0;          // master seed of the producing search
  std::uint64_t sample_index = 0;  // winning sample within that search

  std::size_t output_width() const { return circuit.output_width(); }
};

// Fits weights for `circuit` against `table` and packages the result. The
// stored rmse is the definitional one, recomputable from scratch.
inline Encoding make_encoding(const SampledCircuit& circuit,
                              const ProductTable& table, std::uint64_t seed = 0,
                              std::uint64_t sample_index = 0) {
  Encoding enc;
  enc.circuit = circuit;
  enc.scheme1 = table.scheme1;
  enc.scheme2 = table.scheme2;
  enc.seed = seed;
  enc.sample_index = sample_index;
  BitMatrix b = eval_circuit(circuit, table);
  enc.weights = fit_position_weights(b, table.values);
  enc.rmse = rmse_of(b, enc.weights, table.values);
  return enc;
}

inline nlohmann::json encoding_to_json(const Encoding& e) {
  nlohmann::json j;
  j["circuit"] = circuit_to_json(e.circuit);
  j["weights"] = e.weights;
  j["rmse"] = e.rmse;
  j["operand_scheme"] = {{"operand1", scheme_to_json(e.scheme1)},
                         {"operand2", scheme_to_json(e.scheme2)}};
  j["seed"] = e.seed;
  j["sample_index"] = e.sample_index;
  j["created_for"] = {
      {"quant", e.scheme1.description() + " x " + e.scheme2.description()}};
  return j;
}

inline Encoding encoding_from_json(const nlohmann::json& j) {
  Encoding e;
  e.circuit = circuit_from_json(j.at("circuit"));
  e.weights = j.at("weights").get<std::vector<double>>();
  e.rmse = j.at("rmse").get<double>();
  const auto& schemes = j.at("operand_scheme");
  e.scheme1 = scheme_from_json(schemes.at("operand1"));
  e.scheme2 = scheme_from_json(schemes.at("operand2"));
  e.seed = j.at("seed").get<std::uint64_t>();
  e.sample_index = j.at("sample_index").get<std::uint64_t>();
  if (e.weights.size() != e.circuit.output_width()) {
    throw contract_error("encoding weight count does not match circuit width");
  }
  return e;
}

}  // namespace encmac
