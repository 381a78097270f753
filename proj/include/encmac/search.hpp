// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "encmac/circuit.hpp"
#include "encmac/errors.hpp"
#include "encmac/fit.hpp"
#include "encmac/quant.hpp"
#include "encmac/rng.hpp"

namespace encmac {

struct SearchConfig {
  std::size_t max_samples = 10000;
  // Early stop once the best RMSE improved by less than stability_epsilon
  // (relative) over the last stability_window samples. epsilon 0 disables
  // the stop and runs the full budget.
  std::size_t stability_window = 1000;
  double stability_epsilon = 0.005;
  std::size_t min_width = 0;  // 0 selects the width-dependent default
  std::size_t max_width = 0;
  double target_rmse = 0.0;
  std::uint64_t master_seed = 1;
  unsigned jobs = 1;

  void validate() const {
    if (max_samples < 1) throw contract_error("max_samples must be >= 1");
    if (stability_window < 1) throw contract_error("stability window must be >= 1");
    if (stability_epsilon < 0.0) throw contract_error("stability epsilon must be >= 0");
    if (min_width != 0 && max_width != 0 && min_width > max_width) {
      throw contract_error("min_width must not exceed max_width");
    }
  }
};

// Output-width bounds for the binary search when the config leaves them 0:
// 16..128 for 8-bit operands, scaled as (4W, 32W) below that.
inline std::size_t default_min_width(std::size_t operand_width) {
  return operand_width == 8 ? 16 : 4 * operand_width;
}
inline std::size_t default_max_width(std::size_t operand_width) {
  return operand_width == 8 ? 128 : 32 * operand_width;
}

struct SearchTrace {
  std::vector<double> best_rmse_by_sample;  // non-increasing
  std::vector<std::pair<std::size_t, double>> best_rmse_by_width;  // probe order
  std::size_t chosen_width = 0;
  std::size_t total_samples = 0;
  double wall_seconds = 0.0;
};

struct SearchResult {
  Encoding encoding;
  SearchTrace trace;
};

// Thrown when even the maximum width cannot reach the target; carries the
// best encoding seen so it can still be persisted.
class target_unreachable_error : public std::runtime_error {
 public:
  target_unreachable_error(const std::string& what, Encoding best,
                           SearchTrace trace)
      : std::runtime_error(what),
        best_encoding(std::move(best)),
        trace(std::move(trace)) {}
  Encoding best_encoding;
  SearchTrace trace;
};

// Per-table scoring state reused across samples. Because every table row is a
// distinct (code1, code2) pair and the value column factorizes as
// v = decode1(code1) * decode2(code2), both the Gram matrix and B^T v of a
// candidate circuit follow from per-operand marginals over at most three bit
// positions; no per-sample pass over the table is needed.
class TableContext {
 public:
  explicit TableContext(const ProductTable& table) : table_(&table) {
    std::size_t w = table.operand_width;
    std::size_t levels = std::size_t{1} << w;
    std::vector<double> d1(levels), d2(levels);
    for (unsigned c = 0; c < levels; ++c) {
      d1[c] = decode_operand(table.scheme1, c);
      d2[c] = decode_operand(table.scheme2, c);
    }
    ExactSum vsq;
    for (double v : table.values) vsq.add_product(v, v);
    value_sq_ = vsq.result();

    // marginals_[op][mask][a] = sum of decode(code) over codes whose bits at
    // the (sorted ascending) positions of `mask` equal assignment `a`.
    for (int op = 0; op < 2; ++op) {
      const std::vector<double>& dec = op == 0 ? d1 : d2;
      auto& marg = marginals_[op];
      marg.assign(std::size_t{1} << w, {});
      for (std::uint32_t mask = 0; mask < (1u << w); ++mask) {
        if (__builtin_popcount(mask) > 3) continue;
        auto& buckets = marg[mask];
        buckets.assign(std::size_t{1} << __builtin_popcount(mask), 0.0);
        for (unsigned code = 0; code < levels; ++code) {
          unsigned a = 0, bit = 0;
          for (std::size_t p = 0; p < w; ++p) {
            if ((mask >> p) & 1u) {
              a |= ((code >> p) & 1u) << bit;
              ++bit;
            }
          }
          buckets[a] += dec[code];
        }
      }
    }
  }

  const ProductTable& table() const { return *table_; }
  double value_sq() const { return value_sq_; }
  std::size_t operand_width() const { return table_->operand_width; }
  std::size_t rows() const { return table_->rows(); }

  double marginal(int op, std::uint32_t mask, unsigned assignment) const {
    return marginals_[op][mask][assignment];
  }

 private:
  const ProductTable* table_;
  double value_sq_ = 0.0;
  std::array<std::vector<std::vector<double>>, 2> marginals_;
};

namespace detail {

// Assignment-space checkerboard constants: bit a of kDimPattern[d] is the
// value of dimension d in assignment a (64 assignments cover 6 dimensions,
// the largest union of two 3-input gate supports).
inline constexpr std::uint64_t kDimPattern[6] = {
    0xaaaaaaaaaaaaaaaaull, 0xccccccccccccccccull, 0xf0f0f0f0f0f0f0f0ull,
    0xff00ff00ff00ff00ull, 0xffff0000ffff0000ull, 0xffffffff00000000ull};

struct PreparedGate {
  GateFunction fn;
  // Decomposition of the support into per-operand masks for the marginals.
  std::uint32_t mask1 = 0, mask2 = 0;
  std::uint8_t n1 = 0;  // support positions falling in operand 1
  double rhs = 0.0;     // B^T v entry, from the factorized marginals
  std::uint64_t ones = 0;  // number of table rows where the gate outputs 1
};

inline PreparedGate prepare_gate(const GateSpec& g, const TableContext& ctx) {
  PreparedGate p;
  std::size_t w = ctx.operand_width();
  p.fn = gate_function(g, w);
  for (std::size_t i = 0; i < p.fn.support_size; ++i) {
    std::uint8_t pos = p.fn.support[i];
    if (pos < w) {
      p.mask1 |= 1u << pos;
      ++p.n1;
    } else {
      p.mask2 |= 1u << (pos - w);
    }
  }
  // Support is sorted, so operand-1 positions occupy the low assignment bits.
  std::size_t free_bits = 2 * w - p.fn.support_size;
  for (unsigned a = 0; a < (1u << p.fn.support_size); ++a) {
    if ((p.fn.table >> a) & 1u) {
      unsigned a1 = a & ((1u << p.n1) - 1u);
      unsigned a2 = a >> p.n1;
      p.rhs += ctx.marginal(0, p.mask1, a1) * ctx.marginal(1, p.mask2, a2);
      p.ones += std::uint64_t{1} << free_bits;
    }
  }
  return p;
}

// Truth table of the gate expanded onto a 6-dimension assignment space where
// its support positions occupy the given slots. Unused dimensions are free,
// so each satisfying assignment is replicated across them.
inline std::uint64_t expand_to_slots(const GateFunction& fn,
                                     const std::uint8_t* slot_of_support) {
  std::uint64_t tt = 0;
  for (unsigned a = 0; a < (1u << fn.support_size); ++a) {
    if (!((fn.table >> a) & 1u)) continue;
    std::uint64_t match = ~std::uint64_t{0};
    for (std::size_t i = 0; i < fn.support_size; ++i) {
      std::uint64_t pat = kDimPattern[slot_of_support[i]];
      match &= ((a >> i) & 1u) ? pat : ~pat;
    }
    tt |= match;
  }
  return tt;
}

// Gram entry: the number of table rows where both gates output 1. The two
// supports are merged into at most 6 slot dimensions; every row bit pattern
// outside the union is free, giving count = popcount * 2^(2W - 6).
inline double gram_entry(const PreparedGate& a, const PreparedGate& b,
                         std::size_t operand_width) {
  std::uint8_t slots_a[3], slots_b[3];
  std::size_t u = 0, ia = 0, ib = 0;
  while (ia < a.fn.support_size || ib < b.fn.support_size) {
    std::uint8_t pa = ia < a.fn.support_size ? a.fn.support[ia] : 0xff;
    std::uint8_t pb = ib < b.fn.support_size ? b.fn.support[ib] : 0xff;
    std::uint8_t p = std::min(pa, pb);
    if (pa == p) slots_a[ia++] = static_cast<std::uint8_t>(u);
    if (pb == p) slots_b[ib++] = static_cast<std::uint8_t>(u);
    ++u;
  }
  std::uint64_t tta = expand_to_slots(a.fn, slots_a);
  std::uint64_t ttb = expand_to_slots(b.fn, slots_b);
  std::uint64_t pop = static_cast<std::uint64_t>(__builtin_popcountll(tta & ttb));
  // count = pop * 2^(2W - u) / 2^(6 - u) = pop * 2^(2W - 6); exact because pop
  // is a multiple of the 2^(6 - u) replication factor.
  return std::ldexp(static_cast<double>(pop),
                    static_cast<int>(2 * operand_width) - 6);
}

struct SampleScore {
  double rmse = std::numeric_limits<double>::infinity();
  std::size_t gates_total = 0;
};

// Fits and scores one sampled circuit without materializing its bit matrix.
inline SampleScore score_circuit(const SampledCircuit& circuit,
                                 const TableContext& ctx,
                                 PositionWeights* weights_out = nullptr) {
  std::size_t m = circuit.output_width();
  std::vector<PreparedGate> prepared(m);
  for (std::size_t j = 0; j < m; ++j) {
    prepared[j] = prepare_gate(circuit.gates[j], ctx);
  }
  NormalEquations eq;
  eq.m = m;
  eq.rows = ctx.rows();
  eq.value_sq = ctx.value_sq();
  eq.gram.assign(m * m, 0.0);
  eq.rhs.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    eq.rhs[j] = prepared[j].rhs;
    for (std::size_t l = j; l < m; ++l) {
      double g = gram_entry(prepared[j], prepared[l], ctx.operand_width());
      eq.gram[j * m + l] = g;
      eq.gram[l * m + j] = g;
    }
  }
  PositionWeights s = solve_normal_equations(eq);
  SampleScore out;
  out.rmse = rmse_from_normal_equations(eq, s);
  out.gates_total = gate_count(circuit).total;
  if (weights_out) *weights_out = std::move(s);
  return out;
}

// Deterministic chunked parallel map: results land in index order regardless
// of the worker count.
template <typename Fn>
inline void parallel_for_index(std::size_t begin, std::size_t end,
                               unsigned jobs, Fn&& fn) {
  std::size_t n = end - begin;
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  unsigned workers = std::min<unsigned>(jobs, static_cast<unsigned>(n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t per = (n + workers - 1) / workers;
  for (unsigned t = 0; t < workers; ++t) {
    std::size_t lo = begin + t * per;
    std::size_t hi = std::min(end, lo + per);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Best-of-N random sampling at a fixed output width. Samples are drawn from
// sub-seeds f(master, width, index), scored, and reduced in index order; the
// run stops early once the best RMSE stabilizes (see SearchConfig) or at the
// sample budget. Ties on RMSE prefer the lower gate count, then the earlier
// sample.
inline SearchResult sample_search(const TableContext& ctx, std::size_t width,
                                  const SearchConfig& cfg) {
  if (width < 1) throw contract_error("output width must be >= 1");
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();

  SearchTrace trace;
  trace.chosen_width = width;
  trace.best_rmse_by_sample.reserve(std::min<std::size_t>(cfg.max_samples, 1 << 20));

  double best_rmse = std::numeric_limits<double>::infinity();
  std::size_t best_gates = std::numeric_limits<std::size_t>::max();
  std::size_t best_index = 0;
  bool stopped = false;

  std::size_t chunk = std::max<std::size_t>(std::size_t{64} * std::max(1u, cfg.jobs), 256);
  std::vector<detail::SampleScore> scores;
  std::size_t next = 0;
  while (next < cfg.max_samples && !stopped) {
    std::size_t count = std::min(chunk, cfg.max_samples - next);
    scores.assign(count, {});
    detail::parallel_for_index(0, count, cfg.jobs, [&](std::size_t i) {
      SplitMix64 rng(sub_seed(cfg.master_seed, width, next + i));
      SampledCircuit c = sample_circuit(rng, ctx.operand_width(), width);
      scores[i] = detail::score_circuit(c, ctx);
    });
    for (std::size_t i = 0; i < count && !stopped; ++i) {
      std::size_t index = next + i;
      const auto& sc = scores[i];
      if (sc.rmse < best_rmse ||
          (sc.rmse == best_rmse && sc.gates_total < best_gates)) {
        best_rmse = sc.rmse;
        best_gates = sc.gates_total;
        best_index = index;
      }
      trace.best_rmse_by_sample.push_back(best_rmse);
      std::size_t n = trace.best_rmse_by_sample.size();
      if (cfg.stability_epsilon > 0.0 && n > cfg.stability_window) {
        double before = trace.best_rmse_by_sample[n - 1 - cfg.stability_window];
        double rel = before > 0.0 ? (before - best_rmse) / before : 0.0;
        if (rel < cfg.stability_epsilon) stopped = true;
      }
    }
    next += count;
  }
  trace.total_samples = trace.best_rmse_by_sample.size();

  // Rebuild the winner from its sub-seed and store the definitional RMSE.
  SplitMix64 rng(sub_seed(cfg.master_seed, width, best_index));
  SampledCircuit winner = sample_circuit(rng, ctx.operand_width(), width);
  SearchResult result;
  result.encoding = make_encoding(winner, ctx.table(), cfg.master_seed, best_index);
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.trace = std::move(trace);
  return result;
}

inline SearchResult sample_search(const ProductTable& table, std::size_t width,
                                  const SearchConfig& cfg) {
  TableContext ctx(table);
  return sample_search(ctx, width, cfg);
}

// Binary search over the output width against cfg.target_rmse, injectable
// probe for testing. The probe returns the best encoding found at a width;
// achieved-vs-target is treated as monotone in the width. Probed widths are
// cached; the returned width is the smallest probed width meeting the target,
// re-verified on its definitional RMSE.
template <typename ProbeFn>
inline SearchResult width_binary_search_with(std::size_t min_width,
                                             std::size_t max_width,
                                             double target_rmse,
                                             ProbeFn&& probe) {
  if (target_rmse <= 0.0) throw contract_error("target RMSE must be positive");
  if (min_width < 1 || min_width > max_width) {
    throw contract_error("invalid width bounds");
  }
  auto t0 = std::chrono::steady_clock::now();
  SearchTrace trace;
  std::map<std::size_t, SearchResult> probed;

  auto run_probe = [&](std::size_t w) -> const SearchResult& {
    auto it = probed.find(w);
    if (it == probed.end()) {
      it = probed.emplace(w, probe(w)).first;
      trace.best_rmse_by_width.emplace_back(w, it->second.encoding.rmse);
      trace.total_samples += it->second.trace.total_samples;
    }
    return it->second;
  };

  std::size_t lo = min_width, hi = max_width;
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    const SearchResult& res = run_probe(mid);
    if (res.encoding.rmse > target_rmse) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  run_probe(hi);
  // The invariant "lo fails" is only established once lo has been probed; at
  // the lower bound give it the chance to win outright.
  if (lo == min_width && !probed.count(lo)) run_probe(lo);

  const SearchResult* best_meeting = nullptr;
  const SearchResult* best_overall = nullptr;
  std::size_t best_meeting_width = 0;
  for (const auto& [w, res] : probed) {
    if (!best_overall || res.encoding.rmse < best_overall->encoding.rmse) {
      best_overall = &res;
    }
    if (res.encoding.rmse <= target_rmse &&
        (!best_meeting || w < best_meeting_width)) {
      best_meeting = &res;
      best_meeting_width = w;
    }
  }
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!best_meeting) {
    SearchTrace failed = trace;
    failed.chosen_width = 0;
    throw target_unreachable_error(
        "no probed width reached target RMSE " + format_double(target_rmse) +
            " (best achieved " + format_double(best_overall->encoding.rmse) + ")",
        best_overall->encoding, std::move(failed));
  }
  SearchResult out = *best_meeting;
  trace.chosen_width = best_meeting_width;
  trace.best_rmse_by_sample = out.trace.best_rmse_by_sample;
  out.trace = std::move(trace);
  return out;
}

inline SearchResult width_binary_search(const TableContext& ctx,
                                        const SearchConfig& cfg) {
  cfg.validate();
  std::size_t lo = cfg.min_width ? cfg.min_width
                                 : default_min_width(ctx.operand_width());
  std::size_t hi = cfg.max_width ? cfg.max_width
                                 : default_max_width(ctx.operand_width());
  return width_binary_search_with(
      lo, hi, cfg.target_rmse,
      [&](std::size_t w) { return sample_search(ctx, w, cfg); });
}

inline SearchResult width_binary_search(const ProductTable& table,
                                        const SearchConfig& cfg) {
  TableContext ctx(table);
  return width_binary_search(ctx, cfg);
}

// Exhaustive zero-error search for small tables: depth-first over subsets of
// the distinct gate columns (duplicates in a circuit never extend the span),
// projecting the value vector against an incrementally orthogonalized basis.
// Returns the first subset whose span contains the value column, padded with
// duplicate gates to exactly `output_width`. Sanity-check scope only.
inline std::optional<Encoding> exhaustive_exact_search(
    const ProductTable& table, std::size_t output_width,
    double residual_tol = 1e-9) {
  std::size_t w = table.operand_width;
  if (w > 3) {
    throw unsupported_size_error(
        "exhaustive search is limited to operand widths <= 3");
  }
  std::size_t rows = table.rows();

  // Distinct columns of the full single-level gate space, first spec wins.
  std::vector<GateSpec> specs;
  std::vector<std::uint64_t> cols;
  std::map<std::uint64_t, std::size_t> seen;
  auto add_spec = [&](GateSpec g) {
    std::uint64_t col = 0;
    for (std::size_t k = 0; k < rows; ++k) {
      auto bits = operand_bits_of(static_cast<unsigned>(k >> w),
                                  static_cast<unsigned>(k & ((1u << w) - 1)), w);
      if (eval_gate(g, bits)) col |= std::uint64_t{1} << k;
    }
    if (seen.emplace(col, specs.size()).second) {
      specs.push_back(std::move(g));
      cols.push_back(col);
    }
  };
  for (std::size_t ki = 0; ki < kNumGateKinds; ++ki) {
    GateKind kind = static_cast<GateKind>(ki);
    std::size_t arity = gate_arity(kind);
    std::size_t combos = 1;
    for (std::size_t i = 0; i < arity; ++i) combos *= 2 * w;
    for (std::size_t c = 0; c < combos; ++c) {
      GateSpec g;
      g.kind = kind;
      std::size_t rem = c;
      for (std::size_t i = 0; i < arity; ++i) {
        g.inputs.push_back(static_cast<std::uint8_t>(rem % (2 * w)));
        rem /= 2 * w;
      }
      add_spec(std::move(g));
    }
  }

  double vnorm = 0.0;
  for (double x : table.values) vnorm += x * x;
  double tol_sq = std::max(residual_tol * residual_tol,
                           vnorm * 1e-24);

  std::vector<std::vector<double>> basis;      // orthonormal, as dense rows
  std::vector<double> residual(table.values.begin(), table.values.end());
  std::vector<std::size_t> chosen;
  std::vector<std::vector<double>> residual_stack;
  std::optional<std::vector<std::size_t>> found;

  auto col_dense = [&](std::size_t idx) {
    std::vector<double> d(rows, 0.0);
    for (std::size_t k = 0; k < rows; ++k) {
      if ((cols[idx] >> k) & 1u) d[k] = 1.0;
    }
    return d;
  };

  std::function<void(std::size_t)> dfs = [&](std::size_t start) {
    if (found) return;
    double res_sq = 0.0;
    for (double x : residual) res_sq += x * x;
    if (res_sq <= tol_sq) {
      found = chosen;
      return;
    }
    if (chosen.size() == output_width) return;
    for (std::size_t i = start; i < cols.size() && !found; ++i) {
      std::vector<double> q = col_dense(i);
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t k = 0; k < rows; ++k) dot += b[k] * q[k];
        for (std::size_t k = 0; k < rows; ++k) q[k] -= dot * b[k];
      }
      double norm_sq = 0.0;
      for (double x : q) norm_sq += x * x;
      if (norm_sq < 1e-18) continue;  // inside the current span
      double inv = 1.0 / std::sqrt(norm_sq);
      for (double& x : q) x *= inv;
      residual_stack.push_back(residual);
      double dot_rv = 0.0;
      for (std::size_t k = 0; k < rows; ++k) dot_rv += q[k] * residual[k];
      for (std::size_t k = 0; k < rows; ++k) residual[k] -= dot_rv * q[k];
      basis.push_back(std::move(q));
      chosen.push_back(i);
      dfs(i + 1);
      chosen.pop_back();
      basis.pop_back();
      residual = std::move(residual_stack.back());
      residual_stack.pop_back();
    }
  };
  dfs(0);
  if (!found) return std::nullopt;

  SampledCircuit circuit;
  circuit.operand_width = w;
  for (std::size_t idx : *found) circuit.gates.push_back(specs[idx]);
  while (circuit.output_width() < output_width) {
    circuit.gates.push_back(specs[(*found)[0]]);
  }
  Encoding enc = make_encoding(circuit, table);
  // Integer weights often make the fit exact; prefer them when they do.
  PositionWeights rounded = enc.weights;
  bool all_near_int = true;
  for (double& x : rounded) {
    double r = std::nearbyint(x);
    if (std::fabs(x - r) > 1e-6) {
      all_near_int = false;
      break;
    }
    x = r;
  }
  if (all_near_int) {
    BitMatrix b = eval_circuit(circuit, table);
    double r_rmse = rmse_of(b, rounded, table.values);
    if (r_rmse <= enc.rmse) {
      enc.weights = std::move(rounded);
      enc.rmse = r_rmse;
    }
  }
  return enc;
}

// One grid point of the target-RMSE calibration.
struct CalibrationPoint {
  double requested_rmse = 0.0;
  double achieved_rmse = std::numeric_limits<double>::quiet_NaN();
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  bool kept = false;
};

struct CalibrationResult {
  double target_rmse = 0.0;
  std::vector<CalibrationPoint> points;
};

struct CalibrationConfig {
  std::size_t probe_width = 0;  // required
  std::size_t max_samples = 500;
  std::uint64_t master_seed = 1;
  double baseline_accuracy = 1.0;
  double max_accuracy_drop = 0.02;
};

// Operationalizes "pick the loosest error level that still keeps accuracy":
// for each grid RMSE, find a representative encoding whose error sits just
// below it, evaluate accuracy through the callback, and return the largest
// grid value whose accuracy drop stays within the configured budget.
template <typename EvalFn>
inline CalibrationResult calibrate_target_rmse(const TableContext& ctx,
                                               EvalFn&& evaluate,
                                               const std::vector<double>& grid,
                                               const CalibrationConfig& ccfg) {
  if (grid.empty()) throw contract_error("calibration grid must not be empty");
  if (ccfg.probe_width < 1) throw contract_error("probe width must be >= 1");

  CalibrationResult result;
  for (double requested : grid) {
    CalibrationPoint point;
    point.requested_rmse = requested;
    double best_below = -1.0;
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < ccfg.max_samples; ++i) {
      SplitMix64 rng(sub_seed(ccfg.master_seed, ccfg.probe_width, i));
      SampledCircuit c = sample_circuit(rng, ctx.operand_width(), ccfg.probe_width);
      detail::SampleScore sc = detail::score_circuit(c, ctx);
      if (sc.rmse <= requested && sc.rmse > best_below) {
        best_below = sc.rmse;
        best_index = i;
      }
    }
    if (best_below >= 0.0) {
      SplitMix64 rng(sub_seed(ccfg.master_seed, ccfg.probe_width, best_index));
      SampledCircuit c = sample_circuit(rng, ctx.operand_width(), ccfg.probe_width);
      Encoding enc = make_encoding(c, ctx.table(), ccfg.master_seed, best_index);
      point.achieved_rmse = enc.rmse;
      point.accuracy = evaluate(enc);
      point.kept =
          (ccfg.baseline_accuracy - point.accuracy) <= ccfg.max_accuracy_drop;
    }
    result.points.push_back(point);
  }
  double target = -1.0;
  for (const CalibrationPoint& p : result.points) {
    if (p.kept && p.requested_rmse > target) target = p.requested_rmse;
  }
  if (target < 0.0) {
    throw calibration_failed_error(
        "no grid RMSE kept the inference accuracy within the allowed drop");
  }
  result.target_rmse = target;
  return result;
}

}  // namespace encmac
