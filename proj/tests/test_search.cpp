// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <map>

#include "encmac/search.hpp"
#include "reference_2bit.hpp"

using namespace encmac;

namespace {

ProductTable table_w2() {
  auto s = QuantScheme::uniform_signed(2);
  return build_product_table(s, s);
}

}  // namespace

TEST_CASE("fast scorer agrees with the materialized normal equations") {
  for (std::size_t width : {2u, 3u}) {
    auto s = QuantScheme::uniform_signed(width);
    auto table = build_product_table(s, s);
    TableContext ctx(table);
    SplitMix64 rng(41 + width);
    for (int t = 0; t < 60; ++t) {
      auto circuit = sample_circuit(rng, width, 1 + rng.bounded(10));
      auto b = eval_circuit(circuit, table);
      auto eq = normal_equations_from(b, table.values);

      std::size_t m = circuit.output_width();
      std::vector<detail::PreparedGate> prep(m);
      for (std::size_t j = 0; j < m; ++j) {
        prep[j] = detail::prepare_gate(circuit.gates[j], ctx);
      }
      for (std::size_t j = 0; j < m; ++j) {
        CHECK(prep[j].rhs == doctest::Approx(eq.rhs[j]).epsilon(1e-12));
        for (std::size_t l = j; l < m; ++l) {
          double g = detail::gram_entry(prep[j], prep[l], width);
          CHECK(g == eq.gram[j * m + l]);  // both are exact row counts
        }
      }
      PositionWeights w;
      auto score = detail::score_circuit(circuit, ctx, &w);
      double direct = rmse_of(b, fit_position_weights(b, table.values), table.values);
      CHECK(score.rmse == doctest::Approx(direct).epsilon(1e-6));
    }
  }
}

TEST_CASE("scorer handles mixed-scheme tables") {
  auto act = QuantScheme::uniform_signed(3);
  auto wsch = QuantScheme::nonuniform(
      3, {-2.5, -1.0, -0.25, 0.0, 0.125, 0.75, 1.5, 3.0});
  auto table = build_product_table(act, wsch);
  TableContext ctx(table);
  SplitMix64 rng(5);
  for (int t = 0; t < 40; ++t) {
    auto circuit = sample_circuit(rng, 3, 1 + rng.bounded(8));
    auto b = eval_circuit(circuit, table);
    auto eq = normal_equations_from(b, table.values);
    std::size_t m = circuit.output_width();
    for (std::size_t j = 0; j < m; ++j) {
      auto p = detail::prepare_gate(circuit.gates[j], ctx);
      CHECK(p.rhs == doctest::Approx(eq.rhs[j]).epsilon(1e-10));
    }
  }
}

TEST_CASE("max_samples=1 returns that sample with a length-1 trace") {
  auto table = table_w2();
  SearchConfig cfg;
  cfg.max_samples = 1;
  auto res = sample_search(table, 5, cfg);
  CHECK(res.trace.best_rmse_by_sample.size() == 1);
  CHECK(res.trace.total_samples == 1);
  CHECK(res.encoding.sample_index == 0);
  CHECK(res.encoding.output_width() == 5);
}

TEST_CASE("best-so-far series is non-increasing") {
  auto table = table_w2();
  SearchConfig cfg;
  cfg.max_samples = 3000;
  cfg.stability_epsilon = 0.0;
  cfg.master_seed = 3;
  auto res = sample_search(table, 5, cfg);
  const auto& series = res.trace.best_rmse_by_sample;
  REQUIRE(series.size() == 3000);
  for (std::size_t i = 1; i < series.size(); ++i) {
    CHECK(series[i] <= series[i - 1]);
  }
}

TEST_CASE("same seed and config give bit-identical results") {
  auto table = table_w2();
  SearchConfig cfg;
  cfg.max_samples = 2000;
  cfg.master_seed = 99;
  auto a = sample_search(table, 6, cfg);
  auto b = sample_search(table, 6, cfg);
  CHECK(encoding_to_json(a.encoding).dump() == encoding_to_json(b.encoding).dump());
  CHECK(a.trace.best_rmse_by_sample == b.trace.best_rmse_by_sample);
  CHECK(a.trace.total_samples == b.trace.total_samples);
}

TEST_CASE("worker count does not change the outcome") {
  auto table = table_w2();
  SearchConfig cfg;
  cfg.max_samples = 1500;
  cfg.master_seed = 123;
  cfg.stability_epsilon = 0.0;
  SearchConfig cfg2 = cfg;
  cfg2.jobs = 2;
  auto a = sample_search(table, 5, cfg);
  auto b = sample_search(table, 5, cfg2);
  CHECK(encoding_to_json(a.encoding).dump() == encoding_to_json(b.encoding).dump());
  CHECK(a.trace.best_rmse_by_sample == b.trace.best_rmse_by_sample);
}

TEST_CASE("stability stopping triggers once the window goes flat") {
  auto table = table_w2();
  SearchConfig cfg;
  cfg.max_samples = 10000;
  cfg.stability_window = 200;
  cfg.stability_epsilon = 0.5;  // very demanding improvement rate
  cfg.master_seed = 17;
  auto res = sample_search(table, 5, cfg);
  CHECK(res.trace.total_samples < 10000);
  CHECK(res.trace.total_samples >= 201);
  // epsilon 0 disables the stop entirely
  cfg.stability_epsilon = 0.0;
  auto full = sample_search(table, 5, cfg);
  CHECK(full.trace.total_samples == 10000);
}

TEST_CASE("sample_search at W=2 M=5 reaches a small rmse") {
  auto table = table_w2();
  SearchConfig cfg;
  cfg.max_samples = 10000;
  cfg.stability_epsilon = 0.0;
  cfg.master_seed = 1;
  auto res = sample_search(table, 5, cfg);
  CHECK(res.encoding.rmse <= 0.25);  // seed 1 finds an exact encoding
}

TEST_CASE("exhaustive search finds a zero-error 5-bit encoding") {
  auto table = table_w2();
  auto enc = exhaustive_exact_search(table, 5);
  REQUIRE(enc.has_value());
  CHECK(enc->rmse <= 1e-9);
  CHECK(enc->output_width() == 5);
  auto b = eval_circuit(enc->circuit, table);
  CHECK(rmse_of(b, enc->weights, table.values) <= 1e-9);
}

TEST_CASE("binary search contract on a monotone mock") {
  // Target met exactly when the width reaches 48.
  std::size_t probes = 0;
  std::vector<std::size_t> widths;
  auto probe = [&](std::size_t w) {
    ++probes;
    widths.push_back(w);
    SearchResult r;
    r.encoding.rmse = w >= 48 ? 0.5 : 2.0;
    r.trace.total_samples = 1;
    return r;
  };
  auto res = width_binary_search_with(16, 128, 1.0, probe);
  CHECK(res.trace.chosen_width == 48);
  CHECK(widths.front() == 72);
  CHECK(probes <= 7);  // ceil(log2(112))
  for (auto& [w, r] : res.trace.best_rmse_by_width) {
    CHECK((r == 0.5 || r == 2.0));
  }
}

TEST_CASE("binary search probes the lower bound when everything passes") {
  auto probe = [&](std::size_t w) {
    SearchResult r;
    r.encoding.rmse = 0.0;  // every width is exact
    (void)w;
    return r;
  };
  auto res = width_binary_search_with(16, 128, 1.0, probe);
  CHECK(res.trace.chosen_width == 16);
}

TEST_CASE("unreachable target carries the best encoding out") {
  auto probe = [&](std::size_t w) {
    SearchResult r;
    r.encoding.rmse = 10.0 - static_cast<double>(w) * 0.01;
    return r;
  };
  try {
    width_binary_search_with(16, 128, 1.0, probe);
    FAIL("expected target_unreachable_error");
  } catch (const target_unreachable_error& e) {
    CHECK(e.best_encoding.rmse == doctest::Approx(10.0 - 1.28));
    CHECK_FALSE(e.trace.best_rmse_by_width.empty());
  }
}

TEST_CASE("degenerate all-zero codebook collapses to the minimum width") {
  auto zeros = QuantScheme::nonuniform(2, {0, 0, 0, 0});
  auto table = build_product_table(zeros, zeros);
  SearchConfig cfg;
  cfg.max_samples = 50;
  cfg.target_rmse = 1e-6;
  cfg.min_width = 8;
  cfg.max_width = 64;
  auto res = width_binary_search(table, cfg);
  CHECK(res.trace.chosen_width == 8);
  CHECK(res.encoding.rmse == 0.0);
}

TEST_CASE("width search on the 2-bit table meets a modest target") {
  auto table = table_w2();
  SearchConfig cfg;
  cfg.max_samples = 2000;
  cfg.master_seed = 5;
  cfg.target_rmse = 0.5;
  auto res = width_binary_search(table, cfg);
  // Default bounds for W=2 are (8, 64); first probe is the midpoint.
  CHECK(res.trace.best_rmse_by_width.front().first == 36);
  CHECK(res.encoding.rmse <= 0.5);
  CHECK(res.trace.chosen_width >= 8);
  CHECK(res.trace.chosen_width <= 64);
}

TEST_CASE("calibration returns the loosest grid value that keeps accuracy") {
  auto table = table_w2();
  TableContext ctx(table);
  CalibrationConfig ccfg;
  ccfg.probe_width = 5;
  ccfg.max_samples = 60;
  ccfg.baseline_accuracy = 0.9;
  ccfg.max_accuracy_drop = 0.05;

  SUBCASE("every grid point keeps accuracy") {
    auto res = calibrate_target_rmse(
        ctx, [](const Encoding&) { return 0.9; }, {0.5, 2.0, 1.0}, ccfg);
    CHECK(res.target_rmse == 2.0);
    CHECK(res.points.size() == 3);
  }
  SUBCASE("no grid point keeps accuracy") {
    CHECK_THROWS_AS(calibrate_target_rmse(
                        ctx, [](const Encoding&) { return 0.1; }, {0.5, 2.0},
                        ccfg),
                    calibration_failed_error);
  }
  SUBCASE("empty grid is a contract error") {
    CHECK_THROWS_AS(calibrate_target_rmse(
                        ctx, [](const Encoding&) { return 0.9; }, {}, ccfg),
                    contract_error);
  }
  SUBCASE("accuracy threshold selects among achievable error levels") {
    auto res = calibrate_target_rmse(
        ctx,
        [](const Encoding& e) { return e.rmse <= 1.0 ? 0.9 : 0.5; },
        {0.7, 2.5}, ccfg);
    CHECK(res.target_rmse == 0.7);
    for (const auto& p : res.points) {
      if (p.kept) CHECK(p.achieved_rmse <= p.requested_rmse);
    }
  }
}

TEST_CASE("config validation") {
  SearchConfig cfg;
  cfg.max_samples = 0;
  CHECK_THROWS_AS(cfg.validate(), contract_error);
  cfg = {};
  cfg.min_width = 10;
  cfg.max_width = 5;
  CHECK_THROWS_AS(cfg.validate(), contract_error);
  cfg = {};
  cfg.stability_epsilon = -0.1;
  CHECK_THROWS_AS(cfg.validate(), contract_error);
}
