// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "encmac/circuit.hpp"
#include "encmac/rng.hpp"
#include "reference_2bit.hpp"

using namespace encmac;

TEST_CASE("gate semantics") {
  std::vector<std::uint8_t> bits = {1, 1, 1, 0};
  CHECK(eval_gate({GateKind::kSet, {}}, bits) == 1);
  CHECK(eval_gate({GateKind::kIn, {3}}, bits) == 0);
  CHECK(eval_gate({GateKind::kNot, {0}}, bits) == 0);
  CHECK(eval_gate({GateKind::kAnd2, {0, 1}}, bits) == 1);
  CHECK(eval_gate({GateKind::kAnd2, {0, 3}}, bits) == 0);
  CHECK(eval_gate({GateKind::kOr2, {3, 3}}, bits) == 0);
  CHECK(eval_gate({GateKind::kNand2, {0, 1}}, bits) == 0);
  CHECK(eval_gate({GateKind::kNand3, {0, 1, 3}}, bits) == 1);
  CHECK(eval_gate({GateKind::kXor3, {0, 1, 2}}, bits) == 1);
  CHECK(eval_gate({GateKind::kXor3, {0, 1, 3}}, bits) == 0);
}

TEST_CASE("sampling is deterministic in the seed") {
  SplitMix64 a(77), b(77), c(78);
  auto ca = sample_circuit(a, 2, 5);
  auto cb = sample_circuit(b, 2, 5);
  auto cc = sample_circuit(c, 2, 5);
  CHECK(ca == cb);
  CHECK(ca.gates.size() == 5);
  CHECK_FALSE(ca == cc);
}

TEST_CASE("sampled gate kinds are close to uniform") {
  SplitMix64 rng(2024);
  std::size_t set_gates = 0, total = 0;
  for (int i = 0; i < 2000; ++i) {
    auto c = sample_circuit(rng, 2, 5);
    for (const auto& g : c.gates) {
      ++total;
      if (g.kind == GateKind::kSet) ++set_gates;
    }
  }
  double frac = static_cast<double>(set_gates) / static_cast<double>(total);
  CHECK(frac == doctest::Approx(1.0 / 8.0).epsilon(0.16));
}

TEST_CASE("single-level depth: every gate reads at most 3 operand bits") {
  SplitMix64 rng(9);
  for (int i = 0; i < 200; ++i) {
    auto c = sample_circuit(rng, 8, 16);
    for (const auto& g : c.gates) {
      CHECK(g.inputs.size() == gate_arity(g.kind));
      CHECK(g.inputs.size() <= 3);
      for (auto idx : g.inputs) CHECK(idx < 16);
    }
  }
}

TEST_CASE("wire column equals the operand-1 LSB across all rows") {
  auto s = QuantScheme::uniform_signed(2);
  auto table = build_product_table(s, s);
  SampledCircuit c;
  c.operand_width = 2;
  c.gates = {GateSpec{GateKind::kIn, {0}}};
  auto b = eval_circuit(c, table);
  for (std::size_t k = 0; k < 16; ++k) {
    CHECK(b.get(k, 0) == ((table.code1_of(k) & 1u) != 0));
  }
}

TEST_CASE("all-SET circuit rows are all ones") {
  auto s = QuantScheme::uniform_signed(2);
  auto table = build_product_table(s, s);
  SampledCircuit c;
  c.operand_width = 2;
  for (int j = 0; j < 5; ++j) c.gates.push_back({GateKind::kSet, {}});
  auto b = eval_circuit(c, table);
  for (std::size_t k = 0; k < 16; ++k) {
    for (std::size_t j = 0; j < 5; ++j) CHECK(b.get(k, j));
  }
}

TEST_CASE("the reference 5-bit circuit reproduces the frozen bit rows") {
  auto s = QuantScheme::uniform_signed(2);
  auto table = build_product_table(s, s);
  auto circuit = testref::wide_circuit_2bit();
  auto b = eval_circuit(circuit, table);
  for (const auto& row : testref::kRows2Bit) {
    std::size_t k =
        table.row_of(testref::code_of(row.code1), testref::code_of(row.code2));
    auto expect = testref::bits_of(row.wide_bits);
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(b.get(k, j) == (expect[j] != 0));
    }
  }
  auto bits = eval_circuit_row(circuit, testref::code_of("10"),
                               testref::code_of("10"));
  CHECK(bits == testref::bits_of("01111"));
}

TEST_CASE("eval_circuit rejects mismatched widths") {
  auto s = QuantScheme::uniform_signed(3);
  auto table = build_product_table(s, s);
  CHECK_THROWS_AS(eval_circuit(testref::wide_circuit_2bit(), table),
                  contract_error);
}

TEST_CASE("gate counting excludes wires and tie-highs from the total") {
  SampledCircuit wires;
  wires.operand_width = 8;
  for (int j = 0; j < 48; ++j) wires.gates.push_back({GateKind::kIn, {0}});
  CHECK(gate_count(wires).total == 0);
  CHECK(gate_count(wires).per_kind[static_cast<int>(GateKind::kIn)] == 48);

  SampledCircuit nands;
  nands.operand_width = 8;
  for (int j = 0; j < 48; ++j) nands.gates.push_back({GateKind::kNand2, {0, 1}});
  CHECK(gate_count(nands).total == 48);

  auto ref = testref::wide_circuit_2bit();
  CHECK(gate_count(ref).total == 4);  // SET excluded
}

TEST_CASE("row permutation commutes with evaluation") {
  auto s = QuantScheme::uniform_signed(2);
  auto table = build_product_table(s, s);
  SplitMix64 rng(31);
  auto circuit = sample_circuit(rng, 2, 6);
  auto b = eval_circuit(circuit, table);
  // Evaluating any row directly agrees with the row of the matrix.
  std::vector<std::size_t> perm(16);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 16; i > 1; --i) std::swap(perm[i - 1], perm[rng.bounded(i)]);
  for (std::size_t k : perm) {
    auto bits = eval_circuit_row(circuit, table.code1_of(k), table.code2_of(k));
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(b.get(k, j) == (bits[j] != 0));
    }
  }
}

TEST_CASE("gate_function compresses repeated inputs") {
  GateSpec dup{GateKind::kAnd2, {3, 3}};
  auto f = gate_function(dup, 2);
  CHECK(f.support_size == 1);
  CHECK(f.support[0] == 3);
  CHECK(f.table == 0b10);  // AND(x, x) = x

  GateSpec x3{GateKind::kXor3, {1, 1, 0}};
  auto g = gate_function(x3, 2);
  CHECK(g.support_size == 2);
  CHECK(g.table == 0b1010);  // y ^ y ^ x = x, with x on support bit 0
}

TEST_CASE("gate_function truth table matches direct evaluation") {
  SplitMix64 rng(17);
  for (int t = 0; t < 300; ++t) {
    auto c = sample_circuit(rng, 4, 1);
    const GateSpec& g = c.gates[0];
    auto f = gate_function(g, 4);
    std::vector<std::uint8_t> bits(8, 0);
    for (unsigned pattern = 0; pattern < 256; ++pattern) {
      for (std::size_t i = 0; i < 8; ++i) bits[i] = (pattern >> i) & 1u;
      unsigned a = 0;
      for (std::size_t i = 0; i < f.support_size; ++i) {
        a |= ((pattern >> f.support[i]) & 1u) << i;
      }
      CHECK(eval_gate(g, bits) == ((f.table >> a) & 1u));
    }
  }
}

TEST_CASE("circuit json round trip and validation") {
  SplitMix64 rng(3);
  auto c = sample_circuit(rng, 3, 7);
  auto j = circuit_to_json(c);
  auto back = circuit_from_json(j);
  CHECK(back == c);
  CHECK(j["output_width"] == 7);

  auto bad = j;
  bad["gates"][0]["kind"] = "XNOR9";
  CHECK_THROWS_AS(circuit_from_json(bad), contract_error);
  bad = j;
  bad["gates"][0]["inputs"] = {0, 1, 2, 3};
  CHECK_THROWS_AS(circuit_from_json(bad), contract_error);
}
