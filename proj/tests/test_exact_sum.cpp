// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <vector>

#include "encmac/exact_sum.hpp"
#include "encmac/rng.hpp"

using namespace encmac;

TEST_CASE("cancellation that defeats naive summation") {
  ExactSum s;
  s.add(1e16);
  s.add(1.0);
  s.add(-1e16);
  CHECK(s.result() == 1.0);
}

TEST_CASE("result is independent of insertion order") {
  SplitMix64 rng(123);
  std::vector<double> terms;
  for (int i = 0; i < 200; ++i) {
    terms.push_back((rng.uniform01() - 0.5) * std::pow(10.0, rng.bounded(12)));
  }
  ExactSum fwd, rev, shuf;
  for (double t : terms) fwd.add(t);
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) rev.add(*it);
  std::vector<double> mixed = terms;
  for (std::size_t i = mixed.size(); i > 1; --i) {
    std::swap(mixed[i - 1], mixed[rng.bounded(i)]);
  }
  for (double t : mixed) shuf.add(t);
  CHECK(fwd.result() == rev.result());
  CHECK(fwd.result() == shuf.result());
}

TEST_CASE("add_product keeps the low half of the product") {
  ExactSum s;
  double a = 1.0 + 0x1.0p-30;
  s.add_product(a, a);      // (1 + 2^-30)^2 = 1 + 2^-29 + 2^-60
  s.add(-1.0);
  s.add(-0x1.0p-29);
  CHECK(s.result() == 0x1.0p-60);
}

TEST_CASE("reset clears state") {
  ExactSum s;
  s.add(42.0);
  s.reset();
  CHECK(s.result() == 0.0);
  s.add(1.5);
  CHECK(s.result() == 1.5);
}
