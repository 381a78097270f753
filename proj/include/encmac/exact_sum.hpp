// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace encmac {

// Correctly rounded floating-point accumulation (Shewchuk partials, the same
// scheme as Python's math.fsum). The result is the double nearest the exact
// real sum of everything added, independent of insertion order. All MAC-style
// reductions in this library go through ExactSum: that is what makes the
// bit-wise accumulated column route and the per-product route agree to the
// last bit instead of merely to a tolerance.
class ExactSum {
 public:
  ExactSum() { partials_.reserve(8); }

  void add(double x) {
    std::size_t used = 0;
    for (std::size_t i = 0; i < partials_.size(); ++i) {
      double y = partials_[i];
      if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
      double hi = x + y;
      double lo = y - (hi - x);
      if (lo != 0.0) partials_[used++] = lo;
      x = hi;
    }
    partials_.resize(used);
    partials_.push_back(x);
  }

  // Adds the exact product a*b by splitting it into a rounded product plus
  // its FMA-computed error term.
  void add_product(double a, double b) {
    double p = a * b;
    double e = std::fma(a, b, -p);
    add(p);
    if (e != 0.0) add(e);
  }

  // Correctly rounded total. Mirrors CPython's fsum final loop including the
  // half-ulp correction against the next-lower partial.
  double result() const {
    if (partials_.empty()) return 0.0;
    std::size_t n = partials_.size();
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      double x = hi;
      double y = partials_[--n];
      hi = x + y;
      double yr = hi - x;
      lo = y - yr;
      if (lo != 0.0) break;
    }
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) ||
                  (lo > 0.0 && partials_[n - 1] > 0.0))) {
      double y = lo * 2.0;
      double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

  void reset() { partials_.clear(); }

 private:
  std::vector<double> partials_;  // non-overlapping, increasing magnitude
};

}  // namespace encmac
