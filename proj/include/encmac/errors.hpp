// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace encmac {

// Precondition or dimension violations between cooperating components.
class contract_error : public std::invalid_argument {
 public:
  explicit contract_error(const std::string& what)
      : std::invalid_argument(what) {}
};

// Requested operand width (or table size) beyond the supported range.
class unsupported_size_error : public std::invalid_argument {
 public:
  explicit unsupported_size_error(const std::string& what)
      : std::invalid_argument(what) {}
};

class calibration_failed_error : public std::runtime_error {
 public:
  explicit calibration_failed_error(const std::string& what)
      : std::runtime_error(what) {}
};

class training_diverged_error : public std::runtime_error {
 public:
  explicit training_diverged_error(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace encmac
