// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "encmac/array_sim.hpp"
#include "encmac/circuit.hpp"
#include "encmac/errors.hpp"
#include "encmac/exact_sum.hpp"
#include "encmac/fit.hpp"
#include "encmac/io.hpp"
#include "encmac/quant.hpp"
#include "encmac/rng.hpp"
#include "encmac/search.hpp"
#include "encmac/train.hpp"
