// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one check per shipped claim, each printed as a single
// PASS/FAIL line with its measured detail. Exits with the failure count.
// Heavy searches share one 8-bit table context and pinned master seeds so
// reruns are bit-identical.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "encmac/encmac.hpp"
#include "reference_2bit.hpp"

namespace fs = std::filesystem;
using namespace encmac;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void run_criterion(int index, const std::string& title,
                   const std::function<Outcome()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream line;
  line << (out.pass ? "[PASS]" : "[FAIL]") << " C" << index << " " << title
       << " — " << out.detail << " (" << std::fixed << std::setprecision(2)
       << dt << " s)";
  std::cout << line.str() << std::endl;
  if (!out.pass) ++g_failures;
}

// Pinned experiment parameters. Changing any of these changes the artifacts.
constexpr std::uint64_t kMasterSeed = 7;        // all 8-bit searches
constexpr std::uint64_t kToySeed = 2026;        // dataset + float training
constexpr std::size_t kSampleBudget = 10000;
constexpr double kFinetuneLr = 3e3;
constexpr std::size_t kFinetuneEpochs = 30;

struct Shared {
  ProductTable table8;
  std::unique_ptr<TableContext> ctx8;
  SearchResult premeasured48;  // forced full 1e4 budget at width 48
  SearchResult width_search;   // binary search with target = premeasured rmse
  bool width_search_ok = false;

  Dataset data;
  ToyFloatNet float_net;
  ToyNetwork net;
};

Shared g;

SearchConfig forced_full_budget() {
  SearchConfig cfg;
  cfg.master_seed = kMasterSeed;
  cfg.max_samples = kSampleBudget;
  cfg.stability_epsilon = 0.0;  // evaluate the full budget
  cfg.jobs = 2;
  return cfg;
}

}  // namespace

int main() {
  std::cout << "encmac acceptance suite\n";

  auto u8 = QuantScheme::uniform_signed(8);
  g.table8 = build_product_table(u8, u8);
  g.ctx8 = std::make_unique<TableContext>(g.table8);

  // ---------------------------------------------------------------- C1
  run_criterion(1, "reference 2-bit table decodes exactly", [] {
    auto scheme = QuantScheme::uniform_signed(2);
    auto table = build_product_table(scheme, scheme);
    std::size_t checked = 0;
    for (const auto& row : testref::kRows2Bit) {
      double wide = decode_value(testref::bits_of(row.wide_bits),
                                 testref::kWideWeights);
      double trad = decode_value(testref::bits_of(row.trad_bits),
                                 testref::kTradWeights);
      double v = table.values[table.row_of(testref::code_of(row.code1),
                                           testref::code_of(row.code2))];
      if (wide != row.value || trad != row.value || v != row.value) {
        return Outcome{false, "row mismatch at (" + std::string(row.code1) +
                                  "," + row.code2 + ")"};
      }
      ++checked;
    }
    return Outcome{true, "16/16 rows, both weight sets, tolerance 0"};
  });

  // ---------------------------------------------------------------- C2
  run_criterion(2, "exact 5-bit encoding exists; sampled search hits 0.25", [] {
    auto scheme = QuantScheme::uniform_signed(2);
    auto table = build_product_table(scheme, scheme);
    auto exact = exhaustive_exact_search(table, 5);
    if (!exact || exact->rmse > 1e-9) {
      return Outcome{false, "exhaustive enumeration found no zero-error encoding"};
    }
    TableContext ctx(table);
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      SearchConfig cfg;
      cfg.master_seed = seed;
      cfg.max_samples = kSampleBudget;
      cfg.stability_epsilon = 0.0;
      auto res = sample_search(ctx, 5, cfg);
      if (res.encoding.rmse <= 0.25) ++hits;
    }
    std::ostringstream d;
    d << "exhaustive rmse " << format_double(exact->rmse) << "; sampled "
      << hits << "/20 seeds reached rmse<=0.25 (need >=19)";
    return Outcome{hits >= 19, d.str()};
  });

  // ---------------------------------------------------------------- C3
  run_criterion(3, "least-squares oracle: planted recovery + orthogonality", [] {
    SplitMix64 rng(33);
    double worst_residual = 0.0;
    for (int t = 0; t < 100; ++t) {
      std::size_t rows = 12 + rng.bounded(52);
      std::size_t cols = 2 + rng.bounded(14);
      BitMatrix b(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) b.set(r, c, rng.bounded(2) == 1);
      }
      std::vector<double> planted(cols);
      for (double& x : planted) x = rng.normal() * 3.0;
      std::vector<double> v(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        ExactSum s;
        for (std::size_t c = 0; c < cols; ++c) {
          if (b.get(r, c)) s.add(planted[c]);
        }
        v[r] = s.result();
      }
      auto s = fit_position_weights(b, v);
      for (std::size_t r = 0; r < rows; ++r) {
        ExactSum acc;
        for (std::size_t c = 0; c < cols; ++c) {
          if (b.get(r, c)) acc.add(s[c]);
        }
        worst_residual = std::max(worst_residual, std::fabs(acc.result() - v[r]));
      }
    }
    double worst_ortho = 0.0;
    for (int t = 0; t < 50; ++t) {
      std::size_t rows = 10 + rng.bounded(40);
      std::size_t cols = 3 + rng.bounded(8);
      BitMatrix b(rows, cols + 2);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) b.set(r, c, rng.bounded(2) == 1);
        b.set(r, cols, b.get(r, 0));  // duplicate column
        b.set(r, cols + 1, true);     // constant column
      }
      std::vector<double> v(rows);
      for (double& x : v) x = rng.normal() * 4.0;
      auto s = fit_position_weights(b, v);
      for (std::size_t c = 0; c < b.cols(); ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
          if (!b.get(r, c)) continue;
          ExactSum row;
          for (std::size_t cc = 0; cc < b.cols(); ++cc) {
            if (b.get(r, cc)) row.add(s[cc]);
          }
          acc += row.result() - v[r];
        }
        worst_ortho = std::max(worst_ortho, std::fabs(acc));
      }
    }
    std::ostringstream d;
    d << "100 planted instances, max residual " << format_double(worst_residual)
      << " (<=1e-9); 50 rank-deficient, max |B^T r| "
      << format_double(worst_ortho) << " (<=1e-6)";
    return Outcome{worst_residual <= 1e-9 && worst_ortho <= 1e-6, d.str()};
  });

  // ---------------------------------------------------------------- C4
  run_criterion(4, "best-RMSE stabilization by 1e4 samples (W=8, M=48)", [] {
    bool ok = true;
    std::ostringstream d;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      SearchConfig small;  // module-default stability stopping
      small.master_seed = seed;
      small.max_samples = 10000;
      small.jobs = 2;
      SearchConfig big = small;
      big.max_samples = 100000;
      auto a = sample_search(*g.ctx8, 48, small);
      auto b = sample_search(*g.ctx8, 48, big);
      double rel = std::fabs(a.encoding.rmse - b.encoding.rmse) /
                   std::max(a.encoding.rmse, 1e-300);
      bool stopped_by_budget = a.trace.total_samples <= 10000;
      // flat over the final 10% of the curve
      const auto& series = a.trace.best_rmse_by_sample;
      std::size_t tail = series.size() / 10;
      double before = series[series.size() - 1 - tail];
      double flat = before > 0.0 ? (before - series.back()) / before : 0.0;
      bool this_ok =
          rel < 0.01 && stopped_by_budget && flat < 0.01;
      ok = ok && this_ok;
      d << "seed " << seed << ": stop@" << a.trace.total_samples << " rmse "
        << format_double(a.encoding.rmse) << " ext-change "
        << format_double(rel * 100.0) << "% tail-drop "
        << format_double(flat * 100.0) << "%; ";
    }
    d << "(budgets 1e4 vs 1e5 under the default stability rule)";
    return Outcome{ok, d.str()};
  });

  // ---------------------------------------------------------------- C5
  run_criterion(5, "width binary search lands in [40,56], first probe 72", [] {
    SearchConfig pm = forced_full_budget();
    g.premeasured48 = sample_search(*g.ctx8, 48, pm);
    SearchConfig ws = pm;
    ws.target_rmse = g.premeasured48.encoding.rmse;
    g.width_search = width_binary_search(*g.ctx8, ws);
    g.width_search_ok = true;
    std::size_t first = g.width_search.trace.best_rmse_by_width.front().first;
    std::size_t chosen = g.width_search.trace.chosen_width;
    std::ostringstream d;
    d << "target " << format_double(ws.target_rmse) << " (rmse@48, 1e4 samples,"
      << " seed " << kMasterSeed << "); first probe " << first << ", chosen "
      << chosen;
    return Outcome{first == 72 && chosen >= 40 && chosen <= 56, d.str()};
  });

  // ---------------------------------------------------------------- C6
  run_criterion(6, "bit-wise accumulation equals per-product sums exactly", [] {
    SplitMix64 rng(606);
    auto s2 = QuantScheme::uniform_signed(2);
    auto s3 = QuantScheme::uniform_signed(3);
    auto t2 = build_product_table(s2, s2);
    auto t3 = build_product_table(s3, s3);
    std::size_t checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      bool use2 = rng.bounded(2) == 0;
      const ProductTable& table = use2 ? t2 : t3;
      std::size_t width = table.operand_width;
      auto enc = make_encoding(sample_circuit(rng, width, 1 + rng.bounded(12)),
                               table);
      std::size_t n = 1 + rng.bounded(16);
      std::vector<unsigned> wts(n), acts(n);
      for (auto& c : wts) c = static_cast<unsigned>(rng.bounded(1u << width));
      for (auto& c : acts) c = static_cast<unsigned>(rng.bounded(1u << width));
      double hw = column_mac(enc, wts, acts);
      ExactSum ref;
      for (std::size_t i = 0; i < n; ++i) {
        auto bits = eval_circuit_row(enc.circuit, acts[i], wts[i]);
        for (std::size_t j = 0; j < bits.size(); ++j) {
          if (bits[j]) ref.add(enc.weights[j]);
        }
      }
      if (hw != ref.result()) {
        return Outcome{false, "mismatch at trial " + std::to_string(trial)};
      }
      ++checked;
    }
    return Outcome{true, std::to_string(checked) + " random instances, tolerance 0"};
  });

  // ---------------------------------------------------------------- C7
  run_criterion(7, "cycle counts match the closed forms", [] {
    auto enc = testref::wide_encoding_2bit();
    SplitMix64 rng(707);
    for (std::size_t n : {1, 2, 4, 8, 16, 32, 64}) {
      ArrayConfig cfg;
      cfg.n = n;
      std::vector<std::vector<unsigned>> w(n, std::vector<unsigned>(n));
      for (auto& row : w) {
        for (auto& c : row) c = static_cast<unsigned>(rng.bounded(4));
      }
      for (std::size_t m : {1, 2, 4, 8}) {
        std::vector<std::vector<std::vector<unsigned>>> inputs(
            m, std::vector<std::vector<unsigned>>(n, std::vector<unsigned>(n)));
        for (auto& mat : inputs) {
          for (auto& row : mat) {
            for (auto& c : row) c = static_cast<unsigned>(rng.bounded(4));
          }
        }
        auto a = simulate_encoded_array(cfg, enc, w, inputs);
        auto b = simulate_traditional_array(cfg, enc.scheme1, enc.scheme2, w,
                                            inputs);
        if (a.first_result_latency_cycles != 2 * n - 1) {
          return Outcome{false, "encoded latency wrong at N=" + std::to_string(n)};
        }
        if (b.first_result_latency_cycles != 3 * n - 2) {
          return Outcome{false, "baseline latency wrong at N=" + std::to_string(n)};
        }
        if (a.total_cycles != (2 * n - 1) + n * (m - 1) ||
            b.total_cycles != (3 * n - 2) + n * (m - 1)) {
          return Outcome{false, "total cycles wrong at N=" + std::to_string(n) +
                                    " m=" + std::to_string(m)};
        }
        double thr = static_cast<double>(m) / static_cast<double>(a.total_cycles);
        if (a.throughput != thr) {
          return Outcome{false, "throughput formula mismatch"};
        }
      }
    }
    return Outcome{true, "N in {1..64}, m in {1,2,4,8}, tolerance 0"};
  });

  // ---------------------------------------------------------------- C8
  run_criterion(8, "gate-count proxy: searched 48-bit encoding vs 417 gates", [] {
    if (g.premeasured48.encoding.circuit.gates.empty()) {
      return Outcome{false, "no searched encoding available"};
    }
    std::size_t total = gate_count(g.premeasured48.encoding.circuit).total;
    double reduction =
        1.0 - static_cast<double>(total) / static_cast<double>(417);
    std::ostringstream d;
    d << "searched M=48 encoding uses " << total
      << " gates vs 417 baseline (reduction "
      << format_double(reduction * 100.0) << "%, need >88%)";
    return Outcome{total <= 48 && reduction > 0.88, d.str()};
  });

  // ---------------------------------------------------------------- C9
  run_criterion(9, "toy-network property suite", [] {
    auto u8s = QuantScheme::uniform_signed(8);

    // (a) zero-error encoding inference is bit-identical to the exact path
    auto data2 = make_blobs(24, 8, 2, 99);
    auto fnet2 = train_float_net({8, 10, 2}, data2, 25, 0.05, 99);
    auto u2 = QuantScheme::uniform_signed(2);
    auto net2 = quantize_network(fnet2, u2, u2, data2);
    auto wide = testref::wide_encoding_2bit();
    auto exact2 = infer(net2, exact_product_lut(u2, u2), data2.features);
    auto enc2 = infer(net2, wide, data2.features);
    for (std::size_t i = 0; i < exact2.size(); ++i) {
      for (std::size_t c = 0; c < exact2[i].size(); ++c) {
        if (exact2[i][c] != enc2[i][c]) {
          return Outcome{false, "zero-error inference diverged from exact"};
        }
      }
    }

    // decoded-value lookup is exhaustively bit-exact to encoded_multiply
    const Encoding& searched = g.premeasured48.encoding;
    if (searched.circuit.gates.empty()) {
      return Outcome{false, "no searched encoding available"};
    }
    auto lut = encoded_product_lut(searched);
    for (unsigned c1 = 0; c1 < 256; ++c1) {
      for (unsigned c2 = 0; c2 < 256; ++c2) {
        if (lut.at(c1, c2) != encoded_multiply(searched, c1, c2).value) {
          return Outcome{false, "lookup mismatch vs encoded_multiply"};
        }
      }
    }

    // (b,c) searched encoding on the toy MLP: fine-tuning closes the gap
    g.data = make_blobs(64, 16, 3, kToySeed, 0.45);
    g.float_net = train_float_net({16, 16, 3}, g.data, 40, 0.05, kToySeed);
    g.net = quantize_network(g.float_net, u8s, u8s, g.data);
    double acc_exact = dataset_accuracy(g.net, exact_product_lut(u8s, u8s), g.data);
    double acc_pre = dataset_accuracy(g.net, lut, g.data);
    FinetuneConfig fcfg;
    fcfg.lr = kFinetuneLr;
    fcfg.epochs = kFinetuneEpochs;
    fcfg.batch_size = 32;
    fcfg.seed = 1;
    auto tuned = finetune_position_weights(g.net, searched, g.data, fcfg);
    bool never_worse = tuned.post_accuracy >= tuned.pre_accuracy;
    double gap = (acc_exact - tuned.post_accuracy) * 100.0;

    // (d) gradient check on a single encoded layer
    auto data1 = make_blobs(12, 6, 2, 31);
    auto fnet1 = train_float_net({6, 2}, data1, 20, 0.05, 31);
    auto u3 = QuantScheme::uniform_signed(3);
    auto net1 = quantize_network(fnet1, u3, u3, data1);
    auto table3 = build_product_table(u3, u3);
    SplitMix64 rng(9);
    auto enc1 = make_encoding(sample_circuit(rng, 3, 8), table3);
    auto bits_table = eval_circuit(enc1.circuit, table3);
    auto loss_at = [&](const PositionWeights& s) {
      Encoding e = enc1;
      e.weights = s;
      auto scores = infer(net1, encoded_product_lut(e), data1.features);
      double total = 0.0;
      for (std::size_t i = 0; i < data1.size(); ++i) {
        std::vector<double> gr;
        double li;
        detail::softmax_ce_grad(scores[i], data1.labels[i], gr, li);
        total += li;
      }
      return total / static_cast<double>(data1.size());
    };
    // analytic gradient via per-bit counts
    std::vector<double> analytic(enc1.weights.size(), 0.0);
    {
      const auto& layer = net1.layers[0];
      auto lut1 = encoded_product_lut(enc1);
      double out_scale = net1.act_scales[0] * layer.weight_scale;
      for (std::size_t i = 0; i < data1.size(); ++i) {
        std::vector<unsigned> codes(layer.in);
        for (std::size_t k = 0; k < layer.in; ++k) {
          codes[k] = encode_operand(net1.activation_scheme,
                                    data1.features[i][k] / net1.act_scales[0]);
        }
        std::vector<double> scores(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
          ExactSum mac;
          for (std::size_t k = 0; k < layer.in; ++k) {
            mac.add(lut1.at(codes[k], layer.weight_codes[o * layer.in + k]));
          }
          scores[o] = mac.result() * out_scale + layer.bias[o];
        }
        std::vector<double> gr;
        double li;
        detail::softmax_ce_grad(scores, data1.labels[i], gr, li);
        for (std::size_t o = 0; o < layer.out; ++o) {
          double dz = gr[o] / static_cast<double>(data1.size()) * out_scale;
          for (std::size_t k = 0; k < layer.in; ++k) {
            std::size_t row =
                table3.row_of(codes[k], layer.weight_codes[o * layer.in + k]);
            for (std::size_t j = 0; j < enc1.weights.size(); ++j) {
              if (bits_table.get(row, j)) analytic[j] += dz;
            }
          }
        }
      }
    }
    double worst_rel = 0.0;
    for (std::size_t j = 0; j < enc1.weights.size(); ++j) {
      double h = 1e-4 * std::max(1.0, std::fabs(enc1.weights[j]));
      PositionWeights plus = enc1.weights, minus = enc1.weights;
      plus[j] += h;
      minus[j] -= h;
      double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
      if (std::fabs(fd) > 1e-10) {
        worst_rel = std::max(worst_rel, std::fabs(analytic[j] - fd) / std::fabs(fd));
      } else if (std::fabs(analytic[j]) > 1e-8) {
        worst_rel = 1.0;
      }
    }

    std::ostringstream d;
    d << "exact-encoding parity OK; lut==multiply on 65536 pairs; toy acc exact "
      << format_double(acc_exact) << ", encoded pre "
      << format_double(acc_pre) << ", post-finetune "
      << format_double(tuned.post_accuracy) << " (gap "
      << format_double(gap) << " pts, need <=2); grad check max rel err "
      << format_double(worst_rel) << " (<=1e-4)";
    return Outcome{gap <= 2.0 && never_worse && worst_rel <= 1e-4, d.str()};
  });

  // ---------------------------------------------------------------- C10
  run_criterion(10, "4-bit codebook needs a narrower product than uniform 8-bit", [] {
    if (!g.width_search_ok || g.float_net.layers.empty()) {
      return Outcome{false, "prerequisite searches unavailable"};
    }
    double alpha = g.premeasured48.encoding.rmse / value_rms(g.table8);
    NonuniformPipelineConfig cfg;
    cfg.width = 4;
    cfg.search = forced_full_budget();
    cfg.target_rmse_rel = alpha;  // same relative target policy as uniform
    auto report = nonuniform_pipeline(g.float_net, g.data, cfg);
    std::size_t uniform_width = g.width_search.trace.chosen_width;
    std::ostringstream d;
    d << "codebook (k-means on toy weights) chose width " << report.chosen_width
      << " vs uniform " << uniform_width << " at the same relative target "
      << format_double(alpha) << "; toy accuracy exact "
      << format_double(report.accuracy_exact) << " encoded "
      << format_double(report.accuracy_encoded);
    return Outcome{report.chosen_width < uniform_width, d.str()};
  });

  // ---------------------------------------------------------------- C11
  run_criterion(11, "cmd_search rerun is byte-identical", [] {
    fs::path base = fs::temp_directory_path() / "encmac_acceptance_c11";
    fs::remove_all(base);
    fs::create_directories(base / "a");
    fs::create_directories(base / "b");
    std::string common =
        std::string(ENCMAC_CLI_PATH) +
        " search --kind uniform-signed --operand-width 8 --width 48"
        " --samples 400 --stability-eps 0 --seed 7 --jobs 2 --out ";
    int ra = std::system((common + (base / "a").string() + " > /dev/null 2>&1").c_str());
    int rb = std::system((common + (base / "b").string() + " > /dev/null 2>&1").c_str());
    if (WEXITSTATUS(ra) != 0 || WEXITSTATUS(rb) != 0) {
      return Outcome{false, "cli run failed"};
    }
    std::string ea = read_file(base / "a" / "encoding.json");
    std::string eb = read_file(base / "b" / "encoding.json");
    bool same = ea == eb &&
                read_file(base / "a" / "rmse_vs_samples.csv") ==
                    read_file(base / "b" / "rmse_vs_samples.csv");
    fs::remove_all(base);
    return Outcome{same, same ? "encoding.json and traces byte-identical"
                              : "artifacts differ between reruns"};
  });

  std::cout << (g_failures == 0
                    ? "all acceptance criteria passed"
                    : std::to_string(g_failures) + " criterion(s) failed")
            << std::endl;
  return g_failures;
}
