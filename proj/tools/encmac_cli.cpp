// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
//
// encmac: design-space exploration for encoding-based approximate MAC arrays.
// Subcommands: table, search, simulate, finetune, eval, sweep. Every run is
// deterministic given --seed; artifacts are written atomically under --out.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "encmac/encmac.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes shared with the test suite.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitTargetUnreachable = 3;
constexpr int kExitTrainingDiverged = 4;

// Everything a run can configure, mirroring the subcommand flags. Config
// files carry the same keys; flags given on the command line win.
struct ExperimentConfig {
  std::string scheme_kind = "uniform-signed";
  std::size_t operand_width = 8;
  std::vector<double> codebook;  // operand-2 levels when nonuniform

  std::uint64_t seed = 1;
  std::size_t samples = 10000;
  std::size_t width = 0;  // fixed output width; 0 = binary width search
  std::size_t min_width = 0;
  std::size_t max_width = 0;
  double target_rmse = 0.0;
  double target_rmse_rel = 0.35;
  std::size_t stability_window = 1000;
  double stability_epsilon = 0.005;
  unsigned jobs = 1;

  std::size_t array_size = 16;
  std::size_t matrices = 1;
  double clock_period = 1.0;
  std::size_t accumulator_width = 0;
  bool write_outputs = false;

  std::size_t epochs = 20;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t hidden = 16;
  std::size_t features = 16;
  std::size_t classes = 2;
  std::size_t per_class = 64;

  std::string sweep_mode = "width";
  std::vector<std::size_t> widths = {16, 24, 32, 40, 48, 64, 96, 128};

  std::string out_dir = ".";
  std::string encoding_path;
  std::string dataset_path;
  std::string scheme_path;
};

json config_to_json(const ExperimentConfig& c) {
  return json{{"scheme_kind", c.scheme_kind},
              {"operand_width", c.operand_width},
              {"codebook", c.codebook},
              {"seed", c.seed},
              {"samples", c.samples},
              {"width", c.width},
              {"min_width", c.min_width},
              {"max_width", c.max_width},
              {"target_rmse", c.target_rmse},
              {"target_rmse_rel", c.target_rmse_rel},
              {"stability_window", c.stability_window},
              {"stability_epsilon", c.stability_epsilon},
              {"jobs", c.jobs},
              {"array_size", c.array_size},
              {"matrices", c.matrices},
              {"clock_period", c.clock_period},
              {"accumulator_width", c.accumulator_width},
              {"write_outputs", c.write_outputs},
              {"epochs", c.epochs},
              {"lr", c.lr},
              {"batch_size", c.batch_size},
              {"hidden", c.hidden},
              {"features", c.features},
              {"classes", c.classes},
              {"per_class", c.per_class},
              {"sweep_mode", c.sweep_mode},
              {"widths", c.widths},
              {"out_dir", c.out_dir},
              {"encoding_path", c.encoding_path},
              {"dataset_path", c.dataset_path},
              {"scheme_path", c.scheme_path}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("scheme_kind", c.scheme_kind);
  get("operand_width", c.operand_width);
  get("codebook", c.codebook);
  get("seed", c.seed);
  get("samples", c.samples);
  get("width", c.width);
  get("min_width", c.min_width);
  get("max_width", c.max_width);
  get("target_rmse", c.target_rmse);
  get("target_rmse_rel", c.target_rmse_rel);
  get("stability_window", c.stability_window);
  get("stability_epsilon", c.stability_epsilon);
  get("jobs", c.jobs);
  get("array_size", c.array_size);
  get("matrices", c.matrices);
  get("clock_period", c.clock_period);
  get("accumulator_width", c.accumulator_width);
  get("write_outputs", c.write_outputs);
  get("epochs", c.epochs);
  get("lr", c.lr);
  get("batch_size", c.batch_size);
  get("hidden", c.hidden);
  get("features", c.features);
  get("classes", c.classes);
  get("per_class", c.per_class);
  get("sweep_mode", c.sweep_mode);
  get("widths", c.widths);
  get("out_dir", c.out_dir);
  get("encoding_path", c.encoding_path);
  get("dataset_path", c.dataset_path);
  get("scheme_path", c.scheme_path);
  return c;
}

// Operand schemes for the experiment: activations are always uniform-signed;
// weights follow the configured kind.
struct SchemePair {
  encmac::QuantScheme operand1;
  encmac::QuantScheme operand2;
};

SchemePair schemes_from_config(const ExperimentConfig& cfg) {
  using namespace encmac;
  if (!cfg.scheme_path.empty()) {
    json j = json::parse(read_file(cfg.scheme_path));
    if (j.contains("operand1")) {
      return {scheme_from_json(j.at("operand1")),
              scheme_from_json(j.at("operand2"))};
    }
    QuantScheme s = scheme_from_json(j);
    return {s.kind == SchemeKind::kUniformSigned
                ? s
                : QuantScheme::uniform_signed(s.width),
            s};
  }
  if (cfg.scheme_kind == "uniform-signed") {
    auto s = QuantScheme::uniform_signed(cfg.operand_width);
    return {s, s};
  }
  if (cfg.scheme_kind == "nonuniform-codebook") {
    auto w = QuantScheme::nonuniform(cfg.operand_width, cfg.codebook);
    return {QuantScheme::uniform_signed(cfg.operand_width), w};
  }
  throw encmac::contract_error("unknown scheme kind: " + cfg.scheme_kind);
}

encmac::SearchConfig search_config_of(const ExperimentConfig& cfg) {
  encmac::SearchConfig s;
  s.max_samples = cfg.samples;
  s.stability_window = cfg.stability_window;
  s.stability_epsilon = cfg.stability_epsilon;
  s.min_width = cfg.min_width;
  s.max_width = cfg.max_width;
  s.target_rmse = cfg.target_rmse;
  s.master_seed = cfg.seed;
  s.jobs = cfg.jobs;
  return s;
}

std::string samples_trace_csv(const encmac::SearchTrace& trace) {
  std::string csv = "sample_index,best_rmse\n";
  for (std::size_t i = 0; i < trace.best_rmse_by_sample.size(); ++i) {
    csv += std::to_string(i) + "," +
           encmac::format_double(trace.best_rmse_by_sample[i]) + "\n";
  }
  return csv;
}

std::string width_trace_csv(const encmac::SearchTrace& trace) {
  std::string csv = "width,best_rmse\n";
  for (const auto& [w, r] : trace.best_rmse_by_width) {
    csv += std::to_string(w) + "," + encmac::format_double(r) + "\n";
  }
  return csv;
}

std::vector<std::vector<unsigned>> random_code_matrix(encmac::SplitMix64& rng,
                                                      std::size_t n,
                                                      std::size_t levels) {
  std::vector<std::vector<unsigned>> m(n, std::vector<unsigned>(n));
  for (auto& row : m) {
    for (auto& c : row) c = static_cast<unsigned>(rng.bounded(levels));
  }
  return m;
}

std::string matrix_csv(const std::vector<std::vector<double>>& mats,
                       std::size_t n) {
  std::string csv;
  for (std::size_t q = 0; q < mats.size(); ++q) {
    csv += "# matrix " + std::to_string(q) + "\n";
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        csv += encmac::format_double(mats[q][r * n + c]);
        csv += c + 1 == n ? '\n' : ',';
      }
    }
  }
  return csv;
}

// Toy-pipeline pieces shared by finetune/eval/sweep-accuracy.
struct ToyPipeline {
  encmac::Dataset data;
  encmac::ToyFloatNet float_net;
  encmac::ToyNetwork net;
};

ToyPipeline build_toy_pipeline(const ExperimentConfig& cfg,
                               const SchemePair& schemes) {
  using namespace encmac;
  ToyPipeline p;
  if (!cfg.dataset_path.empty()) {
    p.data = dataset_from_csv(read_file(cfg.dataset_path));
  } else {
    p.data = make_blobs(cfg.per_class, cfg.features, cfg.classes, cfg.seed);
  }
  std::vector<std::size_t> dims = {p.data.feature_dim, cfg.hidden,
                                   p.data.num_classes};
  p.float_net = train_float_net(dims, p.data, 30, 0.05, cfg.seed);
  p.net = quantize_network(p.float_net, schemes.operand1, schemes.operand2,
                           p.data);
  return p;
}

int cmd_table(const ExperimentConfig& cfg) {
  using namespace encmac;
  SchemePair schemes = schemes_from_config(cfg);
  ProductTable table = build_product_table(schemes.operand1, schemes.operand2);
  fs::path out = fs::path(cfg.out_dir) / "truth_table.csv";
  atomic_write_file(out, table_to_csv(table));
  std::cout << "wrote " << out.string() << " (" << table.rows() << " rows)\n";
  return kExitOk;
}

void write_search_artifacts(const ExperimentConfig& cfg,
                            const encmac::Encoding& encoding,
                            const encmac::SearchTrace& trace) {
  using namespace encmac;
  fs::path dir(cfg.out_dir);
  atomic_write_file(dir / "encoding.json", encoding_to_json(encoding).dump(2) + "\n");
  atomic_write_file(dir / "rmse_vs_samples.csv", samples_trace_csv(trace));
  atomic_write_file(dir / "rmse_vs_width.csv", width_trace_csv(trace));
}

int cmd_search(const ExperimentConfig& cfg) {
  using namespace encmac;
  SchemePair schemes = schemes_from_config(cfg);
  ProductTable table = build_product_table(schemes.operand1, schemes.operand2);
  TableContext ctx(table);
  SearchConfig search = search_config_of(cfg);

  if (cfg.width > 0) {
    SearchResult res = sample_search(ctx, cfg.width, search);
    if (res.trace.best_rmse_by_width.empty()) {
      res.trace.best_rmse_by_width.emplace_back(cfg.width, res.encoding.rmse);
    }
    write_search_artifacts(cfg, res.encoding, res.trace);
    std::cout << "width " << cfg.width << ": best rmse "
              << format_double(res.encoding.rmse) << " after "
              << res.trace.total_samples << " samples ("
              << format_double(res.trace.wall_seconds) << " s)\n";
    return kExitOk;
  }

  if (search.target_rmse <= 0.0) {
    search.target_rmse = cfg.target_rmse_rel * value_rms(table);
  }
  try {
    SearchResult res = width_binary_search(ctx, search);
    write_search_artifacts(cfg, res.encoding, res.trace);
    std::cout << "chosen width " << res.trace.chosen_width << " with rmse "
              << format_double(res.encoding.rmse) << " (target "
              << format_double(search.target_rmse) << ", "
              << res.trace.total_samples << " samples)\n";
    return kExitOk;
  } catch (const target_unreachable_error& e) {
    write_search_artifacts(cfg, e.best_encoding, e.trace);
    std::cerr << "target unreachable: " << e.what()
              << " (best-effort encoding written)\n";
    return kExitTargetUnreachable;
  }
}

int cmd_simulate(const ExperimentConfig& cfg) {
  using namespace encmac;
  if (cfg.encoding_path.empty()) {
    throw contract_error("simulate needs --encoding");
  }
  Encoding enc = encoding_from_json(json::parse(read_file(cfg.encoding_path)));
  ArrayConfig array;
  array.n = cfg.array_size;
  array.clock_period = cfg.clock_period;
  array.accumulator_width = cfg.accumulator_width;

  SplitMix64 rng(hash_mix(cfg.seed ^ 0x51b07a7e5eed5ull));
  auto weights = random_code_matrix(rng, array.n, enc.scheme2.levels());
  std::vector<std::vector<std::vector<unsigned>>> inputs;
  for (std::size_t q = 0; q < cfg.matrices; ++q) {
    inputs.push_back(random_code_matrix(rng, array.n, enc.scheme1.levels()));
  }

  ArraySimReport encoded = simulate_encoded_array(array, enc, weights, inputs);
  json report;
  report["n"] = array.n;
  report["matrices"] = cfg.matrices;
  report["clock_period"] = array.clock_period;
  report["encoded"] = report_to_json(encoded);

  bool uniform = enc.scheme1.kind == SchemeKind::kUniformSigned &&
                 enc.scheme2.kind == SchemeKind::kUniformSigned;
  if (uniform) {
    ArraySimReport trad =
        simulate_traditional_array(array, enc.scheme1, enc.scheme2, weights, inputs);
    report["traditional"] = report_to_json(trad);
    report["latency_ratio_traditional_over_encoded"] =
        static_cast<double>(trad.first_result_latency_cycles) /
        static_cast<double>(encoded.first_result_latency_cycles);
    if (cfg.write_outputs) {
      atomic_write_file(fs::path(cfg.out_dir) / "outputs_traditional.csv",
                        matrix_csv(trad.outputs, array.n));
    }
  } else {
    report["traditional"] =
        "baseline models two's-complement operands only; skipped";
  }
  if (cfg.write_outputs) {
    atomic_write_file(fs::path(cfg.out_dir) / "outputs_encoded.csv",
                      matrix_csv(encoded.outputs, array.n));
  }
  fs::path out = fs::path(cfg.out_dir) / "report.json";
  atomic_write_file(out, report.dump(2) + "\n");
  std::cout << "wrote " << out.string() << " (encoded latency "
            << encoded.first_result_latency_cycles << " cycles)\n";
  return kExitOk;
}

int cmd_finetune_or_eval(const ExperimentConfig& cfg, bool tune) {
  using namespace encmac;
  if (cfg.encoding_path.empty()) {
    throw contract_error(std::string(tune ? "finetune" : "eval") +
                         " needs --encoding");
  }
  Encoding enc = encoding_from_json(json::parse(read_file(cfg.encoding_path)));
  SchemePair schemes{enc.scheme1, enc.scheme2};
  ToyPipeline toy = build_toy_pipeline(cfg, schemes);

  double acc_exact = dataset_accuracy(
      toy.net, exact_product_lut(enc.scheme1, enc.scheme2), toy.data);
  double acc_encoded =
      dataset_accuracy(toy.net, encoded_product_lut(enc), toy.data);

  json metrics;
  metrics["rmse"] = enc.rmse;
  metrics["accuracy_exact_quantized"] = acc_exact;
  metrics["accuracy_encoded"] = acc_encoded;

  fs::path dir(cfg.out_dir);
  if (tune) {
    FinetuneConfig fcfg;
    fcfg.lr = cfg.lr;
    fcfg.epochs = cfg.epochs;
    fcfg.batch_size = cfg.batch_size;
    fcfg.seed = cfg.seed;
    FinetuneResult res = finetune_position_weights(toy.net, enc, toy.data, fcfg);
    metrics["accuracy_encoded_finetuned"] = res.post_accuracy;
    metrics["rmse_finetuned"] = res.encoding.rmse;
    std::string loss_csv = "epoch,loss,train_accuracy\n";
    for (std::size_t e = 0; e < res.loss_curve.size(); ++e) {
      loss_csv += std::to_string(e) + "," + format_double(res.loss_curve[e]) +
                  "," + format_double(res.train_accuracy_curve[e]) + "\n";
    }
    atomic_write_file(dir / "loss.csv", loss_csv);
    atomic_write_file(dir / "encoding_finetuned.json",
                      encoding_to_json(res.encoding).dump(2) + "\n");
  }
  atomic_write_file(dir / "checkpoint.json", network_to_json(toy.net).dump(2) + "\n");
  atomic_write_file(dir / "metrics.json", metrics.dump(2) + "\n");
  std::cout << "exact " << format_double(acc_exact) << ", encoded "
            << format_double(acc_encoded);
  if (tune) std::cout << ", finetuned " << metrics["accuracy_encoded_finetuned"];
  std::cout << "\n";
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg) {
  using namespace encmac;
  SchemePair schemes = schemes_from_config(cfg);
  ProductTable table = build_product_table(schemes.operand1, schemes.operand2);
  TableContext ctx(table);
  SearchConfig search = search_config_of(cfg);
  fs::path dir(cfg.out_dir);

  if (cfg.sweep_mode == "width") {
    std::string csv = "width,best_rmse,gate_total\n";
    for (std::size_t w : cfg.widths) {
      SearchResult res = sample_search(ctx, w, search);
      csv += std::to_string(w) + "," + format_double(res.encoding.rmse) + "," +
             std::to_string(gate_count(res.encoding.circuit).total) + "\n";
      std::cout << "width " << w << ": rmse " << format_double(res.encoding.rmse)
                << "\n";
    }
    atomic_write_file(dir / "rmse_vs_width.csv", csv);
    return kExitOk;
  }
  if (cfg.sweep_mode == "samples") {
    std::string csv = "width,sample_index,best_rmse\n";
    for (std::size_t w : cfg.widths) {
      SearchResult res = sample_search(ctx, w, search);
      const auto& series = res.trace.best_rmse_by_sample;
      for (std::size_t i = 0; i < series.size(); ++i) {
        csv += std::to_string(w) + "," + std::to_string(i) + "," +
               format_double(series[i]) + "\n";
      }
    }
    atomic_write_file(dir / "rmse_vs_samples.csv", csv);
    return kExitOk;
  }
  if (cfg.sweep_mode == "accuracy") {
    ToyPipeline toy = build_toy_pipeline(cfg, schemes);
    double acc_exact = dataset_accuracy(
        toy.net, exact_product_lut(schemes.operand1, schemes.operand2), toy.data);
    std::string csv = "width,rmse,accuracy_exact,accuracy_encoded,accuracy_finetuned\n";
    for (std::size_t w : cfg.widths) {
      SearchResult res = sample_search(ctx, w, search);
      double acc_enc =
          dataset_accuracy(toy.net, encoded_product_lut(res.encoding), toy.data);
      double acc_ft = acc_enc;
      if (cfg.epochs > 0) {
        FinetuneConfig fcfg;
        fcfg.lr = cfg.lr;
        fcfg.epochs = cfg.epochs;
        fcfg.batch_size = cfg.batch_size;
        fcfg.seed = cfg.seed;
        acc_ft = finetune_position_weights(toy.net, res.encoding, toy.data, fcfg)
                     .post_accuracy;
      }
      csv += std::to_string(w) + "," + format_double(res.encoding.rmse) + "," +
             format_double(acc_exact) + "," + format_double(acc_enc) + "," +
             format_double(acc_ft) + "\n";
      std::cout << "width " << w << ": rmse " << format_double(res.encoding.rmse)
                << " acc " << format_double(acc_ft) << "\n";
    }
    atomic_write_file(dir / "accuracy_vs_width.csv", csv);
    return kExitOk;
  }
  throw contract_error("unknown sweep mode: " + cfg.sweep_mode);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"encoding-based approximate MAC design exploration"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string config_path;
  std::string dump_config_path;

  // Track provided flags so they override the config file.
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file (json)");
    sub->add_option("--dump-config", dump_config_path,
                    "write the merged effective config to this file");
    sub->add_option("--seed", cfg.seed, "master seed");
    sub->add_option("--jobs", cfg.jobs, "worker threads for sampling");
    sub->add_option("--out", cfg.out_dir, "output directory");
    sub->add_option("--kind", cfg.scheme_kind,
                    "operand scheme kind (uniform-signed | nonuniform-codebook)");
    sub->add_option("--operand-width", cfg.operand_width, "operand bits");
    sub->add_option("--codebook", cfg.codebook,
                    "operand-2 codebook levels (nonuniform)");
    sub->add_option("--scheme", cfg.scheme_path, "scheme config file (json)");
  };
  auto add_search_opts = [&](CLI::App* sub) {
    sub->add_option("--samples", cfg.samples, "sample budget per width");
    sub->add_option("--width", cfg.width, "fixed output width (skip the width search)");
    sub->add_option("--min-width", cfg.min_width, "width search lower bound");
    sub->add_option("--max-width", cfg.max_width, "width search upper bound");
    sub->add_option("--target-rmse", cfg.target_rmse, "absolute target RMSE");
    sub->add_option("--target-rmse-rel", cfg.target_rmse_rel,
                    "target RMSE relative to the table value RMS");
    sub->add_option("--stability-window", cfg.stability_window,
                    "stabilization window in samples");
    sub->add_option("--stability-eps", cfg.stability_epsilon,
                    "relative improvement threshold (0 disables early stop)");
  };
  auto add_train_opts = [&](CLI::App* sub) {
    sub->add_option("--encoding", cfg.encoding_path, "encoding json file");
    sub->add_option("--dataset", cfg.dataset_path, "dataset csv (feature...,label)");
    sub->add_option("--epochs", cfg.epochs, "fine-tuning epochs");
    sub->add_option("--lr", cfg.lr, "position-weight learning rate");
    sub->add_option("--batch", cfg.batch_size, "batch size");
    sub->add_option("--hidden", cfg.hidden, "hidden layer width");
    sub->add_option("--features", cfg.features, "generated dataset feature count");
    sub->add_option("--classes", cfg.classes, "generated dataset class count");
    sub->add_option("--per-class", cfg.per_class, "generated samples per class");
  };

  CLI::App* table = app.add_subcommand("table", "write the product truth table as csv");
  add_common(table);

  CLI::App* search = app.add_subcommand("search", "search an encoding (fixed width or width binary search)");
  add_common(search);
  add_search_opts(search);

  CLI::App* simulate = app.add_subcommand("simulate", "cycle-accurate MAC array simulation vs the systolic baseline");
  add_common(simulate);
  simulate->add_option("--encoding", cfg.encoding_path, "encoding json file");
  simulate->add_option("--array-size", cfg.array_size, "array dimension N");
  simulate->add_option("--matrices", cfg.matrices, "number of input matrices m");
  simulate->add_option("--clock-period", cfg.clock_period, "abstract clock period T");
  simulate->add_option("--accumulator-width", cfg.accumulator_width,
                       "bits per bit-position counter (0 = minimum safe)");
  simulate->add_flag("--write-outputs", cfg.write_outputs, "also dump output matrices");

  CLI::App* finetune = app.add_subcommand("finetune", "fine-tune position weights on the toy network");
  add_common(finetune);
  add_train_opts(finetune);

  CLI::App* eval = app.add_subcommand("eval", "evaluate an encoding on the toy network");
  add_common(eval);
  add_train_opts(eval);

  CLI::App* sweep = app.add_subcommand("sweep", "grid sweeps: rmse/accuracy vs width or samples");
  add_common(sweep);
  add_search_opts(sweep);
  add_train_opts(sweep);
  sweep->add_option("--mode", cfg.sweep_mode, "width | samples | accuracy");
  sweep->add_option("--widths", cfg.widths, "width grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) {
      // Merge: config file values first, flags given on the command line win.
      ExperimentConfig from_file =
          config_from_json(json::parse(encmac::read_file(config_path)));
      ExperimentConfig flags = cfg;
      cfg = from_file;
      // CLI11 wrote parsed values into `flags`; overlay onto the file config
      // only the options the user actually passed.
      auto take = [&](const std::string& name, auto member) {
        const CLI::Option* opt = sub->get_option_no_throw(name);
        if (opt != nullptr && opt->count() > 0) cfg.*member = flags.*member;
      };
      take("--seed", &ExperimentConfig::seed);
      take("--jobs", &ExperimentConfig::jobs);
      take("--out", &ExperimentConfig::out_dir);
      take("--kind", &ExperimentConfig::scheme_kind);
      take("--operand-width", &ExperimentConfig::operand_width);
      take("--codebook", &ExperimentConfig::codebook);
      take("--scheme", &ExperimentConfig::scheme_path);
      take("--samples", &ExperimentConfig::samples);
      take("--width", &ExperimentConfig::width);
      take("--min-width", &ExperimentConfig::min_width);
      take("--max-width", &ExperimentConfig::max_width);
      take("--target-rmse", &ExperimentConfig::target_rmse);
      take("--target-rmse-rel", &ExperimentConfig::target_rmse_rel);
      take("--stability-window", &ExperimentConfig::stability_window);
      take("--stability-eps", &ExperimentConfig::stability_epsilon);
      take("--encoding", &ExperimentConfig::encoding_path);
      take("--dataset", &ExperimentConfig::dataset_path);
      take("--epochs", &ExperimentConfig::epochs);
      take("--lr", &ExperimentConfig::lr);
      take("--batch", &ExperimentConfig::batch_size);
      take("--hidden", &ExperimentConfig::hidden);
      take("--features", &ExperimentConfig::features);
      take("--classes", &ExperimentConfig::classes);
      take("--per-class", &ExperimentConfig::per_class);
      take("--mode", &ExperimentConfig::sweep_mode);
      take("--widths", &ExperimentConfig::widths);
      take("--array-size", &ExperimentConfig::array_size);
      take("--matrices", &ExperimentConfig::matrices);
      take("--clock-period", &ExperimentConfig::clock_period);
      take("--accumulator-width", &ExperimentConfig::accumulator_width);
      take("--write-outputs", &ExperimentConfig::write_outputs);
    }

    if (!dump_config_path.empty()) {
      encmac::atomic_write_file(dump_config_path,
                                config_to_json(cfg).dump(2) + "\n");
    }

    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "table") return cmd_table(cfg);
    if (name == "search") return cmd_search(cfg);
    if (name == "simulate") return cmd_simulate(cfg);
    if (name == "finetune") return cmd_finetune_or_eval(cfg, true);
    if (name == "eval") return cmd_finetune_or_eval(cfg, false);
    if (name == "sweep") return cmd_sweep(cfg);
    std::cerr << "unknown subcommand\n";
    return kExitUsage;
  } catch (const encmac::training_diverged_error& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitTrainingDiverged;
  } catch (const encmac::target_unreachable_error& e) {
    std::cerr << "target unreachable: " << e.what() << "\n";
    return kExitTargetUnreachable;
  } catch (const encmac::unsupported_size_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const encmac::contract_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const encmac::calibration_failed_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "filesystem error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config/json error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
