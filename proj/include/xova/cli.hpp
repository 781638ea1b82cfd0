#ifndef XOVA_CLI_HPP
#define XOVA_CLI_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "xova/dataio.hpp"
#include "xova/diag.hpp"
#include "xova/metrics.hpp"
#include "xova/report.hpp"
#include "xova/trainer.hpp"

namespace xova::cli {

/// Process exit codes.
enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct TrainArgs {
  std::string data;
  std::string loss = "squared-hinge";
  std::string init = "aop";
  std::optional<double> bias_scale;
  std::optional<double> ovap_stop;
  bool ovap_strict = false;
  std::optional<double> aop_s;
  std::optional<double> aop_t;
  double c = 1.0;
  double eps = 0.01;
  double eps_cg = 0.5;
  double clip = 0.01;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  std::size_t max_outer = 100;
  bool no_bias = false;
  std::string model_out;
  std::string diag_out;
};

/// Resolves flags into a TrainConfig; rejects flags that belong to another init.
inline TrainConfig resolve_train_config(const TrainArgs& a) {
  TrainConfig cfg;
  cfg.loss = parse_loss(a.loss);
  cfg.c = a.c;
  cfg.clip_threshold = a.clip;
  cfg.threads = a.threads;
  cfg.solver.eps_outer = a.eps;
  cfg.solver.eps_cg = a.eps_cg;
  cfg.solver.max_outer = a.max_outer;

  auto forbid = [&](bool present, const char* flag) {
    if (present) throw ConfigError(std::string(flag) + " is not valid with --init " + a.init);
  };
  if (a.init != "bias") forbid(a.bias_scale.has_value(), "--bias-scale");
  if (a.init != "ovap") {
    forbid(a.ovap_stop.has_value(), "--ovap-stop");
    forbid(a.ovap_strict, "--ovap-strict");
  }
  if (a.init != "aop") {
    forbid(a.aop_s.has_value(), "--aop-s");
    forbid(a.aop_t.has_value(), "--aop-t");
  }

  if (a.init == "zero") {
    cfg.init = ZeroInit{};
  } else if (a.init == "bias") {
    cfg.init = BiasInit{a.bias_scale.value_or(1.0)};
  } else if (a.init == "ovap") {
    if (a.ovap_strict && a.ovap_stop) throw ConfigError("--ovap-strict and --ovap-stop are mutually exclusive");
    const double stop = a.ovap_strict ? a.eps : a.ovap_stop.value_or(0.01);
    if (!(stop > 0.0 && stop < 1.0)) throw ConfigError("OvA-Primal stopping tolerance must be in (0, 1)");
    cfg.init = OvaPrimalInit{stop};
  } else if (a.init == "aop") {
    cfg.init = AopInit{a.aop_s, a.aop_t};
  } else {
    throw ConfigError("unknown init '" + a.init + "' (expected zero, bias, ovap or aop)");
  }
  if (a.threads == 0) throw ConfigError("--threads must be at least 1");
  cfg.solver.validate();
  return cfg;
}

inline std::string sibling_csv_path(const std::string& json_path) {
  std::filesystem::path p(json_path);
  if (p.extension() == ".json") return p.replace_extension(".csv").string();
  return json_path + ".csv";
}

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto cfg = resolve_train_config(a);
  auto ds = load_xmc_dataset(a.data);
  if (!a.no_bias) ds = augment_bias(std::move(ds));
  const auto stats = compute_label_stats(ds);
  auto res = train_ova(ds, stats, cfg);
  for (const auto& w : res.report.warnings) err << "warning: " << w << '\n';

  save_model(a.model_out, res.model);
  if (!a.diag_out.empty()) {
    write_text_file(a.diag_out, to_json(res.report).dump(1) + "\n");
    std::ostringstream csv;
    write_report_csv(csv, res.report);
    write_text_file(sibling_csv_path(a.diag_out), csv.str());
  }

  double iters = 0.0;
  for (const auto& l : res.report.labels) iters += static_cast<double>(l.trace.outer_iterations);
  const auto n = res.report.labels.size();
  char buf[256];
  std::snprintf(buf, sizeof buf, "trained %zu labels (%s, %s) in %.3f s, mean outer iterations %.2f, hvp touches %llu\n",
                n, res.report.loss.c_str(), res.report.init.c_str(), res.report.total_wall_ms / 1000.0,
                n ? iters / static_cast<double>(n) : 0.0,
                static_cast<unsigned long long>(res.report.total_hvp_touches));
  out << buf;

  if (const auto failed = res.report.failed_labels(); failed > 0) {
    err << "error: " << failed << " label(s) hit a numerical failure; see the diagnostics report\n";
    return kNumerical;
  }
  return kOk;
}

/// Loads a test set and adds the bias column the model expects.
inline Dataset load_test_for(const OvaModel& model, const std::string& path) {
  if (std::filesystem::exists(path) && std::filesystem::file_size(path) == 0) {
    Dataset empty;
    empty.n_labels = model.n_labels;
    empty.features = SparseMatrixBuilder(model.dim).build();
    return empty;
  }
  auto ds = load_xmc_dataset(path);
  const std::size_t expect = model.dim - (model.bias_index ? 1 : 0);
  if (ds.dim() != expect)
    throw DimensionMismatch("data has " + std::to_string(ds.dim()) + " features, model expects " +
                            std::to_string(expect));
  if (ds.n_labels > model.n_labels)
    throw DimensionMismatch("data declares " + std::to_string(ds.n_labels) + " labels, model has " +
                            std::to_string(model.n_labels));
  if (model.bias_index) {
    if (*model.bias_index != expect) throw DimensionMismatch("model bias feature is not the last column");
    ds = augment_bias(std::move(ds));
  }
  return ds;
}

inline int cmd_predict(const std::string& model_path, const std::string& data_path, std::size_t k,
                       const std::string& out_path) {
  const auto model = load_model(model_path);
  const auto test = load_test_for(model, data_path);
  if (k < 1 || k > model.n_labels) throw ConfigError("--k must be in [1, " + std::to_string(model.n_labels) + "]");
  const Predictor pred(model);
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write '" + out_path + "'");
  std::vector<double> scores;
  std::string line;
  char buf[64];
  for (std::size_t i = 0; i < test.n_instances(); ++i) {
    pred.scores(test.features.row(i), scores);
    line.clear();
    for (const auto& [lab, s] : top_k(scores, k)) {
      if (!line.empty()) line += ' ';
      std::snprintf(buf, sizeof buf, "%u:%.17g", lab, s);
      line += buf;
    }
    out << line << '\n';
  }
  if (!out) throw IoError("write failed for '" + out_path + "'");
  return kOk;
}

inline std::vector<std::size_t> parse_k_list(const std::string& s) {
  std::vector<std::size_t> ks;
  for (auto tok : detail::split(s, ',')) {
    tok = detail::trim(tok);
    std::size_t k = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), k);
    if (tok.empty() || ec != std::errc() || p != tok.data() + tok.size() || k == 0)
      throw ConfigError("invalid k list '" + s + "'");
    ks.push_back(k);
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

inline int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& k_list,
                    const std::string& json_path, std::ostream& out) {
  const auto ks = parse_k_list(k_list);
  const auto model = load_model(model_path);
  const auto test = load_test_for(model, data_path);
  const auto res = evaluate(model, test, ks);
  char buf[96];
  for (const auto& [k, v] : res.p_at) {
    std::snprintf(buf, sizeof buf, "P@%zu %.4f\n", k, v);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "macro-precision %.4f\nmacro-recall %.4f\n", res.macro_precision, res.macro_recall);
  out << buf;
  if (!json_path.empty()) write_text_file(json_path, to_json(res).dump(1) + "\n");
  return kOk;
}

struct SynthArgs {
  SyntheticOptions opts;
  std::string out;
  std::string test_out;
  std::optional<double> test_frac;
};

inline int cmd_synth(const SynthArgs& a) {
  if (a.test_frac && a.test_out.empty()) throw ConfigError("--test-frac needs --test-out");
  if (!a.test_out.empty() && !a.test_frac) throw ConfigError("--test-out needs --test-frac");
  if (a.test_frac && !(*a.test_frac >= 0.0 && *a.test_frac <= 1.0))
    throw ConfigError("--test-frac must be in [0, 1]");
  save_xmc_dataset(a.out, generate_synthetic(a.opts));
  if (a.test_frac) {
    const auto n_test = static_cast<std::size_t>(std::floor(*a.test_frac * static_cast<double>(a.opts.n)));
    save_xmc_dataset(a.test_out, generate_synthetic_test(a.opts, n_test));
  }
  return kOk;
}

inline int cmd_diag_summary(const std::vector<std::string>& paths, const std::string& prefix, std::ostream& out) {
  std::vector<TrainReport> reports;
  for (const auto& p : paths) {
    try {
      reports.push_back(report_from_json(read_json_file(p)));
    } catch (const json::exception& e) {
      throw IoError("'" + p + "': malformed report: " + e.what());
    } catch (const ConfigError& e) {
      throw IoError("'" + p + "': " + e.what());
    }
  }
  const auto s = summarize_reports(reports);
  std::ostringstream active, buckets;
  write_active_csv(active, s);
  write_bucket_csv(buckets, s);
  write_text_file(prefix + "_active.csv", active.str());
  write_text_file(prefix + "_buckets.csv", buckets.str());
  out << "wrote " << prefix << "_active.csv and " << prefix << "_buckets.csv (" << s.methods.size()
      << " methods)\n";
  return kOk;
}

/// Entry point shared by the binary and the tests.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Sparse one-vs-all extreme multi-label trainer"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a one-vs-all model");
  train->add_option("--data", ta.data, "training set (XMC text format)")->required();
  train->add_option("--loss", ta.loss, "squared-hinge or logistic")->capture_default_str();
  train->add_option("--init", ta.init, "zero, bias, ovap or aop")->capture_default_str();
  train->add_option("--bias-scale", ta.bias_scale, "bias init: w0 = -scale at the bias feature");
  train->add_option("--ovap-stop", ta.ovap_stop, "OvA-Primal relative gradient tolerance (default 0.01)");
  train->add_flag("--ovap-strict", ta.ovap_strict, "solve the OvA-Primal vector to --eps");
  train->add_option("--aop-s", ta.aop_s, "margin of the positive mean (default 1)");
  train->add_option("--aop-t", ta.aop_t, "margin of the negative mean (default -2, logistic -3)");
  train->add_option("--c", ta.c, "loss weight C")->capture_default_str();
  train->add_option("--eps", ta.eps, "outer stopping tolerance")->capture_default_str();
  train->add_option("--eps-cg", ta.eps_cg, "CG relative residual")->capture_default_str();
  train->add_option("--max-outer", ta.max_outer, "cap on Newton iterations")->capture_default_str();
  train->add_option("--clip", ta.clip, "drop weights with |w| below this")->capture_default_str();
  train->add_option("--threads", ta.threads, "worker threads")->capture_default_str();
  train->add_option("--seed", ta.seed, "recorded for reproducibility; training is deterministic");
  train->add_flag("--no-bias", ta.no_bias, "do not append the bias feature");
  train->add_option("--model-out", ta.model_out, "model file to write")->required();
  train->add_option("--diag-out", ta.diag_out, "training report JSON (a .csv is written alongside)");

  std::string p_model, p_data, p_out;
  std::size_t p_k = 5;
  auto* predict = app.add_subcommand("predict", "top-k predictions per instance");
  predict->add_option("--model", p_model)->required();
  predict->add_option("--data", p_data)->required();
  predict->add_option("--k", p_k)->capture_default_str();
  predict->add_option("--out", p_out)->required();

  std::string e_model, e_data, e_k = "1,3,5", e_json;
  auto* eval = app.add_subcommand("eval", "precision@k and macro binary precision/recall");
  eval->add_option("--model", e_model)->required();
  eval->add_option("--data", e_data)->required();
  eval->add_option("--k", e_k, "comma-separated list")->capture_default_str();
  eval->add_option("--json", e_json, "write the result as JSON");

  SynthArgs sa;
  double test_frac = 0.0;
  auto* synth = app.add_subcommand("synth", "generate a seeded long-tailed dataset");
  synth->add_option("--n", sa.opts.n)->required();
  synth->add_option("--d", sa.opts.d)->required();
  synth->add_option("--l", sa.opts.l)->required();
  synth->add_option("--tail", sa.opts.tail_exponent)->capture_default_str();
  synth->add_option("--seed", sa.opts.seed)->capture_default_str();
  synth->add_option("--out", sa.out)->required();
  synth->add_option("--test-out", sa.test_out);
  auto* frac_opt = synth->add_option("--test-frac", test_frac);

  std::vector<std::string> d_reports;
  std::string d_out;
  auto* diag = app.add_subcommand("diag-summary", "merge training reports into comparison CSVs");
  diag->add_option("--reports", d_reports)->required()->expected(1, -1);
  diag->add_option("--out", d_out, "output prefix: <out>_active.csv, <out>_buckets.csv")->required();

  std::vector<const char*> argv;
  argv.push_back("xova");
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(ta, out, err);
    if (*predict) return cmd_predict(p_model, p_data, p_k, p_out);
    if (*eval) return cmd_eval(e_model, e_data, e_k, e_json, out);
    if (*synth) {
      if (frac_opt->count()) sa.test_frac = test_frac;
      return cmd_synth(sa);
    }
    if (*diag) return cmd_diag_summary(d_reports, d_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

} // namespace xova::cli

#endif // XOVA_CLI_HPP
