#ifndef XOVA_REPORT_HPP
#define XOVA_REPORT_HPP

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xova/metrics.hpp"
#include "xova/trainer.hpp"

namespace xova {

using json = nlohmann::json;

inline json to_json(const IterationRecord& r) {
  return {{"loss", r.loss},
          {"grad_norm", r.grad_norm},
          {"active", r.active},
          {"active_fraction", r.active_fraction},
          {"cg_iters", r.cg_iterations},
          {"hvp_touches", r.hvp_touches},
          {"step", r.step},
          {"wall_ms", r.wall_ms}};
}

inline json to_json(const SolverTrace& t) {
  json its = json::array();
  for (const auto& r : t.iterations) its.push_back(to_json(r));
  return {{"outer_iters", t.outer_iterations},
          {"hvp_touches", t.hvp_touches},
          {"initial_active_fraction", t.initial_active_fraction},
          {"initial_loss", t.initial_loss},
          {"final_loss", t.final_loss},
          {"final_grad_norm", t.final_grad_norm},
          {"grad0_ref", t.grad0_ref},
          {"termination", to_string(t.termination)},
          {"wall_ms", t.wall_ms},
          {"iterations", std::move(its)}};
}

inline SolverTrace trace_from_json(const json& j) {
  SolverTrace t;
  t.outer_iterations = j.at("outer_iters").get<std::size_t>();
  t.hvp_touches = j.at("hvp_touches").get<std::uint64_t>();
  t.initial_active_fraction = j.at("initial_active_fraction").get<double>();
  t.initial_loss = j.at("initial_loss").get<double>();
  t.final_loss = j.at("final_loss").get<double>();
  t.final_grad_norm = j.at("final_grad_norm").get<double>();
  t.grad0_ref = j.at("grad0_ref").get<double>();
  t.termination = parse_termination(j.at("termination").get<std::string>());
  t.wall_ms = j.at("wall_ms").get<double>();
  for (const auto& r : j.at("iterations")) {
    IterationRecord rec;
    rec.loss = r.at("loss").get<double>();
    rec.grad_norm = r.at("grad_norm").get<double>();
    rec.active = r.at("active").get<std::size_t>();
    rec.active_fraction = r.at("active_fraction").get<double>();
    rec.cg_iterations = r.at("cg_iters").get<std::size_t>();
    rec.hvp_touches = r.at("hvp_touches").get<std::uint64_t>();
    rec.step = r.at("step").get<double>();
    rec.wall_ms = r.at("wall_ms").get<double>();
    t.iterations.push_back(rec);
  }
  return t;
}

inline std::string hex_digest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline json to_json(const TrainReport& r) {
  json labels = json::array();
  for (const auto& l : r.labels) {
    labels.push_back({{"label", l.label},
                      {"positives", l.positives},
                      {"init_ms", l.init_ms},
                      {"wall_ms", l.wall_ms},
                      {"error", l.error},
                      {"trace", to_json(l.trace)}});
  }
  json out = {{"format", "xova-report-v1"},
              {"dataset",
               {{"n", r.n_instances}, {"dim", r.dim}, {"n_labels", r.n_labels}, {"digest", hex_digest(r.dataset_digest)}}},
              {"loss", r.loss},
              {"init", r.init},
              {"config_digest", r.config_digest},
              {"threads", r.threads},
              {"total_wall_ms", r.total_wall_ms},
              {"total_hvp_touches", r.total_hvp_touches},
              {"mean_active_fraction", r.mean_active_fraction},
              {"warnings", r.warnings},
              {"labels", std::move(labels)}};
  out["ovap_trace"] = r.ovap_trace ? to_json(*r.ovap_trace) : json(nullptr);
  return out;
}

inline TrainReport report_from_json(const json& j) {
  if (j.value("format", "") != "xova-report-v1") throw ConfigError("not a training report");
  TrainReport r;
  const auto& ds = j.at("dataset");
  r.n_instances = ds.at("n").get<std::size_t>();
  r.dim = ds.at("dim").get<std::size_t>();
  r.n_labels = ds.at("n_labels").get<std::size_t>();
  r.dataset_digest = std::stoull(ds.at("digest").get<std::string>(), nullptr, 16);
  r.loss = j.at("loss").get<std::string>();
  r.init = j.at("init").get<std::string>();
  r.config_digest = j.at("config_digest").get<std::string>();
  r.threads = j.at("threads").get<std::size_t>();
  r.total_wall_ms = j.at("total_wall_ms").get<double>();
  r.total_hvp_touches = j.at("total_hvp_touches").get<std::uint64_t>();
  r.mean_active_fraction = j.at("mean_active_fraction").get<std::vector<double>>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (!j.at("ovap_trace").is_null()) r.ovap_trace = trace_from_json(j.at("ovap_trace"));
  for (const auto& l : j.at("labels")) {
    LabelReport lr;
    lr.label = l.at("label").get<label_t>();
    lr.positives = l.at("positives").get<std::size_t>();
    lr.init_ms = l.at("init_ms").get<double>();
    lr.wall_ms = l.at("wall_ms").get<double>();
    lr.error = l.at("error").get<std::string>();
    lr.trace = trace_from_json(l.at("trace"));
    r.labels.push_back(std::move(lr));
  }
  return r;
}

/// One row per label: label,positives,outer_iters,hvp_touches,wall_ms,final_loss,termination
inline void write_report_csv(std::ostream& out, const TrainReport& r) {
  out << "label,positives,outer_iters,hvp_touches,wall_ms,final_loss,termination\n";
  char buf[256];
  for (const auto& l : r.labels) {
    std::snprintf(buf, sizeof buf, "%u,%zu,%zu,%llu,%.6f,%.17g,%s\n", l.label, l.positives,
                  l.trace.outer_iterations, static_cast<unsigned long long>(l.trace.hvp_touches), l.wall_ms,
                  l.trace.final_loss, to_string(l.trace.termination).c_str());
    out << buf;
  }
}

inline json to_json(const EvalResult& e) {
  json p = json::object();
  for (const auto& [k, v] : e.p_at) p[std::to_string(k)] = v;
  return {{"n_test", e.n_test}, {"p_at", p}, {"macro_precision", e.macro_precision}, {"macro_recall", e.macro_recall}};
}

/// Rows `metric,k,value`; k is empty for the macro metrics.
inline void write_eval_csv(std::ostream& out, const EvalResult& e) {
  out << "metric,k,value\n";
  char buf[96];
  for (const auto& [k, v] : e.p_at) {
    std::snprintf(buf, sizeof buf, "precision,%zu,%.17g\n", k, v);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "macro_precision,,%.17g\nmacro_recall,,%.17g\n", e.macro_precision,
                e.macro_recall);
  out << buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

} // namespace xova

#endif // XOVA_REPORT_HPP
