/*
 * Copyright 2026 The kahm-encoder Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include "kahm/data_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace kahm {
namespace {

using nlohmann::ordered_json;

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string interval_cell(const Interval& i) {
  return fixed(i.mean) + " [" + fixed(i.low) + ", " + fixed(i.high) + "]";
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

void metric_table(std::ostringstream& out, const std::string& title,
                  const std::vector<std::string>& systems, const std::vector<MetricBlock>& blocks) {
  if (blocks.empty()) return;
  constexpr std::size_t kLead = 14;
  constexpr std::size_t kCell = 28;
  out << title << '\n';
  out << pad("metric@k", kLead);
  for (const auto& s : systems) out << pad(s, kCell);
  out << '\n';
  for (const auto& b : blocks) {
    out << pad(std::string(metric_name(b.metric)) + "@" + std::to_string(b.k), kLead);
    for (const auto& i : b.systems) out << pad(interval_cell(i), kCell);
    out << '\n';
  }
  if (!blocks.front().deltas.empty()) {
    out << '\n' << title << " paired deltas\n";
    out << pad("metric@k", kLead);
    for (const auto& d : blocks.front().deltas) out << pad(d.minuend + " - " + d.subtrahend, kCell);
    out << '\n';
    for (const auto& b : blocks) {
      out << pad(std::string(metric_name(b.metric)) + "@" + std::to_string(b.k), kLead);
      for (const auto& d : b.deltas) out << pad(interval_cell(d.delta), kCell);
      out << '\n';
    }
  }
  out << '\n';
}

ordered_json interval_json(const Interval& i) {
  return ordered_json{{"mean", i.mean}, {"low", i.low}, {"high", i.high}};
}

ordered_json blocks_json(const std::vector<std::string>& systems,
                         const std::vector<MetricBlock>& blocks) {
  ordered_json arr = ordered_json::array();
  for (const auto& b : blocks) {
    ordered_json sys = ordered_json::object();
    for (std::size_t s = 0; s < systems.size(); ++s) sys[systems[s]] = interval_json(b.systems[s]);
    ordered_json deltas = ordered_json::array();
    for (const auto& d : b.deltas) {
      deltas.push_back({{"minuend", d.minuend},
                        {"subtrahend", d.subtrahend},
                        {"delta", interval_json(d.delta)}});
    }
    arr.push_back({{"metric", metric_name(b.metric)},
                   {"k", b.k},
                   {"systems", std::move(sys)},
                   {"deltas", std::move(deltas)}});
  }
  return arr;
}

ordered_json l2_json(const L2MassReport& r) {
  return ordered_json{{"margins", r.margins},
                      {"within_tolerance", r.within_tolerance},
                      {"min", r.min},
                      {"median", r.median},
                      {"mean", r.mean},
                      {"fraction_within", r.fraction_within}};
}

void write_text(const std::string& text, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIoFailure, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::kIoFailure, "write failed for " + path.string());
}

}  // namespace

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  out << "systems: ";
  for (std::size_t i = 0; i < report.systems.size(); ++i) {
    out << (i ? ", " : "") << report.systems[i];
  }
  out << "\ntau: " << fixed(report.tau, 2) << "  bootstrap: " << report.bootstrap.resamples
      << " resamples, seed " << report.bootstrap.seed << ", alpha " << fixed(report.bootstrap.alpha, 3)
      << "\n\n";
  metric_table(out, "micro (query resampling)", report.systems, report.micro);
  metric_table(out, "macro (law resampling)", report.systems, report.macro);

  for (const auto& s : report.sweeps) {
    out << "routing sweep: " << s.system << " @" << s.k << '\n';
    out << pad("threshold", 12) << pad("coverage", 12) << pad("majacc", 12) << "precision\n";
    for (std::size_t i = 0; i < s.sweep.rows.size(); ++i) {
      const auto& r = s.sweep.rows[i];
      out << pad(fixed(r.threshold, 2), 12) << pad(fixed(r.coverage), 12)
          << pad(fixed(r.majority_acc), 12) << fixed(r.precision)
          << (s.sweep.selected == i ? "  <- selected" : "") << '\n';
    }
    out << '\n';
  }

  if (!report.diagnostics.empty()) {
    out << "L2-mass margins\n";
    out << pad("law", 14) << pad("min", 12) << pad("median", 12) << pad("mean", 12) << "within\n";
    auto row = [&](const std::string& name, const L2MassReport& r) {
      out << pad(name, 14) << pad(fixed(r.min, 6), 12) << pad(fixed(r.median, 6), 12)
          << pad(fixed(r.mean, 6), 12) << fixed(r.fraction_within) << '\n';
    };
    for (const auto& d : report.diagnostics) row(d.law_id, d.report);
    if (report.diagnostic_overall) row("all", *report.diagnostic_overall);
    out << '\n';
  }

  if (!report.timings.empty()) {
    out << "timing (ms per query)\n";
    out << pad("system", 14) << pad("embed", 12) << pad("search", 12) << "total\n";
    for (const auto& t : report.timings) {
      out << pad(t.system, 14) << pad(fixed(t.profile.embed_ms), 12)
          << pad(fixed(t.profile.search_ms), 12) << fixed(t.profile.total_ms) << '\n';
    }
    out << '\n';
  }

  if (!report.scalars.empty()) {
    out << "summary\n";
    for (const auto& [k, v] : report.scalars) out << pad(k, 32) << fixed(v, 6) << '\n';
  }
  return out.str();
}

std::string report_to_json(const EvalReport& report) {
  ordered_json j;
  j["systems"] = report.systems;
  j["cutoffs"] = report.cutoffs;
  j["tau"] = report.tau;
  j["bootstrap"] = {{"resamples", report.bootstrap.resamples},
                    {"seed", report.bootstrap.seed},
                    {"alpha", report.bootstrap.alpha}};
  j["micro"] = blocks_json(report.systems, report.micro);
  j["macro"] = blocks_json(report.systems, report.macro);

  ordered_json sweeps = ordered_json::array();
  for (const auto& s : report.sweeps) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : s.sweep.rows) {
      rows.push_back({{"threshold", r.threshold},
                      {"coverage", r.coverage},
                      {"majority_acc", r.majority_acc},
                      {"precision", r.precision}});
    }
    ordered_json sel = nullptr;
    if (s.sweep.selected) sel = *s.sweep.selected;
    sweeps.push_back({{"system", s.system}, {"k", s.k}, {"rows", std::move(rows)}, {"selected", sel}});
  }
  j["sweeps"] = std::move(sweeps);

  ordered_json diag = ordered_json::object();
  for (const auto& d : report.diagnostics) diag[d.law_id] = l2_json(d.report);
  j["l2_mass"] = std::move(diag);
  if (report.diagnostic_overall) j["l2_mass_overall"] = l2_json(*report.diagnostic_overall);

  ordered_json timings = ordered_json::object();
  for (const auto& t : report.timings) {
    timings[t.system] = {{"embed_ms", t.profile.embed_ms},
                         {"search_ms", t.profile.search_ms},
                         {"total_ms", t.profile.total_ms},
                         {"queries", t.profile.queries}};
  }
  j["timing"] = std::move(timings);
  j["scalars"] = report.scalars;
  return j.dump(2) + "\n";
}

void write_report(const EvalReport& report, const fs::path& text_path, const fs::path& json_path) {
  write_text(format_report(report), text_path);
  write_text(report_to_json(report), json_path);
}

}  // namespace kahm
