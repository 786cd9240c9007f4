// Copyright 2026 The ecqv-kd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ecqvkd/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <thread>

namespace ecqvkd::cli {

using json = nlohmann::json;
using proto::ProtocolKind;
using proto::StepLabel;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

json overhead_to_json(const analysis::OverheadReport& report) {
  json steps = json::array();
  for (const auto& step : report.steps) {
    json fields = json::array();
    for (const auto& [tag, bytes] : step.fields) {
      fields.push_back({{"tag", tag}, {"bytes", bytes}});
    }
    steps.push_back({{"step", std::string(proto::to_string(step.step))},
                     {"fields", std::move(fields)},
                     {"bytes", step.bytes}});
  }
  json j = {{"protocol", std::string(proto::to_string(report.kind))},
            {"steps", std::move(steps)},
            {"step_count", report.step_count},
            {"total_bytes", report.total_bytes}};
  if (report.ext_extra_steps) j["ext_extra_steps"] = *report.ext_extra_steps;
  if (report.ext_extra_bytes) j["ext_extra_bytes"] = *report.ext_extra_bytes;
  return j;
}

json matrix_to_json(const analysis::ThreatMatrix& matrix) {
  json cols = json::array();
  for (auto kind : matrix.columns) cols.push_back(std::string(proto::to_string(kind)));
  json rows = json::array();
  for (size_t r = 0; r < matrix.rows.size(); ++r) {
    json cells = json::array();
    for (const auto& cell : matrix.cells[r]) {
      cells.push_back({{"rating", std::string(analysis::to_string(cell.rating))},
                       {"basis", cell.basis == analysis::CellBasis::Oracle ? "oracle"
                                                                           : "annotated"},
                       {"note", cell.note}});
    }
    rows.push_back({{"threat", matrix.rows[r]}, {"cells", std::move(cells)}});
  }
  return {{"columns", std::move(cols)}, {"rows", std::move(rows)}};
}

json ledger_to_json(const transport::ByteLedger& ledger) {
  json entries = json::array();
  for (const auto& e : ledger.entries) {
    entries.push_back({{"step", std::string(proto::to_string(e.step))},
                       {"dir", std::string(transport::to_string(e.dir))},
                       {"app_bytes", e.app_bytes},
                       {"frames", e.frame_count},
                       {"frame_bytes", e.frame_bytes}});
  }
  return {{"entries", std::move(entries)},
          {"total_app_bytes", ledger.total_app_bytes()},
          {"total_frames", ledger.total_frames()},
          {"total_frame_bytes", ledger.total_frame_bytes()}};
}

void write_file(const std::filesystem::path& path, ByteSpan data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, ByteSpan(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

std::string totals_cell(const analysis::OverheadReport& r) {
  std::string steps = std::to_string(r.step_count);
  std::string bytes = std::to_string(r.total_bytes);
  if (r.ext_extra_steps) steps += "(+" + std::to_string(*r.ext_extra_steps) + ")";
  if (r.ext_extra_bytes) bytes += "(+" + std::to_string(*r.ext_extra_bytes) + ")";
  return steps + ": " + bytes + " B";
}

// Base protocols first, the variant kinds after.
constexpr ProtocolKind kReportOrder[] = {
    ProtocolKind::SEcdsa, ProtocolKind::Sts,       ProtocolKind::Scianc,
    ProtocolKind::Poramb, ProtocolKind::SEcdsaExt, ProtocolKind::StsOpt1,
    ProtocolKind::StsOpt2};

}  // namespace

std::optional<TamperSpec> parse_tamper(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= text.size()) return std::nullopt;
  TamperSpec spec;
  spec.field = lower(text.substr(0, colon));
  try {
    spec.byte_index = std::stoul(text.substr(colon + 1));
  } catch (...) {
    return std::nullopt;
  }
  return spec;
}

std::optional<std::pair<StepLabel, size_t>> resolve_tamper(ProtocolKind kind,
                                                           const TamperSpec& spec) {
  std::string want_step, want_tag = spec.field;
  if (auto dot = spec.field.find('.'); dot != std::string::npos) {
    want_step = spec.field.substr(0, dot);
    want_tag = spec.field.substr(dot + 1);
  }

  for (StepLabel step : proto::message_flow(kind)) {
    if (!want_step.empty() && lower(std::string(proto::to_string(step))) != want_step) continue;
    size_t offset = 0;
    for (const auto& field : proto::message_layout(kind, step)) {
      if (want_tag == field.tag) {
        if (spec.byte_index >= field.length) return std::nullopt;
        return std::make_pair(step, offset + spec.byte_index);
      }
      offset += field.length;
    }
  }
  return std::nullopt;
}

uint64_t effective_seed(const RunConfig& config) {
  if (config.seed) return *config.seed;
  SystemRandom sys;
  uint64_t seed = 0;
  auto b = sys.bytes(8);
  for (int i = 0; i < 8; ++i) seed = (seed << 8) | b[static_cast<size_t>(i)];
  return seed;
}

std::string resolve_out_dir(const RunConfig& config) {
  if (!config.out_dir.empty()) return config.out_dir;
  if (const char* env = std::getenv("ECQV_KD_OUT"); env != nullptr && *env != '\0') return env;
  return "out";
}

// ---- handshake ----

int cmd_handshake(const RunConfig& config, std::ostream& out) {
  if (!config.protocol) {
    out << "handshake: --protocol is required\n";
    return 2;
  }
  ProtocolKind kind = *config.protocol;
  uint64_t seed = effective_seed(config);

  runner::RunOptions options;
  options.channel = config.channel;
  if (config.tamper) {
    auto target = resolve_tamper(kind, *config.tamper);
    if (!target) {
      out << "handshake: cannot resolve tamper target '" << config.tamper->field << ":"
          << config.tamper->byte_index << "' for " << proto::to_string(kind) << "\n";
      return 2;
    }
    options.adversary = transport::make_tamper_hook(target->first, target->second);
  }

  DeterministicRandom prov_rng(seed, 0);
  auto prov = runner::provision(prov_rng);
  auto result = runner::run_seeded_handshake(kind, seed, options);

  std::filesystem::path dir = resolve_out_dir(config);
  std::filesystem::create_directories(dir);
  write_file(dir / "transcript.hex", result.transcript_hex);
  write_file(dir / "transcript.bin", ByteSpan(result.transcript_binary));
  write_file(dir / "frames.log", result.frame_log);

  // Certificate export, both raw and hex.
  auto cert_a = prov.device_a.certificate.encode();
  auto cert_b = prov.device_b.certificate.encode();
  write_file(dir / "cert-a.bin", ByteSpan(cert_a.data(), cert_a.size()));
  write_file(dir / "cert-b.bin", ByteSpan(cert_b.data(), cert_b.size()));
  write_file(dir / "cert-a.hex", hex_encode(ByteSpan(cert_a.data(), cert_a.size())) + "\n");
  write_file(dir / "cert-b.hex", hex_encode(ByteSpan(cert_b.data(), cert_b.size())) + "\n");
  auto ca_pub = prov.ca.public_key().encode_uncompressed();
  write_file(dir / "ca-public.hex", hex_encode(ByteSpan(ca_pub.data(), ca_pub.size())) + "\n");

  json result_json = {
      {"protocol", std::string(proto::to_string(kind))},
      {"seed", seed},
      {"established", result.ok()},
      {"messages", result.message_count},
      {"total_app_bytes", result.ledger.total_app_bytes()},
      {"virtual_time_us", result.virtual_time_us},
      {"max_frame_latency_us", result.max_frame_latency_us},
      {"ledger", ledger_to_json(result.ledger)},
  };
  if (result.key_digest_a) result_json["key_digest_a"] = result.key_digest_a->hex();
  if (result.key_digest_b) result_json["key_digest_b"] = result.key_digest_b->hex();
  if (auto fail = result.failure()) {
    result_json["failure"] = std::string(proto::to_string(*fail));
    result_json["failure_detail"] = result.failure_detail;
  }
  write_file(dir / "result.json", result_json.dump(2) + "\n");

  if (config.format == OutputFormat::Structured) {
    out << result_json.dump(2) << "\n";
  } else {
    out << "protocol: " << proto::to_string(kind) << "\nseed: " << seed << "\n";
    out << "ledger:\n";
    for (const auto& e : result.ledger.entries) {
      out << "  " << proto::to_string(e.step) << " " << transport::to_string(e.dir) << "  "
          << e.app_bytes << " B in " << e.frame_count << " frames (" << e.frame_bytes
          << " B on wire)\n";
    }
    out << "total: " << result.ledger.entries.size() << " steps, "
        << result.ledger.total_app_bytes() << " application bytes\n";
    out << "virtual transfer time: " << std::fixed << std::setprecision(1)
        << result.virtual_time_us << " us (max frame " << result.max_frame_latency_us
        << " us)\n";
    if (result.ok()) {
      out << "established: yes\n";
      out << "key digest (A): " << result.key_digest_a->hex() << "\n";
      out << "key digest (B): " << result.key_digest_b->hex() << "\n";
      out << "key match: " << (*result.key_digest_a == *result.key_digest_b ? "yes" : "NO")
          << "\n";
    } else {
      out << "established: no\n";
      out << "failure: " << proto::to_string(*result.failure()) << " (" << result.failure_detail
          << ")\n";
    }
    out << "artifacts: " << dir.string() << "\n";
  }
  return result.ok() ? 0 : 1;
}

// ---- bench ----

namespace {

analysis::OpTiming timing_from_json(const json& j, const std::string& label) {
  analysis::OpTiming t;
  t.device = label;
  const json& d = j.at(label);
  t.op_us = {d.at("op1_us").get<int64_t>(), d.at("op2_us").get<int64_t>(),
             d.at("op3_us").get<int64_t>(), d.at("op4_us").get<int64_t>()};
  return t;
}

json timing_to_json(const analysis::OpTiming& t) {
  return {{"op1_us", t.op_us[0]},
          {"op2_us", t.op_us[1]},
          {"op3_us", t.op_us[2]},
          {"op4_us", t.op_us[3]}};
}

}  // namespace

int cmd_bench(const RunConfig& config, std::ostream& out) {
  uint64_t seed = effective_seed(config);
  size_t runs = config.runs == 0 ? 10 : config.runs;

  analysis::OpTiming device_a, device_b;
  bool measured = !config.timing_file.has_value();
  if (measured) {
    int reps = static_cast<int>(std::max<size_t>(runs, 10));
    device_a = analysis::measure_op_timings("device-a", reps, seed);
    device_b = analysis::measure_op_timings("device-b", reps, seed + 1);
  } else {
    std::ifstream f(*config.timing_file);
    if (!f) {
      out << "bench: cannot open timing file " << *config.timing_file << "\n";
      return 2;
    }
    json j = json::parse(f);
    device_a = timing_from_json(j, "device_a");
    device_b = timing_from_json(j, "device_b");
  }

  analysis::TimingModel model{device_a, device_b, analysis::Variant::Serial};
  int64_t serial = analysis::total_time_serial(model);
  model.variant = analysis::Variant::Opt1;
  int64_t opt1 = analysis::total_time_opt(model);
  int64_t opt1_graph = analysis::simulate_schedule(model, proto::opt_schedule(ProtocolKind::StsOpt1));
  model.variant = analysis::Variant::Opt2;
  int64_t opt2 = analysis::total_time_opt(model);
  int64_t opt2_graph = analysis::simulate_schedule(model, proto::opt_schedule(ProtocolKind::StsOpt2));

  auto stats = analysis::bench_all(runs, seed);

  json j = {{"seed", seed},
            {"runs", runs},
            {"device_a", timing_to_json(device_a)},
            {"device_b", timing_to_json(device_b)},
            {"projection_us",
             {{"serial", serial},
              {"opt1", opt1},
              {"opt1_graph", opt1_graph},
              {"opt2", opt2},
              {"opt2_graph", opt2_graph}}}};
  json protocols = json::array();
  for (const auto& st : stats) {
    protocols.push_back({{"protocol", std::string(proto::to_string(st.kind))},
                         {"runs", st.runs},
                         {"mean_us", st.mean_us},
                         {"stddev_us", st.stddev_us},
                         {"median_us", st.median_us},
                         {"min_us", st.min_us},
                         {"max_us", st.max_us}});
  }
  j["protocols"] = std::move(protocols);
  if (measured) {
    j["sts_schedule_wall_us"] = {
        {"serial", analysis::measure_sts_schedule_wall(analysis::Variant::Serial, seed)},
        {"opt1", analysis::measure_sts_schedule_wall(analysis::Variant::Opt1, seed)},
        {"opt2", analysis::measure_sts_schedule_wall(analysis::Variant::Opt2, seed)}};
  }

  if (config.format == OutputFormat::Structured) {
    out << j.dump(2) << "\n";
    return 0;
  }

  out << "op timings (median us over " << std::max<size_t>(runs, 10) << " reps)\n";
  for (const auto* t : {&device_a, &device_b}) {
    out << "  " << t->device << ": ";
    for (int i = 1; i <= 4; ++i) out << "Op" << i << "=" << t->op(i) << "us ";
    out << "\n";
  }
  out << "model projections: serial=" << serial << "us  opt1=" << opt1
      << "us (graph " << opt1_graph << ")  opt2=" << opt2 << "us (graph " << opt2_graph
      << ")\n";
  if (measured) {
    out << "two-worker wall time: serial="
        << j["sts_schedule_wall_us"]["serial"].get<double>() << "us  opt1="
        << j["sts_schedule_wall_us"]["opt1"].get<double>() << "us  opt2="
        << j["sts_schedule_wall_us"]["opt2"].get<double>() << "us"
        << " (" << std::thread::hardware_concurrency()
        << " hardware threads; overlap needs at least 2)\n";
  }
  out << "\nprotocol runs (" << runs << " each, mean +/- stddev us)\n";
  for (const auto& st : stats) {
    out << "  " << std::left << std::setw(12) << proto::to_string(st.kind) << std::right
        << std::fixed << std::setprecision(1) << std::setw(9) << st.mean_us << " +/- "
        << std::setw(7) << st.stddev_us << "   median " << std::setw(9) << st.median_us
        << "\n";
  }
  return 0;
}

// ---- report ----

std::string overhead_report_json() {
  json reports = json::array();
  for (ProtocolKind kind : kReportOrder) {
    reports.push_back(overhead_to_json(analysis::overhead_report(kind)));
  }
  return json{{"overhead", std::move(reports)}}.dump(2);
}

std::string threat_matrix_json(uint64_t seed) {
  return json{{"threat_matrix", matrix_to_json(analysis::threat_matrix(seed))}}.dump(2);
}

int cmd_report(const RunConfig& config, std::ostream& out) {
  uint64_t seed = effective_seed(config);

  std::vector<analysis::OverheadReport> reports;
  for (ProtocolKind kind : kReportOrder) {
    reports.push_back(analysis::overhead_report(kind));
  }
  analysis::ThreatMatrix matrix = analysis::threat_matrix(seed);

  if (config.format == OutputFormat::Structured) {
    json j = json::parse(overhead_report_json());
    j["threat_matrix"] = matrix_to_json(matrix);
    j["seed"] = seed;
    out << j.dump(2) << "\n";
    return 0;
  }

  out << "communication steps and transmission overhead\n";
  for (const auto& r : reports) {
    out << "  " << std::left << std::setw(12) << proto::to_string(r.kind) << std::right;
    out << " total " << totals_cell(r) << "\n";
    for (const auto& s : r.steps) {
      out << "      " << proto::to_string(s.step) << ": ";
      for (size_t i = 0; i < s.fields.size(); ++i) {
        if (i) out << ", ";
        out << s.fields[i].first << "(" << s.fields[i].second << ")";
      }
      out << "  = " << s.bytes << " B\n";
    }
  }

  out << "\ntotals row: ";
  for (size_t i = 0; i < reports.size(); ++i) {
    if (i) out << "  ";
    out << proto::to_string(reports[i].kind) << " " << totals_cell(reports[i]);
  }
  out << "\n";

  out << "\nsecurity overview (X weak, Δ partial, ✓ full; * = oracle-backed)\n";
  out << "  " << std::left << std::setw(18) << "threat";
  for (auto kind : matrix.columns) out << std::setw(12) << proto::to_string(kind);
  out << "\n";
  for (size_t r = 0; r < matrix.rows.size(); ++r) {
    out << "  " << std::left << std::setw(18) << matrix.rows[r];
    for (const auto& cell : matrix.cells[r]) {
      std::string mark = std::string(analysis::to_symbol(cell.rating));
      if (cell.basis == analysis::CellBasis::Oracle) mark += "*";
      out << std::setw(12) << mark;
    }
    out << "\n";
  }
  out << "\nnotes:\n";
  for (size_t r = 0; r < matrix.rows.size(); ++r) {
    for (size_t c = 0; c < matrix.columns.size(); ++c) {
      out << "  [" << matrix.rows[r] << " / " << proto::to_string(matrix.columns[c]) << "] "
          << matrix.cells[r][c].note << "\n";
    }
  }
  return 0;
}

// ---- cert-info ----

namespace {

// Accepts raw binary or a hex dump (whitespace tolerated).
Bytes read_cert_like(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  std::string stripped;
  bool hexish = !content.empty();
  for (char c : content) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    if (!std::isxdigit(static_cast<unsigned char>(c))) {
      hexish = false;
      break;
    }
    stripped.push_back(c);
  }
  if (hexish && stripped.size() % 2 == 0 && !stripped.empty()) return hex_decode(stripped);
  return Bytes(content.begin(), content.end());
}

}  // namespace

int cmd_cert_info(const std::string& cert_path, const std::optional<std::string>& ca_pub_path,
                  std::ostream& out) {
  Bytes raw;
  cert::ImplicitCertificate certificate;
  try {
    raw = read_cert_like(cert_path);
    certificate = cert::ImplicitCertificate::decode(raw);
  } catch (const std::exception& e) {
    out << "cert-info: " << e.what() << "\n";
    return 1;
  }

  out << "subject_id:  " << hex_encode(ByteSpan(certificate.subject_id)) << "\n";
  out << "issuer_id:   " << hex_encode(ByteSpan(certificate.issuer_id)) << "\n";
  out << "serial:      " << certificate.serial << "\n";
  out << "valid_from:  " << certificate.valid_from << "\n";
  out << "valid_to:    " << certificate.valid_to << "\n";
  out << "curve_id:    " << static_cast<int>(certificate.curve_id) << "\n";
  out << "key_usage:   " << static_cast<int>(certificate.key_usage) << "\n";
  auto pu = certificate.reconstruction_point.encode_compressed();
  out << "reconstruction_point: " << hex_encode(ByteSpan(pu.data(), pu.size())) << "\n";

  if (ca_pub_path) {
    try {
      Bytes ca_raw = read_cert_like(*ca_pub_path);
      auto q_ca = crypto::Point::from_uncompressed(ca_raw);
      auto derived = cert::derive_public_key(certificate, q_ca);
      auto enc = derived.encode_uncompressed();
      out << "derived_public_key: " << hex_encode(ByteSpan(enc.data(), enc.size())) << "\n";
    } catch (const std::exception& e) {
      out << "cert-info: CA public key: " << e.what() << "\n";
      return 1;
    }
  }
  return 0;
}

// ---- attack ----

int cmd_attack(const RunConfig& config, std::ostream& out) {
  if (!config.protocol) {
    out << "attack: --protocol is required\n";
    return 2;
  }
  ProtocolKind kind = *config.protocol;
  uint64_t seed = effective_seed(config);
  size_t runs = config.runs == 0 ? 1 : config.runs;

  analysis::LeakSet leak;
  leak.longterm_keys = config.leak_longterm || (!config.leak_longterm && !config.leak_psk);
  leak.psk = config.leak_psk;

  // Static-KD sessions fall only to leaked long-term keys; a PSK alone
  // recovers nothing, and STS resists either way.
  const bool expect_recovery = proto::is_static_kd(kind) && leak.longterm_keys;
  size_t recovered_count = 0, matched_expectation = 0;
  json attempts = json::array();

  for (size_t i = 0; i < runs; ++i) {
    uint64_t run_seed = seed + i;
    auto result = runner::run_seeded_handshake(kind, run_seed);
    if (!result.ok()) {
      out << "attack: honest handshake failed (seed " << run_seed << ")\n";
      return 1;
    }
    DeterministicRandom prov_rng(run_seed, 0);
    auto prov = runner::provision(prov_rng);
    auto scenario = analysis::make_scenario(result, prov, leak);
    auto recovered = analysis::forward_secrecy_oracle(scenario);

    bool match = recovered && recovered->key_digest() == *result.key_digest_a;
    if (match) ++recovered_count;
    bool as_expected = expect_recovery ? match : !match;
    if (as_expected) ++matched_expectation;

    attempts.push_back({{"seed", run_seed},
                        {"recovered", match},
                        {"as_expected", as_expected}});
  }

  bool pass = matched_expectation == runs;
  if (config.format == OutputFormat::Structured) {
    json j = {{"protocol", std::string(proto::to_string(kind))},
              {"leak",
               {{"longterm", leak.longterm_keys}, {"psk", leak.psk}}},
              {"runs", runs},
              {"recovered", recovered_count},
              {"expected_posture", expect_recovery ? "recoverable" : "forward-secret"},
              {"pass", pass},
              {"attempts", std::move(attempts)}};
    out << j.dump(2) << "\n";
  } else {
    out << "protocol: " << proto::to_string(kind) << "\n";
    out << "leaked material: " << (leak.longterm_keys ? "long-term private keys" : "")
        << (leak.longterm_keys && leak.psk ? " + " : "") << (leak.psk ? "pre-shared keys" : "")
        << "\n";
    out << "scenarios: " << runs << ", session key recovered in " << recovered_count << "\n";
    out << "expected posture: "
        << (expect_recovery ? "static KD, key recoverable from the leaked material"
                            : "session keys not recoverable from the leaked material")
        << "\n";
    out << (pass ? "outcome matches the protocol's security posture\n"
                 : "OUTCOME DEVIATES FROM EXPECTED POSTURE\n");
  }
  return pass ? 0 : 1;
}

}  // namespace ecqvkd::cli
