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

#ifndef ECQVKD_CLI_HPP
#define ECQVKD_CLI_HPP

#include <iosfwd>
#include <optional>
#include <string>

#include "ecqvkd/analysis.hpp"

// Command implementations behind the ecqv-kd binary: handshake runs,
// benchmarks, overhead/threat reports, and attack scenarios. Keys never
// appear in any artifact; only SHA-256 digests of established keys do.

namespace ecqvkd::cli {

enum class OutputFormat { Text, Structured };

struct TamperSpec {
  std::string field;  // "resp", "xg", or qualified "b1.resp"
  size_t byte_index = 0;
};

struct RunConfig {
  std::optional<proto::ProtocolKind> protocol;
  std::optional<uint64_t> seed;  // absent: one is drawn from the OS and reported
  size_t runs = 10;
  std::optional<std::string> timing_file;
  OutputFormat format = OutputFormat::Text;
  std::string out_dir;  // empty: $ECQV_KD_OUT, then "./out"
  std::optional<TamperSpec> tamper;
  bool leak_longterm = false;
  bool leak_psk = false;
  transport::ChannelConfig channel;
};

/// "FIELD:BYTE" -> spec; nullopt on parse failure.
std::optional<TamperSpec> parse_tamper(const std::string& text);

/// Maps a tamper field name onto (step, application-byte offset) within the
/// protocol's wire flow. Bare tags match their first occurrence; "b1.resp"
/// style names pin the step.
std::optional<std::pair<proto::StepLabel, size_t>> resolve_tamper(proto::ProtocolKind kind,
                                                                  const TamperSpec& spec);

uint64_t effective_seed(const RunConfig& config);
std::string resolve_out_dir(const RunConfig& config);

int cmd_handshake(const RunConfig& config, std::ostream& out);
int cmd_bench(const RunConfig& config, std::ostream& out);
int cmd_report(const RunConfig& config, std::ostream& out);
int cmd_attack(const RunConfig& config, std::ostream& out);

/// Decodes a certificate file (raw 101 bytes or hex) and prints its fields;
/// with a CA public key file (64-byte point, raw or hex) also derives the
/// subject's public key.
int cmd_cert_info(const std::string& cert_path, const std::optional<std::string>& ca_pub_path,
                  std::ostream& out);

/// Structured (JSON) renderings, shared by cmd_report and the tests that
/// check lossless round-tripping.
std::string overhead_report_json();
std::string threat_matrix_json(uint64_t seed);

}  // namespace ecqvkd::cli

#endif  // ECQVKD_CLI_HPP
