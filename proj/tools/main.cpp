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

#include <CLI11.hpp>

#include <iostream>

#include "ecqvkd/cli.hpp"

using ecqvkd::cli::OutputFormat;
using ecqvkd::cli::RunConfig;

namespace {

void add_common(CLI::App* cmd, RunConfig& config, std::string& protocol, std::string& format,
                std::string& tamper, std::vector<std::string>& leak) {
  cmd->add_option("--protocol", protocol,
                  "protocol kind: sts, sts-opt1, sts-opt2, s-ecdsa, s-ecdsa-ext, scianc, poramb");
  cmd->add_option("--seed", [&config](const std::vector<std::string>& vals) {
        config.seed = std::stoull(vals.front());
        return true;
      },
      "randomness tape seed (deterministic runs)");
  cmd->add_option("--runs", config.runs, "repetition count");
  cmd->add_option("--timing-file", [&config](const std::vector<std::string>& vals) {
        config.timing_file = vals.front();
        return true;
      },
      "JSON file with device_a/device_b op timings");
  cmd->add_option("--tamper", tamper, "FIELD:BYTE to flip in transit (e.g. resp:0, b1.xg:12)");
  cmd->add_option("--leak", leak, "leaked material for attack scenarios: longterm, psk")
      ->delimiter(',');
  cmd->add_option("--format", format, "output format: text or structured");
  cmd->add_option("--out", config.out_dir, "artifact output directory (default $ECQV_KD_OUT)");
  cmd->add_option("--nominal-bitrate", config.channel.nominal_bitrate,
                  "CAN-FD nominal phase bit rate (bit/s)");
  cmd->add_option("--data-bitrate", config.channel.data_bitrate,
                  "CAN-FD data phase bit rate (bit/s)");
}

int finalize_config(RunConfig& config, const std::string& protocol, const std::string& format,
                    const std::string& tamper, const std::vector<std::string>& leak) {
  if (!protocol.empty()) {
    auto kind = ecqvkd::proto::protocol_from_string(protocol);
    if (!kind) {
      std::cerr << "unknown protocol: " << protocol << "\n";
      return 2;
    }
    config.protocol = *kind;
  }
  if (!format.empty()) {
    if (format == "text") {
      config.format = OutputFormat::Text;
    } else if (format == "structured") {
      config.format = OutputFormat::Structured;
    } else {
      std::cerr << "unknown format: " << format << "\n";
      return 2;
    }
  }
  if (!tamper.empty()) {
    auto spec = ecqvkd::cli::parse_tamper(tamper);
    if (!spec) {
      std::cerr << "bad tamper spec (want FIELD:BYTE): " << tamper << "\n";
      return 2;
    }
    config.tamper = *spec;
  }
  for (const auto& item : leak) {
    if (item == "longterm") {
      config.leak_longterm = true;
    } else if (item == "psk") {
      config.leak_psk = true;
    } else {
      std::cerr << "unknown leak item: " << item << "\n";
      return 2;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECQV implicit-certificate session key derivation kit"};
  app.require_subcommand(1);

  struct SubState {
    RunConfig config;
    std::string protocol, format, tamper;
    std::vector<std::string> leak;
  };
  SubState handshake_state, bench_state, report_state, attack_state;

  CLI::App* handshake = app.add_subcommand("handshake", "run one handshake over the simulated bus");
  add_common(handshake, handshake_state.config, handshake_state.protocol, handshake_state.format,
             handshake_state.tamper, handshake_state.leak);
  CLI::App* bench = app.add_subcommand("bench", "measure op timings and protocol run times");
  add_common(bench, bench_state.config, bench_state.protocol, bench_state.format,
             bench_state.tamper, bench_state.leak);
  CLI::App* report = app.add_subcommand("report", "transmission overhead and threat matrix");
  add_common(report, report_state.config, report_state.protocol, report_state.format,
             report_state.tamper, report_state.leak);
  CLI::App* attack = app.add_subcommand("attack", "compromise oracle against recorded sessions");
  add_common(attack, attack_state.config, attack_state.protocol, attack_state.format,
             attack_state.tamper, attack_state.leak);

  std::string cert_file, ca_pub_file;
  CLI::App* cert_info = app.add_subcommand("cert-info", "decode a certificate file (raw or hex)");
  cert_info->add_option("file", cert_file, "certificate file")->required();
  cert_info->add_option("--ca-public", ca_pub_file,
                        "CA public key file (64-byte raw x||y point or hex)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (handshake->parsed()) {
      auto& st = handshake_state;
      if (int rc = finalize_config(st.config, st.protocol, st.format, st.tamper, st.leak)) return rc;
      return ecqvkd::cli::cmd_handshake(st.config, std::cout);
    }
    if (bench->parsed()) {
      auto& st = bench_state;
      if (int rc = finalize_config(st.config, st.protocol, st.format, st.tamper, st.leak)) return rc;
      return ecqvkd::cli::cmd_bench(st.config, std::cout);
    }
    if (report->parsed()) {
      auto& st = report_state;
      if (int rc = finalize_config(st.config, st.protocol, st.format, st.tamper, st.leak)) return rc;
      return ecqvkd::cli::cmd_report(st.config, std::cout);
    }
    if (attack->parsed()) {
      auto& st = attack_state;
      if (int rc = finalize_config(st.config, st.protocol, st.format, st.tamper, st.leak)) return rc;
      return ecqvkd::cli::cmd_attack(st.config, std::cout);
    }
    if (cert_info->parsed()) {
      std::optional<std::string> ca_pub;
      if (!ca_pub_file.empty()) ca_pub = ca_pub_file;
      return ecqvkd::cli::cmd_cert_info(cert_file, ca_pub, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
