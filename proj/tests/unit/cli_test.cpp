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

#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ecqvkd/cli.hpp"

using namespace ecqvkd;
using namespace ecqvkd::cli;
using proto::ProtocolKind;
using proto::StepLabel;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("tamper spec parsing") {
  auto spec = parse_tamper("resp:0");
  REQUIRE(spec.has_value());
  CHECK(spec->field == "resp");
  CHECK(spec->byte_index == 0);

  auto qualified = parse_tamper("B1.XG:12");
  REQUIRE(qualified.has_value());
  CHECK(qualified->field == "b1.xg");
  CHECK(qualified->byte_index == 12);

  CHECK_FALSE(parse_tamper("resp").has_value());
  CHECK_FALSE(parse_tamper(":3").has_value());
  CHECK_FALSE(parse_tamper("resp:").has_value());
  CHECK_FALSE(parse_tamper("resp:x").has_value());
}

TEST_CASE("tamper field resolution against the wire layouts") {
  // First resp on the STS wire is in B1 behind id(16)+cert(101)+xg(64).
  auto r = resolve_tamper(ProtocolKind::Sts, {"resp", 0});
  REQUIRE(r.has_value());
  CHECK(r->first == StepLabel::B1);
  CHECK(r->second == 181);

  auto r2 = resolve_tamper(ProtocolKind::Sts, {"a2.resp", 3});
  REQUIRE(r2.has_value());
  CHECK(r2->first == StepLabel::A2);
  CHECK(r2->second == 104);  // cert(101) + 3

  auto xg = resolve_tamper(ProtocolKind::Sts, {"xg", 0});
  REQUIRE(xg.has_value());
  CHECK(xg->first == StepLabel::A1);
  CHECK(xg->second == 16);

  auto nonce = resolve_tamper(ProtocolKind::SEcdsa, {"nonce", 1});
  REQUIRE(nonce.has_value());
  CHECK(nonce->first == StepLabel::A1);
  CHECK(nonce->second == 17);

  CHECK_FALSE(resolve_tamper(ProtocolKind::Sts, {"resp", 64}).has_value());  // off the end
  CHECK_FALSE(resolve_tamper(ProtocolKind::Sts, {"hello", 0}).has_value());
  CHECK_FALSE(resolve_tamper(ProtocolKind::Scianc, {"b9.resp", 0}).has_value());
}

TEST_CASE("cmd_handshake writes deterministic artifacts") {
  TempDir dir1("ecqvkd-cli-test-1");
  TempDir dir2("ecqvkd-cli-test-2");

  RunConfig config;
  config.protocol = ProtocolKind::Sts;
  config.seed = 42;
  config.out_dir = dir1.path.string();

  std::ostringstream out1;
  CHECK(cmd_handshake(config, out1) == 0);
  CHECK(out1.str().find("established: yes") != std::string::npos);
  CHECK(std::filesystem::exists(dir1.path / "transcript.hex"));
  CHECK(std::filesystem::exists(dir1.path / "transcript.bin"));
  CHECK(std::filesystem::exists(dir1.path / "frames.log"));
  CHECK(std::filesystem::exists(dir1.path / "result.json"));

  config.out_dir = dir2.path.string();
  std::ostringstream out2;
  CHECK(cmd_handshake(config, out2) == 0);

  // Identical (command, seed) -> byte-identical artifacts.
  for (const char* name : {"transcript.hex", "transcript.bin", "frames.log", "result.json"}) {
    CHECK(slurp(dir1.path / name) == slurp(dir2.path / name));
  }
  CHECK(out1.str() != "");

  SUBCASE("raw keys never appear in artifacts") {
    auto result_json = nlohmann::json::parse(slurp(dir1.path / "result.json"));
    CHECK(result_json.contains("key_digest_a"));
    CHECK_FALSE(result_json.contains("key_a"));
    CHECK_FALSE(result_json.contains("premaster"));
  }
}

TEST_CASE("cmd_handshake with tampering exits nonzero and reports authentication") {
  TempDir dir("ecqvkd-cli-test-tamper");
  RunConfig config;
  config.protocol = ProtocolKind::Sts;
  config.seed = 5;
  config.out_dir = dir.path.string();
  config.tamper = TamperSpec{"resp", 0};

  std::ostringstream out;
  CHECK(cmd_handshake(config, out) == 1);
  CHECK(out.str().find("failure: authentication") != std::string::npos);
}

TEST_CASE("cmd_attack matches protocol postures") {
  RunConfig config;
  config.seed = 77;
  config.runs = 3;

  for (ProtocolKind kind : {ProtocolKind::SEcdsa, ProtocolKind::Scianc}) {
    config.protocol = kind;
    std::ostringstream out;
    CHECK(cmd_attack(config, out) == 0);
    CHECK(out.str().find("recovered in 3") != std::string::npos);
  }

  config.protocol = ProtocolKind::Sts;
  std::ostringstream out;
  CHECK(cmd_attack(config, out) == 0);
  CHECK(out.str().find("recovered in 0") != std::string::npos);

  SUBCASE("a psk-only leak recovers nothing, and that is the expected posture") {
    config.protocol = ProtocolKind::SEcdsa;
    config.leak_psk = true;
    config.leak_longterm = false;
    std::ostringstream psk_out;
    CHECK(cmd_attack(config, psk_out) == 0);
    CHECK(psk_out.str().find("recovered in 0") != std::string::npos);
  }
}

TEST_CASE("structured report output parses back losslessly") {
  RunConfig config;
  config.seed = 88;
  config.format = OutputFormat::Structured;

  std::ostringstream out;
  CHECK(cmd_report(config, out) == 0);

  auto parsed = nlohmann::json::parse(out.str());
  CHECK(parsed.contains("overhead"));
  CHECK(parsed.contains("threat_matrix"));
  // Round-trip fixpoint.
  CHECK(nlohmann::json::parse(parsed.dump()) == parsed);

  // Totals from live encodings.
  bool saw_sts = false;
  for (const auto& entry : parsed["overhead"]) {
    if (entry["protocol"] == "sts") {
      saw_sts = true;
      CHECK(entry["total_bytes"] == 491);
      CHECK(entry["step_count"] == 4);
    }
    if (entry["protocol"] == "s-ecdsa") {
      CHECK(entry["total_bytes"] == 427);
      CHECK(entry["ext_extra_bytes"] == 192);
    }
  }
  CHECK(saw_sts);
}

TEST_CASE("cmd_bench accepts a timing file") {
  TempDir dir("ecqvkd-cli-test-bench");
  std::filesystem::create_directories(dir.path);
  auto timing_path = dir.path / "timings.json";
  {
    std::ofstream f(timing_path);
    f << R"({"device_a": {"op1_us": 100, "op2_us": 200, "op3_us": 300, "op4_us": 400},
             "device_b": {"op1_us": 100, "op2_us": 200, "op3_us": 300, "op4_us": 400}})";
  }

  RunConfig config;
  config.seed = 99;
  config.runs = 3;
  config.timing_file = timing_path.string();
  config.format = OutputFormat::Structured;

  std::ostringstream out;
  CHECK(cmd_bench(config, out) == 0);
  auto parsed = nlohmann::json::parse(out.str());
  CHECK(parsed["projection_us"]["serial"] == 2000);
  CHECK(parsed["projection_us"]["opt1"] == 1800);        // serial - T2
  CHECK(parsed["projection_us"]["opt2"] == 1500);        // serial - T2 - T3
  CHECK(parsed["projection_us"]["opt1_graph"] == 1800);  // graph agrees
  CHECK(parsed["projection_us"]["opt2_graph"] == 1500);
  CHECK(parsed["protocols"].size() == 7);
}

TEST_CASE("certificate import/export round-trips through files") {
  TempDir dir("ecqvkd-cli-test-certs");
  RunConfig config;
  config.protocol = ProtocolKind::Sts;
  config.seed = 64;
  config.out_dir = dir.path.string();

  std::ostringstream ignore;
  REQUIRE(cmd_handshake(config, ignore) == 0);

  // Hex and raw exports decode to the same certificate.
  std::ostringstream from_hex, from_raw;
  CHECK(cmd_cert_info((dir.path / "cert-a.hex").string(), std::nullopt, from_hex) == 0);
  CHECK(cmd_cert_info((dir.path / "cert-a.bin").string(), std::nullopt, from_raw) == 0);
  CHECK(from_hex.str() == from_raw.str());
  CHECK(from_hex.str().find("subject_id:") != std::string::npos);

  // With the CA key the implicit public key comes out.
  std::ostringstream with_ca;
  CHECK(cmd_cert_info((dir.path / "cert-b.hex").string(),
                      (dir.path / "ca-public.hex").string(), with_ca) == 0);
  CHECK(with_ca.str().find("derived_public_key:") != std::string::npos);

  std::ostringstream bad;
  CHECK(cmd_cert_info((dir.path / "frames.log").string(), std::nullopt, bad) == 1);
}

TEST_CASE("seed and output directory resolution") {
  RunConfig config;
  CHECK(config.runs == 10);  // benchmark repetitions default to ten
  config.seed = 1234;
  CHECK(effective_seed(config) == 1234);

  config.out_dir = "explicit";
  CHECK(resolve_out_dir(config) == "explicit");
  config.out_dir.clear();
  // Without the flag it falls back to the environment or "out"; both are
  // acceptable here depending on the test environment.
  std::string resolved = resolve_out_dir(config);
  CHECK_FALSE(resolved.empty());
}
