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

// End-to-end acceptance gate. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ecqvkd/analysis.hpp"
#include "ecqvkd/cli.hpp"

using namespace ecqvkd;
using proto::ProtocolKind;
using proto::StepLabel;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Criterion = std::function<Outcome()>;

Outcome pass_with(std::string detail) { return {true, std::move(detail)}; }
Outcome fail_with(std::string detail) { return {false, std::move(detail)}; }

// --- 1. Overhead exactness -------------------------------------------------

Outcome check_overhead_exactness() {
  struct Row {
    ProtocolKind kind;
    size_t steps;
    size_t bytes;
    std::vector<size_t> per_step;
  };
  const Row table[] = {
      {ProtocolKind::SEcdsa, 4, 427, {48, 213, 165, 1}},
      {ProtocolKind::Sts, 4, 491, {80, 245, 165, 1}},
      {ProtocolKind::Scianc, 4, 362, {149, 149, 32, 32}},
      {ProtocolKind::Poramb, 6, 820, {48, 48, 165, 165, 197, 197}},
  };

  for (const auto& row : table) {
    auto report = analysis::overhead_report(row.kind);
    if (report.step_count != row.steps || report.total_bytes != row.bytes) {
      std::ostringstream ss;
      ss << proto::to_string(row.kind) << ": got " << report.step_count << " steps / "
         << report.total_bytes << " B, want " << row.steps << " / " << row.bytes;
      return fail_with(ss.str());
    }
    for (size_t i = 0; i < row.per_step.size(); ++i) {
      if (report.steps[i].bytes != row.per_step[i]) {
        std::ostringstream ss;
        ss << proto::to_string(row.kind) << " step " << i << ": " << report.steps[i].bytes
           << " B, want " << row.per_step[i];
        return fail_with(ss.str());
      }
    }
  }

  auto secdsa = analysis::overhead_report(ProtocolKind::SEcdsa);
  if (secdsa.ext_extra_steps != 1 || secdsa.ext_extra_bytes != 192) {
    return fail_with("s-ecdsa extension delta is not +1 step / +192 B");
  }
  for (ProtocolKind kind : {ProtocolKind::StsOpt1, ProtocolKind::StsOpt2}) {
    if (analysis::overhead_report(kind).total_bytes != 491) {
      return fail_with("sts optimization variant does not keep the 491 B volume");
    }
  }
  return pass_with(
      "live encodings: s-ecdsa 4/427(+1/+192), sts 4/491, scianc 4/362, poramb 6/820");
}

// --- 2. ECQV correctness ---------------------------------------------------

Outcome check_ecqv_correctness() {
  DeterministicRandom rng(1001);
  cert::DeviceId issuer{};
  issuer.fill('C');
  auto ca = cert::CaState::create(issuer, rng);

  for (int i = 0; i < 100; ++i) {
    cert::DeviceId id{};
    rng.fill(id);
    auto request = cert::cert_request(ByteSpan(id.data(), id.size()), rng);
    auto issuance = ca.issue(request, 1000, 2000, rng);
    auto identity =
        cert::cert_receive(request, issuance.certificate, issuance.r, ca.public_key());
    if (crypto::Point::mul_generator(identity.private_key) != identity.public_key) {
      return fail_with("reconstructed key pair mismatch");
    }
    if (cert::derive_public_key(identity.certificate, ca.public_key()) !=
        identity.public_key) {
      return fail_with("implicit public key derivation mismatch");
    }
  }

  // Single-byte corruption of the certificate (all 101 positions) and of r
  // (all 32 positions) must be detected.
  cert::DeviceId id{};
  id.fill('v');
  auto request = cert::cert_request(ByteSpan(id.data(), id.size()), rng);
  auto issuance = ca.issue(request, 1000, 2000, rng);
  auto enc = issuance.certificate.encode();

  size_t undetected = 0;
  for (size_t pos = 0; pos < enc.size(); ++pos) {
    auto tampered = Bytes(enc.begin(), enc.end());
    tampered[pos] ^= 0xff;
    try {
      auto cert = cert::ImplicitCertificate::decode(tampered);
      (void)cert::cert_receive(request, cert, issuance.r, ca.public_key());
      ++undetected;
    } catch (const cert::CertificateError&) {
      // detected (decode failure or reconstruction mismatch)
    }
  }
  for (size_t pos = 0; pos < 32; ++pos) {
    auto bytes = issuance.r.bytes();
    bytes[pos] ^= 0xff;
    try {
      auto bad_r = crypto::Scalar::from_bytes(bytes);
      (void)cert::cert_receive(request, issuance.certificate, bad_r, ca.public_key());
      ++undetected;
    } catch (const cert::CertificateError&) {
    } catch (const crypto::CryptoError&) {
      // flip pushed the scalar out of range; also detected
    }
  }
  if (undetected != 0) {
    return fail_with(std::to_string(undetected) + " corruptions went undetected");
  }
  return pass_with("100 honest identities verified; 133/133 corruption positions detected");
}

// --- 3. Key agreement ------------------------------------------------------

Outcome check_key_agreement() {
  size_t runs = 0;
  for (ProtocolKind kind : proto::kAllProtocolKinds) {
    for (uint64_t seed = 1; seed <= 50; ++seed) {
      auto result = runner::run_seeded_handshake(kind, seed);
      if (!result.ok()) {
        return fail_with(std::string(proto::to_string(kind)) + " seed " +
                         std::to_string(seed) + " did not establish");
      }
      if (!result.key_digest_a || !result.key_digest_b ||
          !(*result.key_digest_a == *result.key_digest_b)) {
        return fail_with(std::string(proto::to_string(kind)) + " seed " +
                         std::to_string(seed) + " derived different session keys");
      }
      ++runs;
    }
  }
  return pass_with(std::to_string(runs) + " seeded honest runs established identical K_S");
}

// --- 4. Forward secrecy dichotomy -------------------------------------------

Outcome check_forward_secrecy() {
  const ProtocolKind recoverable[] = {ProtocolKind::SEcdsa, ProtocolKind::Scianc,
                                      ProtocolKind::Poramb};
  for (ProtocolKind kind : recoverable) {
    size_t recovered = 0;
    for (uint64_t seed = 100; seed < 150; ++seed) {
      auto result = runner::run_seeded_handshake(kind, seed);
      if (!result.ok()) return fail_with("honest run failed");
      DeterministicRandom prov_rng(seed, 0);
      auto prov = runner::provision(prov_rng);
      auto scenario = analysis::make_scenario(result, prov, analysis::LeakSet{true, true});
      auto keys = analysis::forward_secrecy_oracle(scenario);
      if (keys && keys->key_digest() == *result.key_digest_a) ++recovered;
    }
    if (recovered != 50) {
      return fail_with(std::string(proto::to_string(kind)) + ": recovered only " +
                       std::to_string(recovered) + "/50 sessions");
    }
  }

  size_t resisted = 0;
  for (uint64_t seed = 200; seed < 250; ++seed) {
    auto result = runner::run_seeded_handshake(ProtocolKind::Sts, seed);
    if (!result.ok()) return fail_with("honest sts run failed");
    DeterministicRandom prov_rng(seed, 0);
    auto prov = runner::provision(prov_rng);
    auto scenario = analysis::make_scenario(result, prov, analysis::LeakSet{true, true});
    if (!analysis::forward_secrecy_oracle(scenario).has_value()) ++resisted;
  }
  if (resisted != 50) {
    return fail_with("sts: oracle recovered " + std::to_string(50 - resisted) +
                     " sessions that should be forward secret");
  }
  return pass_with("recovered 50/50 for s-ecdsa, scianc, poramb; failed 50/50 for sts");
}

// --- 5. Key reuse dichotomy --------------------------------------------------

Outcome check_key_reuse() {
  auto sts = analysis::key_reuse_probe(ProtocolKind::Sts, 100, 3001);
  if (sts.premaster_distinct != 100) {
    return fail_with("sts premasters not all distinct: " +
                     std::to_string(sts.premaster_distinct) + "/100");
  }
  for (ProtocolKind kind : {ProtocolKind::SEcdsa, ProtocolKind::SEcdsaExt,
                            ProtocolKind::Scianc, ProtocolKind::Poramb}) {
    auto probe = analysis::key_reuse_probe(kind, 100, 3001);
    if (probe.premaster_distinct != 1) {
      return fail_with(std::string(proto::to_string(kind)) + ": expected 1 premaster, got " +
                       std::to_string(probe.premaster_distinct));
    }
  }
  return pass_with("sts 100/100 distinct premasters; every static-KD protocol exactly 1");
}

// --- 6. Timing algebra -------------------------------------------------------

Outcome check_timing_algebra() {
  DeterministicRandom rng(4001);
  auto serial_graph = proto::opt_schedule(ProtocolKind::Sts);
  auto opt1_graph = proto::opt_schedule(ProtocolKind::StsOpt1);
  auto opt2_graph = proto::opt_schedule(ProtocolKind::StsOpt2);

  for (int i = 0; i < 1000; ++i) {
    std::array<int64_t, 4> a{}, b{};
    uint8_t raw[16];
    rng.fill(raw);
    for (int j = 0; j < 4; ++j) {
      a[static_cast<size_t>(j)] = (raw[2 * j] << 8 | raw[2 * j + 1]) % 10000;
      b[static_cast<size_t>(j)] = (raw[8 + 2 * j] << 8 | raw[8 + 2 * j + 1]) % 10000;
    }
    analysis::TimingModel ident{analysis::OpTiming{"a", a}, analysis::OpTiming{"a", a},
                                analysis::Variant::Serial};
    analysis::TimingModel mixed{analysis::OpTiming{"a", a}, analysis::OpTiming{"b", b},
                                analysis::Variant::Serial};

    int64_t serial_i = analysis::total_time_serial(ident);
    if (analysis::simulate_schedule(ident, serial_graph) != serial_i) {
      return fail_with("serial graph disagrees with the closed form");
    }
    ident.variant = analysis::Variant::Opt1;
    int64_t opt1_i = analysis::total_time_opt(ident);
    if (analysis::simulate_schedule(ident, opt1_graph) != opt1_i) {
      return fail_with("opt-I graph disagrees with the closed form");
    }
    ident.variant = analysis::Variant::Opt2;
    int64_t opt2_i = analysis::total_time_opt(ident);
    if (analysis::simulate_schedule(ident, opt2_graph) != opt2_i) {
      return fail_with("opt-II graph disagrees with the closed form");
    }
    if (serial_i - opt1_i != a[1]) return fail_with("serial - optI != T_Op2");
    if (serial_i - opt2_i != a[1] + a[2]) return fail_with("serial - optII != T_Op2 + T_Op3");

    int64_t serial_m = analysis::total_time_serial(mixed);
    mixed.variant = analysis::Variant::Opt1;
    int64_t opt1_m = analysis::total_time_opt(mixed);
    mixed.variant = analysis::Variant::Opt2;
    int64_t opt2_m = analysis::total_time_opt(mixed);
    if (!(opt2_m <= opt1_m && opt1_m <= serial_m)) {
      return fail_with("opt-II <= opt-I <= serial violated");
    }
  }
  return pass_with("1000 random vectors: graph == closed forms, ordering and identities exact");
}

// --- 7. Relative performance -------------------------------------------------

Outcome check_relative_performance() {
  const size_t runs = 300;
  auto stats = analysis::bench_all(runs, 5001);
  auto median_of = [&](ProtocolKind kind) {
    for (const auto& st : stats) {
      if (st.kind == kind) return st.median_us;
    }
    return -1.0;
  };

  double scianc = median_of(ProtocolKind::Scianc);
  double poramb = median_of(ProtocolKind::Poramb);
  double secdsa = median_of(ProtocolKind::SEcdsa);
  double sts = median_of(ProtocolKind::Sts);
  double ratio = sts / secdsa;

  std::ostringstream ss;
  ss.precision(1);
  ss << std::fixed << "medians us: scianc " << scianc << " < poramb " << poramb
     << " < s-ecdsa " << secdsa << " < sts " << sts << "; sts/s-ecdsa ratio "
     << std::setprecision(3) << ratio;

  if (!(scianc < poramb && poramb < secdsa && secdsa < sts)) {
    return fail_with("compute-time ordering broken: " + ss.str());
  }
  if (!(ratio >= 1.05 && ratio <= 1.6)) {
    return fail_with("sts/s-ecdsa ratio outside [1.05, 1.6]: " + ss.str());
  }
  return pass_with(ss.str());
}

// --- 8. MitM tamper rejection -------------------------------------------------

Outcome check_tamper_rejection() {
  struct Field {
    StepLabel step;
    size_t offset;
    size_t length;
    const char* name;
  };
  // STS wire layout: A1 = id(16) xg(64); B1 = id(16) cert(101) xg(64) resp(64);
  // A2 = cert(101) resp(64).
  const Field fields[] = {
      {StepLabel::A1, 16, 64, "xg_a"},
      {StepLabel::B1, 117, 64, "xg_b"},
      {StepLabel::B1, 181, 64, "resp_b"},
      {StepLabel::A2, 101, 64, "resp_a"},
  };

  size_t total = 0, rejected = 0, auth_failures = 0;
  for (const auto& field : fields) {
    for (size_t i = 0; i < field.length; ++i) {
      runner::RunOptions options;
      options.adversary = transport::make_tamper_hook(field.step, field.offset + i);
      auto result = runner::run_seeded_handshake(ProtocolKind::Sts, 6001 + total, options);
      ++total;
      if (!result.ok()) {
        ++rejected;
        if (result.failure() == proto::FailReason::Authentication) ++auth_failures;
      }
    }
  }
  if (rejected != total) {
    return fail_with(std::to_string(total - rejected) + "/" + std::to_string(total) +
                     " tampered runs were accepted");
  }
  std::ostringstream ss;
  ss << rejected << "/" << total << " single-byte tampers rejected (" << auth_failures
     << " at signature verification, " << (rejected - auth_failures)
     << " at point validation)";
  return pass_with(ss.str());
}

// --- 9. Transport round-trip ---------------------------------------------------

Outcome check_transport_roundtrip() {
  for (size_t len = 1; len <= transport::kMaxTpPayload; ++len) {
    Bytes payload(len);
    for (size_t i = 0; i < len; ++i) payload[i] = static_cast<uint8_t>(i * 131 + len);
    auto frames = transport::fragment(payload, 0x321);
    if (frames.size() != transport::frame_count_for(len)) {
      return fail_with("frame count mismatch at length " + std::to_string(len));
    }
    if (transport::reassemble(frames) != payload) {
      return fail_with("round-trip mismatch at length " + std::to_string(len));
    }
  }

  const std::pair<ProtocolKind, size_t> totals[] = {
      {ProtocolKind::Sts, 491},      {ProtocolKind::StsOpt1, 491},
      {ProtocolKind::StsOpt2, 491},  {ProtocolKind::SEcdsa, 427},
      {ProtocolKind::SEcdsaExt, 619}, {ProtocolKind::Scianc, 362},
      {ProtocolKind::Poramb, 820},
  };
  for (const auto& [kind, total] : totals) {
    auto result = runner::run_seeded_handshake(kind, 7001);
    if (!result.ok()) return fail_with("handshake failed during ledger check");
    if (result.ledger.total_app_bytes() != total) {
      return fail_with(std::string(proto::to_string(kind)) + " ledger total " +
                       std::to_string(result.ledger.total_app_bytes()) + " != " +
                       std::to_string(total));
    }
  }
  return pass_with("fragment/reassemble identity for 1..4095; ledger conserved per protocol");
}

}  // namespace

int main() {
  const std::pair<const char*, Criterion> criteria[] = {
      {"overhead-exactness", check_overhead_exactness},
      {"ecqv-correctness", check_ecqv_correctness},
      {"key-agreement", check_key_agreement},
      {"forward-secrecy-dichotomy", check_forward_secrecy},
      {"key-reuse-dichotomy", check_key_reuse},
      {"timing-algebra", check_timing_algebra},
      {"relative-performance", check_relative_performance},
      {"mitm-tamper-rejection", check_tamper_rejection},
      {"transport-roundtrip", check_transport_roundtrip},
  };

  int failures = 0;
  for (const auto& [name, criterion] : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion();
    } catch (const std::exception& e) {
      outcome = fail_with(std::string("exception: ") + e.what());
    }
    auto t1 = std::chrono::steady_clock::now();
    double secs = std::chrono::duration<double>(t1 - t0).count();
    std::printf("[%s] %-28s (%.2fs) %s\n", outcome.pass ? "PASS" : "FAIL", name, secs,
                outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }

  if (failures == 0) {
    std::printf("all %zu acceptance criteria passed\n", std::size(criteria));
  } else {
    std::printf("%d acceptance criteria FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
