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

#ifndef ECQVKD_ANALYSIS_HPP
#define ECQVKD_ANALYSIS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecqvkd/runner.hpp"

// Quantitative models and adversarial oracles: the two-device operation
// timing algebra with its optimization variants, the per-step transmission
// overhead report computed from live encodings, compromise/key-reuse
// oracles, and the protocol threat matrix they back.

namespace ecqvkd::analysis {

// ---- timing model --------------------------------------------------------

/// Measured durations of the four handshake operations on one device:
///   Op1  request phase, random XG point derivation
///   Op2  public key and premaster session key generation
///   Op3  auth signature derivation and encryption
///   Op4  auth signature decryption and verification
struct OpTiming {
  std::string device;
  std::array<int64_t, 4> op_us{};  // microseconds, nonnegative

  int64_t op(int index) const { return op_us.at(static_cast<size_t>(index - 1)); }
  int64_t total() const { return op_us[0] + op_us[1] + op_us[2] + op_us[3]; }
};

enum class Variant { Serial, Opt1, Opt2 };

struct TimingModel {
  OpTiming device_a;
  OpTiming device_b;
  Variant variant = Variant::Serial;
};

/// Serial total: every operation of both devices on the critical path.
int64_t total_time_serial(const TimingModel& model);

/// Residual serial cost of overlapping operation `op_index` (2 or 3):
/// zero for identical devices, |T_OpAx - T_OpBx| otherwise.
int64_t overlap_adjustment(const TimingModel& model, int op_index);

/// Closed-form makespan of the model's variant. Overlapped operations
/// contribute max(T_OpAx, T_OpBx), so for identical devices:
///   opt I  = 2*T1 + T2 + 2*T3 + 2*T4
///   opt II = 2*T1 + T2 + T3 + 2*T4
int64_t total_time_opt(const TimingModel& model);

/// Longest-path makespan of an explicit dependency graph (from
/// proto::opt_schedule). Throws std::invalid_argument on a cyclic graph.
int64_t simulate_schedule(const TimingModel& model, const proto::OpGraph& graph);

// ---- overhead report -----------------------------------------------------

struct StepOverhead {
  proto::StepLabel step = proto::StepLabel::A1;
  std::vector<std::pair<std::string, size_t>> fields;  // (tag, bytes)
  size_t bytes = 0;
};

struct OverheadReport {
  proto::ProtocolKind kind = proto::ProtocolKind::Sts;
  std::vector<StepOverhead> steps;
  size_t step_count = 0;
  size_t total_bytes = 0;
  // Extension delta, only for the base S-ECDSA row (extra steps / bytes).
  std::optional<size_t> ext_extra_steps;
  std::optional<size_t> ext_extra_bytes;
};

/// Per-step field breakdown and totals, computed by driving a live handshake
/// and measuring the actual encodings.
OverheadReport overhead_report(proto::ProtocolKind kind);

// ---- compromise oracle ---------------------------------------------------

/// A recorded honest run plus whatever the attacker captured afterwards.
struct CompromiseScenario {
  proto::ProtocolKind kind = proto::ProtocolKind::Sts;
  std::vector<std::pair<proto::StepLabel, Bytes>> transcript;  // wire order
  crypto::Point q_ca;
  std::optional<crypto::Scalar> leaked_private_a;
  std::optional<crypto::Scalar> leaked_private_b;
  std::optional<SecretBytes> leaked_psk;
};

struct LeakSet {
  bool longterm_keys = false;
  bool psk = false;
};

CompromiseScenario make_scenario(const runner::HandshakeResult& result,
                                 const runner::Provisioning& prov, LeakSet leak);

/// Best generic attack on a recorded session: recompute every premaster
/// candidate derivable from the leaked material and the transcript, rerun
/// the protocol's key schedule, and accept a candidate only if it checks
/// out against the transcript's own authenticators (or, for the base
/// S-ECDSA which has none, return the static-DH candidate). Returns the
/// recovered session keys, or nullopt when no derivable candidate survives.
std::optional<proto::SessionKeys> forward_secrecy_oracle(const CompromiseScenario& scenario);

// ---- key reuse probe -----------------------------------------------------

struct KeyReuseReport {
  proto::ProtocolKind kind = proto::ProtocolKind::Sts;
  size_t runs = 0;
  size_t premaster_distinct = 0;
  size_t session_key_distinct = 0;
};

/// Fixed certificates, `runs` fresh sessions; counts distinct premasters and
/// session keys (by digest).
KeyReuseReport key_reuse_probe(proto::ProtocolKind kind, size_t runs, uint64_t seed);

/// Testable core of the "key derivation exploit" row: one premaster expanded
/// under each protocol label yields pairwise-distinct session keys, and the
/// encryption/MAC halves never coincide.
bool kdf_domain_separation_holds();

// ---- threat matrix -------------------------------------------------------

enum class Rating { Weak, Partial, Full };  // X, triangle, check
enum class CellBasis { Oracle, Annotated };

struct ThreatCell {
  Rating rating = Rating::Weak;
  CellBasis basis = CellBasis::Annotated;
  std::string note;
};

struct ThreatMatrix {
  std::vector<std::string> rows;
  std::vector<proto::ProtocolKind> columns;
  std::vector<std::vector<ThreatCell>> cells;  // [row][column]
};

std::string_view to_string(Rating rating);
std::string_view to_symbol(Rating rating);  // "X", "triangle", "check" glyphs

/// Five-row comparison (data exposure, node capturing, key data reuse, key
/// derivation exploit, auth procedure). Mechanizable cells are backed by the
/// oracles above; judgement calls carry a fixed rating as annotation.
ThreatMatrix threat_matrix(uint64_t seed);

// ---- benchmark harness ---------------------------------------------------

/// Wall-clock medians of Op1..Op4 over `reps` repetitions.
OpTiming measure_op_timings(const std::string& device_label, int reps, uint64_t seed);

struct ProtocolBenchStats {
  proto::ProtocolKind kind = proto::ProtocolKind::Sts;
  size_t runs = 0;
  double mean_us = 0.0;
  double stddev_us = 0.0;
  double median_us = 0.0;
  double min_us = 0.0;
  double max_us = 0.0;
};

/// Full-run wall time (state machines + transport stack) for one protocol.
ProtocolBenchStats bench_protocol(proto::ProtocolKind kind, size_t runs, uint64_t seed);

/// All protocols, interleaved round-robin to decorrelate machine drift.
std::vector<ProtocolBenchStats> bench_all(size_t runs, uint64_t seed);

/// Executes the real STS crypto operations on two worker threads following
/// the variant's block schedule and returns the measured wall time (us).
double measure_sts_schedule_wall(Variant variant, uint64_t seed);

}  // namespace ecqvkd::analysis

#endif  // ECQVKD_ANALYSIS_HPP
