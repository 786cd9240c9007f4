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

#ifndef ECQVKD_RUNNER_HPP
#define ECQVKD_RUNNER_HPP

#include <optional>
#include <string>

#include "ecqvkd/protocol.hpp"
#include "ecqvkd/transport.hpp"

// End-to-end plumbing: in-memory deployment (CA, two certified devices, a
// pairwise pre-shared MAC key) and a driver that pumps a handshake over the
// simulated channel until both sides settle.

namespace ecqvkd::runner {

struct Provisioning {
  cert::CaState ca;
  cert::CertifiedIdentity device_a;
  cert::CertifiedIdentity device_b;
  SecretBytes pairwise_psk;  // 32 bytes, for PORAMB
};

/// CA keypair, two issued identities ("unit-a"/"unit-b" unless overridden),
/// and the pairwise MAC key, all drawn from `rng`.
Provisioning provision(RandomSource& rng, uint32_t valid_from = 1754784000,
                       uint32_t valid_to = 1786320000);

struct HandshakeResult {
  proto::ProtocolKind kind = proto::ProtocolKind::Sts;
  bool established_a = false;
  bool established_b = false;
  std::optional<proto::FailReason> failure_a;
  std::optional<proto::FailReason> failure_b;
  std::string failure_detail;

  std::optional<crypto::Digest> key_digest_a, key_digest_b;
  std::optional<crypto::Digest> premaster_digest_a, premaster_digest_b;

  // Full message sequence as seen on the wire (initiator's view covers both
  // directions in a two-party run).
  std::vector<proto::TranscriptEntry> transcript;
  std::string transcript_hex;
  Bytes transcript_binary;

  transport::ByteLedger ledger;
  std::string frame_log;
  double virtual_time_us = 0.0;
  double max_frame_latency_us = 0.0;
  size_t message_count = 0;

  bool ok() const { return established_a && established_b; }
  /// The failure reason of whichever side failed first, if any.
  std::optional<proto::FailReason> failure() const {
    return failure_a ? failure_a : failure_b;
  }
};

struct RunOptions {
  transport::ChannelConfig channel;
  transport::AdversaryHook adversary;  // optional
};

/// Drives one handshake end to end. Each side consumes its own RandomSource.
HandshakeResult run_handshake(proto::ProtocolKind kind, const Provisioning& prov,
                              RandomSource& rng_a, RandomSource& rng_b,
                              const RunOptions& options = {});

/// Seeded convenience wrapper: provisioning from stream 0, sessions from
/// streams 1 and 2 of the given seed.
HandshakeResult run_seeded_handshake(proto::ProtocolKind kind, uint64_t seed,
                                     const RunOptions& options = {});

}  // namespace ecqvkd::runner

#endif  // ECQVKD_RUNNER_HPP
