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

#include "ecqvkd/runner.hpp"

#include <cstring>
#include <deque>

namespace ecqvkd::runner {

using proto::Event;
using proto::ProtocolKind;
using proto::Role;
using proto::SessionContext;
using proto::StepResult;
using transport::Direction;

namespace {

cert::DeviceId make_id(const char* name) {
  cert::DeviceId id{};
  std::memcpy(id.data(), name, std::min(std::strlen(name), id.size()));
  return id;
}

cert::CertifiedIdentity enroll(cert::CaState& ca, const cert::DeviceId& id, uint32_t from,
                               uint32_t to, RandomSource& rng) {
  auto request = cert::cert_request(ByteSpan(id.data(), id.size()), rng);
  auto issuance = ca.issue(request, from, to, rng);
  return cert::cert_receive(request, issuance.certificate, issuance.r, ca.public_key());
}

}  // namespace

Provisioning provision(RandomSource& rng, uint32_t valid_from, uint32_t valid_to) {
  Provisioning prov{cert::CaState::create(make_id("fleet-ca"), rng), {}, {}, {}};
  prov.device_a = enroll(prov.ca, make_id("unit-a"), valid_from, valid_to, rng);
  prov.device_b = enroll(prov.ca, make_id("unit-b"), valid_from, valid_to, rng);
  prov.pairwise_psk = SecretBytes(rng.bytes(32));
  return prov;
}

HandshakeResult run_handshake(ProtocolKind kind, const Provisioning& prov, RandomSource& rng_a,
                              RandomSource& rng_b, const RunOptions& options) {
  HandshakeResult result;
  result.kind = kind;

  std::optional<SecretBytes> psk_a, psk_b;
  if (kind == ProtocolKind::Poramb) {
    psk_a = prov.pairwise_psk;
    psk_b = prov.pairwise_psk;
  }

  SessionContext a(kind, Role::Initiator, prov.device_a, prov.ca.public_key(), rng_a,
                   std::move(psk_a));
  SessionContext b(kind, Role::Responder, prov.device_b, prov.ca.public_key(), rng_b,
                   std::move(psk_b));

  transport::Channel channel(options.channel);
  if (options.adversary) channel.set_adversary(options.adversary);

  std::deque<std::pair<Role, proto::ProtocolMessage>> outbox;

  StepResult first = a.step(std::nullopt);
  for (auto& m : first.outgoing) outbox.emplace_back(Role::Initiator, std::move(m));

  while (!outbox.empty()) {
    auto [from, msg] = std::move(outbox.front());
    outbox.pop_front();

    Direction dir = from == Role::Initiator ? Direction::AtoB : Direction::BtoA;
    SessionContext& receiver = from == Role::Initiator ? b : a;

    transport::Channel::Delivery delivery;
    try {
      delivery = channel.send(dir, msg.step, msg.encode());
    } catch (const transport::TransportError& e) {
      // The adversary broke the framing itself; the receiver never gets a
      // reassemblable message.
      if (from == Role::Initiator) {
        result.failure_b = proto::FailReason::Transport;
      } else {
        result.failure_a = proto::FailReason::Transport;
      }
      result.failure_detail = e.what();
      break;
    }
    result.max_frame_latency_us =
        std::max(result.max_frame_latency_us, delivery.max_frame_latency_us);

    StepResult res = receiver.step_raw(delivery.payload);
    for (auto& m : res.outgoing) {
      outbox.emplace_back(from == Role::Initiator ? Role::Responder : Role::Initiator,
                          std::move(m));
    }
    if (res.event == Event::Failed) break;
  }

  result.established_a = a.established();
  result.established_b = b.established();
  if (a.failed()) {
    result.failure_a = a.failure();
    result.failure_detail = a.failure_detail();
  }
  if (b.failed()) {
    result.failure_b = b.failure();
    if (result.failure_detail.empty()) result.failure_detail = b.failure_detail();
  }
  if (const auto* keys = a.keys()) {
    result.key_digest_a = keys->key_digest();
    result.premaster_digest_a = keys->premaster_digest();
  }
  if (const auto* keys = b.keys()) {
    result.key_digest_b = keys->key_digest();
    result.premaster_digest_b = keys->premaster_digest();
  }

  result.transcript = a.transcript();
  result.transcript_hex = a.transcript_hex_dump();
  result.transcript_binary = a.transcript_binary();
  result.ledger = channel.ledger();
  result.frame_log = channel.frame_log_text();
  result.virtual_time_us = channel.virtual_time_us();
  result.message_count = result.transcript.size();
  return result;
}

HandshakeResult run_seeded_handshake(ProtocolKind kind, uint64_t seed,
                                     const RunOptions& options) {
  DeterministicRandom provision_rng(seed, 0);
  Provisioning prov = provision(provision_rng);
  DeterministicRandom rng_a(seed, 1);
  DeterministicRandom rng_b(seed, 2);
  return run_handshake(kind, prov, rng_a, rng_b, options);
}

}  // namespace ecqvkd::runner
