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

#ifndef ECQVKD_PROTOCOL_HPP
#define ECQVKD_PROTOCOL_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ecqvkd/cert.hpp"
#include "ecqvkd/crypto.hpp"

// Session key-derivation handshakes as message-driven state machines.
// All four protocols run over the same driver surface (SessionContext::step)
// and byte-exact wire layouts:
//
//   STS (dynamic KD, ephemeral ECDH + encrypted ECDSA over both ephemerals)
//     A1: ID(16) XG(64)                          80 B
//     B1: ID(16) Cert(101) XG(64) Resp(64)      245 B
//     A2: Cert(101) Resp(64)                    165 B
//     B2: ACK(1)                                  1 B   total 4 msgs, 491 B
//
//   STS opt. I/II (same bytes, reordered so Op2/Op3 can overlap)
//     A1: ID Cert XG (181)  B1: ID Cert XG (181)
//     B2: Resp (64)  A2: Resp (64)  B3: ACK (1)         total 5 msgs, 491 B
//
//   S-ECDSA (static KD, ECDSA over nonces)
//     A1: ID(16) Nonce(32)                       48 B
//     B1: ID(16) Cert(101) Sign(64) Nonce(32)   213 B
//     A2: Cert(101) Sign(64)                    165 B
//     B2: ACK(1)                                  1 B   total 4 msgs, 427 B
//     ext. variant: B2 carries Ext_Fin(96), A3 answers with Ext_Fin(96)
//
//   SCIANC (static KD, session-key MAC authentication)
//     A1/B1: ID(16) Nonce(32) Cert(101)         149 B each
//     A2/B2: Auth_MAC(32)                        32 B each   4 msgs, 362 B
//
//   PORAMB (static KD, pre-shared-key MAC authentication)
//     A1/B1: Hello(32) ID(16)                    48 B each
//     A2/B2: Cert(101) Nonce(32) MAC(32)        165 B each
//     A3/B3: Finish(197)                        197 B each   6 msgs, 820 B

namespace ecqvkd::proto {

enum class ProtocolKind { Sts, StsOpt1, StsOpt2, SEcdsa, SEcdsaExt, Scianc, Poramb };

inline constexpr ProtocolKind kAllProtocolKinds[] = {
    ProtocolKind::Sts,       ProtocolKind::StsOpt1, ProtocolKind::StsOpt2,
    ProtocolKind::SEcdsa,    ProtocolKind::SEcdsaExt,
    ProtocolKind::Scianc,    ProtocolKind::Poramb};

std::string_view to_string(ProtocolKind kind);
std::optional<ProtocolKind> protocol_from_string(std::string_view name);

/// True for the static-KD family (premaster fixed by the certificates).
bool is_static_kd(ProtocolKind kind);
bool is_sts_family(ProtocolKind kind);

enum class Role { Initiator, Responder };
enum class StepLabel { A1, B1, A2, B2, A3, B3 };

std::string_view to_string(StepLabel label);
Role sender_of(StepLabel label);  // A* from the initiator, B* from the responder

struct MessageField {
  std::string tag;
  Bytes value;
};

/// One wire message. encode() is the exact transmitted byte string; the
/// per-field breakdown feeds the overhead ledger.
struct ProtocolMessage {
  StepLabel step = StepLabel::A1;
  std::vector<MessageField> fields;

  Bytes encode() const;
  size_t encoded_size() const;
  const MessageField* find(std::string_view tag) const;
};

struct FieldSpec {
  const char* tag;
  size_t length;
};

class ProtocolFormatError : public std::runtime_error {
 public:
  explicit ProtocolFormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Fixed field layout of (kind, step); throws ProtocolFormatError if the
/// protocol has no such step.
std::span<const FieldSpec> message_layout(ProtocolKind kind, StepLabel step);

/// Splits raw bytes per the layout. Wrong total length is a format error.
ProtocolMessage parse_message(ProtocolKind kind, StepLabel step, ByteSpan bytes);

/// Ordered step labels of a full honest run.
std::span<const StepLabel> message_flow(ProtocolKind kind);

enum class FailReason {
  OutOfOrder,        // step fed against the expected sequence
  Malformed,         // wrong length / undecodable field / identity mismatch
  InvalidEphemeral,  // off-curve or identity ephemeral point
  Authentication,    // signature, MAC, or finished-message verification failed
  Provisioning,      // required pre-shared key absent
  Transport          // channel-level delivery failure
};

std::string_view to_string(FailReason reason);

/// Is the failure a transport/malformation class (as opposed to an
/// authentication-class rejection)?
bool is_malformation(FailReason reason);

/// Established session keys: 32-byte premaster (x-coordinate of the DH
/// point) expanded by one kdf call into a 16-byte AES key and a 32-byte
/// HMAC key.
struct SessionKeys {
  SecretBytes premaster;
  crypto::SymmetricKey enc;
  crypto::SymmetricKey mac;

  crypto::Digest premaster_digest() const;
  crypto::Digest key_digest() const;
  void wipe();
};

/// The key schedule itself, shared by the state machines and by the
/// compromise oracles (which must rerun it on recomputed premasters).
SessionKeys expand_session_keys(ByteSpan premaster_x, ByteSpan salt, std::string_view info);

/// Directional AES-CTR IVs for the STS response encryption, derived from the
/// same inputs as the keys and never transmitted. first = initiator->responder.
std::pair<std::array<uint8_t, crypto::kIvBytes>, std::array<uint8_t, crypto::kIvBytes>>
derive_sts_ivs(ByteSpan premaster_x, ByteSpan salt);

/// kdf info labels, one per protocol key schedule (domain separation).
std::string_view kdf_label(ProtocolKind kind);

enum class Event { None, Established, Failed };

struct StepResult {
  std::vector<ProtocolMessage> outgoing;
  Event event = Event::None;
  std::optional<FailReason> reason;
  std::string detail;
};

struct TranscriptEntry {
  bool outbound = false;
  ProtocolMessage message;
};

/// Operation-dependency graph for the STS schedule analysis (Op1..Op4 on
/// devices A and B). Edges are precedence constraints; an overlapped
/// operation pair has no path between its two nodes.
struct OpNode {
  char device;  // 'A' or 'B'
  int op;       // 1..4
  bool operator==(const OpNode&) const = default;
};

struct OpGraph {
  std::vector<std::pair<OpNode, OpNode>> edges;
  static std::vector<OpNode> all_nodes();
  bool has_path(OpNode from, OpNode to) const;
};

/// Partial order of Op1..Op4 for {Sts, StsOpt1, StsOpt2}: the serial chain,
/// or the chain with the Op2 (and Op3, variant II) overlap edges removed and
/// block joins inserted. Wire bytes are unaffected by the variant.
OpGraph opt_schedule(ProtocolKind kind);

/// One endpoint of a handshake. Externally driven and single-threaded; all
/// side effects of step() stay inside the context. Failure erases derived
/// key material before reporting.
class SessionContext {
 public:
  /// Thrown by the direct-use building blocks on validation failure;
  /// step() converts it into a failed StepResult carrying the reason.
  struct StepFailure : std::runtime_error {
    FailReason reason;
    StepFailure(FailReason r, const std::string& what)
        : std::runtime_error(what), reason(r) {}
  };

  SessionContext(ProtocolKind kind, Role role, cert::CertifiedIdentity identity,
                 crypto::Point q_ca, RandomSource& rng,
                 std::optional<SecretBytes> pairwise_mac_key = std::nullopt);

  /// Advance the state machine: consume `incoming` if one is due, then emit
  /// every message this side can now send. Initiators start with nullopt.
  StepResult step(std::optional<ProtocolMessage> incoming);

  /// Parse raw wire bytes as the step this context expects, then step().
  StepResult step_raw(ByteSpan wire_bytes);

  ProtocolKind kind() const { return kind_; }
  Role role() const { return role_; }
  bool established() const { return established_; }
  bool failed() const { return failure_.has_value(); }
  std::optional<FailReason> failure() const { return failure_; }
  const std::string& failure_detail() const { return failure_detail_; }

  /// Label of the message this context expects next, if it is awaiting one.
  std::optional<StepLabel> expected_incoming() const;

  /// Session keys; only exposed once established.
  const SessionKeys* keys() const { return established_ ? &keys_.value() : nullptr; }

  const cert::CertifiedIdentity& identity() const { return identity_; }
  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  Bytes transcript_bytes() const;
  Bytes transcript_binary() const;         // [step(1)][len(4 BE)][payload]*
  std::string transcript_hex_dump() const; // "A1 <hex>" per line

  // STS building blocks, usable directly (the step() driver goes through
  // the same paths).
  ProtocolMessage sts_initiate();
  const crypto::Point* sts_ephemeral_public() const;
  const SessionKeys& sts_derive_session(const crypto::Point& xg_peer);
  Bytes sts_auth_response();
  bool sts_verify_response(ByteSpan resp, const cert::ImplicitCertificate& peer_cert);

 private:
  void require_keys() const;
  void derive_session_keys(ByteSpan premaster_x, ByteSpan salt, std::string_view info);
  void erase_secrets();
  StepResult fail_with(FailReason reason, std::string detail);

  void handle_incoming(const ProtocolMessage& msg);
  ProtocolMessage produce(StepLabel label);

  // per-protocol handlers
  void sts_receive(const ProtocolMessage& msg);
  ProtocolMessage sts_produce(StepLabel label);
  void secdsa_receive(const ProtocolMessage& msg);
  ProtocolMessage secdsa_produce(StepLabel label);
  void scianc_receive(const ProtocolMessage& msg);
  ProtocolMessage scianc_produce(StepLabel label);
  void poramb_receive(const ProtocolMessage& msg);
  ProtocolMessage poramb_produce(StepLabel label);

  Bytes secdsa_sign_input(const cert::DeviceId& signer_id) const;
  Bytes ext_fin_build() const;
  void ext_fin_check(ByteSpan ext) const;
  std::array<uint8_t, crypto::kHmacTagBytes> transcript_mac(uint8_t role_byte) const;
  std::array<uint8_t, crypto::kHmacTagBytes> poramb_psk_mac(ByteSpan cert_bytes,
                                                            ByteSpan nonce) const;
  void derive_static_session(std::string_view info);

  uint8_t role_byte(Role r) const { return r == Role::Initiator ? 0x01 : 0x02; }

  ProtocolKind kind_;
  Role role_;
  cert::CertifiedIdentity identity_;
  crypto::Point q_ca_;
  RandomSource* rng_;
  std::optional<SecretBytes> psk_;

  size_t flow_pos_ = 0;
  bool established_ = false;
  std::optional<FailReason> failure_;
  std::string failure_detail_;

  // handshake state
  std::optional<crypto::Scalar> ephemeral_;       // STS X
  std::optional<crypto::Point> xg_self_, xg_peer_;
  Bytes nonce_self_, nonce_peer_;
  Bytes hello_self_, hello_peer_;
  std::optional<cert::ImplicitCertificate> peer_cert_;
  std::optional<crypto::Point> peer_public_key_;
  cert::DeviceId peer_id_{};

  std::optional<SessionKeys> keys_;
  std::array<uint8_t, crypto::kIvBytes> iv_init_to_resp_{};
  std::array<uint8_t, crypto::kIvBytes> iv_resp_to_init_{};

  std::vector<TranscriptEntry> transcript_;
};

}  // namespace ecqvkd::proto

#endif  // ECQVKD_PROTOCOL_HPP
