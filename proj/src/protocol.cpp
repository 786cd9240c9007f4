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

#include "ecqvkd/protocol.hpp"

#include <algorithm>
#include <cstring>
#include <deque>

namespace ecqvkd::proto {

using crypto::Point;
using crypto::Scalar;
using crypto::SymmetricKey;

namespace {

constexpr uint8_t kAckOk = 0x01;
constexpr uint8_t kFinishType = 0x0f;
constexpr size_t kNonceBytes = 32;
constexpr size_t kHelloBytes = 32;
constexpr size_t kExtFinBytes = 96;
constexpr size_t kFinishBytes = 197;
constexpr size_t kFinishPadBytes = kFinishBytes - 1 - crypto::kHmacTagBytes;

constexpr std::string_view kStsInfo = "sts-ecqv-v1";
constexpr std::string_view kStsIvInfo = "sts-iv";
constexpr std::string_view kSecdsaInfo = "secdsa-v1";
constexpr std::string_view kSciancInfo = "scianc-v1";
constexpr std::string_view kPorambInfo = "poramb-v1";

// --- wire layouts (field order and byte counts are load-bearing) ---

constexpr FieldSpec kStsA1[] = {{"id", 16}, {"xg", 64}};
constexpr FieldSpec kStsB1[] = {{"id", 16}, {"cert", 101}, {"xg", 64}, {"resp", 64}};
constexpr FieldSpec kStsA2[] = {{"cert", 101}, {"resp", 64}};
constexpr FieldSpec kAckOnly[] = {{"ack", 1}};
constexpr FieldSpec kStsOptHello[] = {{"id", 16}, {"cert", 101}, {"xg", 64}};
constexpr FieldSpec kRespOnly[] = {{"resp", 64}};

constexpr FieldSpec kSeA1[] = {{"id", 16}, {"nonce", 32}};
constexpr FieldSpec kSeB1[] = {{"id", 16}, {"cert", 101}, {"sign", 64}, {"nonce", 32}};
constexpr FieldSpec kSeA2[] = {{"cert", 101}, {"sign", 64}};
constexpr FieldSpec kSeB2Ext[] = {{"ack", 1}, {"ext_fin", 96}};
constexpr FieldSpec kSeA3Ext[] = {{"ext_fin", 96}};

constexpr FieldSpec kScHello[] = {{"id", 16}, {"nonce", 32}, {"cert", 101}};
constexpr FieldSpec kScMac[] = {{"auth_mac", 32}};

constexpr FieldSpec kPoHello[] = {{"hello", 32}, {"id", 16}};
constexpr FieldSpec kPoCert[] = {{"cert", 101}, {"nonce", 32}, {"mac", 32}};
constexpr FieldSpec kPoFinish[] = {{"finish", 197}};

constexpr StepLabel kFlowFour[] = {StepLabel::A1, StepLabel::B1, StepLabel::A2, StepLabel::B2};
constexpr StepLabel kFlowStsOpt[] = {StepLabel::A1, StepLabel::B1, StepLabel::B2, StepLabel::A2,
                                     StepLabel::B3};
constexpr StepLabel kFlowExt[] = {StepLabel::A1, StepLabel::B1, StepLabel::A2, StepLabel::B2,
                                  StepLabel::A3};
constexpr StepLabel kFlowSix[] = {StepLabel::A1, StepLabel::B1, StepLabel::A2, StepLabel::B2,
                                  StepLabel::A3, StepLabel::B3};

ByteSpan sv_bytes(std::string_view s) {
  return ByteSpan(reinterpret_cast<const uint8_t*>(s.data()), s.size());
}

}  // namespace

std::string_view to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::Sts: return "sts";
    case ProtocolKind::StsOpt1: return "sts-opt1";
    case ProtocolKind::StsOpt2: return "sts-opt2";
    case ProtocolKind::SEcdsa: return "s-ecdsa";
    case ProtocolKind::SEcdsaExt: return "s-ecdsa-ext";
    case ProtocolKind::Scianc: return "scianc";
    case ProtocolKind::Poramb: return "poramb";
  }
  return "?";
}

std::optional<ProtocolKind> protocol_from_string(std::string_view name) {
  for (ProtocolKind kind : kAllProtocolKinds) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

bool is_static_kd(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::SEcdsa:
    case ProtocolKind::SEcdsaExt:
    case ProtocolKind::Scianc:
    case ProtocolKind::Poramb:
      return true;
    default:
      return false;
  }
}

bool is_sts_family(ProtocolKind kind) {
  return kind == ProtocolKind::Sts || kind == ProtocolKind::StsOpt1 ||
         kind == ProtocolKind::StsOpt2;
}

std::string_view to_string(StepLabel label) {
  switch (label) {
    case StepLabel::A1: return "A1";
    case StepLabel::B1: return "B1";
    case StepLabel::A2: return "A2";
    case StepLabel::B2: return "B2";
    case StepLabel::A3: return "A3";
    case StepLabel::B3: return "B3";
  }
  return "?";
}

Role sender_of(StepLabel label) {
  switch (label) {
    case StepLabel::A1:
    case StepLabel::A2:
    case StepLabel::A3:
      return Role::Initiator;
    default:
      return Role::Responder;
  }
}

std::string_view to_string(FailReason reason) {
  switch (reason) {
    case FailReason::OutOfOrder: return "out-of-order";
    case FailReason::Malformed: return "malformed";
    case FailReason::InvalidEphemeral: return "invalid-ephemeral";
    case FailReason::Authentication: return "authentication";
    case FailReason::Provisioning: return "provisioning";
    case FailReason::Transport: return "transport";
  }
  return "?";
}

bool is_malformation(FailReason reason) {
  return reason == FailReason::OutOfOrder || reason == FailReason::Malformed ||
         reason == FailReason::InvalidEphemeral || reason == FailReason::Transport;
}

Bytes ProtocolMessage::encode() const {
  Bytes out;
  out.reserve(encoded_size());
  for (const auto& f : fields) out.insert(out.end(), f.value.begin(), f.value.end());
  return out;
}

size_t ProtocolMessage::encoded_size() const {
  size_t total = 0;
  for (const auto& f : fields) total += f.value.size();
  return total;
}

const MessageField* ProtocolMessage::find(std::string_view tag) const {
  for (const auto& f : fields) {
    if (f.tag == tag) return &f;
  }
  return nullptr;
}

std::span<const FieldSpec> message_layout(ProtocolKind kind, StepLabel step) {
  switch (kind) {
    case ProtocolKind::Sts:
      switch (step) {
        case StepLabel::A1: return kStsA1;
        case StepLabel::B1: return kStsB1;
        case StepLabel::A2: return kStsA2;
        case StepLabel::B2: return kAckOnly;
        default: break;
      }
      break;
    case ProtocolKind::StsOpt1:
    case ProtocolKind::StsOpt2:
      switch (step) {
        case StepLabel::A1:
        case StepLabel::B1: return kStsOptHello;
        case StepLabel::B2:
        case StepLabel::A2: return kRespOnly;
        case StepLabel::B3: return kAckOnly;
        default: break;
      }
      break;
    case ProtocolKind::SEcdsa:
    case ProtocolKind::SEcdsaExt:
      switch (step) {
        case StepLabel::A1: return kSeA1;
        case StepLabel::B1: return kSeB1;
        case StepLabel::A2: return kSeA2;
        case StepLabel::B2:
          return kind == ProtocolKind::SEcdsaExt ? std::span<const FieldSpec>(kSeB2Ext)
                                                 : std::span<const FieldSpec>(kAckOnly);
        case StepLabel::A3:
          if (kind == ProtocolKind::SEcdsaExt) return kSeA3Ext;
          break;
        default: break;
      }
      break;
    case ProtocolKind::Scianc:
      switch (step) {
        case StepLabel::A1:
        case StepLabel::B1: return kScHello;
        case StepLabel::A2:
        case StepLabel::B2: return kScMac;
        default: break;
      }
      break;
    case ProtocolKind::Poramb:
      switch (step) {
        case StepLabel::A1:
        case StepLabel::B1: return kPoHello;
        case StepLabel::A2:
        case StepLabel::B2: return kPoCert;
        case StepLabel::A3:
        case StepLabel::B3: return kPoFinish;
        default: break;
      }
      break;
  }
  throw ProtocolFormatError(std::string(to_string(kind)) + " has no step " +
                            std::string(to_string(step)));
}

ProtocolMessage parse_message(ProtocolKind kind, StepLabel step, ByteSpan bytes) {
  auto layout = message_layout(kind, step);
  size_t total = 0;
  for (const auto& spec : layout) total += spec.length;
  if (bytes.size() != total) {
    throw ProtocolFormatError(std::string(to_string(step)) + ": expected " +
                              std::to_string(total) + " bytes, got " +
                              std::to_string(bytes.size()));
  }
  ProtocolMessage msg;
  msg.step = step;
  size_t off = 0;
  for (const auto& spec : layout) {
    auto part = bytes.subspan(off, spec.length);
    msg.fields.push_back({spec.tag, Bytes(part.begin(), part.end())});
    off += spec.length;
  }
  return msg;
}

std::span<const StepLabel> message_flow(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::Sts:
    case ProtocolKind::SEcdsa:
    case ProtocolKind::Scianc:
      return kFlowFour;
    case ProtocolKind::StsOpt1:
    case ProtocolKind::StsOpt2:
      return kFlowStsOpt;
    case ProtocolKind::SEcdsaExt:
      return kFlowExt;
    case ProtocolKind::Poramb:
      return kFlowSix;
  }
  return kFlowFour;
}

// --- SessionKeys / key schedule ---

crypto::Digest SessionKeys::premaster_digest() const { return crypto::hash(premaster.span()); }

crypto::Digest SessionKeys::key_digest() const {
  Bytes all = concat({enc.span(), mac.span()});
  auto d = crypto::hash(all);
  cleanse(all.data(), all.size());
  return d;
}

void SessionKeys::wipe() {
  premaster.wipe();
  enc.wipe();
  mac.wipe();
}

SessionKeys expand_session_keys(ByteSpan premaster_x, ByteSpan salt, std::string_view info) {
  Bytes block = crypto::kdf(premaster_x, salt, sv_bytes(info), 48);
  SessionKeys keys;
  keys.premaster = SecretBytes(premaster_x);
  keys.enc = SymmetricKey(ByteSpan(block.data(), 16), crypto::KeyRole::Encryption);
  keys.mac = SymmetricKey(ByteSpan(block.data() + 16, 32), crypto::KeyRole::Mac);
  cleanse(block.data(), block.size());
  return keys;
}

std::pair<std::array<uint8_t, crypto::kIvBytes>, std::array<uint8_t, crypto::kIvBytes>>
derive_sts_ivs(ByteSpan premaster_x, ByteSpan salt) {
  Bytes ivs = crypto::kdf(premaster_x, salt, sv_bytes(kStsIvInfo), 32);
  std::array<uint8_t, crypto::kIvBytes> a{}, b{};
  std::memcpy(a.data(), ivs.data(), crypto::kIvBytes);
  std::memcpy(b.data(), ivs.data() + crypto::kIvBytes, crypto::kIvBytes);
  cleanse(ivs.data(), ivs.size());
  return {a, b};
}

std::string_view kdf_label(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::Sts:
    case ProtocolKind::StsOpt1:
    case ProtocolKind::StsOpt2:
      return kStsInfo;
    case ProtocolKind::SEcdsa:
    case ProtocolKind::SEcdsaExt:
      return kSecdsaInfo;
    case ProtocolKind::Scianc:
      return kSciancInfo;
    case ProtocolKind::Poramb:
      return kPorambInfo;
  }
  return kStsInfo;
}

// --- OpGraph / opt_schedule ---

std::vector<OpNode> OpGraph::all_nodes() {
  std::vector<OpNode> nodes;
  for (char d : {'A', 'B'}) {
    for (int op = 1; op <= 4; ++op) nodes.push_back({d, op});
  }
  return nodes;
}

bool OpGraph::has_path(OpNode from, OpNode to) const {
  std::deque<OpNode> frontier{from};
  std::vector<OpNode> seen{from};
  while (!frontier.empty()) {
    OpNode cur = frontier.front();
    frontier.pop_front();
    if (cur == to) return true;
    for (const auto& [src, dst] : edges) {
      if (src == cur && std::find(seen.begin(), seen.end(), dst) == seen.end()) {
        seen.push_back(dst);
        frontier.push_back(dst);
      }
    }
  }
  return false;
}

OpGraph opt_schedule(ProtocolKind kind) {
  const OpNode a1{'A', 1}, a2{'A', 2}, a3{'A', 3}, a4{'A', 4};
  const OpNode b1{'B', 1}, b2{'B', 2}, b3{'B', 3}, b4{'B', 4};
  OpGraph g;
  switch (kind) {
    case ProtocolKind::Sts:
      // Message causality forces the full serial chain.
      g.edges = {{a1, b1}, {b1, b2}, {b2, b3}, {b3, a2}, {a2, a4}, {a4, a3}, {a3, b4}};
      return g;
    case ProtocolKind::StsOpt1:
      // Op2 of both devices runs concurrently; Op3 stays serial.
      g.edges = {{a1, b1}, {b1, a2}, {b1, b2}, {a2, b3}, {b2, b3},
                 {b3, a4}, {a4, a3}, {a3, b4}};
      return g;
    case ProtocolKind::StsOpt2:
      // Op2 and Op3 both overlap; verification happens after the overlap.
      g.edges = {{a1, b1}, {b1, a2}, {b1, b2}, {a2, a3}, {a2, b3}, {b2, a3},
                 {b2, b3}, {a3, a4}, {b3, a4}, {a4, b4}};
      return g;
    default:
      throw std::invalid_argument("opt_schedule: not an STS schedule kind");
  }
}

// --- SessionContext ---

SessionContext::SessionContext(ProtocolKind kind, Role role, cert::CertifiedIdentity identity,
                               Point q_ca, RandomSource& rng,
                               std::optional<SecretBytes> pairwise_mac_key)
    : kind_(kind),
      role_(role),
      identity_(std::move(identity)),
      q_ca_(std::move(q_ca)),
      rng_(&rng),
      psk_(std::move(pairwise_mac_key)) {}

std::optional<StepLabel> SessionContext::expected_incoming() const {
  if (established_ || failure_) return std::nullopt;
  auto flow = message_flow(kind_);
  if (flow_pos_ >= flow.size()) return std::nullopt;
  if (sender_of(flow[flow_pos_]) == role_) return std::nullopt;
  return flow[flow_pos_];
}

StepResult SessionContext::fail_with(FailReason reason, std::string detail) {
  erase_secrets();
  failure_ = reason;
  failure_detail_ = detail;
  StepResult res;
  res.event = Event::Failed;
  res.reason = reason;
  res.detail = std::move(detail);
  return res;
}

void SessionContext::erase_secrets() {
  if (keys_) {
    keys_->wipe();
    keys_.reset();
  }
  if (ephemeral_) {
    ephemeral_->wipe();
    ephemeral_.reset();
  }
}

namespace {

void check_shape(ProtocolKind kind, const ProtocolMessage& msg) {
  auto layout = message_layout(kind, msg.step);
  if (msg.fields.size() != layout.size()) {
    throw ProtocolFormatError(std::string(to_string(msg.step)) + ": wrong field count");
  }
  for (size_t i = 0; i < layout.size(); ++i) {
    if (msg.fields[i].tag != layout[i].tag || msg.fields[i].value.size() != layout[i].length) {
      throw ProtocolFormatError(std::string(to_string(msg.step)) + ": field " +
                                std::string(layout[i].tag) + " malformed");
    }
  }
}

}  // namespace

StepResult SessionContext::step(std::optional<ProtocolMessage> incoming) {
  if (established_ || failure_) {
    StepResult res;
    res.event = Event::Failed;
    res.reason = FailReason::OutOfOrder;
    res.detail = "session closed";
    return res;
  }

  auto flow = message_flow(kind_);
  try {
    if (incoming) {
      if (flow_pos_ >= flow.size()) throw StepFailure{FailReason::OutOfOrder, "flow complete"};
      StepLabel expect = flow[flow_pos_];
      if (sender_of(expect) == role_) {
        throw StepFailure{FailReason::OutOfOrder, "expected to send, received instead"};
      }
      if (incoming->step != expect) {
        throw StepFailure{FailReason::OutOfOrder,
                          std::string("expected ") + std::string(to_string(expect)) + ", got " +
                              std::string(to_string(incoming->step))};
      }
      try {
        check_shape(kind_, *incoming);
      } catch (const ProtocolFormatError& e) {
        throw StepFailure{FailReason::Malformed, e.what()};
      }
      handle_incoming(*incoming);
      transcript_.push_back({false, *incoming});
      ++flow_pos_;
    }

    StepResult res;
    while (flow_pos_ < flow.size() && sender_of(flow[flow_pos_]) == role_) {
      ProtocolMessage out = produce(flow[flow_pos_]);
      transcript_.push_back({true, out});
      ++flow_pos_;
      res.outgoing.push_back(std::move(out));
    }

    if (flow_pos_ >= flow.size()) {
      established_ = true;
      if (ephemeral_) {
        ephemeral_->wipe();
        ephemeral_.reset();
      }
      res.event = Event::Established;
    }
    return res;
  } catch (const StepFailure& f) {
    return fail_with(f.reason, f.what());
  } catch (const cert::CertificateError& e) {
    return fail_with(FailReason::Malformed, e.what());
  } catch (const crypto::CryptoError& e) {
    return fail_with(FailReason::Malformed, e.what());
  }
}

StepResult SessionContext::step_raw(ByteSpan wire_bytes) {
  auto expect = expected_incoming();
  if (!expect) {
    if (established_ || failure_) {
      StepResult res;
      res.event = Event::Failed;
      res.reason = FailReason::OutOfOrder;
      res.detail = "session closed";
      return res;
    }
    return fail_with(FailReason::OutOfOrder, "not awaiting a message");
  }
  ProtocolMessage msg;
  try {
    msg = parse_message(kind_, *expect, wire_bytes);
  } catch (const ProtocolFormatError& e) {
    return fail_with(FailReason::Malformed, e.what());
  }
  return step(std::move(msg));
}

void SessionContext::handle_incoming(const ProtocolMessage& msg) {
  if (is_sts_family(kind_)) return sts_receive(msg);
  switch (kind_) {
    case ProtocolKind::SEcdsa:
    case ProtocolKind::SEcdsaExt: return secdsa_receive(msg);
    case ProtocolKind::Scianc: return scianc_receive(msg);
    case ProtocolKind::Poramb: return poramb_receive(msg);
    default: throw StepFailure{FailReason::OutOfOrder, "unhandled protocol"};
  }
}

ProtocolMessage SessionContext::produce(StepLabel label) {
  if (is_sts_family(kind_)) return sts_produce(label);
  switch (kind_) {
    case ProtocolKind::SEcdsa:
    case ProtocolKind::SEcdsaExt: return secdsa_produce(label);
    case ProtocolKind::Scianc: return scianc_produce(label);
    case ProtocolKind::Poramb: return poramb_produce(label);
    default: throw StepFailure{FailReason::OutOfOrder, "unhandled protocol"};
  }
}

// --- shared helpers ---

namespace {

ProtocolMessage build_message(ProtocolKind kind, StepLabel step, std::vector<Bytes> values) {
  auto layout = message_layout(kind, step);
  if (values.size() != layout.size()) {
    throw std::logic_error("build_message: field count mismatch");
  }
  ProtocolMessage msg;
  msg.step = step;
  for (size_t i = 0; i < layout.size(); ++i) {
    if (values[i].size() != layout[i].length) {
      throw std::logic_error(std::string("build_message: field ") + layout[i].tag +
                             " has wrong length");
    }
    msg.fields.push_back({layout[i].tag, std::move(values[i])});
  }
  return msg;
}

Bytes field_bytes(const ProtocolMessage& msg, std::string_view tag) {
  const MessageField* f = msg.find(tag);
  if (f == nullptr) throw std::logic_error("missing field after shape check");
  return f->value;
}

template <typename Array>
Bytes to_bytes(const Array& arr) {
  return Bytes(arr.begin(), arr.end());
}

}  // namespace

void SessionContext::require_keys() const {
  if (!keys_) throw std::logic_error("session keys not derived yet");
}

void SessionContext::derive_session_keys(ByteSpan premaster_x, ByteSpan salt,
                                         std::string_view info) {
  keys_ = expand_session_keys(premaster_x, salt, info);
}

Bytes SessionContext::transcript_bytes() const {
  Bytes out;
  for (const auto& entry : transcript_) {
    Bytes enc = entry.message.encode();
    out.insert(out.end(), enc.begin(), enc.end());
  }
  return out;
}

std::array<uint8_t, crypto::kHmacTagBytes> SessionContext::transcript_mac(
    uint8_t role_tag) const {
  require_keys();
  Bytes data = transcript_bytes();
  data.push_back(role_tag);
  return crypto::mac_hmac(keys_->mac, data);
}

// --- STS ---

namespace {

// Catches point-decode failures and reports them as ephemeral validation
// errors: an off-curve XG is the classic active-MitM signal.
Point decode_ephemeral(ByteSpan xy64) { return Point::from_uncompressed(xy64); }

}  // namespace

const crypto::Point* SessionContext::sts_ephemeral_public() const {
  return xg_self_ ? &*xg_self_ : nullptr;
}

ProtocolMessage SessionContext::sts_initiate() {
  if (!is_sts_family(kind_) || role_ != Role::Initiator || flow_pos_ != 0 || failure_) {
    throw std::logic_error("sts_initiate: fresh STS initiator context required");
  }
  StepResult res = step(std::nullopt);
  if (res.outgoing.size() != 1) throw std::logic_error("sts_initiate: no message produced");
  return res.outgoing.front();
}

const SessionKeys& SessionContext::sts_derive_session(const Point& xg_peer) {
  if (!is_sts_family(kind_)) throw std::logic_error("sts_derive_session: STS kinds only");
  if (!ephemeral_) {
    auto [x, xg] = crypto::generate_keypair(*rng_);
    ephemeral_ = x;
    xg_self_ = xg;
  }
  xg_peer_ = xg_peer;

  Point shared;
  try {
    shared = crypto::ecdh(*ephemeral_, *xg_peer_);
  } catch (const crypto::CryptoError& e) {
    throw StepFailure{FailReason::InvalidEphemeral, e.what()};
  }
  auto premaster = shared.x_bytes();

  // Salt is the initiator-ordered ephemeral concatenation XG_A || XG_B.
  auto self_enc = xg_self_->encode_uncompressed();
  auto peer_enc = xg_peer_->encode_uncompressed();
  Bytes salt = role_ == Role::Initiator
                   ? concat({ByteSpan(self_enc), ByteSpan(peer_enc)})
                   : concat({ByteSpan(peer_enc), ByteSpan(self_enc)});

  derive_session_keys(premaster, salt, kStsInfo);
  std::tie(iv_init_to_resp_, iv_resp_to_init_) = derive_sts_ivs(premaster, salt);
  cleanse(premaster.data(), premaster.size());
  return *keys_;
}

Bytes SessionContext::sts_auth_response() {
  require_keys();
  if (!xg_self_ || !xg_peer_) throw std::logic_error("sts_auth_response: ephemerals missing");
  // Each side signs its own ephemeral first (device A: XG_A || XG_B,
  // device B: XG_B || XG_A).
  auto self_enc = xg_self_->encode_uncompressed();
  auto peer_enc = xg_peer_->encode_uncompressed();
  Bytes input = concat({ByteSpan(self_enc), ByteSpan(peer_enc)});
  crypto::Signature sig =
      crypto::ecdsa_sign(identity_.private_key, input, crypto::SignMode::Randomized, rng_);
  const auto& iv = role_ == Role::Initiator ? iv_init_to_resp_ : iv_resp_to_init_;
  auto sig_bytes = sig.encode();
  return crypto::sym_encrypt(keys_->enc, iv, ByteSpan(sig_bytes.data(), sig_bytes.size()));
}

bool SessionContext::sts_verify_response(ByteSpan resp,
                                         const cert::ImplicitCertificate& peer_cert) {
  require_keys();
  if (!xg_self_ || !xg_peer_) throw std::logic_error("sts_verify_response: ephemerals missing");

  bool ok = false;
  if (resp.size() == crypto::kSignatureBytes) {
    const auto& iv = role_ == Role::Initiator ? iv_resp_to_init_ : iv_init_to_resp_;
    Bytes sig_bytes = crypto::sym_decrypt(keys_->enc, iv, resp);
    crypto::Signature sig = crypto::Signature::from_bytes(sig_bytes);

    Point peer_key = cert::derive_public_key(peer_cert, q_ca_);
    auto self_enc = xg_self_->encode_uncompressed();
    auto peer_enc = xg_peer_->encode_uncompressed();
    Bytes signed_input = concat({ByteSpan(peer_enc), ByteSpan(self_enc)});
    ok = crypto::ecdsa_verify(peer_key, signed_input, sig);
  }
  if (!ok && !failure_) {
    // Rejection erases the derived keys before anything can use them.
    erase_secrets();
    failure_ = FailReason::Authentication;
    failure_detail_ = "response verification failed";
  }
  return ok;
}

ProtocolMessage SessionContext::sts_produce(StepLabel label) {
  const bool plain = kind_ == ProtocolKind::Sts;
  Bytes id = to_bytes(identity_.certificate.subject_id);
  switch (label) {
    case StepLabel::A1: {
      auto [x, xg] = crypto::generate_keypair(*rng_);
      ephemeral_ = x;
      xg_self_ = xg;
      Bytes xg_enc = to_bytes(xg_self_->encode_uncompressed());
      if (plain) return build_message(kind_, label, {std::move(id), std::move(xg_enc)});
      Bytes cert_enc = to_bytes(identity_.certificate.encode());
      return build_message(kind_, label,
                           {std::move(id), std::move(cert_enc), std::move(xg_enc)});
    }
    case StepLabel::B1: {
      auto [x, xg] = crypto::generate_keypair(*rng_);
      ephemeral_ = x;
      xg_self_ = xg;
      Bytes xg_enc = to_bytes(xg_self_->encode_uncompressed());
      Bytes cert_enc = to_bytes(identity_.certificate.encode());
      if (!plain) {
        return build_message(kind_, label,
                             {std::move(id), std::move(cert_enc), std::move(xg_enc)});
      }
      sts_derive_session(*xg_peer_);
      Bytes resp = sts_auth_response();
      return build_message(kind_, label, {std::move(id), std::move(cert_enc),
                                          std::move(xg_enc), std::move(resp)});
    }
    case StepLabel::B2: {
      if (plain) return build_message(kind_, label, {Bytes{kAckOk}});
      sts_derive_session(*xg_peer_);
      return build_message(kind_, label, {sts_auth_response()});
    }
    case StepLabel::A2: {
      Bytes resp = sts_auth_response();
      if (plain) {
        Bytes cert_enc = to_bytes(identity_.certificate.encode());
        return build_message(kind_, label, {std::move(cert_enc), std::move(resp)});
      }
      return build_message(kind_, label, {std::move(resp)});
    }
    case StepLabel::B3:
      return build_message(kind_, label, {Bytes{kAckOk}});
    default:
      throw std::logic_error("sts_produce: unexpected step");
  }
}

void SessionContext::sts_receive(const ProtocolMessage& msg) {
  const bool plain = kind_ == ProtocolKind::Sts;
  switch (msg.step) {
    case StepLabel::A1: {
      Bytes id = field_bytes(msg, "id");
      std::memcpy(peer_id_.data(), id.data(), cert::kIdBytes);
      if (!plain) {
        peer_cert_ = cert::ImplicitCertificate::decode(field_bytes(msg, "cert"));
        if (!std::equal(peer_id_.begin(), peer_id_.end(),
                        peer_cert_->subject_id.begin())) {
          throw StepFailure{FailReason::Malformed, "A1 identity does not match certificate"};
        }
      }
      try {
        xg_peer_ = decode_ephemeral(field_bytes(msg, "xg"));
      } catch (const crypto::CryptoError& e) {
        throw StepFailure{FailReason::InvalidEphemeral, e.what()};
      }
      return;
    }
    case StepLabel::B1: {
      Bytes id = field_bytes(msg, "id");
      std::memcpy(peer_id_.data(), id.data(), cert::kIdBytes);
      peer_cert_ = cert::ImplicitCertificate::decode(field_bytes(msg, "cert"));
      if (!std::equal(peer_id_.begin(), peer_id_.end(), peer_cert_->subject_id.begin())) {
        throw StepFailure{FailReason::Malformed, "B1 identity does not match certificate"};
      }
      try {
        xg_peer_ = decode_ephemeral(field_bytes(msg, "xg"));
      } catch (const crypto::CryptoError& e) {
        throw StepFailure{FailReason::InvalidEphemeral, e.what()};
      }
      if (plain) {
        sts_derive_session(*xg_peer_);
        if (!sts_verify_response(field_bytes(msg, "resp"), *peer_cert_)) {
          throw StepFailure{FailReason::Authentication, "B1 response verification failed"};
        }
        ephemeral_->wipe();
        ephemeral_.reset();
      }
      return;
    }
    case StepLabel::B2: {
      if (plain) {
        if (field_bytes(msg, "ack") != Bytes{kAckOk}) {
          throw StepFailure{FailReason::Authentication, "peer reported failure"};
        }
        return;
      }
      sts_derive_session(*xg_peer_);
      if (!sts_verify_response(field_bytes(msg, "resp"), *peer_cert_)) {
        throw StepFailure{FailReason::Authentication, "B2 response verification failed"};
      }
      ephemeral_->wipe();
      ephemeral_.reset();
      return;
    }
    case StepLabel::A2: {
      if (plain) {
        peer_cert_ = cert::ImplicitCertificate::decode(field_bytes(msg, "cert"));
      }
      if (!sts_verify_response(field_bytes(msg, "resp"), *peer_cert_)) {
        throw StepFailure{FailReason::Authentication, "A2 response verification failed"};
      }
      if (ephemeral_) {
        ephemeral_->wipe();
        ephemeral_.reset();
      }
      return;
    }
    case StepLabel::B3: {
      if (field_bytes(msg, "ack") != Bytes{kAckOk}) {
        throw StepFailure{FailReason::Authentication, "peer reported failure"};
      }
      return;
    }
    default:
      throw StepFailure{FailReason::OutOfOrder, "unexpected STS step"};
  }
}

// --- S-ECDSA ---

Bytes SessionContext::secdsa_sign_input(const cert::DeviceId& signer_id) const {
  const Bytes& init_nonce = role_ == Role::Initiator ? nonce_self_ : nonce_peer_;
  const Bytes& resp_nonce = role_ == Role::Initiator ? nonce_peer_ : nonce_self_;
  return concat({ByteSpan(init_nonce), ByteSpan(resp_nonce),
                 ByteSpan(signer_id.data(), signer_id.size())});
}

void SessionContext::derive_static_session(std::string_view info) {
  if (keys_) return;
  if (!peer_public_key_) throw std::logic_error("peer public key not derived");
  Point shared;
  try {
    shared = crypto::ecdh(identity_.private_key, *peer_public_key_);
  } catch (const crypto::CryptoError& e) {
    throw StepFailure{FailReason::Malformed, e.what()};
  }
  auto premaster = shared.x_bytes();
  const Bytes& init_nonce = role_ == Role::Initiator ? nonce_self_ : nonce_peer_;
  const Bytes& resp_nonce = role_ == Role::Initiator ? nonce_peer_ : nonce_self_;
  Bytes salt = concat({ByteSpan(init_nonce), ByteSpan(resp_nonce)});
  derive_session_keys(premaster, salt, info);
  cleanse(premaster.data(), premaster.size());
}

Bytes SessionContext::ext_fin_build() const {
  auto mac = transcript_mac(role_byte(role_));
  auto cert_digest = crypto::hash(ByteSpan(peer_cert_->encode()));
  return concat({ByteSpan(mac), cert_digest.span(), ByteSpan(nonce_peer_)});
}

void SessionContext::ext_fin_check(ByteSpan ext) const {
  if (ext.size() != kExtFinBytes) {
    throw StepFailure{FailReason::Malformed, "Ext_Fin length"};
  }
  Role peer_role = role_ == Role::Initiator ? Role::Responder : Role::Initiator;
  auto expect_mac = transcript_mac(role_byte(peer_role));
  auto expect_digest = crypto::hash(ByteSpan(identity_.certificate.encode()));
  bool ok = ct_equal(ext.subspan(0, 32), ByteSpan(expect_mac)) &&
            ct_equal(ext.subspan(32, 32), expect_digest.span()) &&
            ct_equal(ext.subspan(64, 32), ByteSpan(nonce_self_));
  if (!ok) throw StepFailure{FailReason::Authentication, "Ext_Fin verification failed"};
}

ProtocolMessage SessionContext::secdsa_produce(StepLabel label) {
  Bytes id = to_bytes(identity_.certificate.subject_id);
  switch (label) {
    case StepLabel::A1: {
      nonce_self_ = rng_->bytes(kNonceBytes);
      return build_message(kind_, label, {std::move(id), Bytes(nonce_self_)});
    }
    case StepLabel::B1: {
      nonce_self_ = rng_->bytes(kNonceBytes);
      Bytes input = secdsa_sign_input(identity_.certificate.subject_id);
      auto sig = crypto::ecdsa_sign(identity_.private_key, input,
                                    crypto::SignMode::Randomized, rng_);
      return build_message(kind_, label,
                           {std::move(id), to_bytes(identity_.certificate.encode()),
                            to_bytes(sig.encode()), Bytes(nonce_self_)});
    }
    case StepLabel::A2: {
      Bytes input = secdsa_sign_input(identity_.certificate.subject_id);
      auto sig = crypto::ecdsa_sign(identity_.private_key, input,
                                    crypto::SignMode::Randomized, rng_);
      return build_message(kind_, label,
                           {to_bytes(identity_.certificate.encode()), to_bytes(sig.encode())});
    }
    case StepLabel::B2: {
      if (kind_ == ProtocolKind::SEcdsa) {
        return build_message(kind_, label, {Bytes{kAckOk}});
      }
      return build_message(kind_, label, {Bytes{kAckOk}, ext_fin_build()});
    }
    case StepLabel::A3:
      return build_message(kind_, label, {ext_fin_build()});
    default:
      throw std::logic_error("secdsa_produce: unexpected step");
  }
}

void SessionContext::secdsa_receive(const ProtocolMessage& msg) {
  switch (msg.step) {
    case StepLabel::A1: {
      Bytes id = field_bytes(msg, "id");
      std::memcpy(peer_id_.data(), id.data(), cert::kIdBytes);
      nonce_peer_ = field_bytes(msg, "nonce");
      return;
    }
    case StepLabel::B1:
    case StepLabel::A2: {
      if (msg.step == StepLabel::B1) {
        Bytes id = field_bytes(msg, "id");
        std::memcpy(peer_id_.data(), id.data(), cert::kIdBytes);
        nonce_peer_ = field_bytes(msg, "nonce");
      }
      peer_cert_ = cert::ImplicitCertificate::decode(field_bytes(msg, "cert"));
      if (!std::equal(peer_id_.begin(), peer_id_.end(), peer_cert_->subject_id.begin())) {
        throw StepFailure{FailReason::Malformed, "identity does not match certificate"};
      }
      peer_public_key_ = cert::derive_public_key(*peer_cert_, q_ca_);
      auto sig = crypto::Signature::from_bytes(field_bytes(msg, "sign"));
      Bytes input = secdsa_sign_input(peer_cert_->subject_id);
      if (!crypto::ecdsa_verify(*peer_public_key_, input, sig)) {
        throw StepFailure{FailReason::Authentication, "signature verification failed"};
      }
      derive_static_session(kSecdsaInfo);
      return;
    }
    case StepLabel::B2: {
      if (field_bytes(msg, "ack") != Bytes{kAckOk}) {
        throw StepFailure{FailReason::Authentication, "peer reported failure"};
      }
      if (kind_ == ProtocolKind::SEcdsaExt) ext_fin_check(field_bytes(msg, "ext_fin"));
      return;
    }
    case StepLabel::A3: {
      ext_fin_check(field_bytes(msg, "ext_fin"));
      return;
    }
    default:
      throw StepFailure{FailReason::OutOfOrder, "unexpected S-ECDSA step"};
  }
}

// --- SCIANC ---

ProtocolMessage SessionContext::scianc_produce(StepLabel label) {
  switch (label) {
    case StepLabel::A1:
    case StepLabel::B1: {
      nonce_self_ = rng_->bytes(kNonceBytes);
      return build_message(kind_, label,
                           {to_bytes(identity_.certificate.subject_id), Bytes(nonce_self_),
                            to_bytes(identity_.certificate.encode())});
    }
    case StepLabel::A2:
    case StepLabel::B2: {
      derive_static_session(kSciancInfo);
      auto mac = transcript_mac(role_byte(role_));
      return build_message(kind_, label, {to_bytes(mac)});
    }
    default:
      throw std::logic_error("scianc_produce: unexpected step");
  }
}

void SessionContext::scianc_receive(const ProtocolMessage& msg) {
  switch (msg.step) {
    case StepLabel::A1:
    case StepLabel::B1: {
      Bytes id = field_bytes(msg, "id");
      std::memcpy(peer_id_.data(), id.data(), cert::kIdBytes);
      nonce_peer_ = field_bytes(msg, "nonce");
      peer_cert_ = cert::ImplicitCertificate::decode(field_bytes(msg, "cert"));
      if (!std::equal(peer_id_.begin(), peer_id_.end(), peer_cert_->subject_id.begin())) {
        throw StepFailure{FailReason::Malformed, "identity does not match certificate"};
      }
      peer_public_key_ = cert::derive_public_key(*peer_cert_, q_ca_);
      return;
    }
    case StepLabel::A2:
    case StepLabel::B2: {
      derive_static_session(kSciancInfo);
      Role peer_role = role_ == Role::Initiator ? Role::Responder : Role::Initiator;
      auto expect = transcript_mac(role_byte(peer_role));
      if (!ct_equal(ByteSpan(field_bytes(msg, "auth_mac")), ByteSpan(expect))) {
        throw StepFailure{FailReason::Authentication, "Auth_MAC verification failed"};
      }
      return;
    }
    default:
      throw StepFailure{FailReason::OutOfOrder, "unexpected SCIANC step"};
  }
}

// --- PORAMB ---

std::array<uint8_t, crypto::kHmacTagBytes> SessionContext::poramb_psk_mac(
    ByteSpan cert_bytes, ByteSpan nonce) const {
  if (!psk_ || psk_->empty()) {
    throw StepFailure{FailReason::Provisioning, "pairwise pre-shared MAC key missing"};
  }
  const Bytes& hello_init = role_ == Role::Initiator ? hello_self_ : hello_peer_;
  const Bytes& hello_resp = role_ == Role::Initiator ? hello_peer_ : hello_self_;
  Bytes input =
      concat({cert_bytes, nonce, ByteSpan(hello_init), ByteSpan(hello_resp)});
  SymmetricKey key(psk_->span(), crypto::KeyRole::Mac);
  return crypto::mac_hmac(key, input);
}

ProtocolMessage SessionContext::poramb_produce(StepLabel label) {
  switch (label) {
    case StepLabel::A1:
    case StepLabel::B1: {
      hello_self_ = rng_->bytes(kHelloBytes);
      return build_message(kind_, label,
                           {Bytes(hello_self_), to_bytes(identity_.certificate.subject_id)});
    }
    case StepLabel::A2:
    case StepLabel::B2: {
      nonce_self_ = rng_->bytes(kNonceBytes);
      Bytes cert_enc = to_bytes(identity_.certificate.encode());
      auto mac = poramb_psk_mac(cert_enc, nonce_self_);
      return build_message(kind_, label,
                           {std::move(cert_enc), Bytes(nonce_self_), to_bytes(mac)});
    }
    case StepLabel::A3:
    case StepLabel::B3: {
      derive_static_session(kPorambInfo);
      // Finish(197) = type(1) || transcript MAC(32) || zero padding(164).
      Bytes finish;
      finish.reserve(kFinishBytes);
      finish.push_back(kFinishType);
      auto mac = transcript_mac(role_byte(role_));
      finish.insert(finish.end(), mac.begin(), mac.end());
      finish.resize(1 + crypto::kHmacTagBytes + kFinishPadBytes, 0x00);
      return build_message(kind_, label, {std::move(finish)});
    }
    default:
      throw std::logic_error("poramb_produce: unexpected step");
  }
}

void SessionContext::poramb_receive(const ProtocolMessage& msg) {
  switch (msg.step) {
    case StepLabel::A1:
    case StepLabel::B1: {
      hello_peer_ = field_bytes(msg, "hello");
      Bytes id = field_bytes(msg, "id");
      std::memcpy(peer_id_.data(), id.data(), cert::kIdBytes);
      return;
    }
    case StepLabel::A2:
    case StepLabel::B2: {
      Bytes cert_enc = field_bytes(msg, "cert");
      Bytes nonce = field_bytes(msg, "nonce");
      // MAC input hello order is (initiator, responder) globally, so the
      // receiver recomputes with the same helper.
      auto expect = poramb_psk_mac(cert_enc, nonce);
      if (!ct_equal(ByteSpan(field_bytes(msg, "mac")), ByteSpan(expect))) {
        throw StepFailure{FailReason::Authentication, "pre-shared-key MAC failed"};
      }
      peer_cert_ = cert::ImplicitCertificate::decode(cert_enc);
      if (!std::equal(peer_id_.begin(), peer_id_.end(), peer_cert_->subject_id.begin())) {
        throw StepFailure{FailReason::Malformed, "identity does not match certificate"};
      }
      nonce_peer_ = std::move(nonce);
      peer_public_key_ = cert::derive_public_key(*peer_cert_, q_ca_);
      return;
    }
    case StepLabel::A3:
    case StepLabel::B3: {
      derive_static_session(kPorambInfo);
      Bytes finish = field_bytes(msg, "finish");
      if (finish.size() != kFinishBytes || finish[0] != kFinishType) {
        throw StepFailure{FailReason::Malformed, "Finish framing"};
      }
      Role peer_role = role_ == Role::Initiator ? Role::Responder : Role::Initiator;
      auto expect = transcript_mac(role_byte(peer_role));
      if (!ct_equal(ByteSpan(finish.data() + 1, crypto::kHmacTagBytes), ByteSpan(expect))) {
        throw StepFailure{FailReason::Authentication, "Finish MAC verification failed"};
      }
      for (size_t i = 1 + crypto::kHmacTagBytes; i < kFinishBytes; ++i) {
        if (finish[i] != 0x00) throw StepFailure{FailReason::Malformed, "Finish padding"};
      }
      return;
    }
    default:
      throw StepFailure{FailReason::OutOfOrder, "unexpected PORAMB step"};
  }
}

// --- transcript exports ---

Bytes SessionContext::transcript_binary() const {
  Bytes out;
  for (const auto& entry : transcript_) {
    Bytes enc = entry.message.encode();
    out.push_back(static_cast<uint8_t>(entry.message.step));
    uint8_t len[4];
    put_u32_be(len, static_cast<uint32_t>(enc.size()));
    out.insert(out.end(), len, len + 4);
    out.insert(out.end(), enc.begin(), enc.end());
  }
  return out;
}

std::string SessionContext::transcript_hex_dump() const {
  std::string out;
  for (const auto& entry : transcript_) {
    out += std::string(to_string(entry.message.step));
    out += ' ';
    out += hex_encode(entry.message.encode());
    out += '\n';
  }
  return out;
}

}  // namespace ecqvkd::proto
