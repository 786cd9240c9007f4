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

#ifndef ECQVKD_TRANSPORT_HPP
#define ECQVKD_TRANSPORT_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ecqvkd/bytes.hpp"
#include "ecqvkd/protocol.hpp"

// In-memory duplex channel with ISO-TP style fragmentation over CAN-FD
// frames, virtual-time latency, per-step byte accounting, and an inline
// adversary hook for MitM experiments.
//
// Framing (minimal ISO 15765-2 subset for 64-byte CAN-FD frames, no flow
// control):
//   single frame, len <= 7:    [0x0L] data
//   single frame, len 8..62:   [0x00 LL] data          (CAN-FD escape)
//   first frame:               [0x1H LL] 62 bytes      (12-bit total length)
//   consecutive frame:         [0x2S] up to 63 bytes   (4-bit sequence, from 1)

namespace ecqvkd::transport {

inline constexpr size_t kMaxFramePayload = 64;   // CAN-FD data field
inline constexpr size_t kMaxTpPayload = 4095;    // 12-bit first-frame length
inline constexpr size_t kSingleFrameShortMax = 7;
inline constexpr size_t kSingleFrameMax = 62;
inline constexpr size_t kFirstFrameData = 62;
inline constexpr size_t kConsecutiveFrameData = 63;

class TransportError : public std::runtime_error {
 public:
  explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

class FragmentationError : public TransportError {
 public:
  explicit FragmentationError(const std::string& what) : TransportError(what) {}
};

class ReassemblyError : public TransportError {
 public:
  explicit ReassemblyError(const std::string& what) : TransportError(what) {}
};

struct Frame {
  uint16_t can_id = 0;  // 11-bit identifier
  Bytes payload;        // PCI + data, <= 64 bytes
};

std::vector<Frame> fragment(ByteSpan payload, uint16_t can_id);
Bytes reassemble(const std::vector<Frame>& frames);

/// Number of frames fragment() produces for a payload of this size.
size_t frame_count_for(size_t payload_len);

/// Maps an application-payload byte offset to (frame index, payload index)
/// within a fragmented frame sequence. Used by tampering adversaries.
std::pair<size_t, size_t> locate_app_byte(const std::vector<Frame>& frames, size_t app_offset);

enum class Direction { AtoB, BtoA };
std::string_view to_string(Direction dir);

struct ChannelConfig {
  double nominal_bitrate = 500'000.0;    // arbitration phase
  double data_bitrate = 2'000'000.0;     // data phase
  double per_frame_overhead_bits = 48.0; // header/CRC/ack/ifs, nominal phase
  uint16_t can_id_a_to_b = 0x301;
  uint16_t can_id_b_to_a = 0x302;
};

struct LedgerEntry {
  proto::StepLabel step = proto::StepLabel::A1;
  Direction dir = Direction::AtoB;
  size_t app_bytes = 0;
  size_t frame_count = 0;
  size_t frame_bytes = 0;  // including PCI headers
};

/// Running per-step byte account; application-byte totals must equal the sum
/// of the protocol message encodings driven through the channel.
struct ByteLedger {
  std::vector<LedgerEntry> entries;

  size_t total_app_bytes() const;
  size_t total_frame_bytes() const;
  size_t total_frames() const;
  size_t app_bytes(Direction dir) const;
};

struct FrameLogEntry {
  Direction dir = Direction::AtoB;
  Frame frame;
};

/// One reassembled transport-layer message as delivered: application payload,
/// direction, and the virtual-time stamp at which delivery completed.
struct TpMessage {
  Bytes payload;
  Direction dir = Direction::AtoB;
  double timestamp_us = 0.0;
};

/// Adversary hook: runs inline on the frame train before delivery. May
/// record, modify, or substitute frames.
using AdversaryHook = std::function<void(Direction, proto::StepLabel, std::vector<Frame>&)>;

/// Observer adversary: copies every delivery into `capture`.
AdversaryHook make_observer(std::vector<std::pair<proto::StepLabel, Bytes>>& capture);

/// Tamperer: XOR-flips one application byte of one step's message.
AdversaryHook make_tamper_hook(proto::StepLabel step, size_t app_offset);

class Channel {
 public:
  explicit Channel(ChannelConfig config = {}) : config_(config) {}

  struct Delivery {
    Bytes payload;
    size_t frames = 0;
    double latency_us = 0.0;
    double max_frame_latency_us = 0.0;
  };

  /// Fragment, run the adversary hook, account, and deliver after virtual
  /// latency. Throws TransportError if closed, ReassemblyError if the hook
  /// broke the framing.
  Delivery send(Direction dir, proto::StepLabel step, ByteSpan message);

  void set_adversary(AdversaryHook hook) { adversary_ = std::move(hook); }
  void close() { open_ = false; }
  bool open() const { return open_; }

  const ByteLedger& ledger() const { return ledger_; }
  const std::vector<FrameLogEntry>& frame_log() const { return frame_log_; }
  const std::vector<TpMessage>& message_log() const { return message_log_; }
  double virtual_time_us() const { return virtual_time_us_; }
  const ChannelConfig& config() const { return config_; }

  /// Frame log as text: one "dir can_id len payload_hex" line per frame.
  std::string frame_log_text() const;

 private:
  double frame_latency_us(const Frame& frame) const;

  ChannelConfig config_;
  bool open_ = true;
  ByteLedger ledger_;
  std::vector<FrameLogEntry> frame_log_;
  std::vector<TpMessage> message_log_;
  double virtual_time_us_ = 0.0;
  AdversaryHook adversary_;
};

}  // namespace ecqvkd::transport

#endif  // ECQVKD_TRANSPORT_HPP
