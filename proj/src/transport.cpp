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

#include "ecqvkd/transport.hpp"

#include <algorithm>

namespace ecqvkd::transport {

namespace {

constexpr uint8_t kPciSingle = 0x00;
constexpr uint8_t kPciFirst = 0x10;
constexpr uint8_t kPciConsecutive = 0x20;

}  // namespace

std::string_view to_string(Direction dir) { return dir == Direction::AtoB ? "a>b" : "b>a"; }

std::vector<Frame> fragment(ByteSpan payload, uint16_t can_id) {
  if (payload.size() > kMaxTpPayload) {
    throw FragmentationError("payload exceeds 4095 bytes");
  }

  std::vector<Frame> frames;
  if (payload.size() <= kSingleFrameMax) {
    Frame f;
    f.can_id = can_id;
    if (payload.size() <= kSingleFrameShortMax) {
      f.payload.push_back(kPciSingle | static_cast<uint8_t>(payload.size()));
    } else {
      f.payload.push_back(kPciSingle);  // escape marker
      f.payload.push_back(static_cast<uint8_t>(payload.size()));
    }
    f.payload.insert(f.payload.end(), payload.begin(), payload.end());
    frames.push_back(std::move(f));
    return frames;
  }

  Frame first;
  first.can_id = can_id;
  first.payload.push_back(kPciFirst | static_cast<uint8_t>((payload.size() >> 8) & 0x0f));
  first.payload.push_back(static_cast<uint8_t>(payload.size() & 0xff));
  first.payload.insert(first.payload.end(), payload.begin(), payload.begin() + kFirstFrameData);
  frames.push_back(std::move(first));

  size_t off = kFirstFrameData;
  uint8_t seq = 1;
  while (off < payload.size()) {
    size_t take = std::min(kConsecutiveFrameData, payload.size() - off);
    Frame cf;
    cf.can_id = can_id;
    cf.payload.push_back(kPciConsecutive | seq);
    cf.payload.insert(cf.payload.end(), payload.begin() + off, payload.begin() + off + take);
    frames.push_back(std::move(cf));
    off += take;
    seq = (seq + 1) & 0x0f;
  }
  return frames;
}

Bytes reassemble(const std::vector<Frame>& frames) {
  if (frames.empty()) throw ReassemblyError("no frames");
  for (const auto& f : frames) {
    if (f.payload.empty()) throw ReassemblyError("empty frame");
    if (f.payload.size() > kMaxFramePayload) throw ReassemblyError("frame exceeds 64 bytes");
  }

  const Frame& head = frames.front();
  uint8_t type = head.payload[0] & 0xf0;

  if (type == kPciSingle) {
    if (frames.size() != 1) throw ReassemblyError("trailing frames after single frame");
    size_t len = head.payload[0] & 0x0f;
    size_t data_off = 1;
    if (len == 0) {
      if (head.payload.size() < 2) {
        // 1-byte PCI with length 0: an empty payload, nothing follows.
        return Bytes{};
      }
      len = head.payload[1];
      data_off = 2;
      if (len <= kSingleFrameShortMax) throw ReassemblyError("escape used for short frame");
      if (len > kSingleFrameMax) throw ReassemblyError("single frame too long");
    }
    if (head.payload.size() != data_off + len) throw ReassemblyError("single-frame length");
    return Bytes(head.payload.begin() + static_cast<long>(data_off), head.payload.end());
  }

  if (type != kPciFirst) throw ReassemblyError("sequence does not start with a first frame");
  if (head.payload.size() != 2 + kFirstFrameData) throw ReassemblyError("first-frame length");
  size_t total = (static_cast<size_t>(head.payload[0] & 0x0f) << 8) | head.payload[1];
  if (total <= kSingleFrameMax || total > kMaxTpPayload) {
    throw ReassemblyError("first-frame total length out of range");
  }

  Bytes out(head.payload.begin() + 2, head.payload.end());
  uint8_t expect_seq = 1;
  for (size_t i = 1; i < frames.size(); ++i) {
    const auto& p = frames[i].payload;
    if ((p[0] & 0xf0) != kPciConsecutive) throw ReassemblyError("expected consecutive frame");
    if ((p[0] & 0x0f) != expect_seq) throw ReassemblyError("sequence number gap or duplicate");
    expect_seq = (expect_seq + 1) & 0x0f;
    out.insert(out.end(), p.begin() + 1, p.end());
    if (out.size() > total) throw ReassemblyError("more data than announced");
  }
  if (out.size() != total) throw ReassemblyError("reassembled length mismatch");
  return out;
}

size_t frame_count_for(size_t payload_len) {
  if (payload_len <= kSingleFrameMax) return 1;
  size_t rest = payload_len - kFirstFrameData;
  return 1 + (rest + kConsecutiveFrameData - 1) / kConsecutiveFrameData;
}

std::pair<size_t, size_t> locate_app_byte(const std::vector<Frame>& frames, size_t app_offset) {
  size_t consumed = 0;
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto& p = frames[i].payload;
    size_t header = 1;
    uint8_t type = p[0] & 0xf0;
    if (type == kPciFirst) {
      header = 2;
    } else if (type == kPciSingle && (p[0] & 0x0f) == 0 && p.size() > 1) {
      header = 2;
    }
    size_t data_len = p.size() - header;
    if (app_offset < consumed + data_len) {
      return {i, header + (app_offset - consumed)};
    }
    consumed += data_len;
  }
  throw TransportError("application offset beyond payload");
}

AdversaryHook make_observer(std::vector<std::pair<proto::StepLabel, Bytes>>& capture) {
  return [&capture](Direction, proto::StepLabel step, std::vector<Frame>& frames) {
    capture.emplace_back(step, reassemble(frames));
  };
}

AdversaryHook make_tamper_hook(proto::StepLabel step, size_t app_offset) {
  return [step, app_offset](Direction, proto::StepLabel s, std::vector<Frame>& frames) {
    if (s != step) return;
    auto [frame_idx, payload_idx] = locate_app_byte(frames, app_offset);
    frames[frame_idx].payload[payload_idx] ^= 0xff;
  };
}

size_t ByteLedger::total_app_bytes() const {
  size_t total = 0;
  for (const auto& e : entries) total += e.app_bytes;
  return total;
}

size_t ByteLedger::total_frame_bytes() const {
  size_t total = 0;
  for (const auto& e : entries) total += e.frame_bytes;
  return total;
}

size_t ByteLedger::total_frames() const {
  size_t total = 0;
  for (const auto& e : entries) total += e.frame_count;
  return total;
}

size_t ByteLedger::app_bytes(Direction dir) const {
  size_t total = 0;
  for (const auto& e : entries) {
    if (e.dir == dir) total += e.app_bytes;
  }
  return total;
}

double Channel::frame_latency_us(const Frame& frame) const {
  double overhead_s = config_.per_frame_overhead_bits / config_.nominal_bitrate;
  double data_s = static_cast<double>(frame.payload.size()) * 8.0 / config_.data_bitrate;
  return (overhead_s + data_s) * 1e6;
}

Channel::Delivery Channel::send(Direction dir, proto::StepLabel step, ByteSpan message) {
  if (!open_) throw TransportError("channel closed");

  uint16_t can_id = dir == Direction::AtoB ? config_.can_id_a_to_b : config_.can_id_b_to_a;
  std::vector<Frame> frames = fragment(message, can_id);
  if (adversary_) adversary_(dir, step, frames);

  Delivery delivery;
  delivery.frames = frames.size();
  size_t frame_bytes = 0;
  for (const auto& f : frames) {
    double lat = frame_latency_us(f);
    delivery.latency_us += lat;
    delivery.max_frame_latency_us = std::max(delivery.max_frame_latency_us, lat);
    frame_bytes += f.payload.size();
    frame_log_.push_back({dir, f});
  }
  virtual_time_us_ += delivery.latency_us;

  // True transmitted bytes: what actually went over the wire, tampered or not.
  delivery.payload = reassemble(frames);
  ledger_.entries.push_back(
      {step, dir, delivery.payload.size(), frames.size(), frame_bytes});
  message_log_.push_back({delivery.payload, dir, virtual_time_us_});
  return delivery;
}

std::string Channel::frame_log_text() const {
  std::string out;
  char line[32];
  for (const auto& e : frame_log_) {
    std::snprintf(line, sizeof line, "%s 0x%03x %zu ", std::string(to_string(e.dir)).c_str(),
                  e.frame.can_id, e.frame.payload.size());
    out += line;
    out += hex_encode(e.frame.payload);
    out += '\n';
  }
  return out;
}

}  // namespace ecqvkd::transport
