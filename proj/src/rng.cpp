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

#include "ecqvkd/rng.hpp"

#include <openssl/rand.h>
#include <openssl/sha.h>

#include <cstring>
#include <stdexcept>

namespace ecqvkd {

void SystemRandom::fill(std::span<uint8_t> out) {
  if (out.empty()) return;
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw std::runtime_error("SystemRandom: entropy source failure");
  }
}

DeterministicRandom::DeterministicRandom(uint64_t seed, uint32_t stream) {
  for (int i = 0; i < 8; ++i) key_[i] = static_cast<uint8_t>(seed >> (56 - 8 * i));
  put_u32_be(key_.data() + 8, stream);
  // key_[12..15] stay zero; tag bytes keep the tape domain-separated from
  // any other SHA-256 use in the library.
  key_[12] = 't';
  key_[13] = 'a';
  key_[14] = 'p';
  key_[15] = 'e';
}

void DeterministicRandom::refill() {
  uint8_t in[24];
  std::memcpy(in, key_.data(), 16);
  for (int i = 0; i < 8; ++i) in[16 + i] = static_cast<uint8_t>(counter_ >> (56 - 8 * i));
  ++counter_;
  SHA256(in, sizeof(in), block_.data());
  avail_ = block_.size();
}

void DeterministicRandom::fill(std::span<uint8_t> out) {
  size_t pos = 0;
  while (pos < out.size()) {
    if (avail_ == 0) refill();
    size_t take = std::min(avail_, out.size() - pos);
    std::memcpy(out.data() + pos, block_.data() + (block_.size() - avail_), take);
    avail_ -= take;
    pos += take;
  }
}

}  // namespace ecqvkd
