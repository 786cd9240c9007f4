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

#ifndef ECQVKD_BYTES_HPP
#define ECQVKD_BYTES_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ecqvkd {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

std::string hex_encode(ByteSpan data);
Bytes hex_decode(const std::string& hex);  // throws std::invalid_argument on bad input

/// Constant-time equality; false for mismatched lengths.
bool ct_equal(ByteSpan a, ByteSpan b);

/// Overwrites a buffer with zeros in a way the optimizer must not elide.
void cleanse(void* data, size_t len);

Bytes concat(std::initializer_list<ByteSpan> parts);

void put_u32_be(uint8_t* out, uint32_t v);
uint32_t get_u32_be(const uint8_t* in);

/// Heap byte buffer for key material. The storage is zeroed before release,
/// and wipe() zeroes it in place so a held pointer can observe the cleanse.
class SecretBytes {
 public:
  SecretBytes() = default;
  explicit SecretBytes(size_t len) : buf_(len, 0) {}
  explicit SecretBytes(Bytes b) : buf_(std::move(b)) {}
  SecretBytes(ByteSpan b) : buf_(b.begin(), b.end()) {}

  SecretBytes(const SecretBytes&) = default;
  SecretBytes& operator=(const SecretBytes&) = default;
  SecretBytes(SecretBytes&& other) noexcept : buf_(std::move(other.buf_)) { other.buf_.clear(); }
  SecretBytes& operator=(SecretBytes&& other) noexcept {
    if (this != &other) {
      wipe();
      buf_ = std::move(other.buf_);
      other.buf_.clear();
    }
    return *this;
  }

  ~SecretBytes() { wipe(); }

  /// Explicit destruction hook: zeroes the buffer in place without freeing it.
  void wipe() {
    if (!buf_.empty()) cleanse(buf_.data(), buf_.size());
  }

  uint8_t* data() { return buf_.data(); }
  const uint8_t* data() const { return buf_.data(); }
  size_t size() const { return buf_.size(); }
  bool empty() const { return buf_.empty(); }
  ByteSpan span() const { return ByteSpan(buf_.data(), buf_.size()); }

  bool operator==(const SecretBytes& other) const { return buf_ == other.buf_; }

 private:
  Bytes buf_;
};

}  // namespace ecqvkd

#endif  // ECQVKD_BYTES_HPP
