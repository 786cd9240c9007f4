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

#ifndef ECQVKD_RNG_HPP
#define ECQVKD_RNG_HPP

#include <cstdint>
#include <span>

#include "ecqvkd/bytes.hpp"

namespace ecqvkd {

/// Entropy source abstraction. Protocol and certificate code draws all
/// randomness through this interface so a whole simulation can run off a
/// seeded tape and replay byte-identically.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<uint8_t> out) = 0;

  Bytes bytes(size_t n) {
    Bytes b(n);
    fill(b);
    return b;
  }
};

/// OS-backed entropy (OpenSSL RAND_bytes). Throws on entropy failure.
class SystemRandom : public RandomSource {
 public:
  void fill(std::span<uint8_t> out) override;
};

/// Deterministic tape: SHA-256 counter stream keyed on (seed, stream).
/// Distinct streams give independent tapes for the same seed, so the CA,
/// the initiator, and the responder each consume their own tape regardless
/// of interleaving.
class DeterministicRandom : public RandomSource {
 public:
  explicit DeterministicRandom(uint64_t seed, uint32_t stream = 0);
  void fill(std::span<uint8_t> out) override;

 private:
  void refill();

  std::array<uint8_t, 16> key_{};
  uint64_t counter_ = 0;
  std::array<uint8_t, 32> block_{};
  size_t avail_ = 0;
};

}  // namespace ecqvkd

#endif  // ECQVKD_RNG_HPP
