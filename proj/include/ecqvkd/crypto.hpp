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

#ifndef ECQVKD_CRYPTO_HPP
#define ECQVKD_CRYPTO_HPP

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "ecqvkd/bytes.hpp"
#include "ecqvkd/rng.hpp"

// Primitive layer: NIST P-256 group arithmetic, SHA-256, HKDF-SHA256,
// ECDSA (randomized or RFC 6979 deterministic nonces), AES-128-CTR,
// HMAC-SHA256 and CMAC-AES128. Fixed wire encodings throughout:
// scalars 32-byte big-endian, points 64-byte raw x||y or 33-byte
// compressed, signatures 64-byte raw r||s.
//
// Scalar multiplication deliberately runs through the generic
// variable-point path even for the group generator; see Point::mul.

namespace ecqvkd::crypto {

inline constexpr size_t kScalarBytes = 32;
inline constexpr size_t kPointBytes = 64;        // uncompressed raw x||y, no prefix
inline constexpr size_t kCompressedPointBytes = 33;
inline constexpr size_t kDigestBytes = 32;
inline constexpr size_t kSignatureBytes = 64;    // raw r||s
inline constexpr size_t kAesKeyBytes = 16;
inline constexpr size_t kMacKeyBytes = 32;
inline constexpr size_t kIvBytes = 16;
inline constexpr size_t kHmacTagBytes = 32;
inline constexpr size_t kCmacTagBytes = 16;
inline constexpr size_t kMaxKdfOutput = 8160;    // 255 * 32, the HKDF-SHA256 bound

class CryptoError : public std::runtime_error {
 public:
  explicit CryptoError(const std::string& what) : std::runtime_error(what) {}
};

struct Digest {
  std::array<uint8_t, kDigestBytes> bytes{};

  ByteSpan span() const { return ByteSpan(bytes.data(), bytes.size()); }
  std::string hex() const { return hex_encode(span()); }
  bool operator==(const Digest&) const = default;
  auto operator<=>(const Digest&) const = default;
};

/// Integer modulo the P-256 group order n. Secret scalars live in [1, n-1].
class Scalar {
 public:
  Scalar() = default;  // zero

  /// Exactly 32 big-endian bytes; must be < n.
  static Scalar from_bytes(ByteSpan be32);
  /// Arbitrary-length big-endian integer reduced mod n (hash-to-scalar).
  static Scalar from_bytes_reduced(ByteSpan be);
  static Scalar from_u64(uint64_t v);
  /// Uniform in [1, n-1] by rejection sampling.
  static Scalar random(RandomSource& rng);

  Scalar mod_add(const Scalar& other) const;
  Scalar mod_sub(const Scalar& other) const;
  Scalar mod_mul(const Scalar& other) const;
  Scalar mod_inverse() const;  // throws CryptoError on zero

  bool is_zero() const;
  const std::array<uint8_t, kScalarBytes>& bytes() const { return be_; }
  ByteSpan span() const { return ByteSpan(be_.data(), be_.size()); }
  void wipe() { cleanse(be_.data(), be_.size()); }

  bool operator==(const Scalar&) const = default;

 private:
  std::array<uint8_t, kScalarBytes> be_{};
};

/// Affine P-256 point (or the identity, explicitly flagged). Immutable.
class Point {
 public:
  Point() = default;  // identity

  static const Point& generator();
  static Point identity() { return Point(); }
  /// 64 raw bytes x||y; rejects off-curve input.
  static Point from_uncompressed(ByteSpan xy64);
  /// 33-byte SEC1 compressed encoding.
  static Point from_compressed(ByteSpan b33);

  /// this * k through the generic variable-point path.
  Point mul(const Scalar& k) const;
  Point add(const Point& other) const;
  Point negate() const;
  /// a*P + b*Q in one pass (generic Straus path; used by ECDSA verify).
  static Point mul2(const Scalar& a, const Point& p, const Scalar& b, const Point& q);
  static Point mul_generator(const Scalar& k) { return generator().mul(k); }

  bool is_identity() const { return identity_; }
  std::array<uint8_t, kPointBytes> encode_uncompressed() const;  // throws if identity
  std::array<uint8_t, kCompressedPointBytes> encode_compressed() const;
  std::array<uint8_t, kScalarBytes> x_bytes() const;

  bool operator==(const Point&) const = default;

 private:
  std::array<uint8_t, kPointBytes> xy_{};
  bool identity_ = true;
};

struct Signature {
  std::array<uint8_t, kScalarBytes> r{};
  std::array<uint8_t, kScalarBytes> s{};

  static Signature from_bytes(ByteSpan b64);
  std::array<uint8_t, kSignatureBytes> encode() const;
  bool operator==(const Signature&) const = default;
};

enum class KeyRole { Encryption, Mac };

/// Symmetric key material with a role tag. Encryption keys are 16 bytes
/// (AES-128); MAC keys are 16 (CMAC) or 32 (HMAC) bytes. Wiped on teardown.
class SymmetricKey {
 public:
  SymmetricKey() = default;
  SymmetricKey(ByteSpan material, KeyRole role);

  KeyRole role() const { return role_; }
  ByteSpan span() const { return material_.span(); }
  size_t size() const { return material_.size(); }
  bool empty() const { return material_.empty(); }
  void wipe() { material_.wipe(); }

  bool operator==(const SymmetricKey& o) const {
    return role_ == o.role_ && material_ == o.material_;
  }

 private:
  SecretBytes material_;
  KeyRole role_ = KeyRole::Encryption;
};

// --- operations ---

/// Fresh (x, x*G) with x uniform in [1, n-1].
std::pair<Scalar, Point> generate_keypair(RandomSource& rng);

/// secret * peer. Rejects the identity (off-curve points never decode).
Point ecdh(const Scalar& secret, const Point& peer);

Digest hash(ByteSpan message);

/// HKDF-SHA256 (RFC 5869 extract-then-expand). out_len <= 8160.
Bytes kdf(ByteSpan ikm, ByteSpan salt, ByteSpan info, size_t out_len);

enum class SignMode { Deterministic, Randomized };

/// ECDSA over P-256 with SHA-256. Deterministic mode derives the nonce per
/// RFC 6979; randomized mode draws it from `rng` (or the OS if absent).
Signature ecdsa_sign(const Scalar& key, ByteSpan message, SignMode mode,
                     RandomSource* rng = nullptr);

bool ecdsa_verify(const Point& pub, ByteSpan message, const Signature& sig);

/// AES-128-CTR keystream; length-preserving, decrypt == encrypt.
Bytes sym_encrypt(const SymmetricKey& key, const std::array<uint8_t, kIvBytes>& iv,
                  ByteSpan plaintext);
Bytes sym_decrypt(const SymmetricKey& key, const std::array<uint8_t, kIvBytes>& iv,
                  ByteSpan ciphertext);

std::array<uint8_t, kHmacTagBytes> mac_hmac(const SymmetricKey& key, ByteSpan message);
std::array<uint8_t, kCmacTagBytes> mac_cmac(const SymmetricKey& key, ByteSpan message);

/// Keyed SHA-256 HMAC over raw key bytes (HKDF / RFC 6979 building block).
std::array<uint8_t, kHmacTagBytes> hmac_sha256(ByteSpan key, ByteSpan data);

}  // namespace ecqvkd::crypto

#endif  // ECQVKD_CRYPTO_HPP
