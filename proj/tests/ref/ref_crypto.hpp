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

// Independent reference implementations used only as test oracles. These
// deliberately share no code with the library: SHA-256/HMAC/HKDF are written
// from the specs, AES is a plain table implementation, and the P-256 group
// math runs on GMP big integers in affine coordinates.

#ifndef ECQVKD_TESTS_REF_CRYPTO_HPP
#define ECQVKD_TESTS_REF_CRYPTO_HPP

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace refimpl {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

// SHA-256 / HMAC / HKDF
std::array<uint8_t, 32> sha256(ByteSpan data);
std::array<uint8_t, 32> hmac_sha256(ByteSpan key, ByteSpan data);
Bytes hkdf_sha256(ByteSpan ikm, ByteSpan salt, ByteSpan info, size_t out_len);

// AES-128
std::array<uint8_t, 16> aes128_encrypt_block(ByteSpan key16, ByteSpan block16);
Bytes aes128_ctr(ByteSpan key16, ByteSpan iv16, ByteSpan data);
std::array<uint8_t, 16> aes128_cmac(ByteSpan key16, ByteSpan msg);

// P-256 affine group arithmetic over GMP
struct P256Point {
  mpz_class x, y;
  bool infinity = true;
};

const mpz_class& p256_p();
const mpz_class& p256_n();
P256Point p256_generator();
bool p256_on_curve(const P256Point& pt);
P256Point p256_add(const P256Point& lhs, const P256Point& rhs);
P256Point p256_mul(const P256Point& base, const mpz_class& k);

mpz_class mpz_from_bytes(ByteSpan be);
std::array<uint8_t, 32> mpz_to_be32(const mpz_class& v);
std::array<uint8_t, 64> p256_encode(const P256Point& pt);
P256Point p256_decode(ByteSpan xy64);

// ECDSA over the GMP arithmetic (z = SHA-256 of the message)
struct RefSignature {
  mpz_class r, s;
};
RefSignature ecdsa_sign_with_k(const mpz_class& d, ByteSpan message, const mpz_class& k);
bool ecdsa_verify(const P256Point& pub, ByteSpan message, const RefSignature& sig);

// RFC 6979 deterministic nonce (SHA-256, qlen = 256)
mpz_class rfc6979_nonce(const mpz_class& d, ByteSpan message);

}  // namespace refimpl

#endif  // ECQVKD_TESTS_REF_CRYPTO_HPP
