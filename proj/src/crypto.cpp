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

#include "ecqvkd/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/obj_mac.h>
#include <openssl/params.h>
#include <openssl/sha.h>

#include <cstring>
#include <memory>
#include <mutex>

namespace ecqvkd::crypto {

namespace {

struct BnDeleter {
  void operator()(BIGNUM* p) const { BN_clear_free(p); }
};
struct BnCtxDeleter {
  void operator()(BN_CTX* p) const { BN_CTX_free(p); }
};
struct EcPointDeleter {
  void operator()(EC_POINT* p) const { EC_POINT_free(p); }
};

using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;
using BnCtxPtr = std::unique_ptr<BN_CTX, BnCtxDeleter>;
using EcPointPtr = std::unique_ptr<EC_POINT, EcPointDeleter>;

[[noreturn]] void fail(const char* what) { throw CryptoError(what); }

const EC_GROUP* group() {
  static EC_GROUP* g = [] {
    EC_GROUP* gg = EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1);
    if (gg == nullptr) fail("P-256 group unavailable");
    return gg;
  }();
  return g;
}

const BIGNUM* order() {
  static const BIGNUM* n = EC_GROUP_get0_order(group());
  return n;
}

BnCtxPtr make_ctx() {
  BnCtxPtr ctx(BN_CTX_new());
  if (!ctx) fail("BN_CTX allocation");
  return ctx;
}

BnPtr make_bn() {
  BnPtr b(BN_new());
  if (!b) fail("BIGNUM allocation");
  return b;
}

BnPtr bn_from(ByteSpan be) {
  BnPtr b(BN_bin2bn(be.data(), static_cast<int>(be.size()), nullptr));
  if (!b) fail("BIGNUM decode");
  return b;
}

std::array<uint8_t, 32> bn_to_be32(const BIGNUM* b) {
  std::array<uint8_t, 32> out{};
  if (BN_bn2binpad(b, out.data(), 32) != 32) fail("BIGNUM encode");
  return out;
}

EcPointPtr make_point() {
  EcPointPtr p(EC_POINT_new(group()));
  if (!p) fail("EC_POINT allocation");
  return p;
}

EcPointPtr to_ec(const Point& p, BN_CTX* ctx) {
  auto ec = make_point();
  if (p.is_identity()) {
    if (EC_POINT_set_to_infinity(group(), ec.get()) != 1) fail("set infinity");
    return ec;
  }
  auto enc = p.encode_uncompressed();
  auto x = bn_from(ByteSpan(enc.data(), 32));
  auto y = bn_from(ByteSpan(enc.data() + 32, 32));
  if (EC_POINT_set_affine_coordinates(group(), ec.get(), x.get(), y.get(), ctx) != 1) {
    fail("point not on curve");
  }
  return ec;
}

Point from_ec(const EC_POINT* ec, BN_CTX* ctx) {
  if (EC_POINT_is_at_infinity(group(), ec)) return Point::identity();
  auto x = make_bn();
  auto y = make_bn();
  if (EC_POINT_get_affine_coordinates(group(), ec, x.get(), y.get(), ctx) != 1) {
    fail("affine coordinates");
  }
  std::array<uint8_t, kPointBytes> xy{};
  auto xb = bn_to_be32(x.get());
  auto yb = bn_to_be32(y.get());
  std::memcpy(xy.data(), xb.data(), 32);
  std::memcpy(xy.data() + 32, yb.data(), 32);
  return Point::from_uncompressed(xy);
}

bool scalar_in_range(ByteSpan be32) {
  auto v = bn_from(be32);
  return BN_cmp(v.get(), order()) < 0;
}

// Runs f(result_bn) and wraps the output mod n.
template <typename F>
Scalar mod_n_op(F&& f) {
  auto ctx = make_ctx();
  auto r = make_bn();
  f(r.get(), ctx.get());
  return Scalar::from_bytes(bn_to_be32(r.get()));
}

}  // namespace

// --- Scalar ---

Scalar Scalar::from_bytes(ByteSpan be32) {
  if (be32.size() != kScalarBytes) fail("scalar: need 32 bytes");
  if (!scalar_in_range(be32)) fail("scalar: not below group order");
  Scalar s;
  std::memcpy(s.be_.data(), be32.data(), kScalarBytes);
  return s;
}

Scalar Scalar::from_bytes_reduced(ByteSpan be) {
  auto ctx = make_ctx();
  auto v = bn_from(be);
  auto r = make_bn();
  if (BN_nnmod(r.get(), v.get(), order(), ctx.get()) != 1) fail("scalar reduce");
  Scalar s;
  s.be_ = bn_to_be32(r.get());
  return s;
}

Scalar Scalar::from_u64(uint64_t v) {
  std::array<uint8_t, kScalarBytes> be{};
  for (int i = 0; i < 8; ++i) be[24 + i] = static_cast<uint8_t>(v >> (56 - 8 * i));
  return from_bytes(be);
}

Scalar Scalar::random(RandomSource& rng) {
  std::array<uint8_t, kScalarBytes> buf{};
  for (;;) {
    rng.fill(buf);
    if (!scalar_in_range(buf)) continue;
    bool zero = true;
    for (uint8_t b : buf) zero = zero && b == 0;
    if (zero) continue;
    auto s = Scalar::from_bytes(buf);
    cleanse(buf.data(), buf.size());
    return s;
  }
}

Scalar Scalar::mod_add(const Scalar& other) const {
  return mod_n_op([&](BIGNUM* r, BN_CTX* ctx) {
    auto a = bn_from(span());
    auto b = bn_from(other.span());
    if (BN_mod_add(r, a.get(), b.get(), order(), ctx) != 1) fail("mod_add");
  });
}

Scalar Scalar::mod_sub(const Scalar& other) const {
  return mod_n_op([&](BIGNUM* r, BN_CTX* ctx) {
    auto a = bn_from(span());
    auto b = bn_from(other.span());
    if (BN_mod_sub(r, a.get(), b.get(), order(), ctx) != 1) fail("mod_sub");
  });
}

Scalar Scalar::mod_mul(const Scalar& other) const {
  return mod_n_op([&](BIGNUM* r, BN_CTX* ctx) {
    auto a = bn_from(span());
    auto b = bn_from(other.span());
    if (BN_mod_mul(r, a.get(), b.get(), order(), ctx) != 1) fail("mod_mul");
  });
}

Scalar Scalar::mod_inverse() const {
  if (is_zero()) fail("mod_inverse of zero");
  return mod_n_op([&](BIGNUM* r, BN_CTX* ctx) {
    auto a = bn_from(span());
    if (BN_mod_inverse(r, a.get(), order(), ctx) == nullptr) fail("mod_inverse");
  });
}

bool Scalar::is_zero() const {
  uint8_t acc = 0;
  for (uint8_t b : be_) acc |= b;
  return acc == 0;
}

// --- Point ---

const Point& Point::generator() {
  static const Point g = [] {
    auto ctx = make_ctx();
    return from_ec(EC_GROUP_get0_generator(group()), ctx.get());
  }();
  return g;
}

Point Point::from_uncompressed(ByteSpan xy64) {
  if (xy64.size() != kPointBytes) fail("point: need 64 bytes");
  auto ctx = make_ctx();
  auto x = bn_from(xy64.subspan(0, 32));
  auto y = bn_from(xy64.subspan(32, 32));
  auto ec = make_point();
  if (EC_POINT_set_affine_coordinates(group(), ec.get(), x.get(), y.get(), ctx.get()) != 1) {
    fail("point not on curve");
  }
  if (EC_POINT_is_on_curve(group(), ec.get(), ctx.get()) != 1) fail("point not on curve");
  Point p;
  p.identity_ = false;
  std::memcpy(p.xy_.data(), xy64.data(), kPointBytes);
  return p;
}

Point Point::from_compressed(ByteSpan b33) {
  if (b33.size() != kCompressedPointBytes) fail("point: need 33 bytes");
  if (b33[0] != 0x02 && b33[0] != 0x03) fail("point: bad compression prefix");
  auto ctx = make_ctx();
  auto x = bn_from(b33.subspan(1, 32));
  auto ec = make_point();
  if (EC_POINT_set_compressed_coordinates(group(), ec.get(), x.get(), b33[0] & 1, ctx.get()) !=
      1) {
    fail("point not on curve");
  }
  return from_ec(ec.get(), ctx.get());
}

Point Point::mul(const Scalar& k) const {
  if (is_identity() || k.is_zero()) return identity();
  auto ctx = make_ctx();
  auto base = to_ec(*this, ctx.get());
  auto kb = bn_from(k.span());
  auto r = make_point();
  // Generator scalar slot left null on purpose: every multiplication,
  // including k*G, takes the variable-point path so per-operation cost is
  // uniform across the protocol suite.
  if (EC_POINT_mul(group(), r.get(), nullptr, base.get(), kb.get(), ctx.get()) != 1) {
    fail("point mul");
  }
  return from_ec(r.get(), ctx.get());
}

Point Point::add(const Point& other) const {
  if (is_identity()) return other;
  if (other.is_identity()) return *this;
  auto ctx = make_ctx();
  auto a = to_ec(*this, ctx.get());
  auto b = to_ec(other, ctx.get());
  auto r = make_point();
  if (EC_POINT_add(group(), r.get(), a.get(), b.get(), ctx.get()) != 1) fail("point add");
  return from_ec(r.get(), ctx.get());
}

Point Point::negate() const {
  if (is_identity()) return identity();
  auto ctx = make_ctx();
  auto a = to_ec(*this, ctx.get());
  if (EC_POINT_invert(group(), a.get(), ctx.get()) != 1) fail("point invert");
  return from_ec(a.get(), ctx.get());
}

Point Point::mul2(const Scalar& a, const Point& p, const Scalar& b, const Point& q) {
  return p.mul(a).add(q.mul(b));
}

std::array<uint8_t, kPointBytes> Point::encode_uncompressed() const {
  if (identity_) fail("cannot encode the identity point");
  return xy_;
}

std::array<uint8_t, kCompressedPointBytes> Point::encode_compressed() const {
  if (identity_) fail("cannot encode the identity point");
  std::array<uint8_t, kCompressedPointBytes> out{};
  out[0] = (xy_[63] & 1) ? 0x03 : 0x02;
  std::memcpy(out.data() + 1, xy_.data(), 32);
  return out;
}

std::array<uint8_t, kScalarBytes> Point::x_bytes() const {
  if (identity_) fail("identity point has no x coordinate");
  std::array<uint8_t, kScalarBytes> out{};
  std::memcpy(out.data(), xy_.data(), 32);
  return out;
}

// --- Signature ---

Signature Signature::from_bytes(ByteSpan b64) {
  if (b64.size() != kSignatureBytes) fail("signature: need 64 bytes");
  Signature sig;
  std::memcpy(sig.r.data(), b64.data(), 32);
  std::memcpy(sig.s.data(), b64.data() + 32, 32);
  return sig;
}

std::array<uint8_t, kSignatureBytes> Signature::encode() const {
  std::array<uint8_t, kSignatureBytes> out{};
  std::memcpy(out.data(), r.data(), 32);
  std::memcpy(out.data() + 32, s.data(), 32);
  return out;
}

// --- SymmetricKey ---

SymmetricKey::SymmetricKey(ByteSpan material, KeyRole role)
    : material_(material), role_(role) {
  if (role == KeyRole::Encryption && material.size() != kAesKeyBytes) {
    fail("encryption key must be 16 bytes");
  }
  if (role == KeyRole::Mac && material.size() != kMacKeyBytes &&
      material.size() != kCmacTagBytes) {
    fail("mac key must be 16 or 32 bytes");
  }
}

// --- keypair / ECDH ---

std::pair<Scalar, Point> generate_keypair(RandomSource& rng) {
  Scalar x = Scalar::random(rng);
  Point xg = Point::mul_generator(x);
  return {x, xg};
}

Point ecdh(const Scalar& secret, const Point& peer) {
  if (peer.is_identity()) fail("ecdh: identity peer point");
  if (secret.is_zero()) fail("ecdh: zero scalar");
  Point shared = peer.mul(secret);
  if (shared.is_identity()) fail("ecdh: degenerate shared point");
  return shared;
}

// --- hashing / KDF / MACs ---

Digest hash(ByteSpan message) {
  static const uint8_t empty = 0;
  Digest d;
  SHA256(message.empty() ? &empty : message.data(), message.size(), d.bytes.data());
  return d;
}

std::array<uint8_t, kHmacTagBytes> hmac_sha256(ByteSpan key, ByteSpan data) {
  static EVP_MAC* mac = [] {
    EVP_MAC* m = EVP_MAC_fetch(nullptr, "HMAC", nullptr);
    if (m == nullptr) fail("HMAC unavailable");
    return m;
  }();

  std::array<uint8_t, kHmacTagBytes> out{};
  EVP_MAC_CTX* ctx = EVP_MAC_CTX_new(mac);
  if (ctx == nullptr) fail("HMAC ctx");
  char digest_name[] = "SHA256";
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_DIGEST, digest_name, 0),
      OSSL_PARAM_construct_end()};
  static const uint8_t empty = 0;
  size_t outlen = 0;
  int ok = EVP_MAC_init(ctx, key.empty() ? &empty : key.data(), key.size(), params) &&
           EVP_MAC_update(ctx, data.empty() ? &empty : data.data(), data.size()) &&
           EVP_MAC_final(ctx, out.data(), &outlen, out.size());
  EVP_MAC_CTX_free(ctx);
  if (!ok || outlen != out.size()) fail("HMAC failure");
  return out;
}

Bytes kdf(ByteSpan ikm, ByteSpan salt, ByteSpan info, size_t out_len) {
  if (out_len > kMaxKdfOutput) throw std::invalid_argument("kdf: output too long");

  // Extract.
  std::array<uint8_t, 32> zero_salt{};
  ByteSpan salt_used = salt.empty() ? ByteSpan(zero_salt.data(), zero_salt.size()) : salt;
  auto prk = hmac_sha256(salt_used, ikm);

  // Expand.
  Bytes out;
  out.reserve(out_len);
  std::array<uint8_t, 32> t{};
  size_t t_len = 0;
  uint8_t counter = 1;
  while (out.size() < out_len) {
    Bytes block;
    block.reserve(t_len + info.size() + 1);
    block.insert(block.end(), t.begin(), t.begin() + t_len);
    block.insert(block.end(), info.begin(), info.end());
    block.push_back(counter++);
    t = hmac_sha256(ByteSpan(prk.data(), prk.size()), block);
    t_len = t.size();
    size_t take = std::min(t_len, out_len - out.size());
    out.insert(out.end(), t.begin(), t.begin() + take);
  }
  cleanse(prk.data(), prk.size());
  cleanse(t.data(), t.size());
  return out;
}

// --- ECDSA ---

namespace {

// RFC 6979 HMAC-DRBG nonce stream for (key, digest).
class NonceStream {
 public:
  NonceStream(const Scalar& key, const Digest& h1) {
    std::array<uint8_t, 32> h_reduced = Scalar::from_bytes_reduced(h1.span()).bytes();
    v_.fill(0x01);
    k_.fill(0x00);
    step(0x00, key.bytes(), h_reduced);
    step(0x01, key.bytes(), h_reduced);
  }

  ~NonceStream() {
    cleanse(k_.data(), k_.size());
    cleanse(v_.data(), v_.size());
  }

  Scalar next() {
    for (;;) {
      v_ = hmac_sha256(kspan(), vspan());
      if (scalar_in_range(vspan())) {
        auto cand = Scalar::from_bytes(vspan());
        if (!cand.is_zero()) return cand;
      }
      retune();
    }
  }

  // Called when a candidate produced r == 0 or s == 0.
  void reject() { retune(); }

 private:
  ByteSpan kspan() const { return ByteSpan(k_.data(), k_.size()); }
  ByteSpan vspan() const { return ByteSpan(v_.data(), v_.size()); }

  void step(uint8_t tag, const std::array<uint8_t, 32>& x,
            const std::array<uint8_t, 32>& h) {
    Bytes data;
    data.reserve(v_.size() + 1 + x.size() + h.size());
    data.insert(data.end(), v_.begin(), v_.end());
    data.push_back(tag);
    data.insert(data.end(), x.begin(), x.end());
    data.insert(data.end(), h.begin(), h.end());
    k_ = hmac_sha256(kspan(), data);
    v_ = hmac_sha256(kspan(), vspan());
    cleanse(data.data(), data.size());
  }

  void retune() {
    Bytes data(v_.begin(), v_.end());
    data.push_back(0x00);
    k_ = hmac_sha256(kspan(), data);
    v_ = hmac_sha256(kspan(), vspan());
  }

  std::array<uint8_t, 32> k_{};
  std::array<uint8_t, 32> v_{};
};

}  // namespace

Signature ecdsa_sign(const Scalar& key, ByteSpan message, SignMode mode, RandomSource* rng) {
  if (key.is_zero()) fail("ecdsa_sign: zero key");
  Digest h1 = hash(message);
  Scalar z = Scalar::from_bytes_reduced(h1.span());

  std::optional<NonceStream> stream;
  std::optional<SystemRandom> fallback;
  if (mode == SignMode::Deterministic) {
    stream.emplace(key, h1);
  } else if (rng == nullptr) {
    fallback.emplace();
    rng = &*fallback;
  }

  for (;;) {
    Scalar k = stream ? stream->next() : Scalar::random(*rng);
    Point big_r = Point::mul_generator(k);
    Scalar r = Scalar::from_bytes_reduced(ByteSpan(big_r.x_bytes()));
    if (r.is_zero()) {
      if (stream) stream->reject();
      continue;
    }
    Scalar s = k.mod_inverse().mod_mul(z.mod_add(r.mod_mul(key)));
    if (s.is_zero()) {
      if (stream) stream->reject();
      continue;
    }
    k.wipe();
    Signature sig;
    sig.r = r.bytes();
    sig.s = s.bytes();
    return sig;
  }
}

bool ecdsa_verify(const Point& pub, ByteSpan message, const Signature& sig) {
  if (pub.is_identity()) return false;
  if (!scalar_in_range(ByteSpan(sig.r.data(), sig.r.size())) ||
      !scalar_in_range(ByteSpan(sig.s.data(), sig.s.size()))) {
    return false;
  }
  Scalar r = Scalar::from_bytes(ByteSpan(sig.r.data(), sig.r.size()));
  Scalar s = Scalar::from_bytes(ByteSpan(sig.s.data(), sig.s.size()));
  if (r.is_zero() || s.is_zero()) return false;

  Scalar z = Scalar::from_bytes_reduced(hash(message).span());
  Scalar w = s.mod_inverse();
  Scalar u1 = z.mod_mul(w);
  Scalar u2 = r.mod_mul(w);
  Point rp = Point::mul2(u1, Point::generator(), u2, pub);
  if (rp.is_identity()) return false;
  Scalar v = Scalar::from_bytes_reduced(ByteSpan(rp.x_bytes()));
  return v == r;
}

// --- symmetric cipher ---

namespace {

Bytes aes128_ctr(ByteSpan key, const std::array<uint8_t, kIvBytes>& iv, ByteSpan input) {
  struct CtxDeleter {
    void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
  };
  std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter> ctx(EVP_CIPHER_CTX_new());
  if (!ctx) fail("cipher ctx");
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ctr(), nullptr, key.data(), iv.data()) != 1) {
    fail("AES-CTR init");
  }
  Bytes out(input.size());
  int len = 0;
  if (!input.empty() &&
      EVP_EncryptUpdate(ctx.get(), out.data(), &len, input.data(),
                        static_cast<int>(input.size())) != 1) {
    fail("AES-CTR update");
  }
  int fin = 0;
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1) fail("AES-CTR final");
  return out;
}

}  // namespace

Bytes sym_encrypt(const SymmetricKey& key, const std::array<uint8_t, kIvBytes>& iv,
                  ByteSpan plaintext) {
  if (key.role() != KeyRole::Encryption) fail("sym_encrypt: key role must be encryption");
  return aes128_ctr(key.span(), iv, plaintext);
}

Bytes sym_decrypt(const SymmetricKey& key, const std::array<uint8_t, kIvBytes>& iv,
                  ByteSpan ciphertext) {
  if (key.role() != KeyRole::Encryption) fail("sym_decrypt: key role must be encryption");
  return aes128_ctr(key.span(), iv, ciphertext);
}

// --- MACs ---

std::array<uint8_t, kHmacTagBytes> mac_hmac(const SymmetricKey& key, ByteSpan message) {
  if (key.role() != KeyRole::Mac) fail("mac_hmac: key role must be mac");
  if (key.size() != kMacKeyBytes) fail("mac_hmac: key must be 32 bytes");
  return hmac_sha256(key.span(), message);
}

std::array<uint8_t, kCmacTagBytes> mac_cmac(const SymmetricKey& key, ByteSpan message) {
  if (key.role() != KeyRole::Mac) fail("mac_cmac: key role must be mac");
  if (key.size() != kCmacTagBytes) fail("mac_cmac: key must be 16 bytes");

  static EVP_MAC* mac = [] {
    EVP_MAC* m = EVP_MAC_fetch(nullptr, "CMAC", nullptr);
    if (m == nullptr) fail("CMAC unavailable");
    return m;
  }();

  std::array<uint8_t, kCmacTagBytes> out{};
  EVP_MAC_CTX* ctx = EVP_MAC_CTX_new(mac);
  if (ctx == nullptr) fail("CMAC ctx");
  char cipher_name[] = "AES-128-CBC";
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_CIPHER, cipher_name, 0),
      OSSL_PARAM_construct_end()};
  static const uint8_t empty = 0;
  size_t outlen = 0;
  int ok = EVP_MAC_init(ctx, key.span().data(), key.size(), params) &&
           EVP_MAC_update(ctx, message.empty() ? &empty : message.data(), message.size()) &&
           EVP_MAC_final(ctx, out.data(), &outlen, out.size());
  EVP_MAC_CTX_free(ctx);
  if (!ok || outlen != out.size()) fail("CMAC failure");
  return out;
}

}  // namespace ecqvkd::crypto
