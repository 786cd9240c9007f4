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

#include "ecqvkd/cert.hpp"

#include <cstring>

namespace ecqvkd::cert {

using crypto::Point;
using crypto::Scalar;

std::array<uint8_t, kCertBytes> ImplicitCertificate::encode() const {
  std::array<uint8_t, kCertBytes> out{};
  uint8_t* p = out.data();
  std::memcpy(p, subject_id.data(), kIdBytes);
  p += kIdBytes;
  std::memcpy(p, issuer_id.data(), kIdBytes);
  p += kIdBytes;
  put_u32_be(p, serial);
  p += 4;
  put_u32_be(p, valid_from);
  p += 4;
  put_u32_be(p, valid_to);
  p += 4;
  *p++ = curve_id;
  *p++ = key_usage;
  auto pu = reconstruction_point.encode_compressed();
  std::memcpy(p, pu.data(), pu.size());
  p += pu.size();
  std::memcpy(p, extensions.data(), extensions.size());
  return out;
}

ImplicitCertificate ImplicitCertificate::decode(ByteSpan bytes) {
  if (bytes.size() != kCertBytes) {
    throw CertificateError("certificate must be exactly 101 bytes");
  }
  ImplicitCertificate cert;
  const uint8_t* p = bytes.data();
  std::memcpy(cert.subject_id.data(), p, kIdBytes);
  p += kIdBytes;
  std::memcpy(cert.issuer_id.data(), p, kIdBytes);
  p += kIdBytes;
  cert.serial = get_u32_be(p);
  p += 4;
  cert.valid_from = get_u32_be(p);
  p += 4;
  cert.valid_to = get_u32_be(p);
  p += 4;
  cert.curve_id = *p++;
  cert.key_usage = *p++;
  try {
    cert.reconstruction_point = Point::from_compressed(ByteSpan(p, 33));
  } catch (const crypto::CryptoError& e) {
    throw CertificateError(std::string("reconstruction point: ") + e.what());
  }
  p += 33;
  std::memcpy(cert.extensions.data(), p, kExtensionBytes);
  if (cert.valid_from >= cert.valid_to) {
    throw CertificateError("certificate validity window is empty");
  }
  return cert;
}

Scalar certificate_hash_scalar(const ImplicitCertificate& certificate) {
  auto enc = certificate.encode();
  return Scalar::from_bytes_reduced(crypto::hash(ByteSpan(enc.data(), enc.size())).span());
}

CertificateRequest cert_request(ByteSpan identity, RandomSource& rng) {
  if (identity.size() != kIdBytes) {
    throw std::invalid_argument("identity must be exactly 16 bytes");
  }
  CertificateRequest req;
  std::memcpy(req.identity.data(), identity.data(), kIdBytes);
  auto [k, r_u] = crypto::generate_keypair(rng);
  req.k = k;
  req.commitment = r_u;
  return req;
}

CaState CaState::create(const DeviceId& issuer_id, RandomSource& rng) {
  CaState ca;
  ca.issuer_id_ = issuer_id;
  auto [d, q] = crypto::generate_keypair(rng);
  ca.d_ca_ = d;
  ca.q_ca_ = q;
  return ca;
}

CaState::Issuance CaState::issue(const CertificateRequest& request, uint32_t valid_from,
                                 uint32_t valid_to, RandomSource& rng) {
  if (valid_from >= valid_to) throw CertificateError("validity window is empty");
  if (request.commitment.is_identity()) throw CertificateError("degenerate commitment");

  ImplicitCertificate cert;
  cert.subject_id = request.identity;
  cert.issuer_id = issuer_id_;
  cert.serial = next_serial_;
  cert.valid_from = valid_from;
  cert.valid_to = valid_to;

  // e == 0 would make the certificate contribute nothing to the key;
  // re-randomize k_CA until the hash scalar is usable.
  Scalar e, k_ca;
  for (;;) {
    k_ca = Scalar::random(rng);
    cert.reconstruction_point = request.commitment.add(Point::mul_generator(k_ca));
    if (cert.reconstruction_point.is_identity()) continue;
    e = certificate_hash_scalar(cert);
    if (!e.is_zero()) break;
  }

  Scalar r = e.mod_mul(k_ca).mod_add(d_ca_);
  k_ca.wipe();

  ++next_serial_;
  log_.emplace_back(request.identity, cert.serial);
  return Issuance{cert, r};
}

CertifiedIdentity cert_receive(const CertificateRequest& request,
                               const ImplicitCertificate& certificate, const Scalar& r,
                               const Point& q_ca) {
  Scalar e = certificate_hash_scalar(certificate);
  Scalar d_u = e.mod_mul(request.k).mod_add(r);
  Point q_u = certificate.reconstruction_point.mul(e).add(q_ca);

  if (d_u.is_zero() || q_u.is_identity() || Point::mul_generator(d_u) != q_u) {
    throw IssuanceCorruptionError(
        "reconstructed key mismatch: certificate or r corrupted in transit");
  }
  return CertifiedIdentity{certificate, d_u, q_u};
}

Point derive_public_key(const ImplicitCertificate& certificate, const Point& q_ca) {
  if (certificate.reconstruction_point.is_identity()) {
    throw CertificateError("malformed certificate: identity reconstruction point");
  }
  Scalar e = certificate_hash_scalar(certificate);
  return certificate.reconstruction_point.mul(e).add(q_ca);
}

}  // namespace ecqvkd::cert
