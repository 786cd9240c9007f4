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

#ifndef ECQVKD_CERT_HPP
#define ECQVKD_CERT_HPP

#include <cstdint>
#include <vector>

#include "ecqvkd/crypto.hpp"

// ECQV implicit certificate lifecycle.
//
//   request:  subject picks k_U, sends commitment R_U = k_U * G
//   issue:    CA picks k_CA, sets P_U = R_U + k_CA * G, builds the
//             certificate around P_U, computes e = H(cert) mod n and
//             r = e * k_CA + d_CA mod n, returns (cert, r)
//   receive:  subject computes d_U = e * k_U + r and checks that
//             e * P_U + Q_CA == d_U * G before accepting
//
// Anyone holding the CA public key reconstructs the subject's public key
// from the certificate alone: Q_U = H(cert) * P_U + Q_CA. A signature that
// verifies under Q_U implicitly authenticates the certificate.

namespace ecqvkd::cert {

inline constexpr size_t kIdBytes = 16;
inline constexpr size_t kCertBytes = 101;
inline constexpr size_t kExtensionBytes = 22;
inline constexpr uint8_t kCurveP256 = 0x01;
inline constexpr uint8_t kUsageKeyAgreementAndSign = 0x03;

using DeviceId = std::array<uint8_t, kIdBytes>;

class CertificateError : public std::runtime_error {
 public:
  explicit CertificateError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when cert_receive's Q_U == d_U * G self-check fails: the
/// certificate or the private-key contribution r changed in transit.
class IssuanceCorruptionError : public CertificateError {
 public:
  explicit IssuanceCorruptionError(const std::string& what) : CertificateError(what) {}
};

/// Subject-side request state. The scalar k stays local; only (identity, R_U)
/// travel to the CA.
struct CertificateRequest {
  DeviceId identity{};
  crypto::Point commitment;  // R_U = k * G
  crypto::Scalar k;          // retained secret, never transmitted
};

/// Minimal 101-byte certificate:
///   subject_id(16) || issuer_id(16) || serial(4) || valid_from(4) ||
///   valid_to(4) || curve_id(1) || key_usage(1) || P_U compressed(33) ||
///   extensions(22)
/// All integers big-endian; validity bounds are epoch seconds.
struct ImplicitCertificate {
  DeviceId subject_id{};
  DeviceId issuer_id{};
  uint32_t serial = 0;
  uint32_t valid_from = 0;
  uint32_t valid_to = 0;
  uint8_t curve_id = kCurveP256;
  uint8_t key_usage = kUsageKeyAgreementAndSign;
  crypto::Point reconstruction_point;  // P_U
  std::array<uint8_t, kExtensionBytes> extensions{};

  std::array<uint8_t, kCertBytes> encode() const;
  static ImplicitCertificate decode(ByteSpan bytes);  // throws CertificateError

  bool valid_at(uint32_t epoch_seconds) const {
    return valid_from <= epoch_seconds && epoch_seconds < valid_to;
  }

  bool operator==(const ImplicitCertificate&) const = default;
};

/// A received identity: certificate plus the reconstructed key pair.
struct CertifiedIdentity {
  ImplicitCertificate certificate;
  crypto::Scalar private_key;  // d_U
  crypto::Point public_key;    // Q_U = d_U * G
};

/// Certificate authority. Single-writer: issuance bumps the serial counter
/// and appends to the log.
class CaState {
 public:
  static CaState create(const DeviceId& issuer_id, RandomSource& rng);

  struct Issuance {
    ImplicitCertificate certificate;
    crypto::Scalar r;  // private-key reconstruction value
  };

  Issuance issue(const CertificateRequest& request, uint32_t valid_from, uint32_t valid_to,
                 RandomSource& rng);

  const crypto::Point& public_key() const { return q_ca_; }
  const DeviceId& issuer_id() const { return issuer_id_; }
  uint32_t next_serial() const { return next_serial_; }
  const std::vector<std::pair<DeviceId, uint32_t>>& issuance_log() const { return log_; }

 private:
  CaState() = default;

  DeviceId issuer_id_{};
  crypto::Scalar d_ca_;
  crypto::Point q_ca_;
  uint32_t next_serial_ = 1;
  std::vector<std::pair<DeviceId, uint32_t>> log_;
};

/// Fresh request for a 16-byte identity.
CertificateRequest cert_request(ByteSpan identity, RandomSource& rng);

/// Subject-side key reception. Verifies Q_U == d_U * G and throws
/// IssuanceCorruptionError otherwise.
CertifiedIdentity cert_receive(const CertificateRequest& request,
                               const ImplicitCertificate& certificate, const crypto::Scalar& r,
                               const crypto::Point& q_ca);

/// Q_X = Hash(cert) * P_U + Q_CA. Deterministic in the encoded certificate.
crypto::Point derive_public_key(const ImplicitCertificate& certificate,
                                const crypto::Point& q_ca);

/// e = SHA-256(encoded certificate) reduced mod n.
crypto::Scalar certificate_hash_scalar(const ImplicitCertificate& certificate);

}  // namespace ecqvkd::cert

#endif  // ECQVKD_CERT_HPP
