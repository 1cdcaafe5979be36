#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "kesic/common/bytes.hpp"
#include "kesic/common/random.hpp"
#include "kesic/common/result.hpp"

namespace kesic::crypto {

inline constexpr std::size_t kKeySize = 32;
inline constexpr std::size_t kTagSize = 32;
inline constexpr std::size_t kNonceSize = 12;
inline constexpr std::size_t kAeadTagSize = 16;
inline constexpr int kPasswordKdfIterations = 100000;

enum class KeyRole {
  password_derived,  // Kl_C-AS
  lt_sync,           // long-term device synchronization key
  lt_ticket,         // long-term device ticket key
  lt_sesskey,        // long-term device session/attestation-key derivation key
  service,           // Kerberos long-term service or TGS key
  session,           // any short-lived session key
  attestation,       // per-challenge Dev_pc attestation key
};

std::string_view to_string(KeyRole role);

class SymmetricKey {
 public:
  static Result<SymmetricKey> from_bytes(ByteView bytes, KeyRole role);
  static Result<SymmetricKey> from_hex(std::string_view hex, KeyRole role);
  static SymmetricKey generate(RandomSource& rng, KeyRole role);

  ByteView bytes() const { return bytes_; }
  KeyRole role() const { return role_; }
  std::string hex() const { return to_hex(bytes_); }

  // Same secret material, different role tag.
  SymmetricKey with_role(KeyRole role) const { return SymmetricKey(bytes_, role); }

  bool operator==(const SymmetricKey&) const = default;

 private:
  SymmetricKey(std::array<std::uint8_t, kKeySize> b, KeyRole role) : bytes_(b), role_(role) {}

  std::array<std::uint8_t, kKeySize> bytes_{};
  KeyRole role_;
};

struct HmacTag {
  std::array<std::uint8_t, kTagSize> bytes{};

  std::string hex() const { return to_hex(bytes); }
  static Result<HmacTag> from_hex(std::string_view hex);

  bool operator==(const HmacTag&) const = default;
};

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(ByteView data);

// HMAC-SHA-256 over a raw key of any length.
HmacTag hmac(ByteView key, ByteView message);
HmacTag hmac(const SymmetricKey& key, ByteView message);
inline HmacTag hmac(const SymmetricKey& key, std::string_view message) {
  return hmac(key, as_bytes(message));
}

// Comparison whose running time does not depend on the first differing byte.
bool tags_equal(const HmacTag& a, const HmacTag& b);

// AES-256-GCM box: nonce || ciphertext || tag when serialized.
struct SealedBox {
  Bytes nonce;
  Bytes ciphertext;
  std::array<std::uint8_t, kAeadTagSize> tag{};

  Bytes serialize() const;
  static Result<SealedBox> parse(ByteView wire);
};

SealedBox seal(const SymmetricKey& key, ByteView plaintext, RandomSource& rng);
Result<Bytes> open(const SymmetricKey& key, const SealedBox& box);

// PBKDF2-HMAC-SHA-256, kPasswordKdfIterations rounds, 32-byte output.
Result<SymmetricKey> derive_password_key(std::string_view password, ByteView salt);

// ---------------------------------------------------------------- KESIC derivations
//
// All text arguments are canonical fixed-width renderings (see wire/field_spec.hpp);
// anything else is refused with FieldWidthError.

// Dev_g IoT ticket: HMAC(Kl_tkt, id_c || ad_c || lifetime || id_dev).
Result<HmacTag> make_iot_ticket_g(const SymmetricKey& kl_tkt, std::string_view id_c,
                                  std::string_view ad_c, std::string_view lifetime,
                                  std::string_view id_dev);
// Same concatenation keyed with Kl_key.
Result<SymmetricKey> make_session_key_g(const SymmetricKey& kl_key, std::string_view id_c,
                                        std::string_view ad_c, std::string_view lifetime,
                                        std::string_view id_dev);
bool verify_iot_ticket_g(const SymmetricKey& kl_tkt, std::string_view id_c,
                         std::string_view ad_c, std::string_view lifetime,
                         std::string_view id_dev, const HmacTag& presented);

// Dev_pc IoT ticket: HMAC(Kl_tkt, id_c || ad_c || co_pc || id_dev).
Result<HmacTag> make_iot_ticket_pc(const SymmetricKey& kl_tkt, std::string_view id_c,
                                   std::string_view ad_c, std::string_view co_pc,
                                   std::string_view id_dev);
Result<SymmetricKey> make_session_key_pc(const SymmetricKey& kl_key, std::string_view id_c,
                                         std::string_view ad_c, std::string_view co_pc,
                                         std::string_view id_dev);
bool verify_iot_ticket_pc(const SymmetricKey& kl_tkt, std::string_view id_c,
                          std::string_view ad_c, std::string_view co_pc,
                          std::string_view id_dev, const HmacTag& presented);

// k = HMAC(Kl_key, challenge)
Result<SymmetricKey> derive_attestation_key(const SymmetricKey& kl_key,
                                            std::string_view challenge);

// HMAC(key, SHA-256(memory)). The key is a Dev_pc attestation key or a Dev_g
// session key.
Result<HmacTag> attest_memory(const SymmetricKey& key, ByteView memory);
// Verifier side when only the reference digest is known.
HmacTag attest_digest(const SymmetricKey& key, const Digest& memory_digest);

}  // namespace kesic::crypto
