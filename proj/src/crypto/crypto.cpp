#include "kesic/crypto/crypto.hpp"

#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include "kesic/wire/field_spec.hpp"

namespace kesic::crypto {

std::string_view to_string(KeyRole role) {
  switch (role) {
    case KeyRole::password_derived: return "password-derived";
    case KeyRole::lt_sync: return "lt-sync";
    case KeyRole::lt_ticket: return "lt-ticket";
    case KeyRole::lt_sesskey: return "lt-sesskey";
    case KeyRole::service: return "service";
    case KeyRole::session: return "session";
    case KeyRole::attestation: return "attestation";
  }
  return "unknown";
}

Result<SymmetricKey> SymmetricKey::from_bytes(ByteView bytes, KeyRole role) {
  if (bytes.size() != kKeySize) {
    return make_error(Errc::InvalidArgument,
                      "key must be 32 bytes, got " + std::to_string(bytes.size()));
  }
  std::array<std::uint8_t, kKeySize> b{};
  std::copy(bytes.begin(), bytes.end(), b.begin());
  return SymmetricKey(b, role);
}

Result<SymmetricKey> SymmetricKey::from_hex(std::string_view hex, KeyRole role) {
  KESIC_TRY(raw, kesic::from_hex(hex));
  return from_bytes(raw, role);
}

SymmetricKey SymmetricKey::generate(RandomSource& rng, KeyRole role) {
  std::array<std::uint8_t, kKeySize> b{};
  rng.fill(b);
  return SymmetricKey(b, role);
}

Result<HmacTag> HmacTag::from_hex(std::string_view hex) {
  if (hex.size() != 2 * kTagSize) return make_error(Errc::FieldFormatError, "tag width");
  KESIC_TRY(raw, kesic::from_hex(hex));
  HmacTag t;
  std::copy(raw.begin(), raw.end(), t.bytes.begin());
  return t;
}

Digest sha256(ByteView data) {
  Digest d{};
  SHA256(data.data(), data.size(), d.data());
  return d;
}

HmacTag hmac(ByteView key, ByteView message) {
  HmacTag t;
  unsigned int len = 0;
  // OpenSSL rejects a null key pointer even for empty keys.
  static const std::uint8_t kEmpty = 0;
  const void* k = key.empty() ? &kEmpty : key.data();
  if (HMAC(EVP_sha256(), k, static_cast<int>(key.size()), message.data(), message.size(),
           t.bytes.data(), &len) == nullptr ||
      len != kTagSize) {
    throw std::runtime_error("HMAC-SHA-256 failed");
  }
  return t;
}

HmacTag hmac(const SymmetricKey& key, ByteView message) { return hmac(key.bytes(), message); }

bool tags_equal(const HmacTag& a, const HmacTag& b) {
  return CRYPTO_memcmp(a.bytes.data(), b.bytes.data(), kTagSize) == 0;
}

// ---------------------------------------------------------------- AEAD

namespace {

struct CtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter>;

}  // namespace

Bytes SealedBox::serialize() const {
  Bytes out;
  out.reserve(nonce.size() + ciphertext.size() + tag.size());
  out.insert(out.end(), nonce.begin(), nonce.end());
  out.insert(out.end(), ciphertext.begin(), ciphertext.end());
  out.insert(out.end(), tag.begin(), tag.end());
  return out;
}

Result<SealedBox> SealedBox::parse(ByteView wire) {
  if (wire.size() < kNonceSize + kAeadTagSize) {
    return make_error(Errc::AuthFailure, "sealed box too short");
  }
  SealedBox box;
  box.nonce.assign(wire.begin(), wire.begin() + kNonceSize);
  box.ciphertext.assign(wire.begin() + kNonceSize, wire.end() - kAeadTagSize);
  std::copy(wire.end() - kAeadTagSize, wire.end(), box.tag.begin());
  return box;
}

SealedBox seal(const SymmetricKey& key, ByteView plaintext, RandomSource& rng) {
  SealedBox box;
  box.nonce = rng.bytes(kNonceSize);
  box.ciphertext.resize(plaintext.size());

  CipherCtx ctx(EVP_CIPHER_CTX_new());
  int len = 0;
  bool ok = ctx &&
            EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
            EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kNonceSize, nullptr) == 1 &&
            EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.bytes().data(),
                               box.nonce.data()) == 1;
  if (ok && !plaintext.empty()) {
    ok = EVP_EncryptUpdate(ctx.get(), box.ciphertext.data(), &len, plaintext.data(),
                           static_cast<int>(plaintext.size())) == 1;
  }
  ok = ok && EVP_EncryptFinal_ex(ctx.get(), box.ciphertext.data() + len, &len) == 1 &&
       EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kAeadTagSize, box.tag.data()) == 1;
  if (!ok) throw std::runtime_error("AES-256-GCM seal failed");
  return box;
}

Result<Bytes> open(const SymmetricKey& key, const SealedBox& box) {
  if (box.nonce.size() != kNonceSize) return make_error(Errc::AuthFailure, "bad nonce");
  Bytes plain(box.ciphertext.size());
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  int len = 0;
  bool ok = ctx &&
            EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
            EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kNonceSize, nullptr) == 1 &&
            EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.bytes().data(),
                               box.nonce.data()) == 1;
  if (ok && !box.ciphertext.empty()) {
    ok = EVP_DecryptUpdate(ctx.get(), plain.data(), &len, box.ciphertext.data(),
                           static_cast<int>(box.ciphertext.size())) == 1;
  }
  auto tag = box.tag;
  ok = ok && EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kAeadTagSize, tag.data()) == 1;
  ok = ok && EVP_DecryptFinal_ex(ctx.get(), plain.data() + len, &len) == 1;
  if (!ok) {
    OPENSSL_cleanse(plain.data(), plain.size());
    return make_error(Errc::AuthFailure, "sealed box failed authentication");
  }
  return plain;
}

// ---------------------------------------------------------------- KDF

Result<SymmetricKey> derive_password_key(std::string_view password, ByteView salt) {
  if (password.empty()) return make_error(Errc::EmptyPassword);
  std::array<std::uint8_t, kKeySize> out{};
  if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()), salt.data(),
                        static_cast<int>(salt.size()), kPasswordKdfIterations, EVP_sha256(),
                        static_cast<int>(out.size()), out.data()) != 1) {
    throw std::runtime_error("PBKDF2 failed");
  }
  return SymmetricKey::from_bytes(out, KeyRole::password_derived);
}

// ---------------------------------------------------------------- KESIC derivations

namespace {

Status check_field(const wire::FieldSpec& spec, std::string_view text) {
  if (!wire::is_canonical(spec, text)) {
    return make_error(Errc::FieldWidthError, std::string(spec.name) + " is not canonical");
  }
  return ok_status();
}

Status check_role(const SymmetricKey& key, KeyRole expected) {
  if (key.role() != expected) {
    return make_error(Errc::KeyRoleMismatch, std::string("expected ") +
                                                 std::string(to_string(expected)) + " key, got " +
                                                 std::string(to_string(key.role())));
  }
  return ok_status();
}

Result<HmacTag> ticket_mac(const SymmetricKey& key, KeyRole role, std::string_view id_c,
                           std::string_view ad_c, const wire::FieldSpec& nonce_spec,
                           std::string_view nonce, std::string_view id_dev) {
  KESIC_CHECK(check_role(key, role));
  KESIC_CHECK(check_field(wire::fields::id_c, id_c));
  KESIC_CHECK(check_field(wire::fields::ad_c, ad_c));
  KESIC_CHECK(check_field(nonce_spec, nonce));
  KESIC_CHECK(check_field(wire::fields::id_dev, id_dev));
  std::string input;
  input.reserve(id_c.size() + ad_c.size() + nonce.size() + id_dev.size());
  input.append(id_c).append(ad_c).append(nonce).append(id_dev);
  return hmac(key, input);
}

Result<SymmetricKey> as_session_key(Result<HmacTag> tag) {
  if (!tag) return tag.error();
  return SymmetricKey::from_bytes(tag->bytes, KeyRole::session);
}

}  // namespace

Result<HmacTag> make_iot_ticket_g(const SymmetricKey& kl_tkt, std::string_view id_c,
                                  std::string_view ad_c, std::string_view lifetime,
                                  std::string_view id_dev) {
  return ticket_mac(kl_tkt, KeyRole::lt_ticket, id_c, ad_c, wire::fields::lifetime, lifetime,
                    id_dev);
}

Result<SymmetricKey> make_session_key_g(const SymmetricKey& kl_key, std::string_view id_c,
                                        std::string_view ad_c, std::string_view lifetime,
                                        std::string_view id_dev) {
  return as_session_key(ticket_mac(kl_key, KeyRole::lt_sesskey, id_c, ad_c,
                                   wire::fields::lifetime, lifetime, id_dev));
}

bool verify_iot_ticket_g(const SymmetricKey& kl_tkt, std::string_view id_c,
                         std::string_view ad_c, std::string_view lifetime,
                         std::string_view id_dev, const HmacTag& presented) {
  auto expected = make_iot_ticket_g(kl_tkt, id_c, ad_c, lifetime, id_dev);
  return expected && tags_equal(*expected, presented);
}

Result<HmacTag> make_iot_ticket_pc(const SymmetricKey& kl_tkt, std::string_view id_c,
                                   std::string_view ad_c, std::string_view co_pc,
                                   std::string_view id_dev) {
  return ticket_mac(kl_tkt, KeyRole::lt_ticket, id_c, ad_c, wire::fields::co_pc, co_pc, id_dev);
}

Result<SymmetricKey> make_session_key_pc(const SymmetricKey& kl_key, std::string_view id_c,
                                         std::string_view ad_c, std::string_view co_pc,
                                         std::string_view id_dev) {
  return as_session_key(
      ticket_mac(kl_key, KeyRole::lt_sesskey, id_c, ad_c, wire::fields::co_pc, co_pc, id_dev));
}

bool verify_iot_ticket_pc(const SymmetricKey& kl_tkt, std::string_view id_c,
                          std::string_view ad_c, std::string_view co_pc,
                          std::string_view id_dev, const HmacTag& presented) {
  auto expected = make_iot_ticket_pc(kl_tkt, id_c, ad_c, co_pc, id_dev);
  return expected && tags_equal(*expected, presented);
}

Result<SymmetricKey> derive_attestation_key(const SymmetricKey& kl_key,
                                            std::string_view challenge) {
  KESIC_CHECK(check_role(kl_key, KeyRole::lt_sesskey));
  KESIC_CHECK(check_field(wire::fields::challenge, challenge));
  auto tag = hmac(kl_key, challenge);
  return SymmetricKey::from_bytes(tag.bytes, KeyRole::attestation);
}

Result<HmacTag> attest_memory(const SymmetricKey& key, ByteView memory) {
  if (memory.empty()) return make_error(Errc::EmptyMemory);
  return attest_digest(key, sha256(memory));
}

HmacTag attest_digest(const SymmetricKey& key, const Digest& memory_digest) {
  return hmac(key, memory_digest);
}

}  // namespace kesic::crypto
