#include "kesic/crypto/crypto.hpp"

#include <set>
#include <string>

#include <gtest/gtest.h>
#include <openssl/sha.h>

#include "kesic/common/random.hpp"
#include "kesic/wire/fields.hpp"
#include "kesic/wire/frames.hpp"

namespace kesic::crypto {
namespace {

// Textbook HMAC built from raw SHA-256, independent of the library HMAC path
// the implementation uses.
std::string oracle_hmac_hex(Bytes key, const Bytes& msg) {
  constexpr std::size_t kBlock = 64;
  if (key.size() > kBlock) {
    Bytes h(32);
    SHA256(key.data(), key.size(), h.data());
    key = h;
  }
  key.resize(kBlock, 0);
  Bytes inner, outer;
  for (auto b : key) inner.push_back(b ^ 0x36);
  for (auto b : key) outer.push_back(b ^ 0x5c);
  inner.insert(inner.end(), msg.begin(), msg.end());
  Bytes ih(32);
  SHA256(inner.data(), inner.size(), ih.data());
  outer.insert(outer.end(), ih.begin(), ih.end());
  Bytes oh(32);
  SHA256(outer.data(), outer.size(), oh.data());
  return to_hex(oh);
}

struct Rfc4231Case {
  Bytes key;
  Bytes data;
  std::string expected;
};

std::vector<Rfc4231Case> rfc4231_cases() {
  Bytes key4;
  for (int i = 1; i <= 25; ++i) key4.push_back(static_cast<std::uint8_t>(i));
  return {
      {Bytes(20, 0x0b), to_bytes("Hi There"),
       "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7"},
      {to_bytes("Jefe"), to_bytes("what do ya want for nothing?"),
       "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"},
      {Bytes(20, 0xaa), Bytes(50, 0xdd),
       "773ea91e36800e46854db8ebd09181a72959098b3ef8c122d9635514ced565fe"},
      {key4, Bytes(50, 0xcd), "82558a389a443c0ea4cc819899f2083a85f0faa3e578f8077a2e3ff46729665b"},
  };
}

TEST(Hmac, MatchesRfc4231VectorsOneToFour) {
  for (const auto& c : rfc4231_cases()) {
    EXPECT_EQ(oracle_hmac_hex(c.key, c.data), c.expected) << "oracle drifted";
    EXPECT_EQ(hmac(c.key, c.data).hex(), c.expected);
  }
}

TEST(Hmac, AgreesWithOracleOnRandomInputs) {
  SeededRandom rng(11);
  for (std::size_t len : {0u, 1u, 31u, 32u, 63u, 64u, 65u, 200u}) {
    auto key = rng.bytes(len % 97 + 1);
    auto msg = rng.bytes(len);
    EXPECT_EQ(hmac(key, msg).hex(), oracle_hmac_hex(key, msg));
  }
}

TEST(Hmac, IsDeterministic) {
  auto key = to_bytes("k");
  EXPECT_EQ(hmac(key, to_bytes("m")), hmac(key, to_bytes("m")));
}

TEST(Hmac, EverySingleBitFlipChangesTag) {
  SeededRandom rng(3);
  auto key = SymmetricKey::generate(rng, KeyRole::session);
  const Bytes msg{0x5a};
  auto base = hmac(key, ByteView(msg));
  std::set<std::string> seen{base.hex()};
  for (int bit = 0; bit < 8; ++bit) {
    Bytes flipped{static_cast<std::uint8_t>(msg[0] ^ (1u << bit))};
    seen.insert(hmac(key, ByteView(flipped)).hex());
  }
  EXPECT_EQ(seen.size(), 9u);
}

TEST(SymmetricKey, RejectsWrongLength) {
  EXPECT_EQ(SymmetricKey::from_bytes(Bytes(31), KeyRole::session).code(), Errc::InvalidArgument);
  EXPECT_TRUE(SymmetricKey::from_bytes(Bytes(32), KeyRole::session).ok());
}

TEST(SymmetricKey, IndependentlyGeneratedKeysDiffer) {
  SeededRandom rng(5);
  auto a = SymmetricKey::generate(rng, KeyRole::lt_sync);
  auto b = SymmetricKey::generate(rng, KeyRole::lt_ticket);
  auto c = SymmetricKey::generate(rng, KeyRole::lt_sesskey);
  EXPECT_NE(a.hex(), b.hex());
  EXPECT_NE(b.hex(), c.hex());
  EXPECT_NE(a.hex(), c.hex());
}

// ---------------------------------------------------------------- AEAD

TEST(Seal, EmptyPlaintextRoundTrips) {
  SeededRandom rng(1);
  auto k = SymmetricKey::generate(rng, KeyRole::session);
  auto box = seal(k, {}, rng);
  auto plain = open(k, box);
  ASSERT_TRUE(plain.ok());
  EXPECT_TRUE(plain->empty());
}

TEST(Seal, RoundTripsThroughSerialization) {
  SeededRandom rng(2);
  auto k = SymmetricKey::generate(rng, KeyRole::session);
  auto msg = to_bytes("ticket payload");
  auto parsed = SealedBox::parse(seal(k, msg, rng).serialize());
  ASSERT_TRUE(parsed.ok());
  auto plain = open(k, *parsed);
  ASSERT_TRUE(plain.ok());
  EXPECT_EQ(*plain, msg);
}

TEST(Seal, WrongKeyFailsClosed) {
  SeededRandom rng(3);
  auto k1 = SymmetricKey::generate(rng, KeyRole::session);
  auto k2 = SymmetricKey::generate(rng, KeyRole::session);
  auto box = seal(k1, to_bytes("secret"), rng);
  EXPECT_EQ(open(k2, box).code(), Errc::AuthFailure);
}

TEST(Seal, AnyOfFirstSixteenBitFlipsFailsClosed) {
  SeededRandom rng(4);
  auto k = SymmetricKey::generate(rng, KeyRole::session);
  auto box = seal(k, to_bytes("0123456789abcdef"), rng);
  for (int bit = 0; bit < 16; ++bit) {
    auto tampered = box;
    tampered.ciphertext[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    EXPECT_EQ(open(k, tampered).code(), Errc::AuthFailure) << "bit " << bit;
  }
}

TEST(Seal, TruncatedBoxIsRejected) {
  EXPECT_EQ(SealedBox::parse(Bytes(27)).code(), Errc::AuthFailure);
}

// ---------------------------------------------------------------- password KDF

TEST(PasswordKey, IsDeterministic) {
  auto a = derive_password_key("pw", to_bytes("salt"));
  auto b = derive_password_key("pw", to_bytes("salt"));
  ASSERT_TRUE(a.ok() && b.ok());
  EXPECT_EQ(*a, *b);
  EXPECT_EQ(a->role(), KeyRole::password_derived);
}

TEST(PasswordKey, DistinctSaltsGiveDistinctKeys) {
  SeededRandom rng(9);
  std::set<std::string> keys;
  for (int i = 0; i < 10; ++i) keys.insert(derive_password_key("pw", rng.bytes(16))->hex());
  EXPECT_EQ(keys.size(), 10u);
}

TEST(PasswordKey, GoldenVectorForAlice) {
  // PBKDF2-HMAC-SHA-256("alice-pw", "alice", 100000, 32), recorded with an
  // independent PBKDF2 implementation.
  auto k = derive_password_key("alice-pw", to_bytes("alice"));
  ASSERT_TRUE(k.ok());
  EXPECT_EQ(k->hex(), "e7602b82efc1f28686907f5c64e411efb85209125defc3106284654f766a6f84");
}

TEST(PasswordKey, EmptyPasswordIsRefused) {
  EXPECT_EQ(derive_password_key("", to_bytes("alice")).code(), Errc::EmptyPassword);
}

// ---------------------------------------------------------------- IoT tickets

struct DeviceKeys {
  SymmetricKey sync, tkt, key;
};

DeviceKeys device_keys(RandomSource& rng) {
  return {SymmetricKey::generate(rng, KeyRole::lt_sync),
          SymmetricKey::generate(rng, KeyRole::lt_ticket),
          SymmetricKey::generate(rng, KeyRole::lt_sesskey)};
}

TEST(IotTicketG, DeterministicAndVerifies) {
  SeededRandom rng(21);
  auto k = device_keys(rng);
  auto a = make_iot_ticket_g(k.tkt, "00000011", "7f000001", "0000000000000000001700000600",
                             "00000101");
  auto b = make_iot_ticket_g(k.tkt, "00000011", "7f000001", "0000000000000000001700000600",
                             "00000101");
  ASSERT_TRUE(a.ok());
  EXPECT_EQ(*a, *b);
  EXPECT_TRUE(verify_iot_ticket_g(k.tkt, "00000011", "7f000001", "0000000000000000001700000600",
                                  "00000101", *a));
}

TEST(IotTicketG, OneSecondOfLifetimeChangesTicket) {
  SeededRandom rng(22);
  auto k = device_keys(rng);
  auto a = make_iot_ticket_g(k.tkt, "00000011", "7f000001", "0000000000000000001700000600",
                             "00000101");
  auto b = make_iot_ticket_g(k.tkt, "00000011", "7f000001", "0000000000000000001700000601",
                             "00000101");
  EXPECT_NE(*a, *b);
}

TEST(IotTicketG, NonCanonicalFieldIsRefused) {
  SeededRandom rng(23);
  auto k = device_keys(rng);
  EXPECT_EQ(make_iot_ticket_g(k.tkt, "11", "7f000001", "0000000000000000001700000600",
                              "00000101")
                .code(),
            Errc::FieldWidthError);
  EXPECT_EQ(make_iot_ticket_g(k.tkt, "00000011", "7F000001", "0000000000000000001700000600",
                              "00000101")
                .code(),
            Errc::FieldWidthError);
}

TEST(IotTicketG, WrongRoleKeyIsRefused) {
  SeededRandom rng(24);
  auto k = device_keys(rng);
  EXPECT_EQ(make_iot_ticket_g(k.sync, "00000011", "7f000001", "0000000000000000001700000600",
                              "00000101")
                .code(),
            Errc::KeyRoleMismatch);
}

TEST(SessionKeyG, DiffersFromTicketAndTracksClientId) {
  SeededRandom rng(25);
  auto k = device_keys(rng);
  const std::string lf = "0000000000000000001700000600";
  auto ticket = make_iot_ticket_g(k.tkt, "00000011", "7f000001", lf, "00000101");
  auto s1 = make_session_key_g(k.key, "00000011", "7f000001", lf, "00000101");
  auto s2 = make_session_key_g(k.key, "00000012", "7f000001", lf, "00000101");
  ASSERT_TRUE(ticket.ok() && s1.ok() && s2.ok());
  EXPECT_NE(to_hex(ticket->bytes), s1->hex());
  EXPECT_NE(s1->hex(), s2->hex());
  EXPECT_EQ(s1->role(), KeyRole::session);
}

TEST(IotTicketPC, CounterIncrementChangesTicketAndOtherDeviceRejects) {
  SeededRandom rng(26);
  auto a = device_keys(rng);
  auto b = device_keys(rng);
  const std::string co = "000000000000001700000001";
  const std::string co_next = "000000000000001700000002";
  auto t = make_iot_ticket_pc(a.tkt, "00000011", "7f000001", co, "00000201");
  auto t_next = make_iot_ticket_pc(a.tkt, "00000011", "7f000001", co_next, "00000201");
  ASSERT_TRUE(t.ok() && t_next.ok());
  EXPECT_NE(*t, *t_next);
  EXPECT_TRUE(verify_iot_ticket_pc(a.tkt, "00000011", "7f000001", co, "00000201", *t));
  EXPECT_FALSE(verify_iot_ticket_pc(b.tkt, "00000011", "7f000001", co, "00000201", *t));
}

// Property: for random tuples, make/verify round-trips and any single-field
// perturbation is rejected.
TEST(IotTicketProperty, SingleFieldMutationAlwaysRejected) {
  SeededRandom rng(27);
  auto k = device_keys(rng);
  std::mt19937_64 gen(27);
  auto rand_digits = [&](std::size_t n) {
    std::string s(n, '0');
    for (auto& c : s) c = static_cast<char>('0' + gen() % 10);
    return s;
  };
  auto rand_hex = [&](std::size_t n) {
    std::string s(n, '0');
    for (auto& c : s) c = "0123456789abcdef"[gen() % 16];
    return s;
  };
  for (int iter = 0; iter < 300; ++iter) {
    bool pc = iter % 2 == 1;
    std::array<std::string, 4> f{rand_digits(8), rand_hex(8), rand_digits(pc ? 24 : 28),
                                 rand_digits(8)};
    auto make = [&](const std::array<std::string, 4>& v) {
      return pc ? make_iot_ticket_pc(k.tkt, v[0], v[1], v[2], v[3])
                : make_iot_ticket_g(k.tkt, v[0], v[1], v[2], v[3]);
    };
    auto verify = [&](const std::array<std::string, 4>& v, const HmacTag& t) {
      return pc ? verify_iot_ticket_pc(k.tkt, v[0], v[1], v[2], v[3], t)
                : verify_iot_ticket_g(k.tkt, v[0], v[1], v[2], v[3], t);
    };
    auto tag = make(f);
    ASSERT_TRUE(tag.ok());
    ASSERT_TRUE(verify(f, *tag));
    auto mutated = f;
    auto field = gen() % 4;
    auto pos = gen() % mutated[field].size();
    char old = mutated[field][pos];
    do {
      mutated[field][pos] = field == 1 ? "0123456789abcdef"[gen() % 16]
                                       : static_cast<char>('0' + gen() % 10);
    } while (mutated[field][pos] == old);
    EXPECT_FALSE(verify(mutated, *tag)) << "iteration " << iter;
  }
}

// ---------------------------------------------------------------- attestation

TEST(AttestationKey, DeterministicAndChallengeSensitive) {
  SeededRandom rng(31);
  auto k = device_keys(rng);
  std::set<std::string> keys;
  for (int i = 0; i < 10; ++i) {
    auto ch = wire::Challenge::generate(rng);
    auto a = derive_attestation_key(k.key, ch.text());
    auto b = derive_attestation_key(k.key, ch.text());
    ASSERT_TRUE(a.ok());
    EXPECT_EQ(*a, *b);
    keys.insert(a->hex());
  }
  EXPECT_EQ(keys.size(), 10u);
}

TEST(AttestationKey, RejectsNonCanonicalChallenge) {
  SeededRandom rng(32);
  auto k = device_keys(rng);
  EXPECT_EQ(derive_attestation_key(k.key, "short").code(), Errc::FieldWidthError);
}

TEST(AttestMemory, IsHashThenMac) {
  SeededRandom rng(33);
  auto key = SymmetricKey::generate(rng, KeyRole::attestation);
  auto memory = rng.bytes(4096);
  auto report = attest_memory(key, memory);
  ASSERT_TRUE(report.ok());
  Bytes digest(32);
  SHA256(memory.data(), memory.size(), digest.data());
  EXPECT_EQ(report->hex(), oracle_hmac_hex(Bytes(key.bytes().begin(), key.bytes().end()), digest));
  EXPECT_EQ(*report, attest_digest(key, sha256(memory)));
}

TEST(AttestMemory, FlippedFirstByteChangesReport) {
  SeededRandom rng(34);
  auto key = SymmetricKey::generate(rng, KeyRole::attestation);
  auto memory = rng.bytes(512);
  auto healthy = attest_memory(key, memory);
  memory[0] ^= 0x01;
  EXPECT_NE(*healthy, *attest_memory(key, memory));
}

TEST(AttestMemory, EmptyMemoryIsRefused) {
  SeededRandom rng(35);
  auto key = SymmetricKey::generate(rng, KeyRole::attestation);
  EXPECT_EQ(attest_memory(key, {}).code(), Errc::EmptyMemory);
}

}  // namespace
}  // namespace kesic::crypto
