#pragma once

// Universal re-encryption over the quadratic-residue subgroup of a safe-prime
// group. A ciphertext is two ElGamal pairs: (m*y^k0, g^k0) and (y^k1, g^k1).
// Anyone can re-randomize it without the public key; the second pair lets the
// key holder recognize ciphertexts addressed to it.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <gmpxx.h>

#include "blindspot/random.hpp"

namespace blindspot::ure {

using BigInt = mpz_class;
using Bytes = std::vector<std::uint8_t>;

// p = 2q + 1 with p, q prime; g generates the order-q subgroup.
struct GroupParams {
  BigInt p;
  BigInt q;
  BigInt g;

  // Checks primality of p and q and the order of g. Throws InvalidInput.
  static GroupParams from_safe_prime(const BigInt& p, const BigInt& g);

  std::size_t bits() const;
  // Bytes per serialized group element.
  std::size_t element_width() const;
  // Plaintext bytes that fit in one group element.
  std::size_t block_capacity() const;
  bool in_subgroup(const BigInt& e) const;
};

// p = 23, q = 11, g = 4.
const GroupParams& tiny_group();
// 17-bit p, q ~ 2^15.6; used where statistics need a small q.
const GroupParams& test_group_16();
const GroupParams& test_group_64();
const GroupParams& test_group_256();
// 1024-bit MODP prime from RFC 2409 (Oakley group 2) with g = 4.
const GroupParams& group_1024();

// Named sizes (16, 64, 256, 1024) return the constants above; any other size
// searches for a safe prime starting from a seeded random point.
GroupParams group_for_bits(std::size_t bits, std::uint64_t seed = 1);

// Seedable randomness for exponents and nonces.
class Randomness {
 public:
  explicit Randomness(std::uint64_t seed) : rng_(seed) {}

  // Uniform in [0, bound).
  BigInt below(const BigInt& bound);
  // Uniform in [1, q - 1].
  BigInt exponent(const GroupParams& params);
  void fill(std::span<std::uint8_t> out);

 private:
  Rng rng_;
};

struct PublicKey {
  BigInt y;
};
struct PrivateKey {
  BigInt x;
};
struct KeyPair {
  PublicKey pub;
  PrivateKey priv;
};

KeyPair keygen(const GroupParams& params, Randomness& rnd);
// Deterministic key from a chosen secret in [1, q - 1].
KeyPair keypair_from_secret(const GroupParams& params, const BigInt& x);

struct ElGamalPair {
  BigInt alpha;
  BigInt beta;

  friend bool operator==(const ElGamalPair& a, const ElGamalPair& b) {
    return a.alpha == b.alpha && a.beta == b.beta;
  }
};

struct UreCiphertext {
  ElGamalPair unit0;
  ElGamalPair unit1;

  friend bool operator==(const UreCiphertext& a, const UreCiphertext& b) {
    return a.unit0 == b.unit0 && a.unit1 == b.unit1;
  }
};

UreCiphertext encrypt(const GroupParams& params, const BigInt& m, const PublicKey& pub,
                      Randomness& rnd);
// Explicit exponents; k0 = k1 = 0 is allowed and yields [(m,1);(1,1)].
UreCiphertext encrypt_with(const GroupParams& params, const BigInt& m, const PublicKey& pub,
                           const BigInt& k0, const BigInt& k1);

struct Decryption {
  bool recognized = false;
  std::optional<BigInt> plaintext;
};

Decryption decrypt(const GroupParams& params, const UreCiphertext& c, const PrivateKey& priv);

UreCiphertext reencrypt(const GroupParams& params, const UreCiphertext& c, Randomness& rnd);
UreCiphertext reencrypt_with(const GroupParams& params, const UreCiphertext& c,
                             const BigInt& k0, const BigInt& k1);

// Bytes -> quadratic residue: t = (len + 1) * 256^cap + bytes (right padded),
// element = t^2 mod p. t < q, so it is the unique square root in [1, q].
BigInt encode_plaintext(const GroupParams& params, std::span<const std::uint8_t> bytes);
Bytes decode_plaintext(const GroupParams& params, const BigInt& element);

// Fixed-width big-endian alpha0 beta0 alpha1 beta1.
Bytes serialize_block(const GroupParams& params, const UreCiphertext& c);
UreCiphertext parse_block(const GroupParams& params, std::span<const std::uint8_t> block);

inline constexpr std::size_t kNonceBytes = 16;
inline constexpr std::size_t kMaxPayloadBytes = 240;

struct Nonce {
  std::array<std::uint8_t, kNonceBytes> bytes{};

  static Nonce random(Randomness& rnd);
  friend bool operator==(const Nonce&, const Nonce&) = default;
  friend auto operator<=>(const Nonce&, const Nonce&) = default;
};

struct NonceHash {
  std::size_t operator()(const Nonce& n) const noexcept;
};

// Envelope: (nonce || destination address) under the neighbourhood key.
// Payload: the message split into blocks under the message-secrecy key.
struct SealedMessage {
  UreCiphertext envelope;
  std::vector<UreCiphertext> payload_blocks;

  friend bool operator==(const SealedMessage&, const SealedMessage&) = default;
};

SealedMessage seal_message(const GroupParams& params, std::span<const std::uint8_t> payload,
                           const Nonce& nonce, std::span<const std::uint8_t> dest_addr,
                           const PublicKey& msg_pub, const PublicKey& nbr_pub, Randomness& rnd);

// Re-encrypts every block independently.
SealedMessage reencrypt_message(const GroupParams& params, const SealedMessage& m,
                                Randomness& rnd);

struct OpenedEnvelope {
  Nonce nonce;
  Bytes address;
};

std::optional<OpenedEnvelope> open_envelope(const GroupParams& params, const UreCiphertext& envelope,
                                            const PrivateKey& nbr_priv);
std::optional<Bytes> open_payload(const GroupParams& params,
                                  std::span<const UreCiphertext> payload_blocks,
                                  const PrivateKey& msg_priv);

// One byte with the total block count, then the envelope block and payload
// blocks.
Bytes serialize_message(const GroupParams& params, const SealedMessage& m);
SealedMessage parse_message(const GroupParams& params, std::span<const std::uint8_t> wire);

}  // namespace blindspot::ure
