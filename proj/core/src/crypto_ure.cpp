#include "blindspot/crypto_ure.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "blindspot/error.hpp"

namespace blindspot::ure {
namespace {

BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod) {
  BigInt r;
  mpz_powm(r.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return r;
}

BigInt invert(const BigInt& a, const BigInt& mod) {
  BigInt r;
  if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), mod.get_mpz_t()) == 0) {
    throw InvalidInput("element is not invertible");
  }
  return r;
}

BigInt mulm(const BigInt& a, const BigInt& b, const BigInt& mod) {
  BigInt r = a * b;
  mpz_mod(r.get_mpz_t(), r.get_mpz_t(), mod.get_mpz_t());
  return r;
}

BigInt from_bytes(std::span<const std::uint8_t> bytes) {
  BigInt r;
  if (!bytes.empty()) mpz_import(r.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  return r;
}

void to_bytes(const BigInt& v, std::span<std::uint8_t> out) {
  std::fill(out.begin(), out.end(), 0);
  if (v == 0) return;
  const std::size_t needed = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  if (needed > out.size()) throw InvalidInput("value does not fit the field width");
  std::size_t written = 0;
  mpz_export(out.data() + (out.size() - needed), &written, 1, 1, 1, 0, v.get_mpz_t());
}

void require_subgroup(const GroupParams& params, const BigInt& e, const char* what) {
  if (!params.in_subgroup(e)) throw InvalidInput(std::string(what) + " is not in the subgroup");
}

// Length byte(s) of the encoding header: value len + 1 sits above the padded
// payload, so t < 256^(cap + 1) <= 2^(bits - 8) < q.
BigInt encoding_base(const GroupParams& params) {
  return BigInt(1) << (8 * params.block_capacity());
}

}  // namespace

BigInt Randomness::below(const BigInt& bound) {
  if (bound <= 0) throw InvalidInput("bound must be positive");
  const std::size_t bits = mpz_sizeinbase(bound.get_mpz_t(), 2);
  const std::size_t words = (bits + 63) / 64;
  std::vector<std::uint64_t> limbs(words);
  BigInt r;
  do {
    for (auto& w : limbs) w = rng_();
    if (const std::size_t extra = words * 64 - bits; extra > 0) limbs.front() >>= extra;
    mpz_import(r.get_mpz_t(), words, 1, sizeof(std::uint64_t), 0, 0, limbs.data());
  } while (r >= bound);
  return r;
}

BigInt Randomness::exponent(const GroupParams& params) { return below(params.q - 1) + 1; }

void Randomness::fill(std::span<std::uint8_t> out) {
  for (std::size_t i = 0; i < out.size(); i += 8) {
    const std::uint64_t word = rng_();
    for (std::size_t b = 0; b < 8 && i + b < out.size(); ++b) {
      out[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
    }
  }
}

KeyPair keygen(const GroupParams& params, Randomness& rnd) {
  return keypair_from_secret(params, rnd.exponent(params));
}

KeyPair keypair_from_secret(const GroupParams& params, const BigInt& x) {
  if (x < 1 || x >= params.q) throw InvalidInput("private key must lie in [1, q - 1]");
  return {PublicKey{powm(params.g, x, params.p)}, PrivateKey{x}};
}

UreCiphertext encrypt(const GroupParams& params, const BigInt& m, const PublicKey& pub,
                      Randomness& rnd) {
  const BigInt k0 = rnd.exponent(params);
  const BigInt k1 = rnd.exponent(params);
  return encrypt_with(params, m, pub, k0, k1);
}

UreCiphertext encrypt_with(const GroupParams& params, const BigInt& m, const PublicKey& pub,
                           const BigInt& k0, const BigInt& k1) {
  require_subgroup(params, m, "plaintext");
  const auto& p = params.p;
  return {{mulm(m, powm(pub.y, k0, p), p), powm(params.g, k0, p)},
          {powm(pub.y, k1, p), powm(params.g, k1, p)}};
}

Decryption decrypt(const GroupParams& params, const UreCiphertext& c, const PrivateKey& priv) {
  const auto& p = params.p;
  const BigInt m1 = mulm(c.unit1.alpha, invert(powm(c.unit1.beta, priv.x, p), p), p);
  if (m1 != 1) return {};
  return {true, mulm(c.unit0.alpha, invert(powm(c.unit0.beta, priv.x, p), p), p)};
}

UreCiphertext reencrypt(const GroupParams& params, const UreCiphertext& c, Randomness& rnd) {
  const BigInt k0 = rnd.exponent(params);
  const BigInt k1 = rnd.exponent(params);
  return reencrypt_with(params, c, k0, k1);
}

UreCiphertext reencrypt_with(const GroupParams& params, const UreCiphertext& c,
                             const BigInt& k0, const BigInt& k1) {
  const auto& p = params.p;
  return {{mulm(c.unit0.alpha, powm(c.unit1.alpha, k0, p), p),
           mulm(c.unit0.beta, powm(c.unit1.beta, k0, p), p)},
          {powm(c.unit1.alpha, k1, p), powm(c.unit1.beta, k1, p)}};
}

BigInt encode_plaintext(const GroupParams& params, std::span<const std::uint8_t> bytes) {
  const std::size_t cap = params.block_capacity();
  if (bytes.size() > cap) {
    throw InvalidInput("plaintext of " + std::to_string(bytes.size()) +
                       " bytes exceeds block capacity " + std::to_string(cap) +
                       "; split it into blocks");
  }
  Bytes padded(cap, 0);
  std::copy(bytes.begin(), bytes.end(), padded.begin());
  const BigInt t = BigInt(static_cast<unsigned long>(bytes.size() + 1)) * encoding_base(params) +
                   from_bytes(padded);
  return mulm(t, t, params.p);
}

Bytes decode_plaintext(const GroupParams& params, const BigInt& element) {
  require_subgroup(params, element, "encoded plaintext");
  // p = 3 mod 4 for a safe prime, so a^((p+1)/4) is a square root.
  BigInt root = powm(element, (params.p + 1) / 4, params.p);
  if (root > params.q) root = params.p - root;

  const BigInt base = encoding_base(params);
  const BigInt header = root / base;
  const BigInt body = root % base;
  if (header < 1 || header > params.block_capacity() + 1) {
    throw InvalidInput("element is not a valid plaintext encoding");
  }
  const std::size_t len = header.get_ui() - 1;
  Bytes padded(params.block_capacity());
  to_bytes(body, padded);
  padded.resize(len);
  return padded;
}

Bytes serialize_block(const GroupParams& params, const UreCiphertext& c) {
  const std::size_t w = params.element_width();
  Bytes out(4 * w);
  std::span<std::uint8_t> s(out);
  to_bytes(c.unit0.alpha, s.subspan(0, w));
  to_bytes(c.unit0.beta, s.subspan(w, w));
  to_bytes(c.unit1.alpha, s.subspan(2 * w, w));
  to_bytes(c.unit1.beta, s.subspan(3 * w, w));
  return out;
}

UreCiphertext parse_block(const GroupParams& params, std::span<const std::uint8_t> block) {
  const std::size_t w = params.element_width();
  if (block.size() != 4 * w) throw InvalidInput("ciphertext block has the wrong size");
  UreCiphertext c{{from_bytes(block.subspan(0, w)), from_bytes(block.subspan(w, w))},
                  {from_bytes(block.subspan(2 * w, w)), from_bytes(block.subspan(3 * w, w))}};
  for (const BigInt* e : {&c.unit0.alpha, &c.unit0.beta, &c.unit1.alpha, &c.unit1.beta}) {
    require_subgroup(params, *e, "ciphertext element");
  }
  return c;
}

Nonce Nonce::random(Randomness& rnd) {
  Nonce n;
  rnd.fill(n.bytes);
  return n;
}

std::size_t NonceHash::operator()(const Nonce& n) const noexcept {
  std::uint64_t lo = 0, hi = 0;
  std::memcpy(&lo, n.bytes.data(), sizeof lo);
  std::memcpy(&hi, n.bytes.data() + sizeof lo, sizeof hi);
  return static_cast<std::size_t>(mix64(lo ^ mix64(hi)));
}

SealedMessage seal_message(const GroupParams& params, std::span<const std::uint8_t> payload,
                           const Nonce& nonce, std::span<const std::uint8_t> dest_addr,
                           const PublicKey& msg_pub, const PublicKey& nbr_pub, Randomness& rnd) {
  if (payload.size() > kMaxPayloadBytes) {
    throw InvalidInput("payload of " + std::to_string(payload.size()) + " bytes exceeds " +
                       std::to_string(kMaxPayloadBytes) + "; send it as multiple messages");
  }
  const std::size_t cap = params.block_capacity();
  if (cap == 0) throw InvalidInput("group too small to carry plaintext");

  Bytes envelope_plain(nonce.bytes.begin(), nonce.bytes.end());
  envelope_plain.insert(envelope_plain.end(), dest_addr.begin(), dest_addr.end());
  SealedMessage sealed;
  sealed.envelope = encrypt(params, encode_plaintext(params, envelope_plain), nbr_pub, rnd);

  std::size_t offset = 0;
  do {
    const std::size_t n = std::min(cap, payload.size() - offset);
    sealed.payload_blocks.push_back(
        encrypt(params, encode_plaintext(params, payload.subspan(offset, n)), msg_pub, rnd));
    offset += n;
  } while (offset < payload.size());
  return sealed;
}

SealedMessage reencrypt_message(const GroupParams& params, const SealedMessage& m,
                                Randomness& rnd) {
  SealedMessage out;
  out.envelope = reencrypt(params, m.envelope, rnd);
  out.payload_blocks.reserve(m.payload_blocks.size());
  for (const auto& b : m.payload_blocks) out.payload_blocks.push_back(reencrypt(params, b, rnd));
  return out;
}

std::optional<OpenedEnvelope> open_envelope(const GroupParams& params, const UreCiphertext& envelope,
                                            const PrivateKey& nbr_priv) {
  const auto d = decrypt(params, envelope, nbr_priv);
  if (!d.recognized) return std::nullopt;
  Bytes plain;
  try {
    plain = decode_plaintext(params, *d.plaintext);
  } catch (const InvalidInput&) {
    return std::nullopt;  // recognized by chance but not a well-formed envelope
  }
  if (plain.size() < kNonceBytes) return std::nullopt;
  OpenedEnvelope out;
  std::copy_n(plain.begin(), kNonceBytes, out.nonce.bytes.begin());
  out.address.assign(plain.begin() + kNonceBytes, plain.end());
  return out;
}

std::optional<Bytes> open_payload(const GroupParams& params,
                                  std::span<const UreCiphertext> payload_blocks,
                                  const PrivateKey& msg_priv) {
  Bytes out;
  for (const auto& block : payload_blocks) {
    const auto d = decrypt(params, block, msg_priv);
    if (!d.recognized) return std::nullopt;
    try {
      const Bytes part = decode_plaintext(params, *d.plaintext);
      out.insert(out.end(), part.begin(), part.end());
    } catch (const InvalidInput&) {
      return std::nullopt;
    }
  }
  return out;
}

Bytes serialize_message(const GroupParams& params, const SealedMessage& m) {
  const std::size_t blocks = 1 + m.payload_blocks.size();
  if (blocks > 255) throw InvalidInput("too many blocks for a one-byte header");
  Bytes out{static_cast<std::uint8_t>(blocks)};
  const auto append = [&](const UreCiphertext& c) {
    const Bytes b = serialize_block(params, c);
    out.insert(out.end(), b.begin(), b.end());
  };
  append(m.envelope);
  for (const auto& b : m.payload_blocks) append(b);
  return out;
}

SealedMessage parse_message(const GroupParams& params, std::span<const std::uint8_t> wire) {
  if (wire.empty()) throw InvalidInput("empty message");
  const std::size_t blocks = wire[0];
  const std::size_t block_size = 4 * params.element_width();
  if (blocks < 2 || wire.size() != 1 + blocks * block_size) {
    throw InvalidInput("message length does not match its block count");
  }
  SealedMessage m;
  m.envelope = parse_block(params, wire.subspan(1, block_size));
  for (std::size_t i = 1; i < blocks; ++i) {
    m.payload_blocks.push_back(parse_block(params, wire.subspan(1 + i * block_size, block_size)));
  }
  return m;
}

}  // namespace blindspot::ure
