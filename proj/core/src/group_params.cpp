#include <string>

#include "blindspot/crypto_ure.hpp"
#include "blindspot/error.hpp"

namespace blindspot::ure {
namespace {

constexpr int kPrimeReps = 40;

bool probably_prime(const BigInt& n) { return mpz_probab_prime_p(n.get_mpz_t(), kPrimeReps) > 0; }

GroupParams make(const char* p_hex) {
  return GroupParams::from_safe_prime(BigInt(p_hex, 16), BigInt(4));
}

}  // namespace

GroupParams GroupParams::from_safe_prime(const BigInt& p, const BigInt& g) {
  if (p < 5 || !probably_prime(p)) throw InvalidInput("p is not prime");
  GroupParams params{p, (p - 1) / 2, g};
  if (!probably_prime(params.q)) throw InvalidInput("p is not a safe prime");
  if (g <= 1 || g >= p) throw InvalidInput("generator out of range");
  BigInt check;
  mpz_powm(check.get_mpz_t(), g.get_mpz_t(), params.q.get_mpz_t(), p.get_mpz_t());
  if (check != 1) throw InvalidInput("generator is not in the order-q subgroup");
  return params;
}

std::size_t GroupParams::bits() const { return mpz_sizeinbase(p.get_mpz_t(), 2); }

std::size_t GroupParams::element_width() const { return (bits() + 7) / 8; }

std::size_t GroupParams::block_capacity() const { return bits() < 16 ? 0 : (bits() - 16) / 8; }

bool GroupParams::in_subgroup(const BigInt& e) const {
  if (e <= 0 || e >= p) return false;
  // Euler's criterion: quadratic residues are exactly the order-q subgroup.
  return mpz_legendre(e.get_mpz_t(), p.get_mpz_t()) == 1;
}

const GroupParams& tiny_group() {
  static const GroupParams params = GroupParams::from_safe_prime(BigInt(23), BigInt(4));
  return params;
}

const GroupParams& test_group_16() {
  static const GroupParams params = make("18053");
  return params;
}

const GroupParams& test_group_64() {
  static const GroupParams params = make("c000000000000683");
  return params;
}

const GroupParams& test_group_256() {
  static const GroupParams params =
      make("c00000000000000000000000000000000000000000000000000000000000a0eb");
  return params;
}

const GroupParams& group_1024() {
  static const GroupParams params = make(
      "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
      "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
      "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
      "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE65381FFFFFFFFFFFFFFFF");
  return params;
}

GroupParams group_for_bits(std::size_t bits, std::uint64_t seed) {
  switch (bits) {
    case 16:
    case 17:
      return test_group_16();
    case 64:
      return test_group_64();
    case 256:
      return test_group_256();
    case 1024:
      return group_1024();
    default:
      break;
  }
  if (bits < 8) throw InvalidInput("group must have at least 8 bits");
  Randomness rnd(seed);
  BigInt q = rnd.below(BigInt(1) << (bits - 1));
  mpz_setbit(q.get_mpz_t(), bits - 2);  // p = 2q + 1 then has exactly `bits` bits
  while (true) {
    mpz_nextprime(q.get_mpz_t(), q.get_mpz_t());
    const BigInt p = 2 * q + 1;
    if (mpz_sizeinbase(p.get_mpz_t(), 2) != bits) {
      throw Error("no safe prime found for " + std::to_string(bits) + " bits");
    }
    if (probably_prime(p)) return GroupParams::from_safe_prime(p, BigInt(4));
  }
}

}  // namespace blindspot::ure
