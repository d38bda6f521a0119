#include "blindspot/crypto_selftest.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <sstream>

namespace blindspot::ure {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start, std::size_t iterations) {
  const std::chrono::duration<double, std::milli> d = Clock::now() - start;
  return d.count() / static_cast<double>(std::max<std::size_t>(iterations, 1));
}

UreCiphertext hop(const ReencryptFn& fn, const GroupParams& params, const UreCiphertext& c,
                  Randomness& rnd) {
  const BigInt k0 = rnd.exponent(params);
  const BigInt k1 = rnd.exponent(params);
  return fn(params, c, k0, k1);
}

Bytes random_bytes(Randomness& rnd, std::size_t max_len) {
  Bytes b(static_cast<std::size_t>(rnd.below(BigInt(static_cast<unsigned long>(max_len + 1))).get_ui()));
  rnd.fill(b);
  return b;
}

// A random subgroup element: g^k.
BigInt random_element(const GroupParams& params, Randomness& rnd) {
  BigInt out;
  mpz_powm(out.get_mpz_t(), params.g.get_mpz_t(), rnd.exponent(params).get_mpz_t(), params.p.get_mpz_t());
  return out;
}

SelftestCheck roundtrip(const GroupParams& params, const SelftestOptions& o, const ReencryptFn& fn,
                        Randomness& rnd) {
  SelftestCheck check{"roundtrip", true, ""};
  std::size_t failures = 0;
  for (std::size_t c = 0; c < o.chains; ++c) {
    const auto keys = keygen(params, rnd);
    const BigInt m = random_element(params, rnd);
    auto ct = encrypt(params, m, keys.pub, rnd);
    for (std::size_t h = 0; h < o.chain_hops; ++h) ct = hop(fn, params, ct, rnd);
    const auto d = decrypt(params, ct, keys.priv);
    if (!d.recognized || !d.plaintext || *d.plaintext != m) ++failures;
  }

  // Whole messages through serialization at every hop, when the group is big
  // enough to carry an envelope.
  std::size_t sealed = 0;
  if (params.block_capacity() >= kNonceBytes + 4) {
    for (std::size_t c = 0; c < o.chains; ++c) {
      const auto msg_keys = keygen(params, rnd);
      const auto nbr_keys = keygen(params, rnd);
      const Bytes payload = random_bytes(rnd, kMaxPayloadBytes);
      const Nonce nonce = Nonce::random(rnd);
      const Bytes addr{0, 0, 1, 2};
      auto m = seal_message(params, payload, nonce, addr, msg_keys.pub, nbr_keys.pub, rnd);
      for (std::size_t h = 0; h < o.chain_hops; ++h) {
        m.envelope = hop(fn, params, m.envelope, rnd);
        for (auto& b : m.payload_blocks) b = hop(fn, params, b, rnd);
        m = parse_message(params, serialize_message(params, m));
      }
      const auto env = open_envelope(params, m.envelope, nbr_keys.priv);
      const auto body = open_payload(params, m.payload_blocks, msg_keys.priv);
      if (!env || env->nonce != nonce || env->address != addr || !body || *body != payload) ++failures;
      ++sealed;
    }
  }
  check.passed = failures == 0;
  std::ostringstream s;
  s << o.chains << " element chains + " << sealed << " sealed-message chains of " << o.chain_hops
    << " hops, " << failures << " failures";
  check.detail = s.str();
  return check;
}

SelftestCheck unlinkability(const GroupParams& params, const SelftestOptions& o, const ReencryptFn& fn,
                            Randomness& rnd) {
  const auto keys = keygen(params, rnd);
  const auto input = encrypt(params, random_element(params, rnd), keys.pub, rnd);
  const auto in_bytes = serialize_block(params, input);
  const std::size_t w = params.element_width();
  std::set<Bytes> outputs;
  std::size_t collisions = 0;
  std::size_t shared_elements = 0;
  for (std::size_t i = 0; i < o.unlinkability_samples; ++i) {
    const auto out = serialize_block(params, hop(fn, params, input, rnd));
    if (out == in_bytes || !outputs.insert(out).second) ++collisions;
    for (std::size_t e = 0; e < 4; ++e) {
      if (std::equal(out.begin() + static_cast<std::ptrdiff_t>(e * w),
                     out.begin() + static_cast<std::ptrdiff_t>((e + 1) * w),
                     in_bytes.begin() + static_cast<std::ptrdiff_t>(e * w))) {
        ++shared_elements;
      }
    }
  }
  // Each element survives unchanged with probability about 1/q.
  const double allowed = 4.0 * static_cast<double>(o.unlinkability_samples) / params.q.get_d();
  SelftestCheck check;
  check.name = "unlinkability";
  check.passed = collisions == 0 && static_cast<double>(shared_elements) <= std::max(allowed, 1.0);
  std::ostringstream s;
  s << o.unlinkability_samples << " re-encryptions, " << collisions << " bitwise collisions, "
    << shared_elements << " elements equal to the input";
  check.detail = s.str();
  return check;
}

SelftestCheck soundness(const SelftestOptions& o, Randomness& rnd) {
  const auto& params = test_group_16();
  std::size_t recognized = 0;
  for (std::size_t i = 0; i < o.soundness_trials; ++i) {
    const auto owner = keygen(params, rnd);
    auto other = keygen(params, rnd);
    while (other.priv.x == owner.priv.x) other = keygen(params, rnd);
    const auto ct = encrypt(params, random_element(params, rnd), owner.pub, rnd);
    if (decrypt(params, ct, other.priv).recognized) ++recognized;
  }
  const double rate = static_cast<double>(recognized) / static_cast<double>(std::max<std::size_t>(o.soundness_trials, 1));
  SelftestCheck check;
  check.name = "recognition_soundness";
  check.passed = rate <= 2.0 / params.q.get_d();
  std::ostringstream s;
  s << recognized << " false recognitions in " << o.soundness_trials << " trials (q = " << params.q.get_str()
    << ")";
  check.detail = s.str();
  return check;
}

// On the smallest group, every (message, key, tag) and every re-encryption
// exponent pair: the tagged ciphertext must not decrypt to the original, and
// after one hop each of alpha0, beta0 must be uniform over the subgroup, so
// an observer gains nothing by looking for the tag.
SelftestCheck tagging(const ReencryptFn& fn) {
  const auto& params = tiny_group();
  const unsigned long q = params.q.get_ui();
  const unsigned long p = params.p.get_ui();
  std::vector<BigInt> subgroup;
  for (unsigned long e = 1; e < p; ++e) {
    if (params.in_subgroup(BigInt(e))) subgroup.emplace_back(e);
  }
  std::size_t cases = 0;
  std::size_t garble_failures = 0;
  std::size_t blinding_failures = 0;
  for (const auto& m : subgroup) {
    for (unsigned long x = 1; x < q; ++x) {
      const auto keys = keypair_from_secret(params, BigInt(x));
      const auto ct = encrypt_with(params, m, keys.pub, BigInt(3), BigInt(5));
      for (const auto& tag : subgroup) {
        if (tag == 1) continue;
        auto tagged = ct;
        tagged.unit0.alpha = (tagged.unit0.alpha * tag) % params.p;
        std::map<BigInt, std::size_t> alpha_hist, beta_hist;
        for (unsigned long k0 = 0; k0 < q; ++k0) {
          for (unsigned long k1 = 1; k1 < q; ++k1) {
            const auto out = fn(params, tagged, BigInt(k0), BigInt(k1));
            ++cases;
            const auto d = decrypt(params, out, keys.priv);
            if (d.plaintext && *d.plaintext == m) ++garble_failures;
            ++alpha_hist[out.unit0.alpha];
            ++beta_hist[out.unit0.beta];
          }
        }
        const auto uniform = [&](const std::map<BigInt, std::size_t>& h) {
          if (h.size() != subgroup.size()) return false;
          return std::all_of(h.begin(), h.end(), [&](const auto& e) { return e.second == q - 1; });
        };
        if (!uniform(alpha_hist) || !uniform(beta_hist)) ++blinding_failures;
      }
    }
  }
  SelftestCheck check;
  check.name = "tagging_blinding";
  check.passed = garble_failures == 0 && blinding_failures == 0;
  std::ostringstream s;
  s << cases << " cases on p = " << p << ", " << garble_failures << " tags removed, " << blinding_failures
    << " tags visible after a hop";
  check.detail = s.str();
  return check;
}

SelftestCheck expansion(const GroupParams& params, Randomness& rnd) {
  const auto keys = keygen(params, rnd);
  const std::size_t w = params.element_width();
  const auto block = serialize_block(params, encrypt(params, random_element(params, rnd), keys.pub, rnd));
  bool ok = block.size() == 4 * w;
  std::ostringstream s;
  s << "block " << block.size() << " bytes for " << w << "-byte elements";
  if (params.block_capacity() >= kNonceBytes + 4) {
    const Bytes payload(kMaxPayloadBytes, 0x5a);
    const auto m = seal_message(params, payload, Nonce::random(rnd), Bytes{0, 0, 0, 1}, keys.pub, keys.pub, rnd);
    const std::size_t blocks = 1 + m.payload_blocks.size();
    const auto wire = serialize_message(params, m);
    ok = ok && wire.size() == 1 + blocks * 4 * w;
    s << "; " << kMaxPayloadBytes << "-byte message: " << blocks << " blocks, " << wire.size() << " bytes";
  }
  return {"expansion", ok, s.str()};
}

}  // namespace

bool SelftestReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

ReencryptFn reencrypt_for(SelftestMutant mutant) {
  if (mutant == SelftestMutant::kTagPreserving) {
    return [](const GroupParams& params, const UreCiphertext& c, const BigInt&, const BigInt& k1) {
      auto out = reencrypt_with(params, c, BigInt(0), k1);
      out.unit0 = c.unit0;
      return out;
    };
  }
  return [](const GroupParams& params, const UreCiphertext& c, const BigInt& k0, const BigInt& k1) {
    return reencrypt_with(params, c, k0, k1);
  };
}

SelftestReport run_crypto_selftest(const SelftestOptions& options) {
  const GroupParams params = group_for_bits(options.bits, options.seed);
  const ReencryptFn fn = reencrypt_for(options.mutant);
  Randomness rnd(options.seed);

  SelftestReport report;
  report.bits = params.bits();
  report.block_bytes = 4 * params.element_width();
  report.checks.push_back(roundtrip(params, options, fn, rnd));
  report.checks.push_back(unlinkability(params, options, fn, rnd));
  report.checks.push_back(soundness(options, rnd));
  report.checks.push_back(tagging(fn));
  report.checks.push_back(expansion(params, rnd));

  const auto keys = keygen(params, rnd);
  const BigInt m = random_element(params, rnd);
  const std::size_t n = options.timing_iterations;
  auto start = Clock::now();
  UreCiphertext ct;
  for (std::size_t i = 0; i < n; ++i) ct = encrypt(params, m, keys.pub, rnd);
  report.encrypt_ms = ms_since(start, n);
  start = Clock::now();
  for (std::size_t i = 0; i < n; ++i) ct = hop(fn, params, ct, rnd);
  report.reencrypt_ms = ms_since(start, n);
  start = Clock::now();
  for (std::size_t i = 0; i < n; ++i) (void)decrypt(params, ct, keys.priv);
  report.decrypt_ms = ms_since(start, n);
  return report;
}

}  // namespace blindspot::ure
