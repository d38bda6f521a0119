#pragma once

// Property suite for the re-encryption scheme at a chosen group size, with
// timings. Runs from the CLI and from tests.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "blindspot/crypto_ure.hpp"

namespace blindspot::ure {

using ReencryptFn = std::function<UreCiphertext(const GroupParams&, const UreCiphertext&,
                                                const BigInt& k0, const BigInt& k1)>;

enum class SelftestMutant {
  kNone,
  // Re-encryption that leaves unit0 untouched, so a tag on alpha0 survives
  // hops bit for bit.
  kTagPreserving,
};

struct SelftestOptions {
  std::size_t bits = 64;
  std::uint64_t seed = 1;
  std::size_t chain_hops = 20;
  std::size_t chains = 20;
  std::size_t unlinkability_samples = 1000;
  std::size_t soundness_trials = 10000;
  std::size_t timing_iterations = 50;
  SelftestMutant mutant = SelftestMutant::kNone;
};

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelftestReport {
  std::size_t bits = 0;
  std::vector<SelftestCheck> checks;
  double encrypt_ms = 0.0;
  double reencrypt_ms = 0.0;
  double decrypt_ms = 0.0;
  std::size_t block_bytes = 0;

  bool passed() const;
};

ReencryptFn reencrypt_for(SelftestMutant mutant);

SelftestReport run_crypto_selftest(const SelftestOptions& options);

}  // namespace blindspot::ure
