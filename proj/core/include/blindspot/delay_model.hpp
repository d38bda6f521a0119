#pragma once

// Discrete inter-upload delay distributions over integer hours, their
// convolution, CDFs, and the CDF steepness score used to rank routes.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace blindspot::delay {

using Hours = std::int64_t;

inline constexpr double kProbabilityTolerance = 1e-9;

struct Bin {
  Hours delay;
  double probability;

  friend bool operator==(const Bin&, const Bin&) = default;
};

// PDF over contiguous integer hours [first_delay(), last_delay()]. Interior
// bins may be zero; construction validates non-negativity and unit mass.
class DelayDistribution {
 public:
  // Bins need strictly increasing delays; holes are filled with zero mass.
  static DelayDistribution from_bins(std::span<const Bin> bins);
  static DelayDistribution from_dense(Hours first_delay, std::vector<double> probabilities);
  static DelayDistribution point_mass(Hours delay);
  // Uniform over lo..hi inclusive.
  static DelayDistribution uniform(Hours lo, Hours hi);

  Hours first_delay() const noexcept { return first_; }
  Hours last_delay() const noexcept { return first_ + static_cast<Hours>(probs_.size()) - 1; }
  std::size_t size() const noexcept { return probs_.size(); }

  // Zero outside the support.
  double probability(Hours delay) const noexcept;
  std::span<const double> probabilities() const noexcept { return probs_; }
  std::vector<Bin> bins() const;

  double mean() const noexcept;
  double variance() const noexcept;

 private:
  DelayDistribution(Hours first, std::vector<double> probs);

  Hours first_;
  std::vector<double> probs_;
};

class DelayCdf {
 public:
  // Values must be non-decreasing in [0, 1] and end at 1 within tolerance.
  static DelayCdf from_values(Hours first_delay, std::vector<double> cumulative);

  Hours first_delay() const noexcept { return first_; }
  Hours last_delay() const noexcept { return first_ + static_cast<Hours>(values_.size()) - 1; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double at(Hours delay) const noexcept;

 private:
  DelayCdf(Hours first, std::vector<double> values)
      : first_(first), values_(std::move(values)) {}

  Hours first_;
  std::vector<double> values_;
};

struct ConvolveOptions {
  // When set, mass beyond this delay is dropped and the result renormalized.
  std::optional<Hours> horizon_hours;
};

inline constexpr Hours kDefaultHorizonHours = 720;

DelayDistribution convolve(const DelayDistribution& f, const DelayDistribution& g,
                           const ConvolveOptions& options = {});

DelayCdf to_cdf(const DelayDistribution& f);

// Sum over the support of (1 - P_i) * X_i, where X_i is the delay in hours of
// bin i. Lower means the CDF reaches 1 sooner.
double cdf_score(const DelayCdf& c);

// Appends bins with cumulative probability 1 until the CDF has target_len bins.
DelayCdf extend_cdf(const DelayCdf& c, std::size_t target_len);

// cdf_score of the CDF of the sum of all distributions along a route.
double convolution_route_score(std::span<const DelayDistribution> path_pdfs,
                               const ConvolveOptions& options = {});

// Empirical histogram over the most recent `window` gaps. Throws NoData when
// `gaps` is empty.
DelayDistribution estimate_distribution(std::span<const Hours> gaps, std::size_t window);

// First two moments and support start of a delay random variable. Summing
// independent delays adds support starts, means and variances, which gives the
// untruncated route score without materializing the convolution:
//   score = (Var[S] + (E[S] - a) * (E[S] + a - 1)) / 2,  a = support start.
struct DelayMoments {
  Hours support_start = 0;
  double mean = 0.0;
  double variance = 0.0;

  static DelayMoments of(const DelayDistribution& f) noexcept;
  static DelayMoments of_gaps(std::span<const Hours> gaps, std::size_t window);

  DelayMoments& operator+=(const DelayMoments& other) noexcept {
    support_start += other.support_start;
    mean += other.mean;
    variance += other.variance;
    return *this;
  }
  friend DelayMoments operator+(DelayMoments a, const DelayMoments& b) noexcept { return a += b; }
};

double moment_route_score(const DelayMoments& route_sum) noexcept;
double moment_route_score(std::span<const DelayMoments> path) noexcept;

}  // namespace blindspot::delay
