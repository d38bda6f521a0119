#include "blindspot/delay_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "blindspot/error.hpp"

namespace blindspot::delay {
namespace {

double total_mass(std::span<const double> probs) {
  // Kahan summation keeps long convolutions inside the 1e-9 tolerance.
  double sum = 0.0;
  double carry = 0.0;
  for (double p : probs) {
    const double y = p - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

void normalize(std::vector<double>& probs) {
  const double mass = total_mass(probs);
  if (!(mass > 0.0)) throw InvalidInput("distribution has no probability mass");
  for (double& p : probs) p /= mass;
}

}  // namespace

DelayDistribution::DelayDistribution(Hours first, std::vector<double> probs)
    : first_(first), probs_(std::move(probs)) {}

DelayDistribution DelayDistribution::from_dense(Hours first_delay,
                                                std::vector<double> probabilities) {
  if (probabilities.empty()) throw InvalidInput("empty delay distribution");
  if (first_delay < 0) throw InvalidInput("negative delay");
  for (double p : probabilities) {
    if (!(p >= 0.0) || p > 1.0) throw InvalidInput("probability outside [0, 1]");
  }
  if (std::abs(total_mass(probabilities) - 1.0) > kProbabilityTolerance) {
    throw InvalidInput("probabilities do not sum to 1");
  }
  return DelayDistribution(first_delay, std::move(probabilities));
}

DelayDistribution DelayDistribution::from_bins(std::span<const Bin> bins) {
  if (bins.empty()) throw InvalidInput("empty delay distribution");
  for (std::size_t i = 1; i < bins.size(); ++i) {
    if (bins[i].delay <= bins[i - 1].delay) {
      throw InvalidInput("bin delays must be strictly increasing");
    }
  }
  const Hours first = bins.front().delay;
  std::vector<double> dense(static_cast<std::size_t>(bins.back().delay - first + 1), 0.0);
  for (const Bin& b : bins) dense[static_cast<std::size_t>(b.delay - first)] = b.probability;
  return from_dense(first, std::move(dense));
}

DelayDistribution DelayDistribution::point_mass(Hours delay) {
  return from_dense(delay, {1.0});
}

DelayDistribution DelayDistribution::uniform(Hours lo, Hours hi) {
  if (hi < lo) throw InvalidInput("uniform range is empty");
  const auto n = static_cast<std::size_t>(hi - lo + 1);
  return from_dense(lo, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

double DelayDistribution::probability(Hours delay) const noexcept {
  if (delay < first_ || delay > last_delay()) return 0.0;
  return probs_[static_cast<std::size_t>(delay - first_)];
}

std::vector<Bin> DelayDistribution::bins() const {
  std::vector<Bin> out;
  out.reserve(probs_.size());
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    out.push_back({first_ + static_cast<Hours>(i), probs_[i]});
  }
  return out;
}

double DelayDistribution::mean() const noexcept {
  // Offset by the support start to keep the products small.
  double m = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) m += static_cast<double>(i) * probs_[i];
  return static_cast<double>(first_) + m;
}

double DelayDistribution::variance() const noexcept {
  const double mu = mean() - static_cast<double>(first_);
  double v = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const double d = static_cast<double>(i) - mu;
    v += d * d * probs_[i];
  }
  return v;
}

DelayCdf DelayCdf::from_values(Hours first_delay, std::vector<double> cumulative) {
  if (cumulative.empty()) throw InvalidInput("empty CDF");
  double prev = 0.0;
  for (double v : cumulative) {
    if (!(v >= 0.0) || v > 1.0 + kProbabilityTolerance) {
      throw InvalidInput("cumulative probability outside [0, 1]");
    }
    if (v + kProbabilityTolerance < prev) throw InvalidInput("CDF must be non-decreasing");
    prev = v;
  }
  if (std::abs(cumulative.back() - 1.0) > kProbabilityTolerance) {
    throw InvalidInput("CDF must end at 1");
  }
  return DelayCdf(first_delay, std::move(cumulative));
}

double DelayCdf::at(Hours delay) const noexcept {
  if (delay < first_) return 0.0;
  if (delay > last_delay()) return 1.0;
  return values_[static_cast<std::size_t>(delay - first_)];
}

DelayDistribution convolve(const DelayDistribution& f, const DelayDistribution& g,
                           const ConvolveOptions& options) {
  auto fp = f.probabilities();
  auto gp = g.probabilities();
  // Outer loop over the sparser operand; zero bins are skipped there.
  const auto nonzero = [](std::span<const double> p) {
    return std::count_if(p.begin(), p.end(), [](double v) { return v != 0.0; });
  };
  if (nonzero(fp) > nonzero(gp)) std::swap(fp, gp);
  if (fp.empty() || gp.empty()) throw InvalidInput("empty delay distribution");

  const Hours first = f.first_delay() + g.first_delay();
  std::size_t len = fp.size() + gp.size() - 1;
  if (options.horizon_hours) {
    const Hours horizon = *options.horizon_hours;
    if (first > horizon) throw InvalidInput("convolution support starts beyond the horizon");
    len = std::min(len, static_cast<std::size_t>(horizon - first + 1));
  }

  std::vector<double> out(len, 0.0);
  for (std::size_t i = 0; i < fp.size() && i < len; ++i) {
    const double a = fp[i];
    if (a == 0.0) continue;
    const std::size_t jmax = std::min(gp.size(), len - i);
    for (std::size_t j = 0; j < jmax; ++j) out[i + j] += a * gp[j];
  }
  normalize(out);
  return DelayDistribution::from_dense(first, std::move(out));
}

DelayCdf to_cdf(const DelayDistribution& f) {
  const auto probs = f.probabilities();
  std::vector<double> cumulative(probs.size());
  std::partial_sum(probs.begin(), probs.end(), cumulative.begin());
  // Pin the tail to exactly 1 so rounding never leaves 1 - P slightly
  // positive on a saturated CDF.
  for (double& v : cumulative) v = std::min(v, 1.0);
  cumulative.back() = 1.0;
  return DelayCdf::from_values(f.first_delay(), std::move(cumulative));
}

double cdf_score(const DelayCdf& c) {
  const auto values = c.values();
  double score = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = static_cast<double>(c.first_delay() + static_cast<Hours>(i));
    score += (1.0 - values[i]) * x;
  }
  return score;
}

DelayCdf extend_cdf(const DelayCdf& c, std::size_t target_len) {
  if (target_len < c.size()) {
    throw InvalidInput("cannot extend a CDF of length " + std::to_string(c.size()) +
                       " to " + std::to_string(target_len));
  }
  std::vector<double> values(c.values().begin(), c.values().end());
  values.resize(target_len, 1.0);
  return DelayCdf::from_values(c.first_delay(), std::move(values));
}

double convolution_route_score(std::span<const DelayDistribution> path_pdfs,
                               const ConvolveOptions& options) {
  if (path_pdfs.empty()) throw InvalidInput("route has no distributions");
  DelayDistribution acc = path_pdfs.front();
  for (std::size_t i = 1; i < path_pdfs.size(); ++i) acc = convolve(acc, path_pdfs[i], options);
  return cdf_score(to_cdf(acc));
}

DelayDistribution estimate_distribution(std::span<const Hours> gaps, std::size_t window) {
  if (gaps.empty()) throw NoData("no inter-upload gaps observed");
  if (window == 0) throw InvalidInput("estimate window must be positive");
  const auto recent = gaps.subspan(gaps.size() - std::min(window, gaps.size()));
  const auto [lo, hi] = std::minmax_element(recent.begin(), recent.end());
  if (*lo <= 0) throw InvalidInput("inter-upload gaps must be positive");

  std::vector<double> dense(static_cast<std::size_t>(*hi - *lo + 1), 0.0);
  const double w = 1.0 / static_cast<double>(recent.size());
  for (Hours gap : recent) dense[static_cast<std::size_t>(gap - *lo)] += w;
  normalize(dense);
  return DelayDistribution::from_dense(*lo, std::move(dense));
}

DelayMoments DelayMoments::of(const DelayDistribution& f) noexcept {
  return {f.first_delay(), f.mean(), f.variance()};
}

DelayMoments DelayMoments::of_gaps(std::span<const Hours> gaps, std::size_t window) {
  if (gaps.empty()) throw NoData("no inter-upload gaps observed");
  if (window == 0) throw InvalidInput("estimate window must be positive");
  const auto recent = gaps.subspan(gaps.size() - std::min(window, gaps.size()));
  const Hours lo = *std::min_element(recent.begin(), recent.end());
  if (lo <= 0) throw InvalidInput("inter-upload gaps must be positive");
  const double n = static_cast<double>(recent.size());
  double mean = 0.0;
  for (Hours gap : recent) mean += static_cast<double>(gap - lo);
  mean /= n;
  double var = 0.0;
  for (Hours gap : recent) {
    const double d = static_cast<double>(gap - lo) - mean;
    var += d * d;
  }
  return {lo, static_cast<double>(lo) + mean, var / n};
}

double moment_route_score(const DelayMoments& route_sum) noexcept {
  const double a = static_cast<double>(route_sum.support_start);
  const double m = route_sum.mean;
  return 0.5 * (route_sum.variance + (m - a) * (m + a - 1.0));
}

double moment_route_score(std::span<const DelayMoments> path) noexcept {
  DelayMoments sum;
  for (const auto& m : path) sum += m;
  return moment_route_score(sum);
}

}  // namespace blindspot::delay
