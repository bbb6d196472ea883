#pragma once

// Non-parametric marginal densities of the noisy code (one per channel):
// linear splines on a 1/10 grid, fitted like running histograms, and their
// restriction to the integers as the probability model of the quantized code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ntc/error.hpp"

namespace ntc {

inline constexpr double kDensityFloor = 1e-9;
inline constexpr double kGridSpacing = 0.1;

enum class DensityObjective : std::uint8_t {
  likelihood = 0,      // minimize -E p(y~)
  log_likelihood = 1,  // minimize -E log p(y~)
};

/// Piecewise-linear density sampled at left + k * spacing.
class MarginalDensity {
 public:
  MarginalDensity() = default;
  MarginalDensity(double left, std::vector<double> samples, std::size_t channel = 0,
                  double spacing = kGridSpacing)
      : left_(left), spacing_(spacing), samples_(std::move(samples)), channel_(channel) {
    detail::require<ParameterError>(samples_.size() >= 2, "density: need at least two samples");
    detail::require<ParameterError>(spacing_ > 0, "density: spacing must be positive");
    for (double s : samples_)
      detail::require<ParameterError>(s >= 0 && std::isfinite(s),
                                      "density: samples must be finite and nonnegative");
  }

  /// Uniform density on the grid covering [lo, hi] (outward to grid multiples).
  static MarginalDensity uniform(double lo, double hi, std::size_t channel = 0) {
    const auto first = static_cast<std::int64_t>(std::floor(lo / kGridSpacing + 1e-9));
    const auto last = static_cast<std::int64_t>(std::ceil(hi / kGridSpacing - 1e-9));
    MarginalDensity d(static_cast<double>(first) * kGridSpacing,
                      std::vector<double>(static_cast<std::size_t>(last - first + 1), 1.0), channel);
    d.renormalize();
    return d;
  }

  double left() const { return left_; }
  double right() const { return left_ + spacing_ * static_cast<double>(samples_.size() - 1); }
  double spacing() const { return spacing_; }
  std::size_t channel_index() const { return channel_; }
  const std::vector<double>& samples() const { return samples_; }
  std::vector<double>& samples() { return samples_; }

  /// Trapezoidal integral over [left, right].
  double integral() const {
    double s = 0;
    for (double v : samples_) s += v;
    return spacing_ * (s - 0.5 * (samples_.front() + samples_.back()));
  }

  void renormalize() {
    const double area = integral();
    detail::require<NumericError>(area > 0 && std::isfinite(area),
                                  "density: cannot renormalize (zero or non-finite mass)");
    for (double& v : samples_) v /= area;
  }

  /// Grid segment containing t: index k and fraction f in [0, 1]. Returns
  /// false outside [left, right].
  bool locate(double t, std::size_t& k, double& f) const {
    const double pos = (t - left_) / spacing_;
    const double last = static_cast<double>(samples_.size() - 1);
    if (!(pos >= -1e-9 && pos <= last + 1e-9)) return false;
    const double clamped = std::clamp(pos, 0.0, last);
    k = std::min(static_cast<std::size_t>(clamped), samples_.size() - 2);
    f = clamped - static_cast<double>(k);
    return true;
  }

  /// Linear interpolation, floored at kDensityFloor (also outside the grid).
  double eval(double t) const {
    std::size_t k;
    double f;
    if (!locate(t, k, f)) return kDensityFloor;
    return std::max((1.0 - f) * samples_[k] + f * samples_[k + 1], kDensityFloor);
  }

  friend bool operator==(const MarginalDensity&, const MarginalDensity&) = default;

 private:
  double left_ = 0;
  double spacing_ = kGridSpacing;
  std::vector<double> samples_;
  std::size_t channel_ = 0;
};

inline double eval_density(const MarginalDensity& psi, double t) { return psi.eval(t); }

/// log2 p(t) with its derivatives. The sample gradient is sparse: it only
/// touches samples[index] and samples[index + 1].
struct LogLikelihood {
  double value = 0;
  double d_dt = 0;
  std::size_t index = 0;
  double d_lower = 0;
  double d_upper = 0;
};

inline LogLikelihood log2_likelihood_and_grads(const MarginalDensity& psi, double t) {
  LogLikelihood r;
  std::size_t k;
  double f;
  if (!psi.locate(t, k, f)) {
    r.value = std::log2(kDensityFloor);
    return r;
  }
  const auto& s = psi.samples();
  const double p = (1.0 - f) * s[k] + f * s[k + 1];
  r.index = k;
  if (p < kDensityFloor) {
    r.value = std::log2(kDensityFloor);
    return r;
  }
  const double scale = 1.0 / (p * std::numbers::ln2);
  r.value = std::log2(p);
  r.d_dt = (s[k + 1] - s[k]) / psi.spacing() * scale;
  r.d_lower = (1.0 - f) * scale;
  r.d_upper = f * scale;
  return r;
}

/// One SGD step on the batch followed by clamping to >= 0 and trapezoidal
/// renormalization.
inline void fit_step(MarginalDensity& psi, std::span<const double> batch, double step_size,
                     DensityObjective objective = DensityObjective::likelihood) {
  detail::require<ParameterError>(step_size > 0, "fit_step: step size must be positive");
  auto& s = psi.samples();
  if (!batch.empty()) {
    std::vector<double> descent(s.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (double t : batch) {
      std::size_t k;
      double f;
      if (!psi.locate(t, k, f)) continue;
      // -d/dpsi of p (likelihood) or of ln p (log-likelihood).
      double w = inv_n;
      if (objective == DensityObjective::log_likelihood)
        w /= std::max((1.0 - f) * s[k] + f * s[k + 1], kDensityFloor);
      descent[k] += (1.0 - f) * w;
      descent[k + 1] += f * w;
    }
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::max(s[i] + step_size * descent[i], 0.0);
  }
  psi.renormalize();
}

/// Resamples psi onto the grid covering [observed_min - 1, observed_max + 1],
/// rounded outward to grid multiples.
inline MarginalDensity adapt_range(const MarginalDensity& psi, double observed_min,
                                   double observed_max) {
  detail::require<ParameterError>(std::isfinite(observed_min) && std::isfinite(observed_max) &&
                                      observed_min <= observed_max,
                                  "adapt_range: invalid observed range");
  const double h = psi.spacing();
  const auto first = static_cast<std::int64_t>(std::floor((observed_min - 1.0) / h + 1e-9));
  const auto last = static_cast<std::int64_t>(std::ceil((observed_max + 1.0) / h - 1e-9));
  std::vector<double> samples(static_cast<std::size_t>(last - first + 1));
  for (std::size_t k = 0; k < samples.size(); ++k)
    samples[k] = psi.eval(static_cast<double>(first + static_cast<std::int64_t>(k)) * h);
  MarginalDensity out(static_cast<double>(first) * h, std::move(samples), psi.channel_index(), h);
  out.renormalize();
  return out;
}

/// Probability model over the integers [q_min, q_max].
struct DiscretePmf {
  std::int32_t q_min = 0;
  std::int32_t q_max = 0;
  std::vector<double> probs;
  std::int32_t mode = 0;

  std::size_t size() const { return probs.size(); }
  bool contains(std::int64_t q) const { return q >= q_min && q <= q_max; }
  /// 0 outside the support.
  double prob(std::int64_t q) const {
    return contains(q) ? probs[static_cast<std::size_t>(q - q_min)] : 0.0;
  }

  /// Floors at kDensityFloor, renormalizes, recomputes the mode.
  void normalize() {
    detail::require<ConfigError>(!probs.empty() && q_max - q_min + 1 ==
                                                       static_cast<std::int64_t>(probs.size()),
                                 "pmf: support does not match probability count");
    double sum = 0;
    for (double& p : probs) {
      p = std::max(p, kDensityFloor);
      sum += p;
    }
    for (double& p : probs) p /= sum;
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
      if (probs[i] > probs[best]) best = i;
    mode = q_min + static_cast<std::int32_t>(best);
  }

  friend bool operator==(const DiscretePmf&, const DiscretePmf&) = default;
};

/// P(n) proportional to psi(n) at every integer inside the grid.
inline DiscretePmf discretize(const MarginalDensity& psi) {
  const double lo = std::ceil(psi.left() - 1e-9);
  const double hi = std::floor(psi.right() + 1e-9);
  detail::require<ConfigError>(lo <= hi, "discretize: density covers no integer");
  detail::require<ConfigError>(lo >= -1e9 && hi <= 1e9, "discretize: support too large");
  DiscretePmf pmf;
  pmf.q_min = static_cast<std::int32_t>(lo);
  pmf.q_max = static_cast<std::int32_t>(hi);
  for (std::int32_t n = pmf.q_min; n <= pmf.q_max; ++n) pmf.probs.push_back(psi.eval(n));
  pmf.normalize();
  return pmf;
}

/// Entropy in bits.
inline double pmf_entropy(const DiscretePmf& pmf) {
  double h = 0;
  for (double p : pmf.probs)
    if (p > 0) h -= p * std::log2(p);
  return h;
}

/// -integral psi log2 psi over the grid, exact for the linear spline.
inline double differential_entropy(const MarginalDensity& psi) {
  auto plogp_antiderivative = [](double p) {
    // d/dp of (p^2/2 ln p - p^2/4) is p ln p
    return p > 0 ? 0.5 * p * p * std::log(p) - 0.25 * p * p : 0.0;
  };
  const auto& s = psi.samples();
  const double h = psi.spacing();
  double nats = 0;
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const double a = s[k], b = s[k + 1];
    if (std::abs(b - a) < 1e-12 * std::max(a, b)) {
      const double m = 0.5 * (a + b);
      nats += m > 0 ? h * m * std::log(m) : 0.0;
    } else {
      nats += h / (b - a) * (plogp_antiderivative(b) - plogp_antiderivative(a));
    }
  }
  return -nats / std::numbers::ln2;
}

}  // namespace ntc
