#pragma once

// Joint optimization of analysis, synthesis and density parameters under the
// noise-relaxed rate-distortion loss.
//
// Units: rate_term is bits per pixel; distortion_term is distortion_scale
// times the mean squared error in the normalized pixel domain (with the
// default scale of 255^2 this is the MSE in 8-bit units).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ntc/adam.hpp"
#include "ntc/density.hpp"
#include "ntc/entropy_code.hpp"
#include "ntc/error.hpp"
#include "ntc/model.hpp"
#include "ntc/quantize.hpp"
#include "ntc/random.hpp"
#include "ntc/tensor.hpp"
#include "ntc/transforms.hpp"

namespace ntc {

struct TrainConfig {
  double lambda = 0.01;
  double initial_step = 1e-4;
  double step_decay_floor = 1e-7;
  std::size_t batch_size = 8;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 0;
  double density_fit_step = 0.2;
  std::size_t range_adapt_every = 100;
  double distortion_scale = 255.0 * 255.0;
  std::size_t stagnation_window = 100;
  std::size_t stagnation_patience = 500;
  double decay_factor = 0.1;
  DensityObjective density_objective = DensityObjective::likelihood;
  AdamConfig adam;

  void validate() const {
    detail::require<ConfigError>(lambda >= 0 && std::isfinite(lambda), "train: lambda must be >= 0");
    detail::require<ConfigError>(step_decay_floor > 0 && initial_step >= step_decay_floor,
                                 "train: need initial_step >= step_decay_floor > 0");
    detail::require<ConfigError>(batch_size > 0, "train: batch size must be positive");
    detail::require<ConfigError>(density_fit_step > 0, "train: density fit step must be positive");
    detail::require<ConfigError>(distortion_scale > 0, "train: distortion scale must be positive");
    detail::require<ConfigError>(decay_factor > 0 && decay_factor < 1,
                                 "train: decay factor must be in (0, 1)");
    detail::require<ConfigError>(stagnation_window > 0, "train: stagnation window must be positive");
  }
};

enum class RDMode : std::uint8_t { relaxed = 0, discrete = 1 };

/// rate in bits per pixel, distortion as MSE in 8-bit units.
struct RDPoint {
  double rate = 0;
  double distortion = 0;
  double lambda = 0;
  RDMode mode = RDMode::relaxed;
};

/// i.i.d. uniform noise in [-1/2, 1/2).
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : rng_(seed) {}
  double next() { return rng_.uniform() - 0.5; }
  Tensor sample(Shape shape) {
    Tensor t(shape);
    for (double& v : t.values()) v = next();
    return t;
  }

 private:
  Rng rng_;
};

struct LossTerms {
  double loss = 0;
  double rate_term = 0;
  double distortion_term = 0;
};

struct RelaxedLossResult {
  LossTerms terms;
  AnalysisParams grad_analysis;  // empty when gradients were not requested
  SynthesisParams grad_synthesis;
  std::vector<Tensor> noisy_codes;
};

namespace detail {

inline double image_pixels(const Tensor& x) { return static_cast<double>(x.height() * x.width()); }

/// -sum log2 psi_c(t) over the code, and optionally its gradient.
inline double code_bits(const Tensor& code, const std::vector<MarginalDensity>& densities,
                        Tensor* grad) {
  double bits = 0;
  for (std::size_t c = 0; c < code.channels(); ++c) {
    const auto values = code.channel(c);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto l = log2_likelihood_and_grads(densities[c], values[i]);
      bits -= l.value;
      if (grad) grad->channel(c)[i] = -l.d_dt;
    }
  }
  return bits;
}

inline void check_batch(std::span<const Tensor> batch, const CodecModel& model) {
  detail::require<ParameterError>(!batch.empty(), "relaxed_loss: empty batch");
  detail::require<ParameterError>(model.densities.size() == model.transform.spec.code_channels(),
                                  "relaxed_loss: one density per code channel required");
  const std::size_t f = model.transform.spec.total_factor();
  for (const auto& x : batch)
    detail::require<ParameterError>(
        x.channels() == model.transform.spec.image_channels() && x.height() % f == 0 &&
            x.width() % f == 0 && x.size() > 0,
        "relaxed_loss: image shape " + to_string(x.shape()) + " does not fit the architecture");
}

}  // namespace detail

/// Batch mean of rate and distortion with y~ = g_a(x) + noise. noise_for(i,
/// shape) supplies the noise for batch item i.
inline RelaxedLossResult relaxed_loss(std::span<const Tensor> batch, const CodecModel& model,
                                      double lambda,
                                      const std::function<Tensor(std::size_t, Shape)>& noise_for,
                                      double distortion_scale = 255.0 * 255.0,
                                      bool gradients = true) {
  detail::check_batch(batch, model);
  const auto& tp = model.transform;
  const PaddingMode pad = tp.spec.padding;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double distortion_coef = lambda * distortion_scale;
  RelaxedLossResult r;
  if (gradients) {
    r.grad_analysis = tp.analysis.zeros_like();
    r.grad_synthesis = tp.synthesis.zeros_like();
  }
  double rate_sum = 0, dist_sum = 0;
  for (std::size_t item = 0; item < batch.size(); ++item) {
    const Tensor& x = batch[item];
    auto a = analysis_forward(x, tp.analysis, pad, gradients);
    const Tensor noise = noise_for(item, a.y.shape());
    detail::require<ParameterError>(noise.shape() == a.y.shape(), "relaxed_loss: noise shape mismatch");
    Tensor y_tilde = a.y;
    for (std::size_t i = 0; i < y_tilde.size(); ++i) y_tilde.values()[i] += noise.values()[i];

    const double pixels = detail::image_pixels(x);
    Tensor grad_y(y_tilde.shape());
    const double bits = detail::code_bits(y_tilde, model.densities, gradients ? &grad_y : nullptr);
    rate_sum += bits / pixels;

    auto s = synthesis_forward(y_tilde, tp.synthesis, pad, gradients);
    double sq = 0;
    const double n = static_cast<double>(x.size());
    Tensor grad_x_hat(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = s.x_hat.values()[i] - x.values()[i];
      sq += e * e;
      grad_x_hat.values()[i] = distortion_coef * 2.0 * e / n * inv_b;
    }
    dist_sum += distortion_scale * (sq / n);

    if (gradients) {
      auto gs = synthesis_backward(s.tape, grad_x_hat);
      for (std::size_t i = 0; i < grad_y.size(); ++i)
        grad_y.values()[i] = grad_y.values()[i] / pixels * inv_b + gs.input.values()[i];
      auto ga = analysis_backward(a.tape, grad_y);
      r.grad_analysis.accumulate(ga.params);
      r.grad_synthesis.accumulate(gs.params);
    }
    r.noisy_codes.push_back(std::move(y_tilde));
  }
  r.terms.rate_term = rate_sum * inv_b;
  r.terms.distortion_term = dist_sum * inv_b;
  detail::require<NumericError>(std::isfinite(r.terms.rate_term), "relaxed_loss: non-finite rate term");
  detail::require<NumericError>(std::isfinite(r.terms.distortion_term),
                                "relaxed_loss: non-finite distortion term");
  r.terms.loss = r.terms.rate_term + lambda * r.terms.distortion_term;
  return r;
}

inline RelaxedLossResult relaxed_loss(std::span<const Tensor> batch, const CodecModel& model,
                                      double lambda, NoiseSource& noise,
                                      double distortion_scale = 255.0 * 255.0,
                                      bool gradients = true) {
  return relaxed_loss(
      batch, model, lambda, [&noise](std::size_t, Shape shape) { return noise.sample(shape); },
      distortion_scale, gradients);
}

struct TrainLogEntry {
  std::size_t step = 0;
  double rate_term = 0;
  double distortion_term = 0;
  double loss = 0;
  double step_size = 0;
};

struct TrainResult {
  CodecModel model;
  std::vector<TrainLogEntry> log;
  bool diverged = false;
  std::string divergence_reason;
};

/// Lowers the step size when neither moving average has reached a new
/// minimum for `patience` steps.
class StagnationTracker {
 public:
  StagnationTracker(std::size_t window, std::size_t patience) : window_(window), patience_(patience) {}

  /// Returns true when the step size should be decayed.
  bool observe(std::size_t step, double rate, double distortion) {
    rates_.push_back(rate);
    dists_.push_back(distortion);
    rate_sum_ += rate;
    dist_sum_ += distortion;
    if (rates_.size() > window_) {
      rate_sum_ -= rates_.front();
      dist_sum_ -= dists_.front();
      rates_.pop_front();
      dists_.pop_front();
    }
    if (rates_.size() < window_) {
      last_improvement_ = step;
      return false;
    }
    const double n = static_cast<double>(window_);
    bool improved = false;
    if (rate_sum_ / n < best_rate_) {
      best_rate_ = rate_sum_ / n;
      improved = true;
    }
    if (dist_sum_ / n < best_dist_) {
      best_dist_ = dist_sum_ / n;
      improved = true;
    }
    if (improved) last_improvement_ = step;
    if (step - last_improvement_ >= patience_) {
      last_improvement_ = step;
      return true;
    }
    return false;
  }

 private:
  std::size_t window_, patience_;
  std::deque<double> rates_, dists_;
  double rate_sum_ = 0, dist_sum_ = 0;
  double best_rate_ = std::numeric_limits<double>::infinity();
  double best_dist_ = std::numeric_limits<double>::infinity();
  std::size_t last_improvement_ = 0;
};

namespace detail {

/// Uniform densities covering the noisy codes of a few batches.
inline std::vector<MarginalDensity> initial_densities(std::span<const Tensor> data,
                                                      const TransformParams& tp, std::size_t count,
                                                      NoiseSource& noise) {
  const std::size_t channels = tp.spec.code_channels();
  std::vector<double> lo(channels, std::numeric_limits<double>::infinity());
  std::vector<double> hi(channels, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < std::min(count, data.size()); ++i) {
    const Tensor y = analysis_forward(data[i], tp.analysis, tp.spec.padding, false).y;
    for (std::size_t c = 0; c < channels; ++c)
      for (double v : y.channel(c)) {
        const double t = v + noise.next();
        lo[c] = std::min(lo[c], t);
        hi[c] = std::max(hi[c], t);
      }
  }
  std::vector<MarginalDensity> out;
  for (std::size_t c = 0; c < channels; ++c) {
    detail::require<NumericError>(std::isfinite(lo[c]) && std::isfinite(hi[c]),
                                  "train: non-finite code at initialization");
    out.push_back(MarginalDensity::uniform(lo[c] - 1.0, hi[c] + 1.0, c));
  }
  return out;
}

}  // namespace detail

/// Trains one model for config.lambda. On a non-finite loss the last model
/// that produced a finite loss is returned with diverged set.
inline TrainResult train(const TrainConfig& config, std::span<const Tensor> dataset,
                         const ArchitectureSpec& spec,
                         const std::function<void(const TrainLogEntry&)>& on_step = {}) {
  config.validate();
  spec.validate();
  detail::require<ParameterError>(!dataset.empty(), "train: empty dataset");
  TrainResult result;
  CodecModel& model = result.model;
  model.transform = init_params(spec, config.seed);
  model.lambda = config.lambda;

  Rng sampler(config.seed ^ 0x5DEECE66Dull);
  NoiseSource noise(config.seed + 1);
  model.densities =
      detail::initial_densities(dataset, model.transform, 4 * config.batch_size, noise);
  detail::check_batch(dataset, model);
  if (config.max_steps == 0) return result;

  Adam adam_a(config.adam), adam_s(config.adam);
  StagnationTracker stagnation(config.stagnation_window, config.stagnation_patience);
  double step_size = config.initial_step;

  std::vector<std::size_t> order(dataset.size());
  std::size_t cursor = order.size();
  const std::size_t channels = spec.code_channels();
  std::vector<double> seen_lo(channels, std::numeric_limits<double>::infinity());
  std::vector<double> seen_hi(channels, -std::numeric_limits<double>::infinity());
  std::vector<Tensor> batch(config.batch_size);
  CodecModel snapshot = model;

  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    for (auto& x : batch) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[sampler.below(i)]);
        cursor = 0;
      }
      x = dataset[order[cursor++]];
    }

    RelaxedLossResult r;
    try {
      r = relaxed_loss(batch, model, config.lambda, noise, config.distortion_scale);
      snapshot = model;

      adam_a.step(model.transform.analysis, r.grad_analysis, step_size);
      adam_s.step(model.transform.synthesis, r.grad_synthesis, step_size);
      project_parameters(model.transform.analysis);
      project_parameters(model.transform.synthesis);
      renormalize_filters(model.transform.analysis);
      renormalize_filters(model.transform.synthesis);

      for (std::size_t c = 0; c < channels; ++c) {
        std::vector<double> samples;
        for (const auto& code : r.noisy_codes)
          for (double v : code.channel(c)) {
            samples.push_back(v);
            seen_lo[c] = std::min(seen_lo[c], v);
            seen_hi[c] = std::max(seen_hi[c], v);
          }
        fit_step(model.densities[c], samples, config.density_fit_step, config.density_objective);
      }
      if (config.range_adapt_every > 0 && step % config.range_adapt_every == 0) {
        for (std::size_t c = 0; c < channels; ++c) {
          model.densities[c] = adapt_range(model.densities[c], seen_lo[c], seen_hi[c]);
          seen_lo[c] = std::numeric_limits<double>::infinity();
          seen_hi[c] = -std::numeric_limits<double>::infinity();
        }
      }
    } catch (const NumericError& e) {
      result.diverged = true;
      result.divergence_reason = e.what();
      model = std::move(snapshot);
      return result;
    }

    const TrainLogEntry entry{step, r.terms.rate_term, r.terms.distortion_term, r.terms.loss, step_size};
    result.log.push_back(entry);
    if (on_step) on_step(entry);
    if (stagnation.observe(step, r.terms.rate_term, r.terms.distortion_term))
      step_size = std::max(step_size * config.decay_factor, config.step_decay_floor);
  }
  return result;
}

inline double mse_8bit(const Tensor& x, const Tensor& x_hat, double pixel_scale) {
  double sq = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = (x_hat.values()[i] - x.values()[i]) / pixel_scale;
    sq += e * e;
  }
  return sq / static_cast<double>(x.size());
}

/// Rate of the rounded code under the discretized densities and the
/// distortion of its reconstruction (before clamping to 8 bits).
inline RDPoint evaluate_discrete(const Tensor& x, const CodecModel& model) {
  const std::array<Tensor, 1> one{x};
  detail::check_batch(one, model);
  const auto& tp = model.transform;
  const QuantizedCode q = quantize(analysis_forward(x, tp.analysis, tp.spec.padding, false).y);
  const auto pmfs = model.pmfs();
  RDPoint p;
  p.mode = RDMode::discrete;
  p.lambda = model.lambda;
  p.rate = model_codelength_bits(q, pmfs) / detail::image_pixels(x);
  const Tensor x_hat = synthesis_forward(dequantize(q), tp.synthesis, tp.spec.padding, false).x_hat;
  p.distortion = mse_8bit(x, x_hat, model.pixel_scale);
  return p;
}

/// Same terms with additive noise in place of rounding.
inline RDPoint evaluate_relaxed(const Tensor& x, const CodecModel& model, NoiseSource& noise) {
  const std::array<Tensor, 1> one{x};
  detail::check_batch(one, model);
  const auto& tp = model.transform;
  Tensor y = analysis_forward(x, tp.analysis, tp.spec.padding, false).y;
  for (double& v : y.values()) v += noise.next();
  RDPoint p;
  p.mode = RDMode::relaxed;
  p.lambda = model.lambda;
  p.rate = detail::code_bits(y, model.densities, nullptr) / detail::image_pixels(x);
  const Tensor x_hat = synthesis_forward(y, tp.synthesis, tp.spec.padding, false).x_hat;
  p.distortion = mse_8bit(x, x_hat, model.pixel_scale);
  return p;
}

}  // namespace ntc
