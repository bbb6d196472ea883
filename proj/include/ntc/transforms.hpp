#pragma once

// Analysis and synthesis transforms built from conv / resampling / (I)GDN
// stages, plus the raw-parameter bookkeeping used by the optimizer: filters
// live in the DCT domain, GDN parameters are stored as square roots
// (beta = beta'^2 - 2^-10) and are projected after every update.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ntc/dct.hpp"
#include "ntc/error.hpp"
#include "ntc/layers.hpp"
#include "ntc/random.hpp"
#include "ntc/tensor.hpp"

namespace ntc {

inline constexpr double kReparamPedestal = 0x1.0p-10;  // 2^-10
inline constexpr double kReparamFloor = 0x1.0p-5;      // 2^-5

enum class ColorMode : std::uint8_t { grayscale = 0, rgb = 1 };

/// One analysis stage: conv (filter_height x filter_width, in -> out
/// channels), downsample by factor, GDN over out channels. The synthesis
/// stage mirroring it runs IGDN over out channels, upsamples by factor and
/// convolves back to in channels.
struct StageSpec {
  std::size_t filter_height = 0;
  std::size_t filter_width = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t factor = 1;

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct ArchitectureSpec {
  std::vector<StageSpec> stages;
  ColorMode color = ColorMode::grayscale;
  PaddingMode padding = PaddingMode::mirror;

  std::size_t image_channels() const { return color == ColorMode::rgb ? 3 : 1; }
  std::size_t code_channels() const { return stages.empty() ? 0 : stages.back().out_channels; }
  std::size_t total_factor() const {
    std::size_t f = 1;
    for (const auto& s : stages) f *= s.factor;
    return f;
  }

  void validate() const {
    detail::require<ConfigError>(!stages.empty(), "architecture: no stages");
    std::size_t channels = image_channels();
    for (const auto& s : stages) {
      detail::require<ConfigError>(s.in_channels == channels,
                                   "architecture: stage channel chain is broken");
      detail::require<ConfigError>(s.filter_height % 2 == 1 && s.filter_width % 2 == 1,
                                   "architecture: filter support must be odd");
      detail::require<ConfigError>(s.factor >= 1 && s.out_channels >= 1,
                                   "architecture: invalid factor or channel count");
      channels = s.out_channels;
    }
  }

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;

  /// Three-stage network (9x9 / factor 4, then two 5x5 / factor 2 stages).
  static ArchitectureSpec three_stage(std::size_t channels, ColorMode color) {
    const std::size_t in = color == ColorMode::rgb ? 3 : 1;
    return ArchitectureSpec{{{9, 9, in, channels, 4},
                             {5, 5, channels, channels, 2},
                             {5, 5, channels, channels, 2}},
                            color,
                            PaddingMode::mirror};
  }

  /// Named presets: "gray" (128 ch), "gray-high" (256 ch), "rgb" (192 ch),
  /// "desk" (8 ch), "desk-rgb" (8 ch), "tiny" (2 stages, 4 ch).
  static ArchitectureSpec preset(std::string_view name) {
    if (name == "gray") return three_stage(128, ColorMode::grayscale);
    if (name == "gray-high") return three_stage(256, ColorMode::grayscale);
    if (name == "rgb") return three_stage(192, ColorMode::rgb);
    if (name == "desk") return three_stage(8, ColorMode::grayscale);
    if (name == "desk-rgb") return three_stage(8, ColorMode::rgb);
    if (name == "tiny")
      return ArchitectureSpec{{{5, 5, 1, 4, 2}, {3, 3, 4, 4, 2}},
                              ColorMode::grayscale,
                              PaddingMode::mirror};
    throw ConfigError("unknown architecture preset '" + std::string(name) + "'");
  }
};

/// Raw (optimizer-facing) parameters of one stage. For analysis stages the
/// conv maps in -> out and GDN runs over out; for synthesis stages IGDN runs
/// over the conv input channels.
struct StageParams {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_height = 0;
  std::size_t kernel_width = 0;
  std::size_t factor = 1;
  std::size_t gdn_channels = 0;
  std::vector<double> filter_dct;  // [out][in][kh][kw], DCT domain per slice
  std::vector<double> bias;        // [out]
  std::vector<double> beta_raw;    // [gdn]
  std::vector<double> gamma_raw;   // [gdn][gdn], full matrix

  StageParams() = default;
  StageParams(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw,
              std::size_t factor_, std::size_t gdn)
      : out_channels(out),
        in_channels(in),
        kernel_height(kh),
        kernel_width(kw),
        factor(factor_),
        gdn_channels(gdn),
        filter_dct(out * in * kh * kw, 0.0),
        bias(out, 0.0),
        beta_raw(gdn, 0.0),
        gamma_raw(gdn * gdn, 0.0) {}

  /// Same shape, all zeros (used for gradient accumulators).
  StageParams zeros_like() const {
    return StageParams(out_channels, in_channels, kernel_height, kernel_width, factor,
                       gdn_channels);
  }

  template <class F>
  void for_each_group(F&& f) {
    f("filter", std::span<double>(filter_dct));
    f("bias", std::span<double>(bias));
    f("beta", std::span<double>(beta_raw));
    f("gamma", std::span<double>(gamma_raw));
  }
  template <class F>
  void for_each_group(F&& f) const {
    f("filter", std::span<const double>(filter_dct));
    f("bias", std::span<const double>(bias));
    f("beta", std::span<const double>(beta_raw));
    f("gamma", std::span<const double>(gamma_raw));
  }

  friend bool operator==(const StageParams&, const StageParams&) = default;
};

namespace detail {

template <class Derived>
struct StageList {
  std::vector<StageParams> stages;

  friend bool operator==(const StageList&, const StageList&) = default;

  Derived zeros_like() const {
    Derived d;
    for (const auto& s : stages) d.stages.push_back(s.zeros_like());
    return d;
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& s : stages)
      s.for_each_group([&](std::string_view, std::span<const double> v) { n += v.size(); });
    return n;
  }
  /// Calls f(stage_index, group_name, span) for every parameter group.
  template <class F>
  void for_each_group(F&& f) {
    for (std::size_t k = 0; k < stages.size(); ++k)
      stages[k].for_each_group([&](std::string_view name, std::span<double> v) { f(k, name, v); });
  }
  template <class F>
  void for_each_group(F&& f) const {
    for (std::size_t k = 0; k < stages.size(); ++k)
      stages[k].for_each_group(
          [&](std::string_view name, std::span<const double> v) { f(k, name, v); });
  }
  void accumulate(const Derived& other, double scale = 1.0) {
    for (std::size_t k = 0; k < stages.size(); ++k) {
      auto& a = stages[k];
      const auto& b = other.stages[k];
      auto add = [scale](std::vector<double>& x, const std::vector<double>& y) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += scale * y[i];
      };
      add(a.filter_dct, b.filter_dct);
      add(a.bias, b.bias);
      add(a.beta_raw, b.beta_raw);
      add(a.gamma_raw, b.gamma_raw);
    }
  }
};

}  // namespace detail

/// phi: analysis parameters (or gradients w.r.t. them).
struct AnalysisParams : detail::StageList<AnalysisParams> {
  friend bool operator==(const AnalysisParams&, const AnalysisParams&) = default;
};
/// theta: synthesis parameters (or gradients w.r.t. them).
struct SynthesisParams : detail::StageList<SynthesisParams> {
  friend bool operator==(const SynthesisParams&, const SynthesisParams&) = default;
};

struct TransformParams {
  ArchitectureSpec spec;
  AnalysisParams analysis;
  SynthesisParams synthesis;

  friend bool operator==(const TransformParams&, const TransformParams&) = default;
};

// ---------------------------------------------------------------------------
// Raw -> effective parameter maps

inline double effective_from_raw(double raw) { return raw * raw - kReparamPedestal; }

inline ConvKernel effective_kernel(const StageParams& s) {
  ConvKernel k(s.out_channels, s.in_channels, s.kernel_height, s.kernel_width);
  const Dct2d dct(s.kernel_height, s.kernel_width);
  k.weights = dct.inverse_all(s.filter_dct);
  k.bias = s.bias;
  return k;
}

/// gamma_ij = sigma_ij^2 - 2^-10 with sigma = (gamma' + gamma'^T) / 2.
inline GdnParams effective_gdn(const StageParams& s) {
  const std::size_t c = s.gdn_channels;
  GdnParams g(c);
  for (std::size_t i = 0; i < c; ++i) {
    g.beta()[i] = effective_from_raw(s.beta_raw[i]);
    for (std::size_t j = i; j < c; ++j) {
      const double sigma = 0.5 * (s.gamma_raw[i * c + j] + s.gamma_raw[j * c + i]);
      g.set_gamma(i, j, effective_from_raw(sigma));
    }
  }
  return g;
}

namespace detail {

/// Pulls layer gradients back onto one stage's raw parameters.
inline void raw_stage_gradients(const StageParams& s, const ConvKernel& grad_kernel,
                                const GdnGrads& grad_gdn, StageParams& out) {
  const Dct2d dct(s.kernel_height, s.kernel_width);
  // The DCT is orthonormal, so the pullback of the inverse map is the forward map.
  out.filter_dct = dct.forward_all(grad_kernel.weights);
  out.bias = grad_kernel.bias;
  const std::size_t c = s.gdn_channels;
  GdnParams layout(c);
  for (std::size_t i = 0; i < c; ++i) {
    out.beta_raw[i] = 2.0 * s.beta_raw[i] * grad_gdn.beta[i];
    for (std::size_t j = 0; j < c; ++j) {
      const double g = grad_gdn.gamma[layout.packed_index(i, j)];
      if (i == j) {
        out.gamma_raw[i * c + i] = 2.0 * s.gamma_raw[i * c + i] * g;
      } else {
        const double sigma = 0.5 * (s.gamma_raw[i * c + j] + s.gamma_raw[j * c + i]);
        out.gamma_raw[i * c + j] = sigma * g;
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward / backward

struct AnalysisStageRecord {
  Tensor input;      // u^(k)
  Tensor pre_gdn;    // w^(k)
  ConvKernel kernel;
  GdnParams gdn;
};

/// Intermediates of one analysis_forward call.
struct AnalysisTape {
  std::vector<AnalysisStageRecord> stages;
  AnalysisParams params;
  Shape output_shape;
  PaddingMode padding = PaddingMode::mirror;
};

struct SynthesisStageRecord {
  Tensor input;       // u_hat^(k)
  Tensor post_igdn;   // w_hat^(k)
  ConvKernel kernel;
  GdnParams gdn;
};

struct SynthesisTape {
  std::vector<SynthesisStageRecord> stages;
  SynthesisParams params;
  Shape output_shape;
  PaddingMode padding = PaddingMode::mirror;
};

struct AnalysisResult {
  Tensor y;
  AnalysisTape tape;
};

struct SynthesisResult {
  Tensor x_hat;
  SynthesisTape tape;
};

struct AnalysisGradients {
  AnalysisParams params;
  Tensor input;
};

struct SynthesisGradients {
  SynthesisParams params;
  Tensor input;
};

inline AnalysisResult analysis_forward(const Tensor& x, const AnalysisParams& phi,
                                       PaddingMode padding = PaddingMode::mirror,
                                       bool record = true) {
  detail::require<ParameterError>(!phi.stages.empty(), "analysis: no stages");
  AnalysisResult r;
  Tensor u = x;
  for (const auto& s : phi.stages) {
    detail::require<ParameterError>(u.channels() == s.in_channels,
                                    "analysis: input has " + std::to_string(u.channels()) +
                                        " channels, stage expects " +
                                        std::to_string(s.in_channels));
    ConvKernel kernel = effective_kernel(s);
    GdnParams gdn = effective_gdn(s);
    Tensor w = conv2d_downsample(u, kernel, s.factor, padding);
    Tensor next = gdn_forward(w, gdn);
    if (record)
      r.tape.stages.push_back({std::move(u), std::move(w), std::move(kernel), std::move(gdn)});
    u = std::move(next);
  }
  if (record) {
    r.tape.params = phi;
    r.tape.output_shape = u.shape();
    r.tape.padding = padding;
  }
  r.y = std::move(u);
  return r;
}

inline AnalysisGradients analysis_backward(const AnalysisTape& tape, const Tensor& grad_y) {
  detail::require<UsageError>(!tape.stages.empty() &&
                                  tape.stages.size() == tape.params.stages.size(),
                              "analysis_backward: empty or stale tape");
  detail::require<UsageError>(grad_y.shape() == tape.output_shape,
                              "analysis_backward: gradient shape " + to_string(grad_y.shape()) +
                                  " does not match tape output " + to_string(tape.output_shape));
  AnalysisGradients g{tape.params.zeros_like(), Tensor()};
  Tensor grad = grad_y;
  for (std::size_t k = tape.stages.size(); k-- > 0;) {
    const auto& rec = tape.stages[k];
    const auto& s = tape.params.stages[k];
    GdnGrads gg = gdn_backward(rec.pre_gdn, rec.gdn, grad);
    ConvGrads cg =
        conv2d_downsample_backward(rec.input, rec.kernel, gg.input, s.factor, tape.padding);
    detail::raw_stage_gradients(s, cg.kernel, gg, g.params.stages[k]);
    grad = std::move(cg.input);
  }
  g.input = std::move(grad);
  return g;
}

inline SynthesisResult synthesis_forward(const Tensor& y_hat, const SynthesisParams& theta,
                                         PaddingMode padding = PaddingMode::mirror,
                                         bool record = true) {
  detail::require<ParameterError>(!theta.stages.empty(), "synthesis: no stages");
  SynthesisResult r;
  Tensor u = y_hat;
  for (const auto& s : theta.stages) {
    detail::require<ParameterError>(u.channels() == s.in_channels,
                                    "synthesis: input has " + std::to_string(u.channels()) +
                                        " channels, stage expects " +
                                        std::to_string(s.in_channels));
    ConvKernel kernel = effective_kernel(s);
    GdnParams gdn = effective_gdn(s);
    Tensor w = igdn_forward(u, gdn);
    Tensor next = upsample_conv2d(w, kernel, s.factor, padding);
    if (record)
      r.tape.stages.push_back({std::move(u), std::move(w), std::move(kernel), std::move(gdn)});
    u = std::move(next);
  }
  if (record) {
    r.tape.params = theta;
    r.tape.output_shape = u.shape();
    r.tape.padding = padding;
  }
  r.x_hat = std::move(u);
  return r;
}

inline SynthesisGradients synthesis_backward(const SynthesisTape& tape, const Tensor& grad_x_hat) {
  detail::require<UsageError>(!tape.stages.empty() &&
                                  tape.stages.size() == tape.params.stages.size(),
                              "synthesis_backward: empty or stale tape");
  detail::require<UsageError>(grad_x_hat.shape() == tape.output_shape,
                              "synthesis_backward: gradient shape " +
                                  to_string(grad_x_hat.shape()) + " does not match tape output " +
                                  to_string(tape.output_shape));
  SynthesisGradients g{tape.params.zeros_like(), Tensor()};
  Tensor grad = grad_x_hat;
  for (std::size_t k = tape.stages.size(); k-- > 0;) {
    const auto& rec = tape.stages[k];
    const auto& s = tape.params.stages[k];
    ConvGrads cg = upsample_conv2d_backward(rec.post_igdn, rec.kernel, grad, s.factor, tape.padding);
    GdnGrads gg = igdn_backward(rec.input, rec.gdn, cg.input);
    detail::raw_stage_gradients(s, cg.kernel, gg, g.params.stages[k]);
    grad = std::move(gg.input);
  }
  g.input = std::move(grad);
  return g;
}

// ---------------------------------------------------------------------------
// Projection, renormalization, initialization

/// beta' onto [2^-5, inf); gamma' symmetrized, then onto [2^-5, inf).
template <class Params>
void project_parameters(Params& params) {
  for (auto& s : params.stages) {
    for (double& b : s.beta_raw) b = std::max(b, kReparamFloor);
    const std::size_t c = s.gdn_channels;
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = i; j < c; ++j) {
        const double avg = 0.5 * (s.gamma_raw[i * c + j] + s.gamma_raw[j * c + i]);
        s.gamma_raw[i * c + j] = s.gamma_raw[j * c + i] = std::max(avg, kReparamFloor);
      }
    }
  }
}

namespace detail {

/// Scales each group of DCT coefficients to unit norm (Parseval: same as
/// the spatial norm). Returns the number of zero-norm groups left alone.
inline std::size_t normalize_groups(std::vector<double>& coeffs,
                                    const std::vector<std::vector<std::size_t>>& groups) {
  std::size_t degenerate = 0;
  for (const auto& idx : groups) {
    double ss = 0;
    for (std::size_t i : idx) ss += coeffs[i] * coeffs[i];
    if (ss == 0.0) {
      ++degenerate;
      continue;
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (std::size_t i : idx) coeffs[i] *= inv;
  }
  return degenerate;
}

}  // namespace detail

/// Each analysis filter (one per output channel; all inputs and space) is
/// scaled to unit norm.
inline std::size_t renormalize_filters(AnalysisParams& phi) {
  std::size_t degenerate = 0;
  for (auto& s : phi.stages) {
    const std::size_t slice = s.kernel_height * s.kernel_width;
    std::vector<std::vector<std::size_t>> groups(s.out_channels);
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (std::size_t i = 0; i < s.in_channels; ++i)
        for (std::size_t t = 0; t < slice; ++t) groups[o].push_back((o * s.in_channels + i) * slice + t);
    degenerate += detail::normalize_groups(s.filter_dct, groups);
  }
  return degenerate;
}

/// Each synthesis filter (one per input channel; all outputs and space) is
/// scaled to unit norm.
inline std::size_t renormalize_filters(SynthesisParams& theta) {
  std::size_t degenerate = 0;
  for (auto& s : theta.stages) {
    const std::size_t slice = s.kernel_height * s.kernel_width;
    std::vector<std::vector<std::size_t>> groups(s.in_channels);
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (std::size_t i = 0; i < s.in_channels; ++i)
        for (std::size_t t = 0; t < slice; ++t) groups[i].push_back((o * s.in_channels + i) * slice + t);
    degenerate += detail::normalize_groups(s.filter_dct, groups);
  }
  return degenerate;
}

namespace detail {

inline void init_stage(StageParams& s, Rng& rng) {
  // Zero-mean random coefficients, with lower frequencies given more weight.
  const std::size_t slice = s.kernel_height * s.kernel_width;
  for (std::size_t k = 0; k < s.filter_dct.size(); ++k) {
    const std::size_t t = k % slice;
    const double freq = static_cast<double>(t / s.kernel_width + t % s.kernel_width);
    s.filter_dct[k] = rng.normal() / (1.0 + freq);
  }
  const std::size_t c = s.gdn_channels;
  for (std::size_t i = 0; i < c; ++i) {
    s.beta_raw[i] = 1.0;
    for (std::size_t j = 0; j < c; ++j) s.gamma_raw[i * c + j] = i == j ? 0.25 : kReparamFloor;
  }
}

}  // namespace detail

/// Deterministic initialization from a seed; satisfies all parameter
/// invariants (projected, unit-norm filters).
inline TransformParams init_params(const ArchitectureSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  TransformParams p;
  p.spec = spec;
  for (const auto& st : spec.stages) {
    StageParams s(st.out_channels, st.in_channels, st.filter_height, st.filter_width, st.factor,
                  st.out_channels);
    detail::init_stage(s, rng);
    p.analysis.stages.push_back(std::move(s));
  }
  for (std::size_t k = spec.stages.size(); k-- > 0;) {
    const auto& st = spec.stages[k];
    StageParams s(st.in_channels, st.out_channels, st.filter_height, st.filter_width, st.factor,
                  st.out_channels);
    detail::init_stage(s, rng);
    p.synthesis.stages.push_back(std::move(s));
  }
  project_parameters(p.analysis);
  project_parameters(p.synthesis);
  renormalize_filters(p.analysis);
  renormalize_filters(p.synthesis);
  return p;
}

}  // namespace ntc
