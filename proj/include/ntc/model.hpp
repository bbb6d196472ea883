#pragma once

#include <cstddef>
#include <vector>

#include "ntc/density.hpp"
#include "ntc/error.hpp"
#include "ntc/transforms.hpp"

namespace ntc {

/// Everything the codec needs for one trade-off point: transforms, one
/// density per code channel and the pixel normalization.
struct CodecModel {
  TransformParams transform;
  std::vector<MarginalDensity> densities;
  double lambda = 0;
  double pixel_scale = 1.0 / 255.0;  // pixel value * scale -> transform domain
  double pixel_offset = 0.0;

  std::vector<DiscretePmf> pmfs() const {
    std::vector<DiscretePmf> out;
    out.reserve(densities.size());
    for (const auto& d : densities) out.push_back(discretize(d));
    return out;
  }

  void validate() const {
    transform.spec.validate();
    detail::require<ConfigError>(densities.size() == transform.spec.code_channels(),
                                 "model: one density per code channel required");
    detail::require<ConfigError>(
        transform.analysis.stages.size() == transform.spec.stages.size() &&
            transform.synthesis.stages.size() == transform.spec.stages.size(),
        "model: stage count does not match architecture");
    detail::require<ConfigError>(pixel_scale > 0, "model: pixel scale must be positive");
  }

  friend bool operator==(const CodecModel&, const CodecModel&) = default;
};

}  // namespace ntc
