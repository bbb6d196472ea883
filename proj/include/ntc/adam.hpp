#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ntc/error.hpp"

namespace ntc {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over any parameter container exposing for_each_group(f(k, name, span)).
/// Moment buffers are laid out in group visiting order.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  template <class Params>
  void step(Params& params, const Params& grads, double step_size) {
    std::vector<std::span<const double>> g;
    grads.for_each_group([&](std::size_t, auto, std::span<const double> v) { g.push_back(v); });
    std::size_t group = 0;
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    params.for_each_group([&](std::size_t, auto, std::span<double> p) {
      detail::require<ParameterError>(group < g.size() && g[group].size() == p.size(),
                                      "adam: gradient layout does not match parameters");
      if (m_.size() <= group) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
      auto& m = m_[group];
      auto& v = v_[group];
      const auto& gr = g[group];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = config_.beta1 * m[i] + (1 - config_.beta1) * gr[i];
        v[i] = config_.beta2 * v[i] + (1 - config_.beta2) * gr[i] * gr[i];
        p[i] -= step_size * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
      }
      ++group;
    });
  }

  std::size_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace ntc
