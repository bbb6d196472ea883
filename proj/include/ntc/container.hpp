#pragma once

// NTC1 model container and the in-memory registry of trade-off points.
//
//   "NTC1" u32 version u32 section_count
//   section_count x { tag[4] u32 length payload[length] }
//
// Every "MODL" section holds one model keyed by a 16-bit lambda index.
// Sections with other tags are skipped. Layout details are in
// docs/bitstream.md.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ntc/bytes.hpp"
#include "ntc/density.hpp"
#include "ntc/error.hpp"
#include "ntc/model.hpp"
#include "ntc/transforms.hpp"

namespace ntc {

inline constexpr std::uint32_t kContainerVersion = 1;

/// A model together with the pmfs that seed the entropy coder. The pmfs are
/// stored in the container so decoding never re-derives them.
struct ModelEntry {
  CodecModel model;
  std::vector<DiscretePmf> pmfs;

  friend bool operator==(const ModelEntry&, const ModelEntry&) = default;
};

class ModelRegistry {
 public:
  /// Registers a model; its pmfs are derived from its densities.
  void add(std::uint16_t index, const CodecModel& model) { add(index, ModelEntry{model, model.pmfs()}); }

  void add(std::uint16_t index, ModelEntry entry) {
    entry.model.validate();
    detail::require<ConfigError>(entry.pmfs.size() == entry.model.transform.spec.code_channels(),
                                 "registry: one pmf per code channel required");
    detail::require<ConfigError>(!entries_.contains(index),
                                 "registry: duplicate lambda index " + std::to_string(index));
    entries_.emplace(index, std::move(entry));
  }

  bool contains(std::uint16_t index) const { return entries_.contains(index); }

  const ModelEntry& at(std::uint16_t index) const {
    const auto it = entries_.find(index);
    detail::require<ConfigError>(it != entries_.end(),
                                 "registry: unknown lambda index " + std::to_string(index));
    return it->second;
  }

  std::vector<std::uint16_t> indices() const {
    std::vector<std::uint16_t> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  friend bool operator==(const ModelRegistry&, const ModelRegistry&) = default;

 private:
  std::map<std::uint16_t, ModelEntry> entries_;
};

namespace detail {

inline constexpr std::size_t kMaxArray = std::size_t{1} << 28;

inline void write_stage_list(ByteWriter& w, const std::vector<StageParams>& stages) {
  for (const auto& s : stages) {
    w.f64_array(s.filter_dct);
    w.f64_array(s.bias);
    w.f64_array(s.beta_raw);
    w.f64_array(s.gamma_raw);
  }
}

inline void read_array_into(ByteReader& r, std::vector<double>& dst, const char* name) {
  auto v = r.f64_array(kMaxArray);
  require<CorruptionError>(v.size() == dst.size(), r.what() + ": " + name + " has " +
                                                       std::to_string(v.size()) + " values, expected " +
                                                       std::to_string(dst.size()));
  dst = std::move(v);
}

inline void read_stage_list(ByteReader& r, std::vector<StageParams>& stages) {
  for (auto& s : stages) {
    read_array_into(r, s.filter_dct, "filter");
    read_array_into(r, s.bias, "bias");
    read_array_into(r, s.beta_raw, "beta");
    read_array_into(r, s.gamma_raw, "gamma");
  }
}

inline std::vector<std::uint8_t> model_section(std::uint16_t index, const ModelEntry& e) {
  const CodecModel& m = e.model;
  const ArchitectureSpec& spec = m.transform.spec;
  ByteWriter w;
  w.u16(index);
  w.f64(m.lambda);
  w.f64(m.pixel_scale);
  w.f64(m.pixel_offset);
  w.u8(static_cast<std::uint8_t>(spec.color));
  w.u8(static_cast<std::uint8_t>(spec.padding));
  w.u32(static_cast<std::uint32_t>(spec.stages.size()));
  for (const auto& s : spec.stages) {
    w.u32(static_cast<std::uint32_t>(s.filter_height));
    w.u32(static_cast<std::uint32_t>(s.filter_width));
    w.u32(static_cast<std::uint32_t>(s.in_channels));
    w.u32(static_cast<std::uint32_t>(s.out_channels));
    w.u32(static_cast<std::uint32_t>(s.factor));
  }
  write_stage_list(w, m.transform.analysis.stages);
  write_stage_list(w, m.transform.synthesis.stages);
  w.u32(static_cast<std::uint32_t>(m.densities.size()));
  for (const auto& d : m.densities) {
    w.f64(d.left());
    w.f64(d.spacing());
    w.f64_array(d.samples());
  }
  w.u32(static_cast<std::uint32_t>(e.pmfs.size()));
  for (const auto& p : e.pmfs) {
    w.i32(p.q_min);
    w.i32(p.q_max);
    w.i32(p.mode);
    w.f64_array(p.probs);
  }
  return w.take();
}

inline std::pair<std::uint16_t, ModelEntry> parse_model_section(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "model container");
  const std::uint16_t index = r.u16();
  ModelEntry e;
  CodecModel& m = e.model;
  m.lambda = r.f64();
  m.pixel_scale = r.f64();
  m.pixel_offset = r.f64();
  require<CorruptionError>(std::isfinite(m.lambda) && std::isfinite(m.pixel_scale) && m.pixel_scale > 0 &&
                               std::isfinite(m.pixel_offset),
                           "model container: invalid lambda or pixel normalization");
  ArchitectureSpec spec;
  const std::uint8_t color = r.u8();
  const std::uint8_t padding = r.u8();
  require<CorruptionError>(color <= 1 && padding <= 1, "model container: invalid color or padding mode");
  spec.color = static_cast<ColorMode>(color);
  spec.padding = static_cast<PaddingMode>(padding);
  const std::uint32_t n_stages = r.u32();
  require<CorruptionError>(n_stages >= 1 && n_stages <= 16, "model container: invalid stage count");
  for (std::uint32_t k = 0; k < n_stages; ++k) {
    StageSpec s;
    s.filter_height = r.u32();
    s.filter_width = r.u32();
    s.in_channels = r.u32();
    s.out_channels = r.u32();
    s.factor = r.u32();
    require<CorruptionError>(s.filter_height <= 255 && s.filter_width <= 255 && s.in_channels <= 4096 &&
                                 s.out_channels <= 4096 && s.factor <= 64,
                             "model container: stage dimensions out of range");
    spec.stages.push_back(s);
  }
  try {
    spec.validate();
  } catch (const ConfigError& err) {
    throw CorruptionError(std::string("model container: ") + err.what());
  }
  // Shapes come from the architecture; the arrays overwrite the values.
  m.transform = init_params(spec, 0);
  read_stage_list(r, m.transform.analysis.stages);
  read_stage_list(r, m.transform.synthesis.stages);

  const std::uint32_t n_dens = r.u32();
  require<CorruptionError>(n_dens == spec.code_channels(), "model container: density count mismatch");
  for (std::uint32_t c = 0; c < n_dens; ++c) {
    const double left = r.f64();
    const double spacing = r.f64();
    auto samples = r.f64_array(kMaxArray);
    require<CorruptionError>(std::isfinite(left) && std::isfinite(spacing) && spacing > 0 && samples.size() >= 2,
                             "model container: invalid density grid");
    for (double s : samples)
      require<CorruptionError>(std::isfinite(s) && s >= 0, "model container: invalid density sample");
    m.densities.emplace_back(left, std::move(samples), c, spacing);
  }
  const std::uint32_t n_pmf = r.u32();
  require<CorruptionError>(n_pmf == spec.code_channels(), "model container: pmf count mismatch");
  for (std::uint32_t c = 0; c < n_pmf; ++c) {
    DiscretePmf p;
    p.q_min = r.i32();
    p.q_max = r.i32();
    p.mode = r.i32();
    p.probs = r.f64_array(kMaxArray);
    require<CorruptionError>(
        p.q_min <= p.q_max && p.mode >= p.q_min && p.mode <= p.q_max &&
            static_cast<std::int64_t>(p.q_max) - p.q_min + 1 == static_cast<std::int64_t>(p.probs.size()),
        "model container: inconsistent pmf support");
    for (double v : p.probs)
      require<CorruptionError>(std::isfinite(v) && v > 0 && v <= 1, "model container: invalid pmf probability");
    e.pmfs.push_back(std::move(p));
  }
  require<CorruptionError>(r.at_end(), "model container: trailing bytes in model section");
  return {index, std::move(e)};
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_registry(const ModelRegistry& registry) {
  ByteWriter w;
  w.tag("NTC1");
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(registry.size()));
  for (std::uint16_t index : registry.indices()) {
    const auto section = detail::model_section(index, registry.at(index));
    w.tag("MODL");
    w.u32(static_cast<std::uint32_t>(section.size()));
    w.raw(section);
  }
  return w.take();
}

/// Parses a container. Malformed input raises CorruptionError.
inline ModelRegistry parse_registry(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "model container");
  detail::require<CorruptionError>(r.remaining() >= 4 && r.tag(4) == "NTC1",
                                   "model container: bad magic (expected NTC1)");
  const std::uint32_t version = r.u32();
  detail::require<CorruptionError>(version == kContainerVersion,
                                   "model container: unsupported version " + std::to_string(version));
  const std::uint32_t sections = r.u32();
  ModelRegistry registry;
  for (std::uint32_t i = 0; i < sections; ++i) {
    const std::string tag = r.tag(4);
    const std::uint32_t length = r.u32();
    const auto payload = r.raw(length);
    if (tag != "MODL") continue;
    auto [index, entry] = detail::parse_model_section(payload);
    detail::require<CorruptionError>(!registry.contains(index),
                                     "model container: duplicate lambda index " + std::to_string(index));
    try {
      registry.add(index, std::move(entry));
    } catch (const ConfigError& err) {
      throw CorruptionError(std::string("model container: ") + err.what());
    }
  }
  detail::require<CorruptionError>(r.at_end(), "model container: trailing bytes after last section");
  return registry;
}

inline void save_registry(const std::string& path, const ModelRegistry& registry) {
  write_file(path, serialize_registry(registry));
}

inline ModelRegistry load_registry(const std::string& path) { return parse_registry(read_file(path)); }

}  // namespace ntc
