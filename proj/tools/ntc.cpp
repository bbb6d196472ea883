// ntc: train models, compress and decompress images, evaluate quality.
//
// Exit status: 0 ok, 2 usage or configuration error, 3 unreadable or
// corrupt input, 4 numeric failure (including diverged training), 1 other.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ntc/codec.hpp"
#include "ntc/container.hpp"
#include "ntc/dataset.hpp"
#include "ntc/image_io.hpp"
#include "ntc/metrics.hpp"
#include "ntc/synthetic.hpp"
#include "ntc/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode : int { kOk = 0, kOther = 1, kUsage = 2, kCorrupt = 3, kNumeric = 4 };

/// One JSON object per line on stderr.
void log_event(const std::string& level, const std::string& event, json fields = json::object()) {
  fields["level"] = level;
  fields["event"] = event;
  std::cerr << fields.dump() << '\n';
}

/// JSON has no infinity; unbounded or undefined values become null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

/// Files as given; directories contribute their image files in name order.
std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> out;
  for (const auto& in : inputs) {
    if (!fs::is_directory(in)) {
      out.push_back(in);
      continue;
    }
    std::vector<std::string> found;
    for (const auto& entry : fs::directory_iterator(in))
      if (entry.is_regular_file() && has_image_extension(entry.path())) found.push_back(entry.path().string());
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

struct TrainOptions {
  std::vector<std::string> data;
  std::size_t synthetic = 0;
  std::vector<double> lambdas;
  std::uint16_t first_index = 0;
  std::string preset = "desk";
  std::size_t steps = 2000;
  std::size_t batch = 8;
  std::size_t patch = 64;
  double step_size = 1e-2;
  std::uint64_t seed = 0;
  std::string output;
  std::string log_path;
};

int run_train(const TrainOptions& o) {
  const ntc::ArchitectureSpec spec = ntc::ArchitectureSpec::preset(o.preset);
  std::vector<ntc::Image> images;
  for (const auto& path : expand_inputs(o.data)) images.push_back(ntc::read_image(path));
  if (o.synthetic > 0) {
    const auto extra = ntc::dead_leaves_set(o.synthetic, 2 * o.patch, 2 * o.patch, spec.image_channels(), o.seed);
    images.insert(images.end(), extra.begin(), extra.end());
  }
  if (images.empty()) throw ntc::ConfigError("train: no training images (use --data or --synthetic)");

  ntc::PreprocessConfig pc;
  pc.patch_size = o.patch;
  pc.channels = spec.image_channels();
  pc.seed = o.seed;
  const auto prepared = ntc::preprocess_dataset(images, pc);
  for (const auto& line : prepared.log) log_event("info", "preprocess", {{"message", line}});
  log_event("info", "dataset", {{"images", images.size()}, {"patches", prepared.patches.size()}});

  std::ofstream train_log;
  if (!o.log_path.empty()) {
    train_log.open(o.log_path, std::ios::trunc);
    if (!train_log) throw ntc::IoError("cannot create '" + o.log_path + "'");
  }

  ntc::ModelRegistry registry;
  bool diverged = false;
  for (std::size_t i = 0; i < o.lambdas.size(); ++i) {
    const auto index = static_cast<std::uint16_t>(o.first_index + i);
    ntc::TrainConfig cfg;
    cfg.lambda = o.lambdas[i];
    cfg.max_steps = o.steps;
    cfg.batch_size = o.batch;
    cfg.initial_step = o.step_size;
    cfg.seed = o.seed;
    const auto start = std::chrono::steady_clock::now();
    const auto result = ntc::train(cfg, prepared.patches, spec, [&](const ntc::TrainLogEntry& e) {
      if (train_log)
        train_log << json{{"lambda_index", index},     {"step", e.step},
                          {"rate_term", e.rate_term},  {"distortion_term", e.distortion_term},
                          {"loss", e.loss},            {"step_size", e.step_size}}
                         .dump()
                  << '\n';
    });
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json summary{{"lambda_index", index}, {"lambda", cfg.lambda}, {"steps", result.log.size()}, {"seconds", seconds}};
    if (!result.log.empty()) {
      summary["rate_term"] = result.log.back().rate_term;
      summary["distortion_term"] = result.log.back().distortion_term;
    }
    if (result.diverged) {
      diverged = true;
      summary["reason"] = result.divergence_reason;
      log_event("error", "train_diverged", summary);
    } else {
      log_event("info", "train_done", summary);
    }
    registry.add(index, result.model);
  }
  ntc::save_registry(o.output, registry);
  log_event("info", "model_written", {{"path", o.output}, {"models", registry.size()}});
  return diverged ? kNumeric : kOk;
}

int run_compress(const std::string& model, std::uint16_t index, const std::string& in, const std::string& out) {
  const auto registry = ntc::load_registry(model);
  const auto img = ntc::read_image(in);
  const auto file = ntc::compress(img, index, registry);
  ntc::write_file(out, file);
  log_event("info", "compressed",
            {{"input", in},
             {"output", out},
             {"width", img.width},
             {"height", img.height},
             {"lambda_index", index},
             {"bytes", file.size()},
             {"bpp", 8.0 * static_cast<double>(file.size()) / static_cast<double>(img.pixel_count())}});
  return kOk;
}

int run_decompress(const std::string& model, const std::string& in, const std::string& out) {
  const auto registry = ntc::load_registry(model);
  const auto file = ntc::read_file(in);
  const auto img = ntc::decompress(file, registry);
  ntc::write_image(out, img);
  log_event("info", "decompressed",
            {{"input", in}, {"output", out}, {"width", img.width}, {"height", img.height}});
  return kOk;
}

json quality_report(const ntc::Image& ref, const ntc::Image& test) {
  json r;
  if (ref.channels == 3) {
    r["psnr_luma"] = number_or_null(ntc::psnr(ref, test, ntc::Plane::luma));
    r["psnr_chroma"] = number_or_null(ntc::psnr(ref, test, ntc::Plane::chroma));
    r["psnr_rgb"] = number_or_null(ntc::psnr(ref, test, ntc::Plane::gray));
  } else {
    r["psnr"] = number_or_null(ntc::psnr(ref, test, ntc::Plane::gray));
  }
  const ntc::MsSsimConfig cfg;
  r["ms_ssim"] = ref.width >= cfg.min_side() && ref.height >= cfg.min_side()
                     ? number_or_null(ntc::ms_ssim(ref, test, cfg))
                     : json(nullptr);
  return r;
}

int run_eval(const std::string& ref_path, const std::string& test_path) {
  const auto ref = ntc::read_image(ref_path);
  const auto test = ntc::read_image(test_path);
  json r = quality_report(ref, test);
  r["reference"] = ref_path;
  r["test"] = test_path;
  std::cout << r.dump(2) << '\n';
  return kOk;
}

int run_rdcurve(const std::string& model, std::vector<int> indices, const std::vector<std::string>& inputs,
                const std::string& out) {
  const auto registry = ntc::load_registry(model);
  std::vector<std::uint16_t> idx;
  if (indices.empty())
    idx = registry.indices();
  else
    for (int i : indices) idx.push_back(static_cast<std::uint16_t>(i));
  const auto paths = expand_inputs(inputs);
  std::vector<ntc::Image> images;
  for (const auto& p : paths) images.push_back(ntc::read_image(p));
  const auto points = ntc::rd_curve(images, registry, idx);
  json report{{"model", model}, {"images", paths}, {"points", json::array()}};
  for (const auto& p : points)
    report["points"].push_back({{"lambda_index", p.lambda_index},
                                {"lambda", p.lambda},
                                {"bpp", p.bpp},
                                {"psnr", number_or_null(p.psnr)},
                                {"ms_ssim", number_or_null(p.ms_ssim)},
                                {"images", p.images}});
  if (out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw ntc::IoError("cannot create '" + out + "'");
    f << report.dump(2) << '\n';
    log_event("info", "report_written", {{"path", out}, {"points", points.size()}});
  }
  return kOk;
}

int run_synth(const std::string& dir, std::size_t count, std::size_t width, std::size_t height, bool rgb,
              std::uint64_t seed) {
  fs::create_directories(dir);
  const auto images = ntc::dead_leaves_set(count, width, height, rgb ? 3 : 1, seed);
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "leaves_%04zu.png", i);
    ntc::write_image((fs::path(dir) / name).string(), images[i]);
  }
  log_event("info", "synthesized", {{"directory", dir}, {"images", count}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned lossy image codec with GDN transforms and adaptive arithmetic coding"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  TrainOptions t;
  auto* train = app.add_subcommand("train", "Train one model per lambda and write an NTC1 container");
  train->add_option("-d,--data", t.data, "Training images or directories (PNG/PGM/PPM)");
  train->add_option("--synthetic", t.synthetic, "Add this many synthetic dead-leaves images");
  train->add_option("--lambda", t.lambdas, "Trade-off weight(s); one model each")->required();
  train->add_option("--first-index", t.first_index, "Lambda index of the first model");
  train->add_option("-p,--preset", t.preset, "Architecture: desk, desk-rgb, tiny, gray, gray-high, rgb");
  train->add_option("--steps", t.steps, "Optimizer steps per model");
  train->add_option("--batch", t.batch, "Patches per step");
  train->add_option("--patch", t.patch, "Patch size (multiple of 16)");
  train->add_option("--step-size", t.step_size, "Initial Adam step size");
  train->add_option("--seed", t.seed, "Random seed");
  train->add_option("-o,--output", t.output, "Model container to write")->required();
  train->add_option("--log", t.log_path, "Newline-delimited JSON training log");

  std::string model, input, output;
  int index = 0;
  auto* comp = app.add_subcommand("compress", "Compress an image to an NTCB file");
  comp->add_option("-m,--model", model, "Model container")->required();
  comp->add_option("-l,--lambda-index", index, "Lambda index in the container")->required()->check(
      CLI::Range(0, 65535));
  comp->add_option("input", input, "Input image")->required();
  comp->add_option("output", output, "Output file")->required();

  auto* decomp = app.add_subcommand("decompress", "Decode an NTCB file to an image");
  decomp->add_option("-m,--model", model, "Model container")->required();
  decomp->add_option("input", input, "Compressed file")->required();
  decomp->add_option("output", output, "Output image (.png, .pgm or .ppm)")->required();

  std::string ref, test;
  auto* eval = app.add_subcommand("eval", "PSNR and MS-SSIM of a test image against a reference");
  eval->add_option("--ref", ref, "Reference image")->required();
  eval->add_option("--test", test, "Test image")->required();

  std::vector<int> indices;
  std::vector<std::string> inputs;
  auto* rd = app.add_subcommand("rdcurve", "Rate-distortion report over a set of images");
  rd->add_option("-m,--model", model, "Model container")->required();
  rd->add_option("-l,--lambda-index", indices, "Lambda indices (default: all)")->check(CLI::Range(0, 65535));
  rd->add_option("-o,--output", output, "JSON report (default: stdout)");
  rd->add_option("inputs", inputs, "Images or directories")->required();

  std::size_t count = 16, width = 256, height = 256;
  bool rgb = false;
  std::uint64_t seed = 0;
  auto* synth = app.add_subcommand("synth", "Write synthetic dead-leaves images");
  synth->add_option("-o,--output", output, "Directory")->required();
  synth->add_option("--count", count, "Number of images");
  synth->add_option("--width", width, "Width");
  synth->add_option("--height", height, "Height");
  synth->add_flag("--rgb", rgb, "Color images");
  synth->add_option("--seed", seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return run_train(t);
    if (*comp) return run_compress(model, static_cast<std::uint16_t>(index), input, output);
    if (*decomp) return run_decompress(model, input, output);
    if (*eval) return run_eval(ref, test);
    if (*rd) return run_rdcurve(model, indices, inputs, output);
    if (*synth) return run_synth(output, count, width, height, rgb, seed);
  } catch (const ntc::CorruptionError& e) {
    log_event("error", "corrupt_input", {{"message", e.what()}});
    return kCorrupt;
  } catch (const ntc::IoError& e) {
    log_event("error", "io", {{"message", e.what()}});
    return kCorrupt;
  } catch (const ntc::NumericError& e) {
    log_event("error", "numeric", {{"message", e.what()}});
    return kNumeric;
  } catch (const ntc::ConfigError& e) {
    log_event("error", "usage", {{"message", e.what()}});
    return kUsage;
  } catch (const ntc::ParameterError& e) {
    log_event("error", "usage", {{"message", e.what()}});
    return kUsage;
  } catch (const std::exception& e) {
    log_event("error", "failure", {{"message", e.what()}});
    return kOther;
  }
  return kUsage;
}
