#include "fovea/dorsal_init.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fovea/binary_io.hpp"
#include "fovea/error.hpp"
#include "text_util.hpp"

namespace fovea {

namespace {

// d s / d logits for one row of logits.
void saliency_seed(const nn::Matrix& logits, Eigen::Index r, SimilarityMode mode, nn::Matrix& d) {
  Eigen::Index best = 0;
  logits.row(r).maxCoeff(&best);
  if (mode == SimilarityMode::ClassConfidence) {
    d(r, best) = 1.0;
    return;
  }
  bool any = false;
  for (Eigen::Index k = 0; k < logits.cols(); ++k) {
    if (logits(r, k) >= 0.0) {  // sigmoid(z) >= 0.5
      d(r, k) = 1.0;
      any = true;
    }
  }
  if (!any) d(r, best) = 1.0;
}

SaliencyMap map_from_gradient(const nn::Matrix& grad, Eigen::Index r, int channels, int h, int w) {
  const auto plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  std::vector<double> raw(plane, 0.0);
  for (int c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      raw[i] += std::abs(grad(r, static_cast<Eigen::Index>(c * plane + i)));
    }
  }
  SaliencyMap m{w, h, std::vector<double>(plane, 0.0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w) sum += raw[static_cast<std::size_t>(yy) * w + xx];
        }
      }
      m.values[static_cast<std::size_t>(y) * w + x] = sum / 9.0;
    }
  }
  return m;
}

std::vector<SaliencyMap> saliency_batch(const nn::Mlp& net, SimilarityMode mode, const nn::Matrix& inputs,
                                        int channels, int h, int w) {
  const auto cache = net.forward(inputs);
  nn::Matrix d = nn::Matrix::Zero(inputs.rows(), net.output_width());
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) saliency_seed(cache.logits(), r, mode, d);
  const auto g = net.backward(cache, d, true);
  std::vector<SaliencyMap> out;
  out.reserve(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) out.push_back(map_from_gradient(g.input, r, channels, h, w));
  return out;
}

}  // namespace

SaliencyMap saliency_from_input(const nn::Mlp& net, SimilarityMode mode, const Image& input) {
  return saliency_batch(net, mode, flatten(input), input.channels, input.height, input.width).front();
}

SaliencyMap saliency_map(const VentralModel& ventral, const Image& image) {
  const Patch view = extract_glimpse(image, Rect{0, 0, image.width, image.height}, ventral.input_size());
  return saliency_from_input(ventral.net(), ventral.mode(), view.pixels);
}

FixationPoint fixation_target(const SaliencyMap& map) {
  if (map.values.empty()) throw ShapeError("fixation_target: empty saliency map");
  // max_element returns the first maximum, which is the smallest row-major index.
  const auto it = std::max_element(map.values.begin(), map.values.end());
  const auto i = static_cast<int>(it - map.values.begin());
  return {i % map.width, i / map.width};
}

FixationPoint map_to_image(FixationPoint cell, int map_w, int map_h, const ImageDims& dims) {
  const auto centre = [](int c, int m, int extent) {
    return std::clamp(static_cast<int>((2LL * c + 1) * extent / (2LL * m)), 0, extent - 1);
  };
  return {centre(cell.x, map_w, dims.width), centre(cell.y, map_h, dims.height)};
}

std::vector<FixationPoint> extract_fixation_targets(const VentralModel& ventral, std::span<const Scene> scenes) {
  std::vector<FixationPoint> out;
  out.reserve(scenes.size());
  const Size2 in = ventral.input_size();
  constexpr std::size_t kBatch = 256;
  for (std::size_t start = 0; start < scenes.size(); start += kBatch) {
    const std::size_t end = std::min(scenes.size(), start + kBatch);
    nn::Matrix x(static_cast<Eigen::Index>(end - start), ventral.net().input_width());
    for (std::size_t i = start; i < end; ++i) {
      flatten_into(full_view(scenes[i], in).pixels, x, static_cast<Eigen::Index>(i - start));
    }
    const auto maps = saliency_batch(ventral.net(), ventral.mode(), x, ventral.channels(), in.height, in.width);
    for (std::size_t i = start; i < end; ++i) {
      out.push_back(map_to_image(fixation_target(maps[i - start]), in.width, in.height, scenes[i].image.dims()));
    }
  }
  return out;
}

M1Model::M1Model(nn::Mlp net, Size2 input_size, ImageDims image_dims)
    : net_(std::move(net)), input_size_(input_size), image_dims_(image_dims) {
  if (net_.input_width() != input_size.width * input_size.height * image_dims.channels || net_.output_width() != 2) {
    throw ShapeError("fixation network shape does not match a " + std::to_string(input_size.width) + "x" +
                     std::to_string(input_size.height) + " input with 2 outputs");
  }
}

Image average_pool(const Image& image, Size2 size) {
  if (size.width <= 0 || size.height <= 0 || image.width % size.width != 0 || image.height % size.height != 0) {
    throw ShapeError("average_pool: " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                     " is not divisible into " + std::to_string(size.width) + "x" + std::to_string(size.height));
  }
  const int fx = image.width / size.width, fy = image.height / size.height;
  Image out(image.channels, size.height, size.width);
  const double inv = 1.0 / (fx * fy);
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < size.height; ++y) {
      for (int x = 0; x < size.width; ++x) {
        double sum = 0.0;
        for (int dy = 0; dy < fy; ++dy) {
          for (int dx = 0; dx < fx; ++dx) sum += image.at(c, y * fy + dy, x * fx + dx);
        }
        out.at(c, y, x) = static_cast<float>(sum * inv);
      }
    }
  }
  return out;
}

double normalize_coord(int x, int extent) noexcept { return (x + 0.5) / extent; }

int denormalize_coord(double u, int extent) noexcept {
  if (!(u > 0.0)) return 0;  // also catches NaN
  if (u >= 1.0) return extent - 1;
  return std::min(extent - 1, static_cast<int>(std::floor(u * extent)));
}

FixationPoint denormalize(double u, double v, const ImageDims& dims) noexcept {
  return {denormalize_coord(u, dims.width), denormalize_coord(v, dims.height)};
}

M1TrainResult train_m1(std::span<const Scene> scenes, std::span<const FixationPoint> targets, Size2 input_size,
                       const TrainConfig& cfg) {
  if (scenes.empty()) throw ConfigError("train_m1: empty dataset");
  if (targets.size() != scenes.size()) {
    throw ConfigError("train_m1: " + std::to_string(targets.size()) + " targets for " +
                      std::to_string(scenes.size()) + " scenes");
  }
  const ImageDims dims = scenes.front().image.dims();
  const auto n = static_cast<Eigen::Index>(scenes.size());
  nn::Matrix inputs(n, input_size.width * input_size.height * dims.channels);
  nn::Matrix y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = scenes[static_cast<std::size_t>(i)];
    flatten_into(average_pool(s.image, input_size), inputs, i);
    y(i, 0) = normalize_coord(targets[static_cast<std::size_t>(i)].x, dims.width);
    y(i, 1) = normalize_coord(targets[static_cast<std::size_t>(i)].y, dims.height);
  }

  nn::Mlp net(make_spec(static_cast<int>(inputs.cols()), cfg.hidden, {{"xy", 2, nn::OutputMap::Identity}}), cfg.seed);
  BatchLoss loss = [&](const nn::Matrix& out, std::span<const std::size_t> rows) {
    nn::Matrix t(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t r = 0; r < rows.size(); ++r) t.row(static_cast<Eigen::Index>(r)) = y.row(static_cast<Eigen::Index>(rows[r]));
    return nn::mse_loss(out, t);
  };
  M1TrainResult result;
  result.log = fit_supervised(net, inputs, loss, cfg, "m1");
  result.model = M1Model(std::move(net), input_size, dims);
  return result;
}

std::vector<FixationPoint> predict_fixations(const M1Model& model, std::span<const Scene> scenes) {
  nn::Matrix x(static_cast<Eigen::Index>(scenes.size()), model.net().input_width());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i].image.dims() != model.image_dims()) throw ShapeError("predict_fixation: image dims mismatch");
    flatten_into(average_pool(scenes[i].image, model.input_size()), x, static_cast<Eigen::Index>(i));
  }
  const auto out = model.net().forward(x).outputs.front();
  std::vector<FixationPoint> pts;
  pts.reserve(scenes.size());
  for (Eigen::Index i = 0; i < out.rows(); ++i) pts.push_back(denormalize(out(i, 0), out(i, 1), model.image_dims()));
  return pts;
}

FixationPoint predict_fixation(const M1Model& model, const Image& image) {
  if (image.dims() != model.image_dims()) throw ShapeError("predict_fixation: image dims mismatch");
  const auto out = model.net().forward(flatten(average_pool(image, model.input_size()))).outputs.front();
  return denormalize(out(0, 0), out(0, 1), model.image_dims());
}

double hit_rate(std::span<const FixationPoint> fixations, std::span<const Scene> scenes) {
  if (fixations.size() != scenes.size()) throw ShapeError("hit_rate: length mismatch");
  if (scenes.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) hits += contains(scenes[i].bbox_gt, fixations[i]);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(scenes.size());
}

std::string encode_fixation_targets(const FixationTargets& targets) {
  std::ostringstream os;
  os << "fovea-fixations v1 config=" << hex64(targets.config_hash) << " count=" << targets.points.size() << "\n";
  for (std::size_t i = 0; i < targets.points.size(); ++i) {
    os << i << ' ' << targets.points[i].x << ' ' << targets.points[i].y << '\n';
  }
  return os.str();
}

FixationTargets decode_fixation_targets(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string magic, version, config, count;
  if (!(is >> magic >> version >> config >> count) || magic != "fovea-fixations") {
    throw FormatError("fixation targets: bad header");
  }
  if (version != "v1") throw VersionError("fixation targets: unsupported version '" + version + "'");
  if (config.rfind("config=", 0) != 0 || count.rfind("count=", 0) != 0) {
    throw FormatError("fixation targets: malformed header fields");
  }
  FixationTargets out;
  try {
    out.config_hash = std::stoull(config.substr(7), nullptr, 16);
  } catch (const std::exception&) {
    throw FormatError("fixation targets: malformed config hash");
  }
  const auto n = detail::parse_int("count", count.substr(6));
  for (long long i = 0; i < n; ++i) {
    long long idx = -1;
    FixationPoint p;
    if (!(is >> idx >> p.x >> p.y)) throw TruncatedError("fixation targets: record " + std::to_string(i) + " missing");
    if (idx != i) throw FormatError("fixation targets: record " + std::to_string(i) + " has index " + std::to_string(idx));
    out.points.push_back(p);
  }
  std::string extra;
  if (is >> extra) throw FormatError("fixation targets: trailing data");
  return out;
}

void save_fixation_targets(const std::filesystem::path& path, const FixationTargets& targets) {
  write_text_atomic(path, encode_fixation_targets(targets));
}

FixationTargets load_fixation_targets(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_fixation_targets(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace fovea
