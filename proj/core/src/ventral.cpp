#include "fovea/ventral.hpp"

#include <cmath>

#include "fovea/error.hpp"

namespace fovea {

std::string_view to_string(SimilarityMode m) noexcept {
  return m == SimilarityMode::AttributeCosine ? "attribute_cosine" : "class_confidence";
}

std::optional<SimilarityMode> parse_similarity_mode(std::string_view s) noexcept {
  if (s == "attribute_cosine") return SimilarityMode::AttributeCosine;
  if (s == "class_confidence") return SimilarityMode::ClassConfidence;
  return std::nullopt;
}

SimilarityTarget target_of(const Scene& scene, SimilarityMode mode) {
  if (mode == SimilarityMode::AttributeCosine) return scene.attributes;
  return scene.class_id;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_similarity: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  if (a.empty()) throw ShapeError("cosine_similarity: empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double analytic_similarity(const Scene& scene, const Rect& rect, SimilarityMode mode) {
  const std::size_t K = scene.attributes.size();
  std::vector<double> visible(K, 0.0), target(K, 0.0);
  int present = 0, seen = 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (!scene.attributes[k]) continue;
    target[k] = 1.0;
    ++present;
    if (contains(rect, scene.anchors[k])) {
      visible[k] = 1.0;
      ++seen;
    }
  }
  if (mode == SimilarityMode::ClassConfidence) return present == 0 ? 0.0 : static_cast<double>(seen) / present;
  return cosine_similarity(visible, target);
}

void flatten_into(const Image& image, nn::Matrix& out, Eigen::Index row) {
  if (out.cols() != static_cast<Eigen::Index>(image.data.size())) throw ShapeError("flatten: width mismatch");
  for (std::size_t i = 0; i < image.data.size(); ++i) out(row, static_cast<Eigen::Index>(i)) = image.data[i];
}

nn::Matrix flatten(const Image& image) {
  nn::Matrix m(1, static_cast<Eigen::Index>(image.data.size()));
  flatten_into(image, m, 0);
  return m;
}

VentralModel::VentralModel(nn::Mlp net, SimilarityMode mode, Size2 input_size, int channels)
    : net_(std::move(net)), mode_(mode), input_size_(input_size), channels_(channels) {
  if (net_.input_width() != input_size.width * input_size.height * channels) {
    throw ShapeError("ventral network input width does not match the glimpse size");
  }
  const auto map = net_.head(0).map;
  if ((mode == SimilarityMode::AttributeCosine && map != nn::OutputMap::Sigmoid) ||
      (mode == SimilarityMode::ClassConfidence && map != nn::OutputMap::Softmax)) {
    throw ConfigError("ventral head output map does not match the similarity mode");
  }
}

nn::Mlp& VentralModel::mutable_net() {
  if (frozen_) throw Error("ventral model is frozen");
  return net_;
}

namespace {

void check_patch(const VentralModel& model, const Patch& p) {
  if (p.pixels.width != model.input_size().width || p.pixels.height != model.input_size().height ||
      p.pixels.channels != model.channels()) {
    throw ShapeError("patch " + std::to_string(p.pixels.width) + "x" + std::to_string(p.pixels.height) +
                     " does not match the ventral input size");
  }
}

}  // namespace

nn::Matrix predict_batch(const VentralModel& model, std::span<const Patch> patches) {
  nn::Matrix x(static_cast<Eigen::Index>(patches.size()), model.net().input_width());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    check_patch(model, patches[i]);
    flatten_into(patches[i].pixels, x, static_cast<Eigen::Index>(i));
  }
  return model.net().forward(x).outputs.front();
}

std::vector<double> predict(const VentralModel& model, const Patch& patch) {
  const nn::Matrix out = predict_batch(model, std::span(&patch, 1));
  return {out.data(), out.data() + out.size()};
}

double similarity_from_prediction(std::span<const double> prediction, SimilarityMode mode,
                                  const SimilarityTarget& target) {
  if (mode == SimilarityMode::AttributeCosine) {
    const auto* bits = std::get_if<std::vector<std::uint8_t>>(&target);
    if (!bits) throw ConfigError("attribute_cosine similarity needs an attribute-vector target");
    std::vector<double> t(bits->begin(), bits->end());
    return cosine_similarity(prediction, t);
  }
  const auto* cls = std::get_if<int>(&target);
  if (!cls) throw ConfigError("class_confidence similarity needs a class-index target");
  if (*cls < 0 || *cls >= static_cast<int>(prediction.size())) throw ConfigError("target class out of range");
  return prediction[static_cast<std::size_t>(*cls)];
}

double learned_similarity(const VentralModel& model, const Patch& patch, SimilarityMode mode,
                          const SimilarityTarget& target) {
  if (mode != model.mode()) throw ConfigError("similarity mode does not match the ventral model's head");
  return similarity_from_prediction(predict(model, patch), mode, target);
}

Patch full_view(const Scene& scene, Size2 size) {
  return extract_glimpse(scene.image, Rect{0, 0, scene.image.width, scene.image.height}, size);
}

VentralTrainResult train_ventral(std::span<const Scene> scenes, SimilarityMode mode, Size2 input_size,
                                 const TrainConfig& cfg) {
  if (scenes.empty()) throw ConfigError("train_ventral: empty dataset");
  const int channels = scenes.front().image.channels;
  const int K = static_cast<int>(scenes.front().attributes.size());
  const auto n = static_cast<Eigen::Index>(scenes.size());

  nn::Matrix inputs(n, input_size.width * input_size.height * channels);
  for (Eigen::Index i = 0; i < n; ++i) flatten_into(full_view(scenes[static_cast<std::size_t>(i)], input_size).pixels, inputs, i);

  int out_width = K;
  nn::OutputMap map = nn::OutputMap::Sigmoid;
  if (mode == SimilarityMode::ClassConfidence) {
    out_width = 0;
    for (const auto& s : scenes) out_width = std::max(out_width, s.class_id + 1);
    map = nn::OutputMap::Softmax;
  }
  nn::Mlp net(make_spec(static_cast<int>(inputs.cols()), cfg.hidden, {{"label", out_width, map}}), cfg.seed);

  nn::Matrix attr_targets;
  std::vector<int> classes;
  if (mode == SimilarityMode::AttributeCosine) {
    attr_targets.resize(n, K);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int k = 0; k < K; ++k) attr_targets(i, k) = scenes[static_cast<std::size_t>(i)].attributes[static_cast<std::size_t>(k)];
    }
  } else {
    for (const auto& s : scenes) classes.push_back(s.class_id);
  }

  BatchLoss loss = [&](const nn::Matrix& logits, std::span<const std::size_t> rows) {
    if (mode == SimilarityMode::AttributeCosine) {
      nn::Matrix t(static_cast<Eigen::Index>(rows.size()), K);
      for (std::size_t r = 0; r < rows.size(); ++r) t.row(static_cast<Eigen::Index>(r)) = attr_targets.row(static_cast<Eigen::Index>(rows[r]));
      return nn::bce_loss(logits, t);
    }
    std::vector<int> c(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) c[r] = classes[rows[r]];
    return nn::softmax_ce_loss(logits, c);
  };

  VentralTrainResult result;
  result.log = fit_supervised(net, inputs, loss, cfg, "ventral");
  result.model = VentralModel(std::move(net), mode, input_size, channels);
  result.model.freeze();
  return result;
}

double attribute_accuracy_on(const VentralModel& model, std::span<const Scene> scenes, double threshold) {
  if (model.mode() != SimilarityMode::AttributeCosine) throw ConfigError("attribute accuracy needs an attribute model");
  std::vector<Patch> patches;
  for (const auto& s : scenes) patches.push_back(full_view(s, model.input_size()));
  const nn::Matrix p = predict_batch(model, patches);
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    for (std::size_t k = 0; k < scenes[i].attributes.size(); ++k) {
      const bool pos = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) >= threshold;
      correct += pos == (scenes[i].attributes[k] == 1);
      ++total;
    }
  }
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace fovea
