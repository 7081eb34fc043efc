#include "fovea/neural.hpp"

#include <atomic>
#include <cmath>
#include <numeric>

#include "fovea/binary_io.hpp"
#include "fovea/error.hpp"
#include "fovea/rng.hpp"

namespace fovea::nn {

namespace {

std::atomic<std::uint64_t> g_version{1};

std::string shape_str(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void validate(const MlpSpec& spec) {
  if (spec.widths.size() < 2) throw ConfigError("an MLP needs an input and an output width");
  for (int w : spec.widths) {
    if (w < 1) throw ConfigError("layer widths must be >= 1");
  }
  if (spec.hidden.size() != spec.widths.size() - 2) {
    throw ConfigError("need one activation per hidden layer");
  }
  if (spec.heads.empty()) throw ConfigError("an MLP needs at least one head");
  int total = 0;
  for (const auto& h : spec.heads) {
    if (h.width < 1) throw ConfigError("head '" + h.name + "' has no outputs");
    total += h.width;
  }
  if (total != spec.widths.back()) throw ConfigError("head widths must sum to the output width");
}

Mlp::Mlp(MlpSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  validate(spec_);
  std::size_t total = 0;
  for (int l = 0; l < num_layers(); ++l) {
    offsets_.push_back(total);
    const auto in = static_cast<std::size_t>(spec_.widths[static_cast<std::size_t>(l)]);
    const auto out = static_cast<std::size_t>(spec_.widths[static_cast<std::size_t>(l) + 1]);
    total += in * out + out;
  }
  params_.assign(total, 0.0);
  Rng rng = make_stream({seed, 0x6e6e});
  for (int l = 0; l < num_layers(); ++l) {
    const int in = spec_.widths[static_cast<std::size_t>(l)];
    const int out = spec_.widths[static_cast<std::size_t>(l) + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    double* w = params_.data() + weight_offset(l);
    for (std::size_t i = 0; i < static_cast<std::size_t>(in) * out; ++i) w[i] = uniform(rng, -limit, limit);
  }
  touch();
}

void Mlp::touch() noexcept { version_ = g_version.fetch_add(1, std::memory_order_relaxed); }

int Mlp::head_index(std::string_view name) const {
  for (std::size_t i = 0; i < spec_.heads.size(); ++i) {
    if (spec_.heads[i].name == name) return static_cast<int>(i);
  }
  throw ConfigError("model has no head named '" + std::string(name) + "'");
}

int Mlp::head_offset(int head) const {
  int off = 0;
  for (int i = 0; i < head; ++i) off += spec_.heads[static_cast<std::size_t>(i)].width;
  return off;
}

std::span<double> Mlp::mutable_parameters() noexcept {
  touch();
  return params_;
}

void Mlp::set_parameters(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw ShapeError("parameter count mismatch: got " + std::to_string(values.size()) + ", model has " +
                     std::to_string(params_.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
  touch();
}

Eigen::Map<const Matrix> Mlp::weight(int layer) const {
  const int in = spec_.widths[static_cast<std::size_t>(layer)];
  const int out = spec_.widths[static_cast<std::size_t>(layer) + 1];
  return {params_.data() + weight_offset(layer), out, in};
}

Eigen::Map<const Vector> Mlp::bias(int layer) const {
  const int in = spec_.widths[static_cast<std::size_t>(layer)];
  const int out = spec_.widths[static_cast<std::size_t>(layer) + 1];
  return {params_.data() + weight_offset(layer) + static_cast<std::size_t>(in) * out, out};
}

Eigen::Map<Matrix> Mlp::mutable_weight(int layer) {
  touch();
  const int in = spec_.widths[static_cast<std::size_t>(layer)];
  const int out = spec_.widths[static_cast<std::size_t>(layer) + 1];
  return {params_.data() + weight_offset(layer), out, in};
}

Eigen::Map<Vector> Mlp::mutable_bias(int layer) {
  touch();
  const int in = spec_.widths[static_cast<std::size_t>(layer)];
  const int out = spec_.widths[static_cast<std::size_t>(layer) + 1];
  return {params_.data() + weight_offset(layer) + static_cast<std::size_t>(in) * out, out};
}

ForwardCache Mlp::forward(const Matrix& batch) const {
  if (params_.empty()) throw ConfigError("forward on an uninitialized model");
  if (batch.cols() != input_width()) {
    throw ShapeError("batch width " + std::to_string(batch.cols()) + " does not match input width " +
                     std::to_string(input_width()));
  }
  ForwardCache cache;
  cache.version = version_;
  cache.act.reserve(static_cast<std::size_t>(num_layers()) + 1);
  cache.pre.reserve(static_cast<std::size_t>(num_layers()));
  cache.act.push_back(batch);

  const Eigen::Index n = batch.rows();
  for (int l = 0; l < num_layers(); ++l) {
    const auto W = weight(l);
    const auto b = bias(l);
    const Matrix& x = cache.act.back();
    Matrix z(n, W.rows());
    Matrix chunk_in;
    Matrix chunk_out(kChunkRows, W.rows());
    for (Eigen::Index r = 0; r < n; r += kChunkRows) {
      const Eigen::Index rows = std::min(kChunkRows, n - r);
      if (rows == kChunkRows) {
        chunk_out.noalias() = x.middleRows(r, rows) * W.transpose();
      } else {
        chunk_in.setZero(kChunkRows, x.cols());
        chunk_in.topRows(rows) = x.middleRows(r, rows);
        chunk_out.noalias() = chunk_in * W.transpose();
      }
      z.middleRows(r, rows) = chunk_out.topRows(rows);
    }
    z.rowwise() += b.transpose();
    const bool last = l == num_layers() - 1;
    const Activation a = last ? Activation::Identity : spec_.hidden[static_cast<std::size_t>(l)];
    Matrix out = a == Activation::Relu ? Matrix(z.cwiseMax(0.0)) : z;
    cache.pre.push_back(std::move(z));
    cache.act.push_back(std::move(out));
  }
  cache.outputs = apply_heads(spec_, cache.act.back());
  return cache;
}

Gradients Mlp::backward(const ForwardCache& cache, const Matrix& d_logits, bool want_input_grad) const {
  if (cache.version != version_) throw Error("stale forward cache: parameters changed since the forward pass");
  if (d_logits.rows() != cache.rows() || d_logits.cols() != output_width()) {
    throw ShapeError("output gradient shape " + shape_str(d_logits) + " does not match logits " +
                     shape_str(cache.logits()));
  }
  Gradients g;
  g.params.assign(params_.size(), 0.0);
  Matrix dz = d_logits;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const auto W = weight(l);
    const Matrix& x = cache.act[static_cast<std::size_t>(l)];
    Eigen::Map<Matrix> dW(g.params.data() + weight_offset(l), W.rows(), W.cols());
    Eigen::Map<Vector> db(g.params.data() + weight_offset(l) + static_cast<std::size_t>(W.size()), W.rows());
    dW.noalias() = dz.transpose() * x;
    // Plain loop: Eigen picks its reduction order from the destination's heap
    // alignment, which would make bias gradients differ by an ulp between runs.
    for (Eigen::Index j = 0; j < dz.cols(); ++j) {
      double sum = 0.0;
      for (Eigen::Index i = 0; i < dz.rows(); ++i) sum += dz(i, j);
      db(j) = sum;
    }
    if (l == 0 && !want_input_grad) break;
    Matrix dx = dz * W;
    if (l > 0 && spec_.hidden[static_cast<std::size_t>(l) - 1] == Activation::Relu) {
      dx = dx.cwiseProduct((cache.pre[static_cast<std::size_t>(l) - 1].array() > 0.0).cast<double>().matrix());
    }
    dz = std::move(dx);
  }
  if (want_input_grad) g.input = std::move(dz);
  return g;
}

std::uint64_t Mlp::fingerprint() const {
  ByteWriter w;
  for (int v : spec_.widths) w.i32(v);
  for (auto a : spec_.hidden) w.u8(static_cast<std::uint8_t>(a));
  for (const auto& h : spec_.heads) {
    w.str(h.name);
    w.i32(h.width);
    w.u8(static_cast<std::uint8_t>(h.map));
  }
  for (double p : params_) w.f64(p);
  return fnv1a64(w.buffer());
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

Matrix sigmoid(const Matrix& logits) {
  return logits.unaryExpr([](double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  });
}

std::vector<Matrix> apply_heads(const MlpSpec& spec, const Matrix& logits) {
  std::vector<Matrix> outs;
  Eigen::Index off = 0;
  for (const auto& h : spec.heads) {
    Matrix slice = logits.middleCols(off, h.width);
    switch (h.map) {
      case OutputMap::Identity: outs.push_back(std::move(slice)); break;
      case OutputMap::Sigmoid: outs.push_back(sigmoid(slice)); break;
      case OutputMap::Softmax: outs.push_back(softmax_rows(slice)); break;
    }
    off += h.width;
  }
  return outs;
}

// -------------------------------------------------------------------- losses

LossResult mse_loss(const Matrix& outputs, const Matrix& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
    throw ShapeError("mse: outputs " + shape_str(outputs) + " vs targets " + shape_str(targets));
  }
  const double n = static_cast<double>(outputs.size());
  Matrix diff = outputs - targets;
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

LossResult bce_loss(const Matrix& logits, const Matrix& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ShapeError("bce: logits " + shape_str(logits) + " vs targets " + shape_str(targets));
  }
  for (Eigen::Index i = 0; i < targets.size(); ++i) {
    const double t = targets.data()[i];
    if (t != 0.0 && t != 1.0) throw ConfigError("bce targets must be 0 or 1");
  }
  const double n = static_cast<double>(logits.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double z = logits.data()[i];
    const double t = targets.data()[i];
    total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::fabs(z)));
  }
  return {total / n, (sigmoid(logits) - targets) / n};
}

LossResult softmax_ce_loss(const Matrix& logits, std::span<const int> classes) {
  if (static_cast<Eigen::Index>(classes.size()) != logits.rows()) {
    throw ShapeError("ce: " + std::to_string(classes.size()) + " targets for " + std::to_string(logits.rows()) +
                     " rows");
  }
  const Matrix logp = log_softmax_rows(logits);
  Matrix grad = logp.array().exp().matrix();
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int c = classes[static_cast<std::size_t>(r)];
    if (c < 0 || c >= logits.cols()) throw ConfigError("ce target class out of range: " + std::to_string(c));
    total -= logp(r, c);
    grad(r, c) -= 1.0;
  }
  const double n = static_cast<double>(logits.rows());
  return {total / n, grad / n};
}

LossResult compute_loss(LossKind kind, const Matrix& logits, const Matrix& targets) {
  switch (kind) {
    case LossKind::Mse: return mse_loss(logits, targets);
    case LossKind::BcePerOutput: return bce_loss(logits, targets);
    case LossKind::CeSoftmax: {
      if (targets.cols() != 1) throw ShapeError("ce targets must be a single column of class indices");
      std::vector<int> classes(static_cast<std::size_t>(targets.rows()));
      for (Eigen::Index r = 0; r < targets.rows(); ++r) {
        const double v = targets(r, 0);
        if (v != std::floor(v)) throw ConfigError("ce targets must be integral class indices");
        classes[static_cast<std::size_t>(r)] = static_cast<int>(v);
      }
      return softmax_ce_loss(logits, classes);
    }
  }
  throw ConfigError("unknown loss kind");
}

// ---------------------------------------------------------------- optimizers

OptimizerState::OptimizerState(OptimizerConfig cfg, std::size_t n) : config(cfg), first(n, 0.0) {
  if (cfg.kind == OptimizerKind::Adam) second.assign(n, 0.0);
}

void optimizer_step(OptimizerState& st, std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) throw ShapeError("optimizer: parameter/gradient size mismatch");
  if (!all_finite(grads)) throw TrainingError("optimizer step rejected: non-finite gradient");
  if (st.first.empty() && !params.empty()) st = OptimizerState(st.config, params.size());
  if (st.first.size() != params.size()) throw ShapeError("optimizer state does not match the parameter count");

  const auto& c = st.config;
  const double wd = c.weight_decay;
  ++st.step;
  if (c.kind == OptimizerKind::Adam) {
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i] + wd * params[i];
      st.first[i] = c.beta1 * st.first[i] + (1.0 - c.beta1) * g;
      st.second[i] = c.beta2 * st.second[i] + (1.0 - c.beta2) * g * g;
      const double mhat = st.first[i] / bc1;
      const double vhat = st.second[i] / bc2;
      params[i] -= lr * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  } else {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i] + wd * params[i];
      st.first[i] = c.momentum * st.first[i] + g;
      params[i] -= lr * st.first[i];
    }
  }
}

void validate(const LrSchedule& s) {
  if (!(s.start > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(s.factor > 0.0 && s.factor < 1.0)) throw ConfigError("learning rate drop factor must lie in (0, 1)");
  if (s.floor > s.start) throw ConfigError("learning rate floor exceeds the start value");
  for (std::size_t i = 1; i < s.milestones.size(); ++i) {
    if (s.milestones[i] <= s.milestones[i - 1]) throw ConfigError("learning rate milestones must be strictly increasing");
  }
}

double lr_at(const LrSchedule& s, int epoch) {
  double lr = s.start;
  for (int m : s.milestones) {
    if (m <= epoch) lr *= s.factor;
  }
  return std::max(lr, s.floor);
}

// ------------------------------------------------------------ gradient check

std::vector<double> analytic_gradient(const Mlp& model, const Matrix& batch, const LossFn& loss) {
  const ForwardCache cache = model.forward(batch);
  const LossResult lr = loss(cache.logits());
  return model.backward(cache, lr.grad).params;
}

GradCheckReport grad_check(const Mlp& model, const LossFn& loss, const Matrix& batch, double tolerance, double h,
                           const AnalyticGradFn& analytic) {
  const std::vector<double> a = analytic(model, batch, loss);
  if (a.size() != model.parameters().size()) throw ShapeError("analytic gradient has the wrong size");

  Mlp probe = model;
  GradCheckReport rep;
  rep.per_layer_max.assign(static_cast<std::size_t>(model.num_layers()) * 2, 0.0);

  std::vector<std::size_t> boundaries;  // start offset of each [w, b] block
  {
    std::size_t off = 0;
    for (int l = 0; l < model.num_layers(); ++l) {
      const auto in = static_cast<std::size_t>(model.spec().widths[static_cast<std::size_t>(l)]);
      const auto out = static_cast<std::size_t>(model.spec().widths[static_cast<std::size_t>(l) + 1]);
      boundaries.push_back(off);
      boundaries.push_back(off + in * out);
      off += in * out + out;
    }
    boundaries.push_back(off);
  }

  std::size_t block = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    while (i >= boundaries[block + 1]) ++block;
    const double orig = model.parameters()[i];
    probe.mutable_parameters()[i] = orig + h;
    const double up = loss(probe.forward(batch).logits()).value;
    probe.mutable_parameters()[i] = orig - h;
    const double down = loss(probe.forward(batch).logits()).value;
    probe.mutable_parameters()[i] = orig;
    const double numeric = (up - down) / (2.0 * h);

    const double abs_err = std::fabs(a[i] - numeric);
    const double denom = std::max({std::fabs(a[i]), std::fabs(numeric), kGradCheckDenominatorFloor});
    const double rel = abs_err / denom;
    rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
    rep.per_layer_max[block] = std::max(rep.per_layer_max[block], rel);
    if (rel > rep.max_rel_error || !std::isfinite(rel)) {
      rep.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
      rep.worst_index = i;
    }
    ++rep.checked;
  }
  rep.passed = rep.max_rel_error < tolerance;
  return rep;
}

GradCheckReport grad_check(const Mlp& model, LossKind kind, const Matrix& batch, const Matrix& targets,
                           double tolerance) {
  LossFn fn = [kind, targets](const Matrix& logits) { return compute_loss(kind, logits, targets); };
  return grad_check(model, fn, batch, tolerance);
}

}  // namespace fovea::nn
