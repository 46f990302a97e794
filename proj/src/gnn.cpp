#include "ropf/gnn.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "json_util.hpp"
#include "ropf/random.hpp"

namespace ropf {

using kernels::Backend;

std::string_view to_string(HeadKind kind) { return kind == HeadKind::Line ? "line" : "gen"; }
std::string_view to_string(LossKind kind) { return kind == LossKind::Bce ? "bce" : "mse"; }

HeadKind parse_head_kind(std::string_view text) {
  if (text == "line") return HeadKind::Line;
  if (text == "gen") return HeadKind::Gen;
  throw std::invalid_argument("unknown head kind '" + std::string(text) + "'");
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "bce") return LossKind::Bce;
  if (text == "mse") return LossKind::Mse;
  throw std::invalid_argument("unknown loss '" + std::string(text) + "'");
}

std::vector<std::span<double>> Parameters::blocks() {
  std::vector<std::span<double>> out;
  for (auto& w : weights) out.emplace_back(w.values());
  for (auto& b : biases) out.emplace_back(b);
  out.emplace_back(head_weights);
  out.emplace_back(&head_bias, 1);
  return out;
}

std::size_t Parameters::count() const {
  std::size_t n = head_weights.size() + 1;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

CaseSignature signature_of(const Network& net) {
  return {net.name, net.n_buses(), net.n_generators(), net.n_lines()};
}

namespace {

using Clock = std::chrono::steady_clock;

// Samples processed per chunk; gradients accumulate chunk by chunk in order.
constexpr std::size_t kChunkSamples = 128;

double sigmoid(double z) {
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

Parameters zeros_like(const Parameters& p) {
  Parameters z;
  for (const auto& w : p.weights) z.weights.emplace_back(w.rows(), w.cols());
  for (const auto& b : p.biases) z.biases.emplace_back(b.size(), 0.0);
  z.head_weights.assign(p.head_weights.size(), 0.0);
  z.head_bias = 0.0;
  return z;
}

std::size_t head_width(const Architecture& arch, HeadKind kind) {
  return kind == HeadKind::Line ? 2 * arch.hidden_dim : arch.hidden_dim;
}

Matrix standardize(const GnnModel& model, const Matrix& x_raw) {
  if (x_raw.cols() != model.arch.in_dim)
    throw std::invalid_argument("feature matrix has " + std::to_string(x_raw.cols()) + " columns, model expects " +
                                std::to_string(model.arch.in_dim));
  Matrix x(x_raw.rows(), x_raw.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = (x_raw(r, c) - model.feature_mean[c]) / model.feature_std[c];
  return x;
}

// h[0] is the standardized input; h[l + 1] = relu(A_hat h[l] W_l + b_l).
void forward_layers(const GnnModel& model, const CsrMatrix& adj, Matrix x_std, Backend backend,
                    std::vector<Matrix>& h) {
  h.clear();
  h.push_back(std::move(x_std));
  Matrix p;
  for (std::size_t l = 0; l < model.arch.n_layers; ++l) {
    kernels::matmul(backend, h[l], model.params.weights[l], p);
    Matrix z;
    kernels::block_spmm(backend, adj, p, z);
    const auto& b = model.params.biases[l];
    const std::size_t d = z.cols();
    double* zd = z.data();
    for (std::size_t r = 0; r < z.rows(); ++r)
      for (std::size_t j = 0; j < d; ++j) {
        const double v = zd[r * d + j] + b[j];
        zd[r * d + j] = v > 0.0 ? v : 0.0;
      }
    h.push_back(std::move(z));
  }
}

void head_forward(const GnnModel& model, const Matrix& h, std::size_t n_nodes, const HeadTargets& targets,
                  Matrix& logits) {
  const std::size_t samples = h.rows() / n_nodes;
  const std::size_t hid = h.cols();
  const std::size_t t_count = targets.size();
  logits.resize(samples, t_count);
  const auto& w = model.params.head_weights;
  const long long s_count = static_cast<long long>(samples);
#pragma omp parallel for schedule(static)
  for (long long ss = 0; ss < s_count; ++ss) {
    const auto s = static_cast<std::size_t>(ss);
    const std::size_t off = s * n_nodes;
    for (std::size_t k = 0; k < t_count; ++k) {
      double z = model.params.head_bias;
      if (targets.kind == HeadKind::Line) {
        const double* hf = h.data() + (off + targets.endpoints[k].first) * hid;
        const double* ht = h.data() + (off + targets.endpoints[k].second) * hid;
        for (std::size_t j = 0; j < hid; ++j) z += w[j] * (hf[j] + ht[j]) + w[hid + j] * std::abs(hf[j] - ht[j]);
      } else {
        const double* hv = h.data() + (off + targets.nodes[k]) * hid;
        for (std::size_t j = 0; j < hid; ++j) z += w[j] * hv[j];
      }
      logits(s, k) = z;
    }
  }
}

void head_backward(const GnnModel& model, const Matrix& h, std::size_t n_nodes, const HeadTargets& targets,
                   const Matrix& dlogits, Matrix& dh, Parameters& grad, Backend backend) {
  const std::size_t samples = h.rows() / n_nodes;
  const std::size_t hid = h.cols();
  const std::size_t width = head_width(model.arch, targets.kind);
  const auto& w = model.params.head_weights;
  dh.resize(h.rows(), hid);
  // Per-sample partial head gradients, reduced below in sample order.
  Matrix partial(samples, width + 1);
  const long long s_count = static_cast<long long>(samples);
#pragma omp parallel for schedule(static)
  for (long long ss = 0; ss < s_count; ++ss) {
    const auto s = static_cast<std::size_t>(ss);
    const std::size_t off = s * n_nodes;
    double* part = partial.data() + s * (width + 1);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const double dz = dlogits(s, k);
      part[width] += dz;
      if (targets.kind == HeadKind::Line) {
        const std::size_t f = off + targets.endpoints[k].first;
        const std::size_t t = off + targets.endpoints[k].second;
        const double* hf = h.data() + f * hid;
        const double* ht = h.data() + t * hid;
        double* dhf = dh.data() + f * hid;
        double* dht = dh.data() + t * hid;
        for (std::size_t j = 0; j < hid; ++j) {
          const double diff = hf[j] - ht[j];
          const double sg = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          part[j] += dz * (hf[j] + ht[j]);
          part[hid + j] += dz * std::abs(diff);
          dhf[j] += dz * (w[j] + w[hid + j] * sg);
          dht[j] += dz * (w[j] - w[hid + j] * sg);
        }
      } else {
        const std::size_t v = off + targets.nodes[k];
        const double* hv = h.data() + v * hid;
        double* dhv = dh.data() + v * hid;
        for (std::size_t j = 0; j < hid; ++j) {
          part[j] += dz * hv[j];
          dhv[j] += dz * w[j];
        }
      }
    }
  }
  std::vector<double> sums;
  kernels::column_sums(backend, partial, sums);
  for (std::size_t j = 0; j < width; ++j) grad.head_weights[j] += sums[j];
  grad.head_bias += sums[width];
}

void layers_backward(const GnnModel& model, const CsrMatrix& adj, const std::vector<Matrix>& h, Matrix dh,
                     Parameters& grad, Backend backend) {
  Matrix dp, dw;
  std::vector<double> db;
  for (std::size_t l = model.arch.n_layers; l-- > 0;) {
    const Matrix& out = h[l + 1];
    double* d = dh.data();
    const double* o = out.data();
    for (std::size_t i = 0; i < dh.size(); ++i)
      if (!(o[i] > 0.0)) d[i] = 0.0;
    kernels::column_sums(backend, dh, db);
    for (std::size_t j = 0; j < db.size(); ++j) grad.biases[l][j] += db[j];
    kernels::block_spmm(backend, adj, dh, dp);  // A_hat is symmetric
    kernels::matmul_tn(backend, h[l], dp, dw);
    auto& gw = grad.weights[l].values();
    for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += dw.values()[i];
    if (l > 0) kernels::matmul_nt(backend, dp, model.params.weights[l], dh);
  }
}

struct PassStats {
  double loss_sum = 0.0;
  double mse_sum = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;
};

// Adds the scaled loss gradient for one block of logits; returns the loss sum.
double loss_sum_and_grad(const Matrix& logits, const Matrix& labels, const LossSpec& spec, double scale,
                         Matrix* dlogits) {
  if (logits.rows() != labels.rows() || logits.cols() != labels.cols())
    throw std::invalid_argument("labels do not match the prediction shape");
  if (dlogits) dlogits->resize(logits.rows(), logits.cols());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits.values()[i];
    const double y = labels.values()[i];
    double l, g;
    if (spec.kind == LossKind::Bce) {
      l = spec.pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
      const double p = sigmoid(z);
      g = -spec.pos_weight * y * (1.0 - p) + (1.0 - y) * p;
    } else {
      const double p = sigmoid(z);
      const double w = y > 0.5 ? spec.pos_weight : 1.0;
      l = w * (p - y) * (p - y);
      g = 2.0 * w * (p - y) * p * (1.0 - p);
    }
    sum += l;
    if (dlogits) dlogits->values()[i] = g * scale;
  }
  return sum;
}

Matrix rows_of(const Matrix& m, std::size_t first, std::size_t count) {
  Matrix out(count, m.cols());
  std::copy_n(m.data() + first * m.cols(), count * m.cols(), out.data());
  return out;
}

// One pass over a stacked batch in chunks. With a gradient, the result is the
// gradient of the mean loss over every (sample, target) entry.
PassStats run_pass(const GnnModel& model, const CsrMatrix& adj, const Matrix& x_std, const Matrix& labels,
                   const HeadTargets& targets, const LossSpec& spec, double threshold, Parameters* grad,
                   Backend backend) {
  PassStats stats;
  const std::size_t n_nodes = adj.n;
  const std::size_t samples = labels.rows();
  const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(1, labels.size()));
  std::vector<Matrix> h;
  Matrix logits, dlogits, dh;
  for (std::size_t first = 0; first < samples; first += kChunkSamples) {
    const std::size_t count = std::min(kChunkSamples, samples - first);
    forward_layers(model, adj, rows_of(x_std, first * n_nodes, count * n_nodes), backend, h);
    head_forward(model, h.back(), n_nodes, targets, logits);
    const Matrix y = rows_of(labels, first, count);
    stats.loss_sum += loss_sum_and_grad(logits, y, spec, scale, grad ? &dlogits : nullptr);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double p = sigmoid(logits.values()[i]);
      const double yi = y.values()[i];
      stats.mse_sum += (p - yi) * (p - yi);
      stats.correct += ((p >= threshold ? 1.0 : 0.0) == yi) ? 1 : 0;
    }
    stats.count += logits.size();
    if (grad) {
      head_backward(model, h.back(), n_nodes, targets, dlogits, dh, *grad, backend);
      layers_backward(model, adj, h, std::move(dh), *grad, backend);
      dh = Matrix();
    }
  }
  return stats;
}

// Probabilities for every (sample, target) of a stacked raw batch.
Matrix batch_probabilities(const GnnModel& model, const CsrMatrix& adj, const Matrix& x_raw,
                           const HeadTargets& targets, Backend backend) {
  const std::size_t samples = x_raw.rows() / adj.n;
  Matrix probs(samples, targets.size());
  const Matrix x_std = standardize(model, x_raw);
  std::vector<Matrix> h;
  Matrix logits;
  for (std::size_t first = 0; first < samples; first += kChunkSamples) {
    const std::size_t count = std::min(kChunkSamples, samples - first);
    forward_layers(model, adj, rows_of(x_std, first * adj.n, count * adj.n), backend, h);
    head_forward(model, h.back(), adj.n, targets, logits);
    for (std::size_t i = 0; i < logits.size(); ++i) probs.values()[first * targets.size() + i] = sigmoid(logits.values()[i]);
  }
  return probs;
}

void append_rows(Matrix& dst, const Matrix& src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  Matrix out(dst.rows() + src.rows(), dst.cols());
  std::copy_n(dst.data(), dst.size(), out.data());
  std::copy_n(src.data(), src.size(), out.data() + dst.size());
  dst = std::move(out);
}

}  // namespace

GnnModel init_model(const Architecture& arch, HeadKind head, std::uint64_t seed) {
  if (arch.n_layers == 0 || arch.hidden_dim == 0 || arch.in_dim == 0)
    throw std::invalid_argument("architecture dimensions must be positive");
  GnnModel m;
  m.arch = arch;
  m.head = head;
  m.seed = seed;
  Rng rng(derive_seed(seed, 0x6e6eULL));
  std::size_t in = arch.in_dim;
  for (std::size_t l = 0; l < arch.n_layers; ++l) {
    Matrix w(in, arch.hidden_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    m.params.weights.push_back(std::move(w));
    m.params.biases.emplace_back(arch.hidden_dim, 0.0);
    in = arch.hidden_dim;
  }
  const std::size_t width = head_width(arch, head);
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  m.params.head_weights.resize(width);
  for (double& v : m.params.head_weights) v = rng.uniform(-bound, bound);
  m.feature_mean.assign(arch.in_dim, 0.0);
  m.feature_std.assign(arch.in_dim, 1.0);
  return m;
}

HeadTargets line_targets(const ExpandedGraph& graph, const Network& net, const GridIndex& index) {
  HeadTargets t;
  t.kind = HeadKind::Line;
  for (std::size_t k = 0; k < net.n_lines(); ++k)
    t.endpoints.emplace_back(graph.real_node_of_bus[index.line_from[k]], graph.real_node_of_bus[index.line_to[k]]);
  return t;
}

HeadTargets gen_targets(const ExpandedGraph& graph) {
  HeadTargets t;
  t.kind = HeadKind::Gen;
  t.nodes = graph.virtual_node_of_gen;
  return t;
}

Matrix forward(const GnnModel& model, const NormalizedAdjacency& adj, const Matrix& x_raw, Backend backend) {
  if (x_raw.rows() != adj.dense.rows()) throw std::invalid_argument("feature rows do not match the graph");
  std::vector<Matrix> h;
  forward_layers(model, to_csr(adj.dense), standardize(model, x_raw), backend, h);
  return std::move(h.back());
}

std::vector<double> predict_lines(const GnnModel& model, const ExpandedGraph& graph, const NormalizedAdjacency& adj,
                                  const Matrix& x_raw, const Network& net, const GridIndex& index) {
  if (model.head != HeadKind::Line) throw std::invalid_argument("predict_lines needs a line model");
  const Matrix h = forward(model, adj, x_raw);
  Matrix logits;
  head_forward(model, h, graph.n_nodes, line_targets(graph, net, index), logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(logits.values()[i]);
  return p;
}

std::vector<double> predict_max_gens(const GnnModel& model, const ExpandedGraph& graph,
                                     const NormalizedAdjacency& adj, const Matrix& x_raw,
                                     bool allow_missing_congestion) {
  if (model.head != HeadKind::Gen) throw std::invalid_argument("predict_max_gens needs a generator model");
  if (!allow_missing_congestion) {
    bool any = false;
    for (std::size_t r = 0; r < x_raw.rows() && !any; ++r) any = x_raw(r, kCongMean) != 0.0 || x_raw(r, kCongMax) != 0.0;
    if (!any) throw std::invalid_argument("generator model input carries no line-congestion features");
  }
  const Matrix h = forward(model, adj, x_raw);
  Matrix logits;
  head_forward(model, h, graph.n_nodes, gen_targets(graph), logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(logits.values()[i]);
  return p;
}

std::vector<int> classify(std::span<const double> probabilities, double threshold) {
  std::vector<int> out;
  out.reserve(probabilities.size());
  for (double p : probabilities) out.push_back(p >= threshold ? 1 : 0);
  return out;
}

double loss_and_grad(const Matrix& logits, const Matrix& labels, const LossSpec& spec, Matrix* dlogits) {
  const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(1, logits.size()));
  return loss_sum_and_grad(logits, labels, spec, scale, dlogits) * scale;
}

double evaluate_loss(const GnnModel& model, const CsrMatrix& adj, const Matrix& x_raw, const HeadTargets& targets,
                     const Matrix& labels, const LossSpec& spec, Parameters* gradient, Backend backend) {
  if (gradient) *gradient = zeros_like(model.params);
  const PassStats stats =
      run_pass(model, adj, standardize(model, x_raw), labels, targets, spec, model.decision_threshold, gradient, backend);
  return stats.loss_sum / static_cast<double>(std::max<std::size_t>(1, stats.count));
}

double grad_check(const GnnModel& model, const NormalizedAdjacency& adj, const Matrix& x_raw,
                  const HeadTargets& targets, const std::vector<double>& labels, const LossSpec& spec, double step) {
  const CsrMatrix csr = to_csr(adj.dense);
  Matrix y(1, labels.size());
  std::copy(labels.begin(), labels.end(), y.data());
  Parameters analytic;
  evaluate_loss(model, csr, x_raw, targets, y, spec, &analytic, Backend::Serial);

  GnnModel probe = model;
  auto probe_blocks = probe.params.blocks();
  auto grad_blocks = analytic.blocks();
  double worst = 0.0;
  for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
    for (std::size_t i = 0; i < probe_blocks[b].size(); ++i) {
      double& v = probe_blocks[b][i];
      const double saved = v;
      const double a = grad_blocks[b][i];
      auto error_at = [&](double h) {
        v = saved + h;
        const double up = evaluate_loss(probe, csr, x_raw, targets, y, spec, nullptr, Backend::Serial);
        v = saved - h;
        const double down = evaluate_loss(probe, csr, x_raw, targets, y, spec, nullptr, Backend::Serial);
        v = saved;
        const double numeric = (up - down) / (2.0 * h);
        return std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      };
      double err = error_at(step);
      // A relu kink inside [v - step, v + step] spoils the difference quotient.
      if (err > 1e-6) err = std::min(err, error_at(step * 1e-2));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

TrainResult train(const TrainConfig& config, const Dataset& dataset, const GnnModel* line_model) {
  const Network& net = dataset.network;
  const GridIndex index = build_index(net);
  const ExpandedGraph graph = expand(net, index);
  const NormalizedAdjacency adj = normalize_adjacency(graph);
  const CsrMatrix csr = to_csr(adj.dense);
  const Backend backend = kernels::default_backend();
  const bool gen_stage = config.stage == HeadKind::Gen;
  const HeadTargets targets = gen_stage ? gen_targets(graph) : line_targets(graph, net, index);

  if (config.epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (!(config.decision_threshold > 0.0 && config.decision_threshold < 1.0))
    throw std::invalid_argument("decision threshold must lie in (0, 1)");
  if (gen_stage && !config.teacher_forcing) {
    if (!line_model) throw TrainingError("generator stage needs a trained line model");
    check_model_matches(*line_model, net, HeadKind::Line);
  }

  std::vector<const Sample*> train_set, val_set;
  for (const Sample& s : dataset.samples) {
    if (s.split == Split::Train) train_set.push_back(&s);
    if (s.split == Split::Val) val_set.push_back(&s);
  }
  if (train_set.empty()) throw TrainingError("dataset has no training samples");

  // Stage-1 predictions for the whole split, computed in one batch.
  auto raw_stack = [&](const std::vector<const Sample*>& set) {
    Matrix x;
    for (const Sample* s : set) append_rows(x, build_features(graph, s->loads, net, index));
    if (!gen_stage || set.empty()) return x;
    Matrix line_probs;
    if (!config.teacher_forcing) line_probs = batch_probabilities(*line_model, csr, x, line_targets(graph, net, index), backend);
    Matrix stacked;
    for (std::size_t i = 0; i < set.size(); ++i) {
      std::vector<double> probs(net.n_lines());
      for (std::size_t k = 0; k < net.n_lines(); ++k)
        probs[k] = config.teacher_forcing ? set[i]->line_labels[k] : line_probs(i, k);
      append_rows(stacked, build_features(graph, set[i]->loads, net, index, probs));
    }
    return stacked;
  };
  auto label_matrix = [&](const std::vector<const Sample*>& set) {
    Matrix y(set.size(), targets.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto& src = gen_stage ? set[i]->gen_labels : set[i]->line_labels;
      for (std::size_t k = 0; k < targets.size(); ++k) y(i, k) = src[k];
    }
    return y;
  };

  const Matrix x_train_raw = raw_stack(train_set);
  const Matrix x_val_raw = raw_stack(val_set);
  const Matrix y_train = label_matrix(train_set);
  const Matrix y_val = label_matrix(val_set);

  double positives = 0.0;
  for (double v : y_train.values()) positives += v;
  const double negatives = static_cast<double>(y_train.size()) - positives;
  if (positives == 0.0)
    throw TrainingError(std::string("no positive ") + (gen_stage ? "generator" : "line") +
                        " labels in the training split");

  GnnModel model = init_model({kFeatureCount, config.hidden_dim, config.n_layers}, config.stage, config.seed);
  model.config = config;
  model.decision_threshold = config.decision_threshold;
  model.case_signature = signature_of(net);
  model.pos_weight = negatives > 0.0 ? std::min(negatives / positives, config.pos_weight_cap) : 1.0;

  const double rows = static_cast<double>(x_train_raw.rows());
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x_train_raw.rows(); ++r) mean += x_train_raw(r, c);
    mean /= rows;
    double var = 0.0;
    for (std::size_t r = 0; r < x_train_raw.rows(); ++r) var += (x_train_raw(r, c) - mean) * (x_train_raw(r, c) - mean);
    const double sd = std::sqrt(var / rows);
    model.feature_mean[c] = mean;
    model.feature_std[c] = sd > 1e-12 ? sd : 1.0;
  }

  const Matrix x_train = standardize(model, x_train_raw);
  const Matrix x_val = val_set.empty() ? Matrix() : standardize(model, x_val_raw);
  const LossSpec spec{config.loss, model.pos_weight};

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  Parameters m1 = zeros_like(model.params);
  Parameters m2 = zeros_like(model.params);

  TrainResult result;
  result.history.backend = std::string(kernels::to_string(backend));
  result.history.threads = kernels::max_threads();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Parameters grad = zeros_like(model.params);
    const PassStats tr =
        run_pass(model, csr, x_train, y_train, targets, spec, config.decision_threshold, &grad, backend);

    const double t = epoch + 1.0;
    const double c1 = 1.0 - std::pow(kBeta1, t);
    const double c2 = 1.0 - std::pow(kBeta2, t);
    auto pb = model.params.blocks();
    auto gb = grad.blocks();
    auto mb = m1.blocks();
    auto vb = m2.blocks();
    for (std::size_t b = 0; b < pb.size(); ++b) {
      for (std::size_t i = 0; i < pb[b].size(); ++i) {
        const double g = gb[b][i];
        mb[b][i] = kBeta1 * mb[b][i] + (1.0 - kBeta1) * g;
        vb[b][i] = kBeta2 * vb[b][i] + (1.0 - kBeta2) * g * g;
        pb[b][i] -= config.learning_rate * (mb[b][i] / c1) / (std::sqrt(vb[b][i] / c2) + kEps);
      }
    }

    EpochRecord rec;
    const double n_tr = static_cast<double>(tr.count);
    rec.train_loss = tr.loss_sum / n_tr;
    rec.train_accuracy = static_cast<double>(tr.correct) / n_tr;
    rec.train_mse = tr.mse_sum / n_tr;
    if (!val_set.empty()) {
      const PassStats va =
          run_pass(model, csr, x_val, y_val, targets, spec, config.decision_threshold, nullptr, backend);
      const double n_va = static_cast<double>(va.count);
      rec.val_loss = va.loss_sum / n_va;
      rec.val_accuracy = static_cast<double>(va.correct) / n_va;
      rec.val_mse = va.mse_sum / n_va;
    }
    result.history.epochs.push_back(rec);
  }
  result.model = std::move(model);
  return result;
}

void check_model_matches(const GnnModel& model, const Network& net, HeadKind expected) {
  if (model.head != expected)
    throw std::invalid_argument("expected a " + std::string(to_string(expected)) + " model, got a " +
                                std::string(to_string(model.head)) + " model");
  if (model.arch.in_dim != kFeatureCount)
    throw std::invalid_argument("model expects " + std::to_string(model.arch.in_dim) + " features, case provides " +
                                std::to_string(kFeatureCount));
  if (!(model.case_signature == signature_of(net)))
    throw std::invalid_argument("model was trained on case '" + model.case_signature.name + "' (" +
                                std::to_string(model.case_signature.n_buses) + " buses), not '" + net.name + "'");
}

HierarchicalPredictor::HierarchicalPredictor(const Network& net, const GnnModel& line_model, const GnnModel* gen_model)
    : net_(net), index_(build_index(net)), graph_(expand(net, index_)), adj_(normalize_adjacency(graph_)),
      line_model_(line_model), gen_model_(gen_model) {
  check_model_matches(line_model, net, HeadKind::Line);
  if (gen_model) check_model_matches(*gen_model, net, HeadKind::Gen);
}

Prediction HierarchicalPredictor::predict(const LoadVector& loads) const {
  const auto t0 = Clock::now();
  Prediction out;
  const Matrix x1 = build_features(graph_, loads, net_, index_);
  out.line_probs = predict_lines(line_model_, graph_, adj_, x1, net_, index_);
  out.line_labels = classify(out.line_probs, line_model_.decision_threshold);
  if (gen_model_) {
    const Matrix x2 = build_features(graph_, loads, net_, index_, out.line_probs);
    out.gen_probs = predict_max_gens(*gen_model_, graph_, adj_, x2, /*allow_missing_congestion=*/true);
    out.gen_labels = classify(out.gen_probs, gen_model_->decision_threshold);
  }
  out.inference_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

namespace {

using detail::FormatError;
using detail::Json;
using detail::OrderedJson;

OrderedJson config_to_json(const TrainConfig& c) {
  OrderedJson j;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["hidden_dim"] = c.hidden_dim;
  j["n_layers"] = c.n_layers;
  j["pos_weight_cap"] = c.pos_weight_cap;
  j["seed"] = c.seed;
  j["stage"] = to_string(c.stage);
  j["loss"] = to_string(c.loss);
  j["teacher_forcing"] = c.teacher_forcing;
  j["decision_threshold"] = c.decision_threshold;
  return j;
}

TrainConfig config_from_json(const Json& j) {
  TrainConfig c;
  c.epochs = static_cast<int>(detail::integer(j, "epochs", "config"));
  c.learning_rate = detail::number(j, "learning_rate", "config");
  c.hidden_dim = static_cast<std::size_t>(detail::integer(j, "hidden_dim", "config"));
  c.n_layers = static_cast<std::size_t>(detail::integer(j, "n_layers", "config"));
  c.pos_weight_cap = detail::number(j, "pos_weight_cap", "config");
  c.seed = detail::field(j, "seed", "config").get<std::uint64_t>();
  c.stage = parse_head_kind(detail::string(j, "stage", "config"));
  c.loss = parse_loss_kind(detail::string(j, "loss", "config"));
  c.teacher_forcing = detail::boolean(j, "teacher_forcing", "config");
  c.decision_threshold = detail::number(j, "decision_threshold", "config");
  return c;
}

}  // namespace

std::string serialize_model(const GnnModel& m) {
  OrderedJson j;
  j["format"] = "ropf-gnn";
  j["version"] = kModelFormatVersion;
  j["head"] = to_string(m.head);
  j["arch"] = {{"in_dim", m.arch.in_dim}, {"hidden_dim", m.arch.hidden_dim}, {"n_layers", m.arch.n_layers}};
  j["case"] = {{"name", m.case_signature.name},
               {"n_buses", m.case_signature.n_buses},
               {"n_generators", m.case_signature.n_generators},
               {"n_lines", m.case_signature.n_lines}};
  OrderedJson layers = OrderedJson::array();
  for (std::size_t l = 0; l < m.params.weights.size(); ++l) {
    OrderedJson layer;
    layer["rows"] = m.params.weights[l].rows();
    layer["cols"] = m.params.weights[l].cols();
    layer["weights"] = m.params.weights[l].values();
    layer["bias"] = m.params.biases[l];
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  j["head_weights"] = m.params.head_weights;
  j["head_bias"] = m.params.head_bias;
  j["feature_norm"] = {{"mean", m.feature_mean}, {"std", m.feature_std}};
  j["decision_threshold"] = m.decision_threshold;
  j["pos_weight"] = m.pos_weight;
  j["seed"] = m.seed;
  j["config"] = config_to_json(m.config);
  return j.dump() + "\n";
}

GnnModel parse_model(std::string_view text) {
  GnnModel m;
  try {
    const Json j = Json::parse(text);
    detail::require_object(j, "model");
    if (detail::string(j, "format", "model") != "ropf-gnn") throw FormatError("model: not a GNN model file");
    if (detail::integer(j, "version", "model") != kModelFormatVersion) throw FormatError("model: unsupported version");
    m.head = parse_head_kind(detail::string(j, "head", "model"));
    const Json& arch = detail::field(j, "arch", "model");
    m.arch.in_dim = static_cast<std::size_t>(detail::integer(arch, "in_dim", "arch"));
    m.arch.hidden_dim = static_cast<std::size_t>(detail::integer(arch, "hidden_dim", "arch"));
    m.arch.n_layers = static_cast<std::size_t>(detail::integer(arch, "n_layers", "arch"));
    const Json& cs = detail::field(j, "case", "model");
    m.case_signature.name = detail::string(cs, "name", "case");
    m.case_signature.n_buses = static_cast<std::size_t>(detail::integer(cs, "n_buses", "case"));
    m.case_signature.n_generators = static_cast<std::size_t>(detail::integer(cs, "n_generators", "case"));
    m.case_signature.n_lines = static_cast<std::size_t>(detail::integer(cs, "n_lines", "case"));

    std::size_t expect_in = m.arch.in_dim;
    for (const Json& layer : detail::array(j, "layers", "model")) {
      const auto rows = static_cast<std::size_t>(detail::integer(layer, "rows", "layer"));
      const auto cols = static_cast<std::size_t>(detail::integer(layer, "cols", "layer"));
      if (rows != expect_in || cols != m.arch.hidden_dim) throw FormatError("layer dimensions do not chain");
      Matrix w(rows, cols);
      w.values() = detail::vector_of<double>(layer, "weights", "layer");
      if (w.values().size() != rows * cols) throw FormatError("layer weight count mismatch");
      auto bias = detail::vector_of<double>(layer, "bias", "layer");
      if (bias.size() != cols) throw FormatError("layer bias length mismatch");
      m.params.weights.push_back(std::move(w));
      m.params.biases.push_back(std::move(bias));
      expect_in = cols;
    }
    if (m.params.weights.size() != m.arch.n_layers) throw FormatError("layer count does not match arch");
    m.params.head_weights = detail::vector_of<double>(j, "head_weights", "model");
    if (m.params.head_weights.size() != head_width(m.arch, m.head)) throw FormatError("head width mismatch");
    m.params.head_bias = detail::number(j, "head_bias", "model");
    const Json& norm = detail::field(j, "feature_norm", "model");
    m.feature_mean = detail::vector_of<double>(norm, "mean", "feature_norm");
    m.feature_std = detail::vector_of<double>(norm, "std", "feature_norm");
    if (m.feature_mean.size() != m.arch.in_dim || m.feature_std.size() != m.arch.in_dim)
      throw FormatError("feature_norm length mismatch");
    for (double s : m.feature_std)
      if (!(s > 0.0)) throw FormatError("feature_norm std entries must be positive");
    m.decision_threshold = detail::number(j, "decision_threshold", "model");
    m.pos_weight = detail::number(j, "pos_weight", "model");
    m.seed = detail::field(j, "seed", "model").get<std::uint64_t>();
    m.config = config_from_json(detail::field(j, "config", "model"));
  } catch (const Json::exception& e) {
    throw ParseError(std::string("model: ") + e.what(), 0);
  } catch (const FormatError& e) {
    throw ParseError(e.what(), 0);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("model: ") + e.what(), 0);
  }
  return m;
}

GnnModel load_model(const std::filesystem::path& path) { return parse_model(read_text_file(path)); }

void save_model(const GnnModel& model, const std::filesystem::path& path) {
  write_text_file(path, serialize_model(model));
}

std::string serialize_history(const TrainHistory& history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,train_accuracy,val_accuracy,train_mse,val_mse\n";
  out.precision(17);
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    const auto& r = history.epochs[e];
    out << e + 1 << ',' << r.train_loss << ',' << r.val_loss << ',' << r.train_accuracy << ',' << r.val_accuracy
        << ',' << r.train_mse << ',' << r.val_mse << '\n';
  }
  return out.str();
}

}  // namespace ropf
