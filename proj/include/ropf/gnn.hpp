#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ropf/datagen.hpp"
#include "ropf/graph.hpp"
#include "ropf/kernels.hpp"
#include "ropf/matrix.hpp"

namespace ropf {

enum class HeadKind { Line, Gen };
enum class LossKind { Bce, Mse };

std::string_view to_string(HeadKind kind);
std::string_view to_string(LossKind kind);
HeadKind parse_head_kind(std::string_view text);
LossKind parse_loss_kind(std::string_view text);

struct Architecture {
  std::size_t in_dim = kFeatureCount;
  std::size_t hidden_dim = 64;
  std::size_t n_layers = 3;

  bool operator==(const Architecture&) const = default;
};

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 3e-3;
  std::size_t hidden_dim = 64;
  std::size_t n_layers = 3;
  double pos_weight_cap = 50.0;
  std::uint64_t seed = 1;
  HeadKind stage = HeadKind::Line;
  LossKind loss = LossKind::Bce;
  bool teacher_forcing = false;  // stage 2 sees true line labels instead of predictions
  double decision_threshold = 0.5;

  bool operator==(const TrainConfig&) const = default;
};

// Trainable tensors. Layer l maps H (n x in) to relu(A_hat H W_l + b_l).
struct Parameters {
  std::vector<Matrix> weights;             // in x out
  std::vector<std::vector<double>> biases;
  std::vector<double> head_weights;        // 2*hidden (line head) or hidden (generator head)
  double head_bias = 0.0;

  // Views over every scalar, in a fixed order.
  std::vector<std::span<double>> blocks();
  std::size_t count() const;

  bool operator==(const Parameters&) const = default;
};

struct CaseSignature {
  std::string name;
  std::size_t n_buses = 0;
  std::size_t n_generators = 0;
  std::size_t n_lines = 0;

  bool operator==(const CaseSignature&) const = default;
};

CaseSignature signature_of(const Network& net);

struct GnnModel {
  Architecture arch;
  HeadKind head = HeadKind::Line;
  Parameters params;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;  // zero-variance columns are stored as 1
  double decision_threshold = 0.5;
  double pos_weight = 1.0;
  std::uint64_t seed = 0;
  TrainConfig config;
  CaseSignature case_signature;

  bool operator==(const GnnModel&) const = default;
};

// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases,
// identity feature normalization.
GnnModel init_model(const Architecture& arch, HeadKind head, std::uint64_t seed);

// What the head reads: endpoint node pairs (one per line) or virtual nodes
// (one per generator), both indexed by record position.
struct HeadTargets {
  HeadKind kind = HeadKind::Line;
  std::vector<std::pair<std::size_t, std::size_t>> endpoints;
  std::vector<std::size_t> nodes;

  std::size_t size() const { return kind == HeadKind::Line ? endpoints.size() : nodes.size(); }
};

HeadTargets line_targets(const ExpandedGraph& graph, const Network& net, const GridIndex& index);
HeadTargets gen_targets(const ExpandedGraph& graph);

// Node embeddings for one graph: n_nodes x hidden_dim.
Matrix forward(const GnnModel& model, const NormalizedAdjacency& adj, const Matrix& x_raw,
               kernels::Backend backend = kernels::default_backend());

// Per line position: sigmoid(w . [h_f + h_t, |h_f - h_t|] + b).
std::vector<double> predict_lines(const GnnModel& model, const ExpandedGraph& graph, const NormalizedAdjacency& adj,
                                  const Matrix& x_raw, const Network& net, const GridIndex& index);

// Per generator position: sigmoid(w . h_virtual + b). Refuses input whose
// congestion columns are all zero unless allow_missing_congestion is set.
std::vector<double> predict_max_gens(const GnnModel& model, const ExpandedGraph& graph,
                                     const NormalizedAdjacency& adj, const Matrix& x_raw,
                                     bool allow_missing_congestion = false);

// label = 1 iff p >= threshold
std::vector<int> classify(std::span<const double> probabilities, double threshold);

struct LossSpec {
  LossKind kind = LossKind::Bce;
  double pos_weight = 1.0;
};

// Mean loss over all entries of logits/labels; fills dlogits when given.
double loss_and_grad(const Matrix& logits, const Matrix& labels, const LossSpec& spec, Matrix* dlogits);

// Loss of the model on a batch of graphs (x_raw stacks n_nodes rows per
// sample; labels is samples x targets) and, optionally, its gradient.
double evaluate_loss(const GnnModel& model, const CsrMatrix& adj, const Matrix& x_raw, const HeadTargets& targets,
                     const Matrix& labels, const LossSpec& spec, Parameters* gradient,
                     kernels::Backend backend = kernels::default_backend());

// Max over parameters of |g_a - g_n| / max(1e-8, |g_a| + |g_n|) with central
// differences of the given step. Entries that disagree are retried at step/100,
// since a relu switching inside the probe interval breaks the estimate.
double grad_check(const GnnModel& model, const NormalizedAdjacency& adj, const Matrix& x_raw,
                  const HeadTargets& targets, const std::vector<double>& labels, const LossSpec& spec = {},
                  double step = 1e-4);

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::string backend;
  int threads = 1;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  GnnModel model;
  TrainHistory history;
};

// Full-batch training on the dataset's train split, validation on its val
// split. Stage Gen needs the trained line model.
TrainResult train(const TrainConfig& config, const Dataset& dataset, const GnnModel* line_model = nullptr);

// Runs the line model then, if given, the generator model on one load vector.
struct Prediction {
  std::vector<double> line_probs;
  std::vector<int> line_labels;
  std::vector<double> gen_probs;  // empty without a generator model
  std::vector<int> gen_labels;
  double inference_time_s = 0.0;
};

class HierarchicalPredictor {
 public:
  // Throws std::invalid_argument when a model does not match the case.
  HierarchicalPredictor(const Network& net, const GnnModel& line_model, const GnnModel* gen_model);

  Prediction predict(const LoadVector& loads) const;

 private:
  const Network& net_;
  GridIndex index_;
  ExpandedGraph graph_;
  NormalizedAdjacency adj_;
  const GnnModel& line_model_;
  const GnnModel* gen_model_;
};

void check_model_matches(const GnnModel& model, const Network& net, HeadKind expected);

inline constexpr int kModelFormatVersion = 1;

std::string serialize_model(const GnnModel& model);
GnnModel parse_model(std::string_view text);
GnnModel load_model(const std::filesystem::path& path);
void save_model(const GnnModel& model, const std::filesystem::path& path);

std::string serialize_history(const TrainHistory& history);

}  // namespace ropf
