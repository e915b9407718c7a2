#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pgc/graph.hpp"
#include "pgc/nn/adam.hpp"
#include "pgc/nn/layers.hpp"
#include "pgc/sp_tensor.hpp"

namespace pgc::nn {

enum class ConvMode { parametric, dgcnn_baseline };

std::string to_string(ConvMode mode);
ConvMode conv_mode_from_string(const std::string& text);

struct ModelConfig {
  ConvMode mode = ConvMode::parametric;
  int r = 2;
  int conv_layers = 3;
  int channels = 32;  // per distance block in parametric mode

  /// Explicit k, or nullopt for the fraction rule: the largest k such that at
  /// least `sortpool_fraction` of the training graphs have >= k nodes, raised to
  /// `min_auto_k` when smaller.
  std::optional<std::size_t> sortpool_k;
  double sortpool_fraction = 0.6;
  std::size_t min_auto_k = 10;

  int conv1d_filters = 16;
  int pool_width = 2;
  int conv1d2_filters = 32;
  int conv1d2_width = 5;
  int dense_width = 128;
  double dropout = 0.5;

  AdamConfig adam;
  int epochs = 150;
  int batch_size = 20;
  std::uint64_t seed = 1;

  /// Width of one graph-conv layer's output.
  int layer_width() const;
  /// Number of SP matrices the model reads (r for parametric, 1 for baseline).
  int required_sp_radius() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Throws ConfigError for invalid values (negative r, non-positive widths, ...).
void validate(const ModelConfig& config);

/// Resolves config.sortpool_k against the node counts of the training graphs.
std::size_t resolve_sortpool_k(const ModelConfig& config, std::span<const std::size_t> node_counts);

/// Per-graph activations kept for the backward pass.
struct ForwardTrace {
  std::vector<GraphConvCache> conv;
  Matrix concat;
  SortPoolRecord sort;
  Matrix sorted;       // k x total_channels
  Matrix conv1_out;    // after ReLU
  MaxPoolRecord pool;
  Matrix pooled;
  Matrix conv2_out;    // after ReLU
  RowVector flat;
  RowVector hidden;    // dense after ReLU, before dropout
  RowVector dropout_mask;  // empty when dropout inactive
  RowVector hidden_dropped;
  Vector logits;
  Vector probabilities;
};

/// Graph convs -> concatenation -> SortPooling -> conv1d -> max-pool ->
/// conv1d -> dense -> dropout -> dense -> softmax.
///
/// forward/backward are const and keep per-call state in a caller-owned
/// ForwardTrace, so distinct graphs can be processed concurrently against the
/// same parameters.
class Model {
public:
  /// Throws ConfigError when the read-out geometry does not fit k.
  static Model build(const ModelConfig& config, std::size_t feature_dim, int num_classes,
                     std::size_t sortpool_k);

  const ModelConfig& config() const { return config_; }
  std::size_t feature_dim() const { return feature_dim_; }
  int num_classes() const { return num_classes_; }
  std::size_t sortpool_k() const { return k_; }
  std::size_t total_channels() const;

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Matrix> zero_gradients() const;

  /// Returns class probabilities. Dropout is applied iff `rng` is non-null.
  Vector forward(const Matrix& features, const SPTensor& sp, ForwardTrace* trace,
                 std::mt19937_64* rng) const;

  /// Accumulates parameter gradients of the loss whose logit gradient is
  /// `grad_logits` into `grads`. Optionally returns d loss / d features.
  void backward(const SPTensor& sp, const ForwardTrace& trace, const Vector& grad_logits,
                std::span<Matrix> grads, Matrix* grad_features = nullptr) const;

private:
  friend Model load_checkpoint(const std::filesystem::path& path);
  Model() = default;
  void init_shapes();

  // Parameter index helpers.
  std::size_t conv_weight(int layer, int j) const;
  std::size_t readout_offset() const;

  ModelConfig config_;
  std::size_t feature_dim_ = 0;
  int num_classes_ = 0;
  std::size_t k_ = 0;
  std::size_t conv2_steps_ = 0;
  std::vector<Parameter> params_;
};

/// Class probabilities for one graph; dropout only in train mode.
Vector model_forward(const Graph& graph, const SPTensor& sp, const Model& model, bool train_mode,
                     std::mt19937_64* rng = nullptr, ForwardTrace* trace = nullptr);

/// Binary checkpoint: magic, JSON header (config, k, shapes), raw little-endian
/// doubles. Round-trips bit-exactly.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace pgc::nn
