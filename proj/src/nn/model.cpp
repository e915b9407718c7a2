#include "pgc/nn/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pgc/errors.hpp"

namespace pgc::nn {

std::string to_string(ConvMode mode) {
  return mode == ConvMode::parametric ? "parametric" : "dgcnn";
}

ConvMode conv_mode_from_string(const std::string& text) {
  if (text == "parametric") return ConvMode::parametric;
  if (text == "dgcnn" || text == "dgcnn_baseline") return ConvMode::dgcnn_baseline;
  throw ConfigError("unknown convolution mode '" + text + "' (expected parametric or dgcnn)");
}

int ModelConfig::layer_width() const {
  return mode == ConvMode::parametric ? (r + 1) * channels : channels;
}

int ModelConfig::required_sp_radius() const { return mode == ConvMode::parametric ? r : 1; }

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{
      {"mode", to_string(c.mode)},
      {"r", c.r},
      {"conv_layers", c.conv_layers},
      {"channels", c.channels},
      {"sortpool_k", c.sortpool_k ? nlohmann::json(*c.sortpool_k) : nlohmann::json(nullptr)},
      {"sortpool_fraction", c.sortpool_fraction},
      {"min_auto_k", c.min_auto_k},
      {"conv1d_filters", c.conv1d_filters},
      {"pool_width", c.pool_width},
      {"conv1d2_filters", c.conv1d2_filters},
      {"conv1d2_width", c.conv1d2_width},
      {"dense_width", c.dense_width},
      {"dropout", c.dropout},
      {"adam",
       {{"step_size", c.adam.step_size},
        {"beta1", c.adam.beta1},
        {"beta2", c.adam.beta2},
        {"epsilon", c.adam.epsilon}}},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.mode = conv_mode_from_string(j.at("mode").get<std::string>());
  j.at("r").get_to(c.r);
  j.at("conv_layers").get_to(c.conv_layers);
  j.at("channels").get_to(c.channels);
  if (j.at("sortpool_k").is_null())
    c.sortpool_k.reset();
  else
    c.sortpool_k = j.at("sortpool_k").get<std::size_t>();
  j.at("sortpool_fraction").get_to(c.sortpool_fraction);
  j.at("min_auto_k").get_to(c.min_auto_k);
  j.at("conv1d_filters").get_to(c.conv1d_filters);
  j.at("pool_width").get_to(c.pool_width);
  j.at("conv1d2_filters").get_to(c.conv1d2_filters);
  j.at("conv1d2_width").get_to(c.conv1d2_width);
  j.at("dense_width").get_to(c.dense_width);
  j.at("dropout").get_to(c.dropout);
  const auto& a = j.at("adam");
  a.at("step_size").get_to(c.adam.step_size);
  a.at("beta1").get_to(c.adam.beta1);
  a.at("beta2").get_to(c.adam.beta2);
  a.at("epsilon").get_to(c.adam.epsilon);
  j.at("epochs").get_to(c.epochs);
  j.at("batch_size").get_to(c.batch_size);
  j.at("seed").get_to(c.seed);
}

void validate(const ModelConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError("invalid model config: " + what); };
  if (c.r < 0) fail("r must be >= 0");
  if (c.conv_layers < 1) fail("conv_layers must be >= 1");
  if (c.channels < 1) fail("channels must be >= 1");
  if (c.sortpool_k && *c.sortpool_k < 1) fail("k must be >= 1");
  if (!(c.sortpool_fraction > 0.0 && c.sortpool_fraction <= 1.0)) fail("sortpool fraction must be in (0, 1]");
  if (c.conv1d_filters < 1 || c.conv1d2_filters < 1) fail("conv1d filters must be >= 1");
  if (c.pool_width < 1 || c.conv1d2_width < 1) fail("pool/kernel widths must be >= 1");
  if (c.dense_width < 1) fail("dense_width must be >= 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(c.adam.step_size > 0.0)) fail("step size must be positive");
  if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0 && c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0))
    fail("betas must be in [0, 1)");
  if (!(c.adam.epsilon > 0.0)) fail("epsilon must be positive");
  if (c.epochs < 0) fail("epochs must be >= 0");
  if (c.batch_size < 1) fail("batch_size must be >= 1");
}

std::size_t resolve_sortpool_k(const ModelConfig& config,
                               std::span<const std::size_t> node_counts) {
  if (config.sortpool_k) return *config.sortpool_k;
  if (node_counts.empty()) throw ConfigError("cannot derive k from an empty training set");
  std::vector<std::size_t> sorted(node_counts.begin(), node_counts.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // m graphs must have >= k nodes; the slack keeps 0.6 * 10 from rounding up to 7.
  const double needed = config.sortpool_fraction * static_cast<double>(sorted.size());
  auto m = static_cast<std::size_t>(std::ceil(needed - 1e-9));
  m = std::clamp<std::size_t>(m, 1, sorted.size());
  return std::max(sorted[m - 1], config.min_auto_k);
}

std::size_t Model::total_channels() const {
  return static_cast<std::size_t>(config_.conv_layers) *
         static_cast<std::size_t>(config_.layer_width());
}

std::size_t Model::conv_weight(int layer, int j) const {
  const int per_layer = config_.mode == ConvMode::parametric ? config_.r + 1 : 1;
  return static_cast<std::size_t>(layer * per_layer + j);
}

std::size_t Model::readout_offset() const {
  const int per_layer = config_.mode == ConvMode::parametric ? config_.r + 1 : 1;
  return static_cast<std::size_t>(config_.conv_layers * per_layer);
}

void Model::init_shapes() {
  validate(config_);
  if (feature_dim_ == 0) throw ConfigError("feature dimension must be positive");
  if (num_classes_ < 2) throw ConfigError("need at least two classes");
  if (k_ < 1) throw ConfigError("k must be >= 1");

  const auto pool = static_cast<std::size_t>(config_.pool_width);
  const std::size_t pooled = conv1d_output_length(k_, pool, pool);
  conv2_steps_ = conv1d_output_length(pooled, static_cast<std::size_t>(config_.conv1d2_width), 1);
  if (conv2_steps_ == 0) {
    throw ConfigError("k=" + std::to_string(k_) + " is too small for the read-out: max-pool width " +
                      std::to_string(config_.pool_width) + " followed by a width-" +
                      std::to_string(config_.conv1d2_width) + " convolution");
  }

  auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
    params_.push_back({std::move(name), Matrix::Zero(rows, cols)});
  };
  params_.clear();
  const int per_layer = config_.mode == ConvMode::parametric ? config_.r + 1 : 1;
  for (int l = 0; l < config_.conv_layers; ++l) {
    const Eigen::Index c_in = l == 0 ? static_cast<Eigen::Index>(feature_dim_) : config_.layer_width();
    for (int j = 0; j < per_layer; ++j)
      add("conv" + std::to_string(l + 1) + ".W" + std::to_string(j), c_in, config_.channels);
  }
  const auto c_total = static_cast<Eigen::Index>(total_channels());
  add("conv1d_1.W", c_total, config_.conv1d_filters);
  add("conv1d_1.b", 1, config_.conv1d_filters);
  add("conv1d_2.W", static_cast<Eigen::Index>(config_.conv1d2_width) * config_.conv1d_filters,
      config_.conv1d2_filters);
  add("conv1d_2.b", 1, config_.conv1d2_filters);
  add("dense_1.W", static_cast<Eigen::Index>(conv2_steps_) * config_.conv1d2_filters,
      config_.dense_width);
  add("dense_1.b", 1, config_.dense_width);
  add("dense_out.W", config_.dense_width, num_classes_);
  add("dense_out.b", 1, num_classes_);
}

Model Model::build(const ModelConfig& config, std::size_t feature_dim, int num_classes,
                   std::size_t sortpool_k) {
  Model m;
  m.config_ = config;
  m.feature_dim_ = feature_dim;
  m.num_classes_ = num_classes;
  m.k_ = sortpool_k;
  m.init_shapes();

  // Glorot-uniform weights, zero biases.
  std::mt19937_64 rng(config.seed);
  for (auto& p : m.params_) {
    if (p.name.ends_with(".b")) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = u(rng);
  }
  return m;
}

std::vector<Matrix> Model::zero_gradients() const {
  std::vector<Matrix> g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  return g;
}

Vector Model::forward(const Matrix& features, const SPTensor& sp, ForwardTrace* trace,
                      std::mt19937_64* rng) const {
  require(static_cast<std::size_t>(features.cols()) == feature_dim_,
          "model expects " + std::to_string(feature_dim_) + " input features, got " +
              std::to_string(features.cols()));
  require(static_cast<std::size_t>(features.rows()) == sp.n, "SP tensor does not match the graph");
  require(sp.r >= config_.required_sp_radius(),
          "SP tensor radius " + std::to_string(sp.r) + " below model requirement " +
              std::to_string(config_.required_sp_radius()));

  ForwardTrace local;
  ForwardTrace& t = trace ? *trace : local;
  t.conv.resize(static_cast<std::size_t>(config_.conv_layers));

  std::vector<Matrix> outputs;
  outputs.reserve(t.conv.size());
  const Matrix* h = &features;
  for (int l = 0; l < config_.conv_layers; ++l) {
    auto& cache = t.conv[static_cast<std::size_t>(l)];
    if (config_.mode == ConvMode::parametric) {
      std::span<const Parameter> ps(params_.data() + conv_weight(l, 0),
                                    static_cast<std::size_t>(config_.r + 1));
      std::vector<Matrix> weights;
      weights.reserve(ps.size());
      for (const auto& p : ps) weights.push_back(p.value);
      outputs.push_back(pgc_forward(sp, *h, weights, &cache));
    } else {
      outputs.push_back(dgcnn_forward(sp, *h, params_[conv_weight(l, 0)].value, &cache));
    }
    h = &outputs.back();
  }

  t.concat = concat_layers(outputs);
  auto pooled_nodes = sortpool_forward(t.concat, k_);
  t.sorted = std::move(pooled_nodes.output);
  t.sort = std::move(pooled_nodes.record);

  const std::size_t off = readout_offset();
  const auto c_total = total_channels();
  const Eigen::Map<const Matrix> signal(t.sorted.data(), t.sorted.size(), 1);
  t.conv1_out = relu(conv1d_forward(signal, params_[off].value, params_[off + 1].value, c_total, c_total));
  const auto pool = static_cast<std::size_t>(config_.pool_width);
  t.pooled = maxpool1d_forward(t.conv1_out, pool, pool, &t.pool);
  t.conv2_out = relu(conv1d_forward(t.pooled, params_[off + 2].value, params_[off + 3].value,
                                    static_cast<std::size_t>(config_.conv1d2_width), 1));
  t.flat = Eigen::Map<const RowVector>(t.conv2_out.data(), t.conv2_out.size());
  t.hidden = relu(dense_forward(t.flat, params_[off + 4].value, params_[off + 5].value));
  if (rng != nullptr && config_.dropout > 0.0) {
    t.dropout_mask = dropout_mask(t.hidden.size(), config_.dropout, *rng);
    t.hidden_dropped = t.hidden.cwiseProduct(t.dropout_mask);
  } else {
    t.dropout_mask.resize(0);
    t.hidden_dropped = t.hidden;
  }
  t.logits = dense_forward(t.hidden_dropped, params_[off + 6].value, params_[off + 7].value).transpose();
  t.probabilities = softmax(t.logits);
  return t.probabilities;
}

void Model::backward(const SPTensor& sp, const ForwardTrace& t, const Vector& grad_logits,
                     std::span<Matrix> grads, Matrix* grad_features) const {
  require(grads.size() == params_.size(), "backward: gradient buffer count mismatch");
  require(grad_logits.size() == num_classes_, "backward: logit gradient has wrong size");
  const std::size_t off = readout_offset();

  // Bias gradients are 1 x n Matrix buffers; the layer kernels take RowVector&,
  // so they go through a temporary.
  RowVector g_hidden;
  {
    RowVector gb = RowVector::Zero(params_[off + 7].value.cols());
    g_hidden = dense_backward(t.hidden_dropped, params_[off + 6].value, grad_logits.transpose(),
                              grads[off + 6], gb);
    grads[off + 7].row(0) += gb;
  }
  if (t.dropout_mask.size() > 0) g_hidden = g_hidden.cwiseProduct(t.dropout_mask);
  g_hidden = relu_backward(t.hidden, g_hidden);

  RowVector g_flat;
  {
    RowVector gb = RowVector::Zero(params_[off + 5].value.cols());
    g_flat = dense_backward(t.flat, params_[off + 4].value, g_hidden, grads[off + 4], gb);
    grads[off + 5].row(0) += gb;
  }
  Matrix g_conv2 = Eigen::Map<const Matrix>(g_flat.data(), t.conv2_out.rows(), t.conv2_out.cols());
  g_conv2 = relu_backward(t.conv2_out, g_conv2);

  Matrix g_pooled;
  {
    RowVector gb = RowVector::Zero(params_[off + 3].value.cols());
    g_pooled = conv1d_backward(t.pooled, params_[off + 2].value,
                               static_cast<std::size_t>(config_.conv1d2_width), 1, g_conv2,
                               grads[off + 2], gb);
    grads[off + 3].row(0) += gb;
  }
  Matrix g_conv1 = relu_backward(t.conv1_out, maxpool1d_backward(g_pooled, t.pool));

  const auto c_total = total_channels();
  const Eigen::Map<const Matrix> signal(t.sorted.data(), t.sorted.size(), 1);
  Matrix g_signal;
  {
    RowVector gb = RowVector::Zero(params_[off + 1].value.cols());
    g_signal = conv1d_backward(signal, params_[off].value, c_total, c_total, g_conv1, grads[off], gb);
    grads[off + 1].row(0) += gb;
  }
  const Matrix g_sorted = Eigen::Map<const Matrix>(g_signal.data(), t.sorted.rows(), t.sorted.cols());
  const Matrix g_concat = sortpool_backward(g_sorted, t.sort);

  const std::vector<Eigen::Index> widths(static_cast<std::size_t>(config_.conv_layers),
                                         config_.layer_width());
  std::vector<Matrix> g_blocks = split_columns(g_concat, widths);

  Matrix g_next;  // gradient flowing into layer l's output from layer l+1
  for (int l = config_.conv_layers - 1; l >= 0; --l) {
    Matrix g_out = std::move(g_blocks[static_cast<std::size_t>(l)]);
    if (g_next.size() > 0) g_out += g_next;
    const auto& cache = t.conv[static_cast<std::size_t>(l)];
    if (config_.mode == ConvMode::parametric) {
      const auto first = conv_weight(l, 0);
      const auto count = static_cast<std::size_t>(config_.r + 1);
      std::vector<Matrix> weights;
      weights.reserve(count);
      for (std::size_t j = 0; j < count; ++j) weights.push_back(params_[first + j].value);
      g_next = pgc_backward(sp, cache, weights, g_out, grads.subspan(first, count));
    } else {
      g_next = dgcnn_backward(sp, cache, params_[conv_weight(l, 0)].value, g_out,
                              grads[conv_weight(l, 0)]);
    }
  }
  if (grad_features) *grad_features = std::move(g_next);
}

Vector model_forward(const Graph& graph, const SPTensor& sp, const Model& model, bool train_mode,
                     std::mt19937_64* rng, ForwardTrace* trace) {
  require(graph.feature_dim() == model.feature_dim(),
          "graph feature dimension " + std::to_string(graph.feature_dim()) +
              " does not match model input " + std::to_string(model.feature_dim()));
  require(sp.n == graph.node_count(), "SP tensor was computed for a different graph");
  require(!train_mode || rng != nullptr, "train mode needs a random generator for dropout");
  return model.forward(graph.features(), sp, trace, train_mode ? rng : nullptr);
}

namespace {

constexpr char kMagic[8] = {'P', 'G', 'C', 'C', 'K', 'P', 'T', '1'};
static_assert(std::endian::native == std::endian::little,
              "checkpoint format stores little-endian doubles");

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  nlohmann::json header;
  header["format"] = "pgc-checkpoint";
  header["version"] = 1;
  header["config"] = model.config();
  header["feature_dim"] = model.feature_dim();
  header["num_classes"] = model.num_classes();
  header["sortpool_k"] = model.sortpool_k();
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : model.parameters())
    tensors.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : model.parameters())
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw DataError(path.string() + ": not a checkpoint file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError(path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": corrupt header: " + e.what());
  }

  Model m;
  m.config_ = header.at("config").get<ModelConfig>();
  m.feature_dim_ = header.at("feature_dim").get<std::size_t>();
  m.num_classes_ = header.at("num_classes").get<int>();
  m.k_ = header.at("sortpool_k").get<std::size_t>();
  m.init_shapes();

  const auto& tensors = header.at("tensors");
  if (tensors.size() != m.params_.size()) throw DataError(path.string() + ": tensor count mismatch");
  for (std::size_t i = 0; i < m.params_.size(); ++i) {
    auto& p = m.params_[i];
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != p.name || t.at("rows").get<Eigen::Index>() != p.value.rows() ||
        t.at("cols").get<Eigen::Index>() != p.value.cols())
      throw DataError(path.string() + ": tensor " + std::to_string(i) + " does not match config");
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!in) throw DataError(path.string() + ": truncated tensor data");
  }
  return m;
}

}  // namespace pgc::nn
