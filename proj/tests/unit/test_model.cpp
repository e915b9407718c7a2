#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "pgc/errors.hpp"
#include "pgc/nn/layers.hpp"
#include "pgc/nn/model.hpp"
#include "pgc/sp_tensor.hpp"
#include "../support/test_graphs.hpp"

namespace fs = std::filesystem;
using namespace pgc;
using namespace pgc::nn;

namespace {

ModelConfig small_config(ConvMode mode, int r) {
  ModelConfig cfg;
  cfg.mode = mode;
  cfg.r = r;
  cfg.channels = 8;
  cfg.sortpool_k = 10;
  cfg.dense_width = 16;
  return cfg;
}

double min_key_gap(const Matrix& h) {
  std::vector<double> v(static_cast<std::size_t>(h.rows()));
  for (Eigen::Index i = 0; i < h.rows(); ++i) v[static_cast<std::size_t>(i)] = h(i, h.cols() - 1);
  std::sort(v.begin(), v.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) gap = std::min(gap, v[i] - v[i - 1]);
  return gap;
}

}  // namespace

TEST_CASE("probabilities sum to one") {
  std::mt19937_64 rng(1);
  for (ConvMode mode : {ConvMode::parametric, ConvMode::dgcnn_baseline}) {
    for (int trial = 0; trial < 10; ++trial) {
      ModelConfig cfg = small_config(mode, 1 + trial % 3);
      cfg.seed = rng();
      const int classes = 2 + trial % 4;
      const Model model = Model::build(cfg, 4, classes, 10);
      std::uniform_int_distribution<std::size_t> size(1, 25);
      const Graph g = testing::random_labeled_graph(size(rng), 0.3, 4, rng);
      const SPTensor sp = compute_sp_tensor(g, cfg.required_sp_radius());
      for (bool train : {false, true}) {
        const Vector p = model_forward(g, sp, model, train, &rng);
        CHECK(p.size() == classes);
        CHECK(std::abs(p.sum() - 1.0) < 1e-12);
        CHECK(p.minCoeff() >= 0.0);
      }
    }
  }
}

TEST_CASE("zero read-out weights give the uniform distribution") {
  std::mt19937_64 rng(2);
  Model model = Model::build(small_config(ConvMode::parametric, 2), 3, 4, 10);
  for (auto& p : model.parameters())
    if (p.name.rfind("conv", 0) != 0 || p.name.rfind("conv1d", 0) == 0) p.value.setZero();
  const Graph g = testing::random_labeled_graph(12, 0.3, 3, rng);
  const Vector p = model_forward(g, compute_sp_tensor(g, 2), model, false);
  for (Eigen::Index c = 0; c < 4; ++c) CHECK(p(c) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("feature width mismatch is a contract violation") {
  std::mt19937_64 rng(3);
  const Model model = Model::build(small_config(ConvMode::parametric, 2), 3, 2, 10);
  const Graph g = testing::random_labeled_graph(6, 0.3, 5, rng);
  CHECK_THROWS_AS(model_forward(g, compute_sp_tensor(g, 2), model, false), ContractViolation);
}

TEST_CASE("layer width law") {
  std::mt19937_64 rng(4);
  const Graph g = testing::random_labeled_graph(11, 0.3, 3, rng);
  for (int r = 0; r <= 4; ++r) {
    for (ConvMode mode : {ConvMode::parametric, ConvMode::dgcnn_baseline}) {
      ModelConfig cfg = small_config(mode, r);
      const Model model = Model::build(cfg, 3, 2, 10);
      ForwardTrace trace;
      model.forward(g.features(), compute_sp_tensor(g, cfg.required_sp_radius()), &trace, nullptr);
      const Eigen::Index expected = mode == ConvMode::parametric ? (r + 1) * 8 : 8;
      REQUIRE(trace.conv.size() == 3);
      for (const auto& c : trace.conv) CHECK(c.output.cols() == expected);
      CHECK(trace.concat.cols() == 3 * expected);
      CHECK(model.total_channels() == static_cast<std::size_t>(3 * expected));
    }
  }
}

TEST_CASE("node relabeling leaves the output unchanged") {
  std::mt19937_64 rng(5);
  int tested = 0;
  while (tested < 50) {
    ModelConfig cfg;
    cfg.seed = rng();
    cfg.mode = tested % 2 ? ConvMode::dgcnn_baseline : ConvMode::parametric;
    std::uniform_int_distribution<std::size_t> size(4, 24);
    const Graph g = testing::random_labeled_graph(size(rng), 0.25, 5, rng);
    const Model model = Model::build(cfg, 5, 3, 10);
    const SPTensor sp = compute_sp_tensor(g, cfg.required_sp_radius());
    ForwardTrace trace;
    const Vector p = model.forward(g.features(), sp, &trace, nullptr);
    if (min_key_gap(trace.concat) < 1e-9) continue;
    ++tested;
    std::vector<NodeId> perm(g.node_count());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Graph h = g.relabeled(perm);
    const Vector q = model_forward(h, compute_sp_tensor(h, cfg.required_sp_radius()), model, false);
    CHECK((p - q).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("receptive field of layer l stays within hop distance l * r") {
  std::mt19937_64 rng(6);
  for (int r = 0; r <= 3; ++r) {
    for (int trial = 0; trial < 6; ++trial) {
      ModelConfig cfg = small_config(ConvMode::parametric, r);
      cfg.seed = rng();
      const Graph g = testing::random_labeled_graph(18, 0.12, 3, rng);
      const Model model = Model::build(cfg, 3, 2, 10);
      const SPTensor sp = compute_sp_tensor(g, r);
      const auto dist = testing::floyd_warshall(g);
      std::uniform_int_distribution<std::size_t> pick(0, 17);
      const std::size_t u = pick(rng);
      Matrix x = g.features();
      ForwardTrace before, after;
      model.forward(x, sp, &before, nullptr);
      x.row(static_cast<Eigen::Index>(u)) += RowVector::Constant(3, 0.75);
      model.forward(x, sp, &after, nullptr);
      for (int l = 1; l <= 3; ++l) {
        const auto& a = before.conv[static_cast<std::size_t>(l - 1)].output;
        const auto& b = after.conv[static_cast<std::size_t>(l - 1)].output;
        for (std::size_t v = 0; v < 18; ++v) {
          if (dist[u][v] != testing::kUnreachable && dist[u][v] <= l * r) continue;
          const auto iv = static_cast<Eigen::Index>(v);
          CHECK(std::memcmp(a.row(iv).data(), b.row(iv).data(),
                            sizeof(double) * static_cast<std::size_t>(a.cols())) == 0);
        }
      }
      CHECK(before.conv[0].output.row(static_cast<Eigen::Index>(u)) !=
            after.conv[0].output.row(static_cast<Eigen::Index>(u)));
    }
  }
}

TEST_CASE("identical configs give identical parameter trajectories") {
  std::mt19937_64 data_rng(7);
  std::vector<Graph> graphs;
  for (int i = 0; i < 6; ++i) graphs.push_back(testing::random_labeled_graph(9, 0.3, 3, data_rng, i % 2));
  ModelConfig cfg = small_config(ConvMode::parametric, 2);
  cfg.adam.step_size = 1e-2;
  const auto sps = compute_sp_tensors(graphs, 2);

  auto run = [&] {
    Model model = Model::build(cfg, 3, 2, 10);
    AdamState state = AdamState::zeros_like(model.parameters());
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::vector<Matrix>> trajectory;
    for (int step = 0; step < 4; ++step) {
      auto grads = model.zero_gradients();
      for (std::size_t i = 0; i < graphs.size(); ++i) {
        ForwardTrace t;
        model.forward(graphs[i].features(), sps[i], &t, &rng);
        model.backward(sps[i], t, softmax_cross_entropy(t.logits, graphs[i].target()).grad, grads);
      }
      adam_step(model.parameters(), grads, state, cfg.adam);
      std::vector<Matrix> snapshot;
      for (const auto& p : model.parameters()) snapshot.push_back(p.value);
      trajectory.push_back(std::move(snapshot));
    }
    return trajectory;
  };
  const auto a = run(), b = run();
  for (std::size_t s = 0; s < a.size(); ++s)
    for (std::size_t p = 0; p < a[s].size(); ++p) CHECK(a[s][p] == b[s][p]);
  CHECK(a.front()[0] != a.back()[0]);
}

TEST_CASE("forward and backward leave parameters unchanged") {
  std::mt19937_64 rng(8);
  const Model model = Model::build(small_config(ConvMode::parametric, 2), 3, 3, 10);
  std::vector<Matrix> before;
  for (const auto& p : model.parameters()) before.push_back(p.value);
  const Graph g = testing::random_labeled_graph(14, 0.3, 3, rng, 2);
  const SPTensor sp = compute_sp_tensor(g, 2);
  ForwardTrace t;
  model.forward(g.features(), sp, &t, &rng);
  auto grads = model.zero_gradients();
  Matrix grad_x;
  model.backward(sp, t, softmax_cross_entropy(t.logits, 2).grad, grads, &grad_x);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(model.parameters()[i].value == before[i]);
    CHECK(grads[i].rows() == before[i].rows());
    CHECK(grads[i].cols() == before[i].cols());
    CHECK(grads[i].allFinite());
  }
}

TEST_CASE("different seeds give different initial weights") {
  ModelConfig a = small_config(ConvMode::parametric, 2), b = a;
  b.seed = a.seed + 1;
  CHECK(Model::build(a, 3, 2, 10).parameters()[0].value != Model::build(b, 3, 2, 10).parameters()[0].value);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  ModelConfig cfg = small_config(ConvMode::dgcnn_baseline, 3);
  cfg.sortpool_k = std::nullopt;
  cfg.seed = 99;
  const Model model = Model::build(cfg, 4, 3, 12);
  const fs::path path = fs::temp_directory_path() / ("pgc_ckpt_" + std::to_string(std::random_device{}()));
  save_checkpoint(model, path);
  const Model back = load_checkpoint(path);
  fs::remove(path);
  CHECK(back.sortpool_k() == 12);
  CHECK(back.num_classes() == 3);
  CHECK(back.feature_dim() == 4);
  CHECK(nlohmann::json(back.config()) == nlohmann::json(model.config()));
  REQUIRE(back.parameters().size() == model.parameters().size());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const auto& p = model.parameters()[i];
    const auto& q = back.parameters()[i];
    CHECK(p.name == q.name);
    REQUIRE(p.value.size() == q.value.size());
    CHECK(std::memcmp(p.value.data(), q.value.data(), sizeof(double) * static_cast<std::size_t>(p.value.size())) == 0);
  }
}

TEST_CASE("loading a corrupt checkpoint fails cleanly") {
  const fs::path path = fs::temp_directory_path() / ("pgc_bad_" + std::to_string(std::random_device{}()));
  std::ofstream(path) << "not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  fs::remove(path);
}

TEST_CASE("config validation and JSON round trip") {
  ModelConfig cfg;
  cfg.r = 3;
  cfg.sortpool_k = 20;
  cfg.mode = ConvMode::dgcnn_baseline;
  ModelConfig back = nlohmann::json(cfg).get<ModelConfig>();
  CHECK(nlohmann::json(back) == nlohmann::json(cfg));

  ModelConfig bad;
  bad.channels = 0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = ModelConfig{};
  bad.dropout = 1.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = ModelConfig{};
  bad.r = -1;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  CHECK_THROWS_AS(conv_mode_from_string("ecc"), ConfigError);
}

TEST_CASE("read-out that does not fit k is rejected at build time") {
  CHECK_THROWS_AS(Model::build(ModelConfig{}, 3, 2, 4), ConfigError);
  CHECK_NOTHROW(Model::build(ModelConfig{}, 3, 2, 10));
}

TEST_CASE("automatic SortPooling size") {
  ModelConfig cfg;
  const std::vector<std::size_t> ten{5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
  cfg.min_auto_k = 1;
  // Six of ten graphs have at least 9 nodes, seven have at least 8.
  CHECK(resolve_sortpool_k(cfg, ten) == 9);
  cfg.min_auto_k = 10;
  CHECK(resolve_sortpool_k(cfg, ten) == 10);
  cfg.sortpool_k = 3;
  CHECK(resolve_sortpool_k(cfg, ten) == 3);
}
