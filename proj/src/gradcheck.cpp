#include "pgc/gradcheck.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "pgc/errors.hpp"
#include "pgc/graph.hpp"
#include "pgc/nn/layers.hpp"
#include "pgc/nn/model.hpp"
#include "pgc/sp_tensor.hpp"

namespace pgc {

double relative_error(const Matrix& analytic, const Matrix& numeric) {
  require(analytic.rows() == numeric.rows() && analytic.cols() == numeric.cols(),
          "relative_error: shape mismatch");
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-7});
  return (analytic - numeric).norm() / scale;
}

Matrix numeric_gradient(Matrix& x, const std::function<double()>& objective, double step) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double& v = x.data()[i];
    const double saved = v;
    v = saved + step;
    const double up = objective();
    v = saved - step;
    const double down = objective();
    v = saved;
    g.data()[i] = (up - down) / (2.0 * step);
  }
  return g;
}

namespace {

constexpr double kLayerTol = 1e-6;
constexpr double kModelTol = 1e-5;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Graph random_graph(std::size_t n, double p, std::size_t dims, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (coin(rng)) edges.emplace_back(i, j);
  return Graph::from_edges(n, edges, random_matrix(static_cast<Eigen::Index>(n),
                                                   static_cast<Eigen::Index>(dims), rng),
                           0);
}

double weighted_sum(const Matrix& out, const Matrix& weights) {
  return (out.array() * weights.array()).sum();
}

// Smallest pairwise gap of column `c`.
double min_gap(const Matrix& h, Eigen::Index c) {
  std::vector<double> v(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i) v[static_cast<std::size_t>(i)] = h(i, c);
  std::sort(v.begin(), v.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) gap = std::min(gap, v[i] - v[i - 1]);
  return gap;
}

void check_graph_conv(std::vector<GradCheckResult>& out, std::mt19937_64& rng, bool parametric) {
  const int r = 2;
  Graph g = random_graph(9, 0.3, 3, rng);
  const SPTensor sp = compute_sp_tensor(g, r);
  Matrix h = g.features();
  std::vector<Matrix> weights;
  for (int j = 0; j < (parametric ? r + 1 : 1); ++j) weights.push_back(random_matrix(3, 4, rng, 0.5));

  auto forward = [&] {
    return parametric ? nn::pgc_forward(sp, h, weights) : nn::dgcnn_forward(sp, h, weights[0]);
  };
  const Matrix probe = random_matrix(h.rows(), forward().cols(), rng);
  auto objective = [&] { return weighted_sum(forward(), probe); };

  nn::GraphConvCache cache;
  std::vector<Matrix> grads;
  for (const auto& w : weights) grads.push_back(Matrix::Zero(w.rows(), w.cols()));
  Matrix grad_h;
  if (parametric) {
    nn::pgc_forward(sp, h, weights, &cache);
    grad_h = nn::pgc_backward(sp, cache, weights, probe, grads);
  } else {
    nn::dgcnn_forward(sp, h, weights[0], &cache);
    grad_h = nn::dgcnn_backward(sp, cache, weights[0], probe, grads[0]);
  }
  const std::string name = parametric ? "pgc_conv (r=2)" : "dgcnn_conv";
  for (std::size_t j = 0; j < weights.size(); ++j) {
    out.push_back({name + " d/dW" + std::to_string(j),
                   relative_error(grads[j], numeric_gradient(weights[j], objective)), kLayerTol});
  }
  out.push_back({name + " d/dH", relative_error(grad_h, numeric_gradient(h, objective)), kLayerTol});
}

void check_sortpool(std::vector<GradCheckResult>& out, std::mt19937_64& rng) {
  for (std::size_t k : {std::size_t{5}, std::size_t{9}}) {
    Matrix h = random_matrix(7, 3, rng);
    // Last column: a shuffled ladder with 0.05 spacing keeps keys apart.
    std::vector<int> rank(7);
    std::iota(rank.begin(), rank.end(), 0);
    std::shuffle(rank.begin(), rank.end(), rng);
    for (Eigen::Index i = 0; i < 7; ++i) h(i, 2) = 0.05 * rank[static_cast<std::size_t>(i)];
    const Matrix probe = random_matrix(static_cast<Eigen::Index>(k), 3, rng);
    auto objective = [&] { return weighted_sum(nn::sortpool_forward(h, k).output, probe); };
    const auto res = nn::sortpool_forward(h, k);
    const Matrix analytic = nn::sortpool_backward(probe, res.record);
    out.push_back({"sortpool (n=7, k=" + std::to_string(k) + ") d/dH",
                   relative_error(analytic, numeric_gradient(h, objective)), kLayerTol});
  }
}

void check_conv1d(std::vector<GradCheckResult>& out, std::mt19937_64& rng) {
  struct Shape {
    Eigen::Index length, channels, filters;
    std::size_t width, stride;
  };
  for (const Shape s : {Shape{12, 3, 5, 4, 1}, Shape{15, 1, 4, 3, 3}, Shape{11, 2, 3, 3, 2}}) {
    Matrix x = random_matrix(s.length, s.channels, rng);
    Matrix w = random_matrix(static_cast<Eigen::Index>(s.width) * s.channels, s.filters, rng, 0.5);
    Matrix b = random_matrix(1, s.filters, rng);
    const auto steps = static_cast<Eigen::Index>(
        nn::conv1d_output_length(static_cast<std::size_t>(s.length), s.width, s.stride));
    const Matrix probe = random_matrix(steps, s.filters, rng);
    auto objective = [&] {
      return weighted_sum(nn::conv1d_forward(x, w, RowVector(b), s.width, s.stride), probe);
    };
    Matrix gw = Matrix::Zero(w.rows(), w.cols());
    RowVector gb = RowVector::Zero(b.cols());
    const Matrix gx = nn::conv1d_backward(x, w, s.width, s.stride, probe, gw, gb);
    const std::string name = "conv1d (width " + std::to_string(s.width) + ", stride " +
                             std::to_string(s.stride) + ")";
    out.push_back({name + " d/dW", relative_error(gw, numeric_gradient(w, objective)), kLayerTol});
    out.push_back({name + " d/db", relative_error(Matrix(gb), numeric_gradient(b, objective)), kLayerTol});
    out.push_back({name + " d/dx", relative_error(gx, numeric_gradient(x, objective)), kLayerTol});
  }
}

void check_maxpool(std::vector<GradCheckResult>& out, std::mt19937_64& rng) {
  Matrix x = random_matrix(10, 4, rng);
  const Matrix probe = random_matrix(5, 4, rng);
  auto objective = [&] { return weighted_sum(nn::maxpool1d_forward(x, 2, 2), probe); };
  nn::MaxPoolRecord rec;
  nn::maxpool1d_forward(x, 2, 2, &rec);
  out.push_back({"maxpool1d (2/2) d/dx",
                 relative_error(nn::maxpool1d_backward(probe, rec), numeric_gradient(x, objective)),
                 kLayerTol});
}

void check_dense(std::vector<GradCheckResult>& out, std::mt19937_64& rng) {
  Matrix x = random_matrix(1, 6, rng);
  Matrix w = random_matrix(6, 5, rng);
  Matrix b = random_matrix(1, 5, rng);
  const Matrix probe = random_matrix(1, 5, rng);
  auto objective = [&] { return weighted_sum(nn::dense_forward(RowVector(x), w, RowVector(b)), probe); };
  Matrix gw = Matrix::Zero(6, 5);
  RowVector gb = RowVector::Zero(5);
  const RowVector gx = nn::dense_backward(RowVector(x), w, RowVector(probe), gw, gb);
  out.push_back({"dense d/dW", relative_error(gw, numeric_gradient(w, objective)), kLayerTol});
  out.push_back({"dense d/db", relative_error(Matrix(gb), numeric_gradient(b, objective)), kLayerTol});
  out.push_back({"dense d/dx", relative_error(Matrix(gx), numeric_gradient(x, objective)), kLayerTol});
}

void check_softmax(std::vector<GradCheckResult>& out, std::mt19937_64& rng) {
  Matrix logits = random_matrix(4, 1, rng, 2.0);
  auto objective = [&] { return nn::softmax_cross_entropy(Vector(logits), 2).loss; };
  const Vector analytic = nn::softmax_cross_entropy(Vector(logits), 2).grad;
  out.push_back({"softmax_cross_entropy d/dlogits",
                 relative_error(Matrix(analytic), numeric_gradient(logits, objective)), 1e-8});
}

void check_model(std::vector<GradCheckResult>& out, std::mt19937_64& rng, nn::ConvMode mode) {
  nn::ModelConfig cfg;
  cfg.mode = mode;
  cfg.r = 2;
  cfg.conv_layers = 3;
  cfg.channels = 3;
  cfg.sortpool_k = 6;
  cfg.conv1d_filters = 4;
  cfg.conv1d2_filters = 5;
  cfg.conv1d2_width = 2;
  cfg.dense_width = 8;

  // Redraw until the sort keys (last concatenated column) are well separated.
  for (int attempt = 0; attempt < 500; ++attempt) {
    cfg.seed = rng();
    Graph g = random_graph(8, 0.35, 3, rng);
    const SPTensor sp = compute_sp_tensor(g, cfg.required_sp_radius());
    nn::Model model = nn::Model::build(cfg, 3, 3, *cfg.sortpool_k);
    nn::ForwardTrace trace;
    Matrix x = g.features();
    model.forward(x, sp, &trace, nullptr);
    if (min_gap(trace.concat, trace.concat.cols() - 1) <= 1e-2) continue;

    const int target = 1;
    const auto loss = nn::softmax_cross_entropy(trace.logits, target);
    std::vector<Matrix> grads = model.zero_gradients();
    Matrix grad_x;
    model.backward(sp, trace, loss.grad, grads, &grad_x);

    auto objective = [&] {
      nn::ForwardTrace t;
      model.forward(x, sp, &t, nullptr);
      return nn::softmax_cross_entropy(t.logits, target).loss;
    };
    const std::string prefix = "model[" + nn::to_string(mode) + "] ";
    double worst = 0.0;
    std::string worst_name;
    for (std::size_t i = 0; i < grads.size(); ++i) {
      auto& p = model.parameters()[i];
      const double err = relative_error(grads[i], numeric_gradient(p.value, objective));
      if (err >= worst) {
        worst = err;
        worst_name = p.name;
      }
    }
    out.push_back({prefix + "all parameters (worst: " + worst_name + ")", worst, kModelTol});
    out.push_back({prefix + "d/dX", relative_error(grad_x, numeric_gradient(x, objective)), kModelTol});
    return;
  }
  out.push_back({"model[" + nn::to_string(mode) + "] no draw with separated sort keys", 1.0, kModelTol});
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> out;
  check_graph_conv(out, rng, true);
  check_graph_conv(out, rng, false);
  check_sortpool(out, rng);
  check_conv1d(out, rng);
  check_maxpool(out, rng);
  check_dense(out, rng);
  check_softmax(out, rng);
  check_model(out, rng, nn::ConvMode::parametric);
  check_model(out, rng, nn::ConvMode::dgcnn_baseline);
  return out;
}

}  // namespace pgc
