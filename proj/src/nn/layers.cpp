#include "pgc/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pgc/errors.hpp"

namespace pgc::nn {

namespace {

Matrix tanh_of(const Matrix& z) { return z.array().tanh().matrix(); }

// dL/dz for y = tanh(z), given y.
Matrix tanh_grad(const Matrix& y, const Matrix& grad_y) {
  return (grad_y.array() * (1.0 - y.array().square())).matrix();
}

void check_weights(const Matrix& h, std::span<const Matrix> weights, const char* who) {
  require(!weights.empty(), std::string(who) + ": no weight matrices");
  for (const auto& w : weights) {
    require(w.rows() == h.cols(), std::string(who) + ": weight has " + std::to_string(w.rows()) +
                                      " rows, input has " + std::to_string(h.cols()) + " columns");
    require(w.cols() == weights[0].cols(), std::string(who) + ": weight widths differ");
  }
}

}  // namespace

Matrix pgc_forward(const SPTensor& sp, const Matrix& h, std::span<const Matrix> weights,
                   GraphConvCache* cache) {
  check_weights(h, weights, "pgc_forward");
  const int distances = static_cast<int>(weights.size());
  require(distances - 1 <= sp.r, "pgc_forward: " + std::to_string(distances) +
                                     " weight matrices but SP tensor only has r=" +
                                     std::to_string(sp.r));
  const Eigen::Index c_out = weights[0].cols();
  Matrix out(h.rows(), c_out * distances);
  if (cache) cache->propagated.resize(weights.size());
  for (int j = 0; j < distances; ++j) {
    Matrix p = propagate(sp, j, h);
    out.middleCols(j * c_out, c_out) = tanh_of(p * weights[static_cast<std::size_t>(j)]);
    if (cache) cache->propagated[static_cast<std::size_t>(j)] = std::move(p);
  }
  if (cache) cache->output = out;
  return out;
}

Matrix pgc_backward(const SPTensor& sp, const GraphConvCache& cache,
                    std::span<const Matrix> weights, const Matrix& grad_out,
                    std::span<Matrix> grad_weights) {
  require(cache.propagated.size() == weights.size() && grad_weights.size() == weights.size(),
          "pgc_backward: cache/weights/gradients disagree on distance count");
  require(grad_out.rows() == cache.output.rows() && grad_out.cols() == cache.output.cols(),
          "pgc_backward: gradient shape does not match forward output");
  const Eigen::Index c_out = weights[0].cols();
  const Eigen::Index c_in = weights[0].rows();
  Matrix grad_h = Matrix::Zero(grad_out.rows(), c_in);
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const auto cols = static_cast<Eigen::Index>(j) * c_out;
    Matrix dz = tanh_grad(cache.output.middleCols(cols, c_out), grad_out.middleCols(cols, c_out));
    grad_weights[j].noalias() += cache.propagated[j].transpose() * dz;
    Matrix dp = dz * weights[j].transpose();
    grad_h += propagate_transpose(sp, static_cast<int>(j), dp);
  }
  return grad_h;
}

Matrix dgcnn_forward(const SPTensor& sp, const Matrix& h, const Matrix& weight,
                     GraphConvCache* cache) {
  check_weights(h, std::span<const Matrix>(&weight, 1), "dgcnn_forward");
  Matrix p = propagate_joint(sp, h);
  Matrix out = tanh_of(p * weight);
  if (cache) {
    cache->propagated.assign(1, std::move(p));
    cache->output = out;
  }
  return out;
}

Matrix dgcnn_backward(const SPTensor& sp, const GraphConvCache& cache, const Matrix& weight,
                      const Matrix& grad_out, Matrix& grad_weight) {
  require(cache.propagated.size() == 1, "dgcnn_backward: cache from a different layer kind");
  require(grad_out.rows() == cache.output.rows() && grad_out.cols() == cache.output.cols(),
          "dgcnn_backward: gradient shape does not match forward output");
  Matrix dz = tanh_grad(cache.output, grad_out);
  grad_weight.noalias() += cache.propagated[0].transpose() * dz;
  return propagate_joint_transpose(sp, dz * weight.transpose());
}

Matrix concat_layers(std::span<const Matrix> blocks) {
  require(!blocks.empty(), "concat_layers: no inputs");
  const Eigen::Index rows = blocks[0].rows();
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    require(b.rows() == rows, "concat_layers: row count mismatch (" + std::to_string(b.rows()) +
                                  " vs " + std::to_string(rows) + ")");
    cols += b.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return out;
}

std::vector<Matrix> split_columns(const Matrix& m, std::span<const Eigen::Index> widths) {
  const Eigen::Index total = std::accumulate(widths.begin(), widths.end(), Eigen::Index{0});
  require(total == m.cols(), "split_columns: widths do not sum to column count");
  std::vector<Matrix> out;
  out.reserve(widths.size());
  Eigen::Index at = 0;
  for (auto w : widths) {
    out.emplace_back(m.middleCols(at, w));
    at += w;
  }
  return out;
}

SortPoolResult sortpool_forward(const Matrix& h, std::size_t k) {
  require(k >= 1, "sortpool_forward: k must be positive");
  const auto n = static_cast<std::size_t>(h.rows());
  const Eigen::Index c = h.cols();
  std::vector<std::ptrdiff_t> order(n);
  std::iota(order.begin(), order.end(), std::ptrdiff_t{0});
  std::sort(order.begin(), order.end(), [&](std::ptrdiff_t a, std::ptrdiff_t b) {
    for (Eigen::Index col = c - 1; col >= 0; --col) {
      const double x = h(a, col);
      const double y = h(b, col);
      if (x != y) return x > y;
    }
    return a < b;
  });

  SortPoolResult res;
  res.record.input_rows = n;
  res.record.cols = static_cast<std::size_t>(c);
  res.record.source.assign(k, kPaddingRow);
  res.output = Matrix::Zero(static_cast<Eigen::Index>(k), c);
  const std::size_t kept = std::min(n, k);
  for (std::size_t i = 0; i < kept; ++i) {
    res.record.source[i] = order[i];
    res.output.row(static_cast<Eigen::Index>(i)) = h.row(order[i]);
  }
  return res;
}

Matrix sortpool_backward(const Matrix& grad_out, const SortPoolRecord& record) {
  require(static_cast<std::size_t>(grad_out.rows()) == record.source.size() &&
              static_cast<std::size_t>(grad_out.cols()) == record.cols,
          "sortpool_backward: gradient shape does not match the forward record");
  Matrix grad_in = Matrix::Zero(static_cast<Eigen::Index>(record.input_rows), grad_out.cols());
  for (std::size_t i = 0; i < record.source.size(); ++i) {
    const auto src = record.source[i];
    if (src == kPaddingRow) continue;
    require(src >= 0 && static_cast<std::size_t>(src) < record.input_rows,
            "sortpool_backward: corrupt record");
    grad_in.row(src) = grad_out.row(static_cast<Eigen::Index>(i));
  }
  return grad_in;
}

std::size_t conv1d_output_length(std::size_t length, std::size_t width, std::size_t stride) {
  if (width == 0 || stride == 0 || length < width) return 0;
  return (length - width) / stride + 1;
}

namespace {

Matrix im2col(const Matrix& input, std::size_t width, std::size_t stride) {
  const auto channels = static_cast<std::size_t>(input.cols());
  const std::size_t steps = conv1d_output_length(static_cast<std::size_t>(input.rows()), width, stride);
  Matrix cols(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(width * channels));
  for (std::size_t t = 0; t < steps; ++t) {
    const double* src = input.data() + t * stride * channels;
    std::copy(src, src + width * channels, cols.row(static_cast<Eigen::Index>(t)).data());
  }
  return cols;
}

void check_conv(const Matrix& input, const Matrix& weight, std::size_t width, std::size_t stride,
                const char* who) {
  require(width >= 1 && stride >= 1, std::string(who) + ": width and stride must be positive");
  require(static_cast<std::size_t>(input.rows()) >= width,
          std::string(who) + ": signal length " + std::to_string(input.rows()) +
              " shorter than kernel width " + std::to_string(width));
  require(static_cast<std::size_t>(weight.rows()) == width * static_cast<std::size_t>(input.cols()),
          std::string(who) + ": weight rows must equal width * in_channels");
}

}  // namespace

Matrix conv1d_forward(const Matrix& input, const Matrix& weight, const RowVector& bias,
                      std::size_t width, std::size_t stride) {
  check_conv(input, weight, width, stride, "conv1d_forward");
  require(bias.size() == weight.cols(), "conv1d_forward: bias size mismatch");
  Matrix out = im2col(input, width, stride) * weight;
  out.rowwise() += bias;
  return out;
}

Matrix conv1d_backward(const Matrix& input, const Matrix& weight, std::size_t width,
                       std::size_t stride, const Matrix& grad_out, Matrix& grad_weight,
                       RowVector& grad_bias) {
  check_conv(input, weight, width, stride, "conv1d_backward");
  const Matrix cols = im2col(input, width, stride);
  require(grad_out.rows() == cols.rows() && grad_out.cols() == weight.cols(),
          "conv1d_backward: gradient shape mismatch");
  grad_weight.noalias() += cols.transpose() * grad_out;
  grad_bias += grad_out.colwise().sum();
  const Matrix grad_cols = grad_out * weight.transpose();
  const auto channels = static_cast<std::size_t>(input.cols());
  Matrix grad_in = Matrix::Zero(input.rows(), input.cols());
  for (Eigen::Index t = 0; t < grad_cols.rows(); ++t) {
    double* dst = grad_in.data() + static_cast<std::size_t>(t) * stride * channels;
    const double* src = grad_cols.row(t).data();
    for (std::size_t i = 0; i < width * channels; ++i) dst[i] += src[i];
  }
  return grad_in;
}

Matrix maxpool1d_forward(const Matrix& input, std::size_t width, std::size_t stride,
                         MaxPoolRecord* record) {
  require(width >= 1 && stride >= 1, "maxpool1d_forward: width and stride must be positive");
  const std::size_t steps = conv1d_output_length(static_cast<std::size_t>(input.rows()), width, stride);
  require(steps >= 1, "maxpool1d_forward: signal shorter than pooling window");
  const Eigen::Index channels = input.cols();
  Matrix out(static_cast<Eigen::Index>(steps), channels);
  if (record) {
    record->input_rows = static_cast<std::size_t>(input.rows());
    record->argmax.assign(steps * static_cast<std::size_t>(channels), 0);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    const auto start = static_cast<Eigen::Index>(t * stride);
    for (Eigen::Index c = 0; c < channels; ++c) {
      Eigen::Index best = start;
      for (Eigen::Index u = 1; u < static_cast<Eigen::Index>(width); ++u)
        if (input(start + u, c) > input(best, c)) best = start + u;
      out(static_cast<Eigen::Index>(t), c) = input(best, c);
      if (record) record->argmax[t * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)] = best;
    }
  }
  return out;
}

Matrix maxpool1d_backward(const Matrix& grad_out, const MaxPoolRecord& record) {
  require(static_cast<std::size_t>(grad_out.size()) == record.argmax.size(),
          "maxpool1d_backward: gradient shape does not match the forward record");
  const Eigen::Index channels = grad_out.cols();
  Matrix grad_in = Matrix::Zero(static_cast<Eigen::Index>(record.input_rows), channels);
  for (Eigen::Index t = 0; t < grad_out.rows(); ++t)
    for (Eigen::Index c = 0; c < channels; ++c)
      grad_in(record.argmax[static_cast<std::size_t>(t * channels + c)], c) += grad_out(t, c);
  return grad_in;
}

RowVector dense_forward(const RowVector& x, const Matrix& weight, const RowVector& bias) {
  require(x.size() == weight.rows(), "dense_forward: input width " + std::to_string(x.size()) +
                                         " != weight rows " + std::to_string(weight.rows()));
  require(bias.size() == weight.cols(), "dense_forward: bias size mismatch");
  RowVector y = x * weight;
  y += bias;
  return y;
}

RowVector dense_backward(const RowVector& x, const Matrix& weight, const RowVector& grad_out,
                         Matrix& grad_weight, RowVector& grad_bias) {
  require(grad_out.size() == weight.cols(), "dense_backward: gradient size mismatch");
  grad_weight.noalias() += x.transpose() * grad_out;
  grad_bias += grad_out;
  return grad_out * weight.transpose();
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& y, const Matrix& grad_out) {
  return (y.array() > 0.0).select(grad_out, 0.0);
}

RowVector dropout_mask(Eigen::Index size, double rate, std::mt19937_64& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must be in [0, 1)");
  RowVector mask(size);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < size; ++i) mask[i] = u(rng) < rate ? 0.0 : keep;
  return mask;
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

LossAndGrad softmax_cross_entropy(const Vector& logits, int target) {
  require(logits.size() >= 2, "softmax_cross_entropy: need at least two classes");
  require(target >= 0 && target < logits.size(),
          "softmax_cross_entropy: target " + std::to_string(target) + " out of range");
  const double m = logits.maxCoeff();
  const Vector shifted = (logits.array() - m).matrix();
  const double log_z = std::log(shifted.array().exp().sum());
  LossAndGrad out;
  out.loss = log_z - shifted[target];
  out.grad = (shifted.array() - log_z).exp().matrix();
  out.grad[target] -= 1.0;
  return out;
}

}  // namespace pgc::nn
