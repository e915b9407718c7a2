#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "pgc/matrix.hpp"
#include "pgc/sp_tensor.hpp"

// Layer kernels with hand-derived backward passes. Every *_backward
// accumulates (+=) parameter gradients into the buffers it is given and
// returns the gradient with respect to the layer input.
namespace pgc::nn {

// ---------------------------------------------------------------------------
// Graph convolutions

struct GraphConvCache {
  std::vector<Matrix> propagated;  // operator applied to h, one per weight matrix
  Matrix output;                   // post-activation
};

/// Parametric graph convolution: column blocks j = 0..R of
/// tanh(propagate(sp, j, h) * weights[j]), with R = weights.size() - 1 <= sp.r.
Matrix pgc_forward(const SPTensor& sp, const Matrix& h, std::span<const Matrix> weights,
                   GraphConvCache* cache = nullptr);

Matrix pgc_backward(const SPTensor& sp, const GraphConvCache& cache,
                    std::span<const Matrix> weights, const Matrix& grad_out,
                    std::span<Matrix> grad_weights);

/// Random-walk normalized convolution tanh(mean_{self + neighbors}(h) * weight).
Matrix dgcnn_forward(const SPTensor& sp, const Matrix& h, const Matrix& weight,
                     GraphConvCache* cache = nullptr);

Matrix dgcnn_backward(const SPTensor& sp, const GraphConvCache& cache, const Matrix& weight,
                      const Matrix& grad_out, Matrix& grad_weight);

// ---------------------------------------------------------------------------
// Concatenation

Matrix concat_layers(std::span<const Matrix> blocks);

/// Inverse of concat_layers for gradients: splits columns by block width.
std::vector<Matrix> split_columns(const Matrix& m, std::span<const Eigen::Index> widths);

// ---------------------------------------------------------------------------
// SortPooling

inline constexpr std::ptrdiff_t kPaddingRow = -1;

struct SortPoolRecord {
  std::size_t input_rows = 0;
  std::size_t cols = 0;
  /// Source node of every output row, or kPaddingRow.
  std::vector<std::ptrdiff_t> source;
};

struct SortPoolResult {
  Matrix output;
  SortPoolRecord record;
};

/// Sorts rows in descending lexicographic order keyed on the last column, then
/// the one before it, and so on; remaining ties go to the lower node index.
/// Keeps the first k rows, zero-padding when n < k.
SortPoolResult sortpool_forward(const Matrix& h, std::size_t k);

Matrix sortpool_backward(const Matrix& grad_out, const SortPoolRecord& record);

// ---------------------------------------------------------------------------
// 1D read-out

/// Cross-correlation over a (length x in_channels) signal. `weight` is
/// (width * in_channels) x filters with row index u * in_channels + c.
/// Output is (floor((length - width) / stride) + 1) x filters.
Matrix conv1d_forward(const Matrix& input, const Matrix& weight, const RowVector& bias,
                      std::size_t width, std::size_t stride);

Matrix conv1d_backward(const Matrix& input, const Matrix& weight, std::size_t width,
                       std::size_t stride, const Matrix& grad_out, Matrix& grad_weight,
                       RowVector& grad_bias);

std::size_t conv1d_output_length(std::size_t length, std::size_t width, std::size_t stride);

struct MaxPoolRecord {
  std::size_t input_rows = 0;
  std::vector<Eigen::Index> argmax;  // row-major over (output row, channel)
};

/// Channel-wise max over windows of `width` rows taken every `stride` rows.
/// Ties resolve to the earliest row of the window.
Matrix maxpool1d_forward(const Matrix& input, std::size_t width, std::size_t stride,
                         MaxPoolRecord* record = nullptr);

Matrix maxpool1d_backward(const Matrix& grad_out, const MaxPoolRecord& record);

/// y = x * weight + bias for a single row vector x.
RowVector dense_forward(const RowVector& x, const Matrix& weight, const RowVector& bias);

RowVector dense_backward(const RowVector& x, const Matrix& weight, const RowVector& grad_out,
                         Matrix& grad_weight, RowVector& grad_bias);

Matrix relu(const Matrix& x);
/// Gradient through relu given the forward output y.
Matrix relu_backward(const Matrix& y, const Matrix& grad_out);

/// Inverted dropout mask: entries are 0 with probability `rate`, else 1/(1-rate).
RowVector dropout_mask(Eigen::Index size, double rate, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Loss

struct LossAndGrad {
  double loss = 0.0;
  Vector grad;
};

Vector softmax(const Vector& logits);

/// -log softmax(logits)[target] with max-subtraction; grad = softmax - onehot.
LossAndGrad softmax_cross_entropy(const Vector& logits, int target);

}  // namespace pgc::nn
