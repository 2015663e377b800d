#pragma once

#include <cstddef>
#include <vector>

#include "aesthnet/rng.hpp"
#include "aesthnet/tensor.hpp"

namespace aesthnet {

// Elementwise, same-shape operands.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// C = A[m,k] · B[k,n].
Tensor matmul(const Tensor& a, const Tensor& b);

// y = x·W + b with W stored [n_in, n_out]; x may be [n_in] or [m, n_in].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);

// Softmax over the last dimension (rank 1 or 2).
Tensor softmax(const Tensor& x);

// Unit-Euclidean-norm rescaling of a rank-1 tensor. Zero vector is rejected.
Tensor l2_normalize(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Mean of scalar tensors as a single tape node.
Tensor mean_of(const std::vector<Tensor>& scalars);

// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// Mean over rows of -log softmax(logits)[target]. logits: [K] or [n, K].
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& targets);

// Mean over all elements of the stabilized logit-space binary cross-entropy.
Tensor binary_cross_entropy(const Tensor& logits, const std::vector<double>& targets);

// EMD between l1-normalized distributions over shared buckets:
//   ((1/B) sum_k |CDF_p(k) - CDF_q(k)|^r)^(1/r),
// mean over rows for batched [n, B] input. Gradients flow to `pred` only.
// squared=true drops the 1/r root.
Tensor emd_loss(const Tensor& pred, const Tensor& target, double r, bool squared = false);

double sigmoid(double z);

// Throws NumericError naming `what` if any element is NaN/Inf.
void check_finite(std::span<const double> values, const std::string& what);

}  // namespace aesthnet
