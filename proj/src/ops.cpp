#include "aesthnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace aesthnet {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

void accumulate(detail::Node& parent, std::span<const double> g) {
    if (!parent.requires_grad) return;
    parent.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) parent.grad[i] += g[i];
}

// Rows/cols view of a rank-1 or rank-2 tensor: rank-1 is one row.
std::pair<std::size_t, std::size_t> as_matrix(const Tensor& t) {
    if (t.rank() == 1) return {1, t.dim(0)};
    if (t.rank() == 2) return {t.dim(0), t.dim(1)};
    throw DimensionError("expected rank 1 or 2 tensor, got shape " + shape_str(t.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return detail::make_op_result(a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
        accumulate(*n.parents[0], n.grad);
        accumulate(*n.parents[1], n.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return detail::make_op_result(a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
        accumulate(*n.parents[0], n.grad);
        if (n.parents[1]->requires_grad) {
            n.parents[1]->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) n.parents[1]->grad[i] -= n.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return detail::make_op_result(a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * pb.data[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i] * pa.data[i];
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    return detail::make_op_result(a.shape(), std::move(out), {a}, [c](detail::Node& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * c;
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a.data()[i * k + p];
            if (av == 0.0) continue;
            const double* brow = b.data().data() + p * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    return detail::make_op_result({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& nd) {
        auto& pa = *nd.parents[0];
        auto& pb = *nd.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            // dA = G · Bᵀ
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    const double* grow = nd.grad.data() + i * n;
                    const double* brow = pb.data.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    pa.grad[i * k + p] += acc;
                }
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            // dB = Aᵀ · G
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = nd.grad.data() + i * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = pa.data[i * k + p];
                    if (av == 0.0) continue;
                    double* brow = pb.grad.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
            }
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    auto [m, k] = as_matrix(x);
    if (w.rank() != 2 || w.dim(0) != k)
        throw DimensionError("linear: input shape " + shape_str(x.shape()) +
                             " does not match weight shape " + shape_str(w.shape()));
    const std::size_t n = w.dim(1);
    if (b.rank() != 1 || b.dim(0) != n)
        throw DimensionError("linear: bias shape " + shape_str(b.shape()) +
                             " does not match weight shape " + shape_str(w.shape()));
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] = b.data()[j];
        for (std::size_t p = 0; p < k; ++p) {
            const double xv = x.data()[i * k + p];
            if (xv == 0.0) continue;
            const double* wrow = w.data().data() + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += xv * wrow[j];
        }
    }
    Shape out_shape = (x.rank() == 1) ? Shape{n} : Shape{m, n};
    return detail::make_op_result(std::move(out_shape), std::move(out), {x, w, b},
                                  [m, k, n](detail::Node& nd) {
        auto& px = *nd.parents[0];
        auto& pw = *nd.parents[1];
        auto& pb = *nd.parents[2];
        if (px.requires_grad) {
            px.ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    const double* grow = nd.grad.data() + i * n;
                    const double* wrow = pw.data.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * wrow[j];
                    px.grad[i * k + p] += acc;
                }
        }
        if (pw.requires_grad) {
            pw.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = nd.grad.data() + i * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const double xv = px.data[i * k + p];
                    if (xv == 0.0) continue;
                    double* wrow = pw.grad.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) wrow[j] += xv * grow[j];
                }
            }
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = nd.grad.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) pb.grad[j] += grow[j];
            }
        }
    });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.data()[i]);
    return detail::make_op_result(x.shape(), std::move(out), {x}, [](detail::Node& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            if (p.data[i] > 0.0) p.grad[i] += n.grad[i];
    });
}

Tensor softmax(const Tensor& x) {
    auto [m, k] = as_matrix(x);
    if (k == 0) throw DimensionError("softmax: empty input");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = x.data().data() + i * k;
        double* orow = out.data() + i * k;
        double mx = *std::max_element(row, row + k);
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            orow[j] = std::exp(row[j] - mx);
            denom += orow[j];
        }
        for (std::size_t j = 0; j < k; ++j) orow[j] /= denom;
    }
    std::vector<double> y = out;
    return detail::make_op_result(x.shape(), std::move(out), {x},
                                  [m, k, y = std::move(y)](detail::Node& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
            const double* yr = y.data() + i * k;
            const double* gr = n.grad.data() + i * k;
            double dot = 0.0;
            for (std::size_t j = 0; j < k; ++j) dot += yr[j] * gr[j];
            for (std::size_t j = 0; j < k; ++j) p.grad[i * k + j] += yr[j] * (gr[j] - dot);
        }
    });
}

Tensor l2_normalize(const Tensor& x) {
    if (x.rank() != 1 || x.size() == 0)
        throw DimensionError("l2_normalize: expected nonempty rank-1 tensor, got shape " +
                             shape_str(x.shape()));
    double norm2 = 0.0;
    for (double v : x.data()) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) throw ValidationError("l2_normalize: degenerate zero-norm input");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] / norm;
    std::vector<double> y = out;
    return detail::make_op_result(x.shape(), std::move(out), {x},
                                  [norm, y = std::move(y)](detail::Node& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        double dot = 0.0;
        for (std::size_t i = 0; i < n.grad.size(); ++i) dot += n.grad[i] * y[i];
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            p.grad[i] += (n.grad[i] - y[i] * dot) / norm;
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.size())
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                             shape_str(shape));
    std::vector<double> out(x.data().begin(), x.data().end());
    return detail::make_op_result(std::move(shape), std::move(out), {x}, [](detail::Node& n) {
        accumulate(*n.parents[0], n.grad);
    });
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    return detail::make_op_result({}, {acc}, {x}, [](detail::Node& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (double& g : p.grad) g += n.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw DimensionError("mean: empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor mean_of(const std::vector<Tensor>& scalars) {
    if (scalars.empty()) throw DimensionError("mean_of: empty list");
    double acc = 0.0;
    for (const auto& t : scalars) acc += t.value();
    const double inv = 1.0 / static_cast<double>(scalars.size());
    return detail::make_op_result({}, {acc * inv}, scalars, [inv](detail::Node& n) {
        for (auto& p : n.parents) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            p->grad[0] += n.grad[0] * inv;
        }
    });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw ValidationError("dropout: rate must be < 1");
    const double keep = 1.0 - rate;
    std::vector<double> mask(x.size());
    for (auto& m : mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * mask[i];
    return detail::make_op_result(x.shape(), std::move(out), {x},
                                  [mask = std::move(mask)](detail::Node& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * mask[i];
    });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& targets) {
    auto [m, k] = as_matrix(logits);
    if (targets.size() != m)
        throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                             " targets for " + std::to_string(m) + " rows");
    for (std::size_t t : targets)
        if (t >= k)
            throw ValidationError("cross_entropy: target class " + std::to_string(t) +
                                  " out of range [0," + std::to_string(k) + ")");
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = logits.data().data() + i * k;
        double mx = *std::max_element(row, row + k);
        double lse = 0.0;
        for (std::size_t j = 0; j < k; ++j) lse += std::exp(row[j] - mx);
        total += mx + std::log(lse) - row[targets[i]];
    }
    const double inv = 1.0 / static_cast<double>(m);
    return detail::make_op_result({}, {total * inv}, {logits},
                                  [m, k, targets, inv](detail::Node& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = n.grad[0] * inv;
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = p.data.data() + i * k;
            double mx = *std::max_element(row, row + k);
            double denom = 0.0;
            for (std::size_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
            for (std::size_t j = 0; j < k; ++j) {
                double sm = std::exp(row[j] - mx) / denom;
                p.grad[i * k + j] += g * (sm - (j == targets[i] ? 1.0 : 0.0));
            }
        }
    });
}

Tensor binary_cross_entropy(const Tensor& logits, const std::vector<double>& targets) {
    if (targets.size() != logits.size())
        throw DimensionError("binary_cross_entropy: " + std::to_string(targets.size()) +
                             " targets for " + std::to_string(logits.size()) + " logits");
    double total = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double z = logits.data()[i], t = targets[i];
        // max(z,0) - z t + log(1 + exp(-|z|))
        total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
    const double inv = 1.0 / static_cast<double>(targets.size());
    return detail::make_op_result({}, {total * inv}, {logits}, [targets, inv](detail::Node& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = n.grad[0] * inv;
        for (std::size_t i = 0; i < targets.size(); ++i)
            p.grad[i] += g * (sigmoid(p.data[i]) - targets[i]);
    });
}

Tensor emd_loss(const Tensor& pred, const Tensor& target, double r, bool squared) {
    if (pred.shape() != target.shape())
        throw DimensionError("emd_loss: bucket count mismatch " + shape_str(pred.shape()) +
                             " vs " + shape_str(target.shape()));
    if (r < 1.0) throw ValidationError("emd_loss: r must be >= 1");
    auto [m, B] = as_matrix(pred);
    if (B == 0) throw DimensionError("emd_loss: empty distribution");
    for (std::size_t i = 0; i < m; ++i) {
        double sp = 0.0, sq = 0.0;
        for (std::size_t j = 0; j < B; ++j) {
            sp += pred.data()[i * B + j];
            sq += target.data()[i * B + j];
        }
        if (std::abs(sp - 1.0) > 1e-4 || std::abs(sq - 1.0) > 1e-4)
            throw ValidationError("emd_loss: distribution row " + std::to_string(i) +
                                  " is not l1-normalized (sums " + std::to_string(sp) + ", " +
                                  std::to_string(sq) + ")");
    }
    const double invB = 1.0 / static_cast<double>(B);
    std::vector<double> per_row(m);
    std::vector<double> diffs(m * B);  // CDF differences, kept for backward
    for (std::size_t i = 0; i < m; ++i) {
        double cp = 0.0, cq = 0.0, s = 0.0;
        for (std::size_t j = 0; j < B; ++j) {
            cp += pred.data()[i * B + j];
            cq += target.data()[i * B + j];
            diffs[i * B + j] = cp - cq;
            s += std::pow(std::abs(cp - cq), r) * invB;
        }
        per_row[i] = squared ? s : std::pow(s, 1.0 / r);
    }
    double loss = 0.0;
    for (double v : per_row) loss += v;
    loss /= static_cast<double>(m);
    return detail::make_op_result({}, {loss}, {pred, target},
                                  [m, B, r, squared, invB, per_row = std::move(per_row),
                                   diffs = std::move(diffs)](detail::Node& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = n.grad[0] / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            // d per_row / d diff_k, then prefix-to-suffix for d/d pred_j.
            double outer;
            if (squared) {
                outer = 1.0;
            } else {
                if (per_row[i] == 0.0) continue;
                // per_row = S^(1/r): chain through S.
                outer = std::pow(per_row[i], 1.0 - r) / r;
            }
            std::vector<double> dS(B);
            for (std::size_t k = 0; k < B; ++k) {
                const double d = diffs[i * B + k];
                dS[k] = invB * r * std::pow(std::abs(d), r - 1.0) * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
            }
            double suffix = 0.0;
            for (std::size_t j = B; j-- > 0;) {
                suffix += dS[j];
                p.grad[i * B + j] += g * outer * suffix;
            }
        }
    });
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_finite(std::span<const double> values, const std::string& what) {
    for (double v : values)
        if (!std::isfinite(v)) throw NumericError(what + ": non-finite value encountered");
}

}  // namespace aesthnet
