#include "aesthnet/hyper.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "aesthnet/metrics.hpp"
#include "checkpoint_io.hpp"

namespace aesthnet {

void AestheticNetSpec::validate() const {
    if (layer_dims.size() < 2)
        throw ValidationError("aesthetic spec needs at least input and output dims");
    for (auto d : layer_dims)
        if (d == 0) throw ValidationError("aesthetic spec dims must be positive");
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
    std::vector<double> d(shape_numel(shape));
    for (auto& v : d) v = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(d), true);
}

Tensor const_vector(const std::vector<double>& v) {
    return Tensor({v.size()}, v, false);
}

}  // namespace

std::vector<NamedParam> HyperNetParams::named_params() {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string p = "hyper.block" + std::to_string(i) + ".";
        out.push_back({p + "W_r", blocks[i].W_r});
        out.push_back({p + "b_r", blocks[i].b_r});
        out.push_back({p + "W_w", blocks[i].W_w});
        out.push_back({p + "b_w", blocks[i].b_w});
        out.push_back({p + "W_b", blocks[i].W_b});
        out.push_back({p + "b_b", blocks[i].b_b});
    }
    return out;
}

HyperNetParams HyperNetParams::clone() const {
    HyperNetParams c;
    c.spec = spec;
    c.E = E;
    c.d = d;
    auto copy = [](const Tensor& t) {
        return Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), true);
    };
    for (const auto& b : blocks)
        c.blocks.push_back({copy(b.W_r), copy(b.b_r), copy(b.W_w), copy(b.b_w), copy(b.W_b),
                            copy(b.b_b)});
    return c;
}

std::size_t HyperNetParams::param_count() const {
    std::size_t total = 0;
    for (const auto& b : blocks)
        total += b.W_r.size() + b.b_r.size() + b.W_w.size() + b.b_w.size() + b.W_b.size() +
                 b.b_b.size();
    return total;
}

HyperNetParams init_hyper_net(const AestheticNetSpec& spec, std::size_t E, std::size_t d,
                              Rng rng) {
    spec.validate();
    HyperNetParams hp;
    hp.spec = spec;
    hp.E = E;
    hp.d = d;
    for (std::size_t i = 0; i < spec.M(); ++i) {
        const std::size_t n_in = spec.layer_dims[i];
        const std::size_t n_out = spec.layer_dims[i + 1];
        HyperBlock b;
        b.W_r = uniform_tensor({E, d}, 1.0 / std::sqrt(static_cast<double>(E)), rng);
        b.b_r = Tensor::zeros({d}, true);
        // Weight head scaled so generated matrices start near ordinary MLP
        // init magnitudes (unscaled heads explode the initial logits).
        const double w_bound = 1.0 / std::sqrt(static_cast<double>(d * n_in));
        b.W_w = uniform_tensor({d, n_in * n_out}, w_bound, rng);
        b.b_w = uniform_tensor({n_in * n_out}, 1.0 / std::sqrt(static_cast<double>(n_in)), rng);
        b.W_b = uniform_tensor({d, n_out}, w_bound, rng);
        b.b_b = Tensor::zeros({n_out}, true);
        hp.blocks.push_back(std::move(b));
    }
    return hp;
}

GeneratedParams hyper_generate(const Tensor& e_s, HyperNetParams& hp) {
    if (e_s.rank() != 1 || e_s.dim(0) != hp.E)
        throw DimensionError("hyper_generate: embedding shape " + shape_str(e_s.shape()) +
                             " does not match E=" + std::to_string(hp.E));
    Tensor e_hat = l2_normalize(e_s);
    GeneratedParams out;
    out.reserve(hp.blocks.size());
    for (std::size_t i = 0; i < hp.blocks.size(); ++i) {
        auto& b = hp.blocks[i];
        const std::size_t n_in = hp.spec.layer_dims[i];
        const std::size_t n_out = hp.spec.layer_dims[i + 1];
        Tensor e_r = relu(linear(e_hat, b.W_r, b.b_r));
        Tensor w_flat = linear(e_r, b.W_w, b.b_w);
        Tensor w = reshape(w_flat, {n_in, n_out});
        Tensor bias = linear(e_r, b.W_b, b.b_b);
        out.emplace_back(std::move(w), std::move(bias));
    }
    return out;
}

Tensor aesthetic_forward(const Tensor& e_b, const GeneratedParams& gp) {
    if (gp.empty()) throw ValidationError("aesthetic_forward: no generated layers");
    Tensor x = e_b;
    for (std::size_t i = 0; i + 1 < gp.size(); ++i)
        x = relu(linear(x, gp[i].first, gp[i].second));
    x = linear(x, gp.back().first, gp.back().second);
    return softmax(x);
}

// --- variants ---------------------------------------------------------------

VariantKind parse_variant(const std::string& name) {
    if (name == "full") return VariantKind::full;
    if (name == "attr_linear") return VariantKind::attr_linear;
    if (name == "mlp_only") return VariantKind::mlp_only;
    if (name == "style_only") return VariantKind::style_only;
    if (name == "comp_only") return VariantKind::comp_only;
    throw ValidationError("unknown variant '" + name +
                          "' (expected full|attr_linear|mlp_only|style_only|comp_only)");
}

std::string variant_name(VariantKind kind) {
    switch (kind) {
        case VariantKind::full: return "full";
        case VariantKind::attr_linear: return "attr_linear";
        case VariantKind::mlp_only: return "mlp_only";
        case VariantKind::style_only: return "style_only";
        case VariantKind::comp_only: return "comp_only";
    }
    throw ValidationError("unknown variant kind");
}

bool variant_uses_hyper(VariantKind kind) {
    return kind == VariantKind::full || kind == VariantKind::style_only ||
           kind == VariantKind::comp_only;
}

bool variant_uses_attr(VariantKind kind) {
    return kind != VariantKind::mlp_only;
}

std::vector<double> AestheticModel::trunk_embedding(const std::vector<double>& e_b) {
    if (!attr) throw ValidationError("variant '" + variant_name(kind) + "' has no attribute net");
    auto fwd = attr_forward(const_vector(e_b), *attr);
    return {fwd.e_s.data().begin(), fwd.e_s.data().end()};
}

Tensor AestheticModel::forward(const std::vector<double>& e_b_values,
                               const std::vector<double>* e_s_values) {
    Tensor e_b = const_vector(e_b_values);
    if (variant_uses_hyper(kind)) {
        std::vector<double> es = e_s_values ? *e_s_values : trunk_embedding(e_b_values);
        auto gp = hyper_generate(const_vector(es), *hyper);
        return aesthetic_forward(e_b, gp);
    }
    if (kind == VariantKind::attr_linear) {
        std::vector<double> es = e_s_values ? *e_s_values : trunk_embedding(e_b_values);
        return softmax(linear(l2_normalize(const_vector(es)), W_lin, b_lin));
    }
    // mlp_only: ordinarily learned layers over the same spec dims.
    Tensor x = e_b;
    for (std::size_t i = 0; i + 1 < mlp.size(); ++i)
        x = relu(linear(x, mlp[i].first, mlp[i].second));
    x = linear(x, mlp.back().first, mlp.back().second);
    return softmax(x);
}

std::vector<double> AestheticModel::predict(const std::vector<double>& e_b) {
    auto q = forward(e_b);
    return {q.data().begin(), q.data().end()};
}

std::vector<NamedParam> AestheticModel::trainable_params() {
    if (variant_uses_hyper(kind)) return hyper->named_params();
    if (kind == VariantKind::attr_linear) return {{"lin.W", W_lin}, {"lin.b", b_lin}};
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < mlp.size(); ++i) {
        out.push_back({"mlp.layer" + std::to_string(i) + ".W", mlp[i].first});
        out.push_back({"mlp.layer" + std::to_string(i) + ".b", mlp[i].second});
    }
    return out;
}

std::size_t AestheticModel::trainable_param_count() {
    std::size_t total = 0;
    for (auto& p : trainable_params()) total += p.tensor.size();
    return total;
}

AestheticModel AestheticModel::clone() const {
    AestheticModel c;
    c.kind = kind;
    c.spec = spec;
    auto copy = [](const Tensor& t) {
        return Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()),
                      t.requires_grad());
    };
    if (attr) {
        c.attr = attr->clone();
        // Stage-2 keeps the attribute net frozen.
        for (auto& np : c.attr->named_params()) np.tensor.set_requires_grad(false);
    }
    if (hyper) c.hyper = hyper->clone();
    if (W_lin.defined()) {
        c.W_lin = copy(W_lin);
        c.b_lin = copy(b_lin);
    }
    for (const auto& [w, b] : mlp) c.mlp.emplace_back(copy(w), copy(b));
    return c;
}

AestheticModel build_variant(VariantKind kind, const AestheticNetSpec& spec, std::size_t d,
                             std::optional<AttributeNetParams> attr, Rng rng) {
    spec.validate();
    AestheticModel m;
    m.kind = kind;
    m.spec = spec;
    if (variant_uses_attr(kind)) {
        if (!attr)
            throw ValidationError("variant '" + variant_name(kind) +
                                  "' requires a trained attribute net");
        if (attr->D != spec.D())
            throw DimensionError("attribute net D=" + std::to_string(attr->D) +
                                 " does not match spec D=" + std::to_string(spec.D()));
        m.attr = std::move(attr);
        for (auto& np : m.attr->named_params()) np.tensor.set_requires_grad(false);
    }
    if (variant_uses_hyper(kind)) {
        m.hyper = init_hyper_net(spec, m.attr->E, d, rng.fork("hyper"));
    } else if (kind == VariantKind::attr_linear) {
        const std::size_t E = m.attr->E;
        const double bound = 1.0 / std::sqrt(static_cast<double>(E));
        Rng r = rng.fork("lin");
        std::vector<double> w(E * spec.B());
        for (auto& v : w) v = r.uniform(-bound, bound);
        m.W_lin = Tensor({E, spec.B()}, std::move(w), true);
        m.b_lin = Tensor::zeros({spec.B()}, true);
    } else {
        Rng r = rng.fork("mlp");
        for (std::size_t i = 0; i + 1 < spec.layer_dims.size(); ++i) {
            const std::size_t n_in = spec.layer_dims[i];
            const std::size_t n_out = spec.layer_dims[i + 1];
            const double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
            std::vector<double> w(n_in * n_out);
            for (auto& v : w) v = r.uniform(-bound, bound);
            m.mlp.emplace_back(Tensor({n_in, n_out}, std::move(w), true),
                               Tensor::zeros({n_out}, true));
        }
    }
    return m;
}

// --- stage-2 training -------------------------------------------------------

HyperTrainResult train_hyper(const AesDataset& ds, AestheticModel model,
                             const HyperTrainConfig& cfg) {
    if (ds.embeddings.empty() || ds.embeddings.size() != ds.distributions.size())
        throw ValidationError("train_hyper: dataset empty or misaligned");
    const std::size_t n = ds.embeddings.size();
    const std::size_t B = model.spec.B();
    for (const auto& q : ds.distributions) {
        if (q.buckets() != B)
            throw DimensionError("train_hyper: target has " + std::to_string(q.buckets()) +
                                 " buckets, spec expects " + std::to_string(B));
        double total = 0.0;
        for (double p : q.probs) total += p;
        if (std::abs(total - 1.0) > 1e-4)
            throw ValidationError("train_hyper: unnormalizable target distribution '" + q.id +
                                  "'");
    }

    Rng base(cfg.seed);

    HyperTrainResult result;
    result.model = model.clone();
    result.best_epoch = 0;
    if (cfg.stage.epochs == 0) return result;

    // Frozen trunk embeddings are fixed per sample; compute them once.
    std::vector<std::vector<double>> trunk(n);
    const bool needs_trunk = variant_uses_attr(model.kind);
    if (needs_trunk)
        for (std::size_t i = 0; i < n; ++i)
            trunk[i] = model.trunk_embedding(ds.embeddings[i].values);

    // Train/val split on indices.
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    {
        Rng split_rng = base.fork("split");
        split_rng.shuffle(rows);
    }
    std::size_t n_val =
        static_cast<std::size_t>(std::lround(cfg.stage.val_fraction * static_cast<double>(n)));
    if (cfg.stage.val_fraction > 0.0 && n_val < 2 && n > 4) n_val = 2;
    std::vector<std::size_t> val_rows(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_rows(rows.begin() + static_cast<std::ptrdiff_t>(n_val),
                                        rows.end());
    if (train_rows.empty()) throw ValidationError("train_hyper: empty training split");

    AdamConfig adam_cfg;
    adam_cfg.lr = cfg.stage.lr;
    adam_cfg.decay_every = cfg.stage.decay_every;
    adam_cfg.decay_factor = cfg.stage.decay_factor;
    Adam opt(model.trainable_params(), adam_cfg);

    Rng shuffle_rng = base.fork("shuffle");
    const bool has_val = val_rows.size() >= 2;
    double best_srocc = -2.0;

    auto val_srocc = [&]() {
        if (val_rows.size() < 2) return 0.0;
        std::vector<double> mu_pred, mu_truth;
        for (auto r : val_rows) {
            auto q = model.forward(ds.embeddings[r].values, needs_trunk ? &trunk[r] : nullptr)
                         .detach();
            ScoreDistribution pd{ds.embeddings[r].id,
                                 {q.data().begin(), q.data().end()},
                                 ds.distributions[r].bucket_values};
            mu_pred.push_back(mean_score(pd));
            mu_truth.push_back(mean_score(ds.distributions[r]));
        }
        try {
            return srocc(mu_pred, mu_truth);
        } catch (const ValidationError&) {
            return -1.0;  // constant predictions rank worst
        }
    };

    for (std::size_t epoch = 0; epoch < cfg.stage.epochs; ++epoch) {
        opt.apply_decay(epoch);
        std::vector<std::size_t> order = train_rows;
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.stage.batch_size) {
            const std::size_t end = std::min(start + cfg.stage.batch_size, order.size());
            std::vector<Tensor> sample_losses;
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t r = order[i];
                Tensor q_hat =
                    model.forward(ds.embeddings[r].values, needs_trunk ? &trunk[r] : nullptr);
                Tensor q = Tensor({B}, ds.distributions[r].probs, false);
                sample_losses.push_back(emd_loss(q_hat, q, cfg.emd_r, cfg.emd_squared));
            }
            auto loss = mean_of(sample_losses);
            if (!std::isfinite(loss.value()))
                throw NumericError("train_hyper: non-finite loss at epoch " +
                                   std::to_string(epoch) + " step " + std::to_string(steps));
            loss.backward();
            opt.step();
            epoch_loss += loss.value();
            ++steps;
        }
        const double vs = has_val ? val_srocc() : 0.0;
        result.history.push_back(
            {epoch, steps ? epoch_loss / static_cast<double>(steps) : 0.0, vs});
        if (has_val && vs > best_srocc) {  // ties keep the earlier epoch
            best_srocc = vs;
            result.model = model.clone();
            result.best_epoch = epoch;
        }
    }
    if (!has_val) {
        // Without a validation split the final model is the result.
        result.model = model.clone();
        result.best_epoch = cfg.stage.epochs - 1;
    }
    return result;
}

void save_aes_history_csv(const std::vector<AesEpochRow>& history, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for writing");
    f << "epoch,loss,val_srocc\n";
    char buf[96];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", r.epoch, r.loss, r.val_srocc);
        f << buf;
    }
}

// --- checkpoints ------------------------------------------------------------

void save_model_checkpoint(const AestheticModel& m, const std::string& path) {
    auto f = ckpt::open_out(path);
    f.write("HYPR", 4);
    ckpt::put_u32(f, 1);  // version
    ckpt::put_u32(f, static_cast<std::uint32_t>(m.kind));
    ckpt::put_u32(f, static_cast<std::uint32_t>(m.spec.layer_dims.size()));
    for (auto d : m.spec.layer_dims) ckpt::put_u32(f, static_cast<std::uint32_t>(d));
    if (variant_uses_hyper(m.kind)) {
        ckpt::put_u32(f, static_cast<std::uint32_t>(m.hyper->E));
        ckpt::put_u32(f, static_cast<std::uint32_t>(m.hyper->d));
        for (const auto& b : m.hyper->blocks)
            for (const Tensor* t : {&b.W_r, &b.b_r, &b.W_w, &b.b_w, &b.W_b, &b.b_b})
                ckpt::put_blob(f, *t);
    } else if (m.kind == VariantKind::attr_linear) {
        ckpt::put_u32(f, static_cast<std::uint32_t>(m.W_lin.dim(0)));  // E
        ckpt::put_u32(f, 0);
        ckpt::put_blob(f, m.W_lin);
        ckpt::put_blob(f, m.b_lin);
    } else {
        ckpt::put_u32(f, 0);
        ckpt::put_u32(f, 0);
        for (const auto& [w, b] : m.mlp) {
            ckpt::put_blob(f, w);
            ckpt::put_blob(f, b);
        }
    }
}

AestheticModel load_model_checkpoint(const std::string& path,
                                     std::optional<AttributeNetParams> attr) {
    auto f = ckpt::open_in(path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "HYPR", 4) != 0)
        throw ValidationError(path + ": bad magic, not an aesthetic model checkpoint");
    const auto version = ckpt::get_u32(f, path);
    if (version != 1)
        throw ValidationError(path + ": unsupported checkpoint version " +
                              std::to_string(version));
    AestheticModel m;
    m.kind = static_cast<VariantKind>(ckpt::get_u32(f, path));
    const auto n_dims = ckpt::get_u32(f, path);
    for (std::uint32_t i = 0; i < n_dims; ++i)
        m.spec.layer_dims.push_back(ckpt::get_u32(f, path));
    m.spec.validate();
    const auto E = ckpt::get_u32(f, path);
    const auto d = ckpt::get_u32(f, path);
    if (variant_uses_attr(m.kind)) {
        if (!attr)
            throw ValidationError(path + ": variant '" + variant_name(m.kind) +
                                  "' needs an attribute checkpoint");
        if (attr->E != E && variant_uses_hyper(m.kind))
            throw DimensionError(path + ": attribute E=" + std::to_string(attr->E) +
                                 " does not match checkpoint E=" + std::to_string(E));
        m.attr = std::move(attr);
        for (auto& np : m.attr->named_params()) np.tensor.set_requires_grad(false);
    }
    if (variant_uses_hyper(m.kind)) {
        HyperNetParams hp;
        hp.spec = m.spec;
        hp.E = E;
        hp.d = d;
        for (std::size_t i = 0; i < m.spec.M(); ++i) {
            const std::size_t n_in = m.spec.layer_dims[i];
            const std::size_t n_out = m.spec.layer_dims[i + 1];
            HyperBlock b;
            b.W_r = ckpt::get_blob(f, {E, d}, path);
            b.b_r = ckpt::get_blob(f, {d}, path);
            b.W_w = ckpt::get_blob(f, {d, n_in * n_out}, path);
            b.b_w = ckpt::get_blob(f, {n_in * n_out}, path);
            b.W_b = ckpt::get_blob(f, {d, n_out}, path);
            b.b_b = ckpt::get_blob(f, {n_out}, path);
            hp.blocks.push_back(std::move(b));
        }
        m.hyper = std::move(hp);
    } else if (m.kind == VariantKind::attr_linear) {
        m.W_lin = ckpt::get_blob(f, {E, m.spec.B()}, path);
        m.b_lin = ckpt::get_blob(f, {m.spec.B()}, path);
    } else {
        for (std::size_t i = 0; i + 1 < m.spec.layer_dims.size(); ++i) {
            auto w = ckpt::get_blob(f, {m.spec.layer_dims[i], m.spec.layer_dims[i + 1]}, path);
            auto b = ckpt::get_blob(f, {m.spec.layer_dims[i + 1]}, path);
            m.mlp.emplace_back(std::move(w), std::move(b));
        }
    }
    return m;
}

void export_generated_weights(AestheticModel& model,
                              const std::vector<EmbeddingVector>& embeddings,
                              std::size_t layer_index, const std::string& path) {
    if (!variant_uses_hyper(model.kind))
        throw ValidationError("export_generated_weights: variant '" +
                              variant_name(model.kind) + "' has no generated weights");
    if (layer_index < 1 || layer_index > model.spec.M())
        throw ValidationError("export_generated_weights: layer index " +
                              std::to_string(layer_index) + " out of range [1," +
                              std::to_string(model.spec.M()) + "]");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for writing");
    const std::size_t n_in = model.spec.layer_dims[layer_index - 1];
    const std::size_t n_out = model.spec.layer_dims[layer_index];
    f << "id";
    for (std::size_t i = 0; i < n_in * n_out; ++i) f << ",w" << i;
    f << "\n";
    char buf[48];
    for (const auto& e : embeddings) {
        auto es = model.trunk_embedding(e.values);
        auto gp = hyper_generate(Tensor({es.size()}, es, false), *model.hyper);
        const auto& w = gp[layer_index - 1].first;
        f << e.id;
        for (double v : w.data()) {
            std::snprintf(buf, sizeof buf, ",%.9g", v);
            f << buf;
        }
        f << "\n";
    }
}

}  // namespace aesthnet
