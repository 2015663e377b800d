#include "aesthnet/attribute_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "checkpoint_io.hpp"

namespace aesthnet {

namespace {

// Uniform(-1/sqrt(n_in), +1/sqrt(n_in)) weights, zero biases.
Tensor init_weight(std::size_t n_in, std::size_t n_out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
    std::vector<double> d(n_in * n_out);
    for (auto& v : d) v = rng.uniform(-bound, bound);
    return Tensor({n_in, n_out}, std::move(d), true);
}

Tensor batch_tensor(const std::vector<EmbeddingVector>& embs,
                    const std::vector<std::size_t>& rows, std::size_t D) {
    std::vector<double> data;
    data.reserve(rows.size() * D);
    for (auto r : rows) {
        const auto& v = embs[r].values;
        if (v.size() != D)
            throw DimensionError("embedding dim " + std::to_string(v.size()) +
                                 " does not match configured D=" + std::to_string(D));
        data.insert(data.end(), v.begin(), v.end());
    }
    return Tensor({rows.size(), D}, std::move(data), false);
}

}  // namespace

std::vector<NamedParam> AttributeNetParams::named_params() {
    return {{"attr.W_s", W_s}, {"attr.b_s", b_s}, {"attr.W_v", W_v},
            {"attr.b_v", b_v}, {"attr.W_c", W_c}, {"attr.b_c", b_c}};
}

AttributeNetParams AttributeNetParams::clone() const {
    AttributeNetParams c;
    c.D = D;
    c.E = E;
    c.K_v = K_v;
    c.K_c = K_c;
    auto copy = [](const Tensor& t) {
        return Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), true);
    };
    c.W_s = copy(W_s);
    c.b_s = copy(b_s);
    c.W_v = copy(W_v);
    c.b_v = copy(b_v);
    c.W_c = copy(W_c);
    c.b_c = copy(b_c);
    return c;
}

AttributeNetParams init_attribute_net(std::size_t D, std::size_t E, std::size_t K_v,
                                      std::size_t K_c, Rng rng) {
    AttributeNetParams p;
    p.D = D;
    p.E = E;
    p.K_v = K_v;
    p.K_c = K_c;
    p.W_s = init_weight(D, E, rng);
    p.b_s = Tensor::zeros({E}, true);
    p.W_v = init_weight(E, K_v, rng);
    p.b_v = Tensor::zeros({K_v}, true);
    p.W_c = init_weight(E, K_c, rng);
    p.b_c = Tensor::zeros({K_c}, true);
    return p;
}

AttrForwardOut attr_forward(const Tensor& x, AttributeNetParams& p, double dropout_rate,
                            Rng* dropout_rng) {
    AttrForwardOut out;
    out.e_s = relu(linear(x, p.W_s, p.b_s));
    Tensor head_in = out.e_s;
    if (dropout_rate > 0.0 && dropout_rng) head_in = dropout(head_in, dropout_rate, *dropout_rng);
    out.style_logits = linear(head_in, p.W_v, p.b_v);
    out.comp_logits = linear(head_in, p.W_c, p.b_c);
    return out;
}

Tensor mtl_loss(const AttrBatch& batch, AttributeNetParams& p, MtlWeights w,
                double dropout_rate, Rng* dropout_rng) {
    if (w.a_v <= 0.0 || w.a_c <= 0.0)
        throw ValidationError("mtl_loss: task weights must be positive");
    const bool has_style = batch.style_inputs.defined() && batch.style_inputs.size() > 0;
    const bool has_comp = batch.comp_inputs.defined() && batch.comp_inputs.size() > 0;
    if (!has_style && !has_comp)
        throw ValidationError("mtl_loss: batch carries neither style nor composition samples");
    Tensor total = Tensor::scalar(0.0);
    if (has_style) {
        auto fwd = attr_forward(batch.style_inputs, p, dropout_rate, dropout_rng);
        total = add(total, scale(cross_entropy(fwd.style_logits, batch.style_targets), w.a_v));
    }
    if (has_comp) {
        auto fwd = attr_forward(batch.comp_inputs, p, dropout_rate, dropout_rng);
        total = add(total, scale(binary_cross_entropy(fwd.comp_logits, batch.comp_targets), w.a_c));
    }
    return total;
}

AttributePrediction predict_attributes(const std::vector<double>& e_b, AttributeNetParams& p,
                                       double comp_threshold) {
    Tensor x({e_b.size()}, e_b, false);
    auto fwd = attr_forward(x, p);
    AttributePrediction out;
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.K_v; ++i)
        if (fwd.style_logits.at(i) > fwd.style_logits.at(best)) best = i;
    out.style = best;
    out.composition.resize(p.K_c);
    for (std::size_t i = 0; i < p.K_c; ++i)
        out.composition[i] = sigmoid(fwd.comp_logits.at(i)) > comp_threshold ? 1 : 0;
    return out;
}

double composition_accuracy(const std::vector<std::vector<std::uint8_t>>& preds,
                            const std::vector<std::vector<std::uint8_t>>& truths) {
    if (preds.size() != truths.size())
        throw DimensionError("composition_accuracy: " + std::to_string(preds.size()) +
                             " predictions vs " + std::to_string(truths.size()) + " truths");
    if (preds.empty()) throw ValidationError("composition_accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        bool hit = false;
        for (std::size_t j = 0; j < preds[i].size() && j < truths[i].size(); ++j)
            if (preds[i][j] && truths[i][j]) hit = true;
        if (hit) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double style_accuracy(const std::vector<std::size_t>& preds,
                      const std::vector<std::size_t>& truths) {
    if (preds.size() != truths.size())
        throw DimensionError("style_accuracy: length mismatch");
    if (preds.empty()) throw ValidationError("style_accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == truths[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::vector<std::vector<std::size_t>> style_confusion(const std::vector<std::size_t>& preds,
                                                      const std::vector<std::size_t>& truths,
                                                      std::size_t k) {
    std::vector<std::vector<std::size_t>> m(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < preds.size(); ++i) m.at(truths[i]).at(preds[i])++;
    return m;
}

namespace {

struct TaskView {
    std::vector<std::size_t> train_rows, val_rows;
};

TaskView split_rows(std::size_t n, double val_fraction, Rng rng) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    rng.shuffle(rows);
    std::size_t n_val = static_cast<std::size_t>(
        std::lround(val_fraction * static_cast<double>(n)));
    if (n_val >= n) n_val = n > 1 ? 1 : 0;
    TaskView v;
    v.val_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
    v.train_rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end());
    return v;
}

}  // namespace

AttrTrainResult train_attribute_net(const AttrDataset& style_ds, const AttrDataset& comp_ds,
                                    const AttrTrainConfig& cfg) {
    if (!cfg.style_task && !cfg.comp_task)
        throw ValidationError("train_attribute_net: at least one task must be enabled");
    if (cfg.style_task && style_ds.embeddings.empty())
        throw ValidationError("train_attribute_net: empty style dataset");
    if (cfg.comp_task && comp_ds.embeddings.empty())
        throw ValidationError("train_attribute_net: empty composition dataset");

    const std::size_t D = cfg.style_task ? style_ds.embeddings[0].values.size()
                                         : comp_ds.embeddings[0].values.size();
    std::size_t K_v = std::max<std::size_t>(2, cfg.K_v);
    std::size_t K_c = std::max<std::size_t>(2, cfg.K_c);
    for (const auto& l : style_ds.labels)
        if (l.style) K_v = std::max(K_v, *l.style + 1);
    for (const auto& l : comp_ds.labels)
        if (l.composition) K_c = std::max(K_c, l.composition->size());

    Rng base(cfg.seed);
    auto params = init_attribute_net(D, cfg.E, K_v, K_c, base.fork("init"));

    AttrTrainResult result;
    result.params = params.clone();
    result.best_epoch = 0;
    if (cfg.stage.epochs == 0) return result;

    TaskView style_view, comp_view;
    if (cfg.style_task)
        style_view = split_rows(style_ds.embeddings.size(), cfg.stage.val_fraction,
                                base.fork("split.style"));
    if (cfg.comp_task)
        comp_view = split_rows(comp_ds.embeddings.size(), cfg.stage.val_fraction,
                               base.fork("split.comp"));

    AdamConfig adam_cfg;
    adam_cfg.lr = cfg.stage.lr;
    adam_cfg.decay_every = cfg.stage.decay_every;
    adam_cfg.decay_factor = cfg.stage.decay_factor;
    Adam opt(params.named_params(), adam_cfg);

    Rng dropout_rng = base.fork("dropout");
    Rng stream_rng = base.fork("stream");

    double best_metric = -1.0;

    auto validate = [&](double& style_acc, double& comp_acc) {
        style_acc = comp_acc = 0.0;
        double metric = 0.0;
        std::size_t terms = 0;
        if (cfg.style_task && !style_view.val_rows.empty()) {
            std::vector<std::size_t> preds, truths;
            for (auto r : style_view.val_rows) {
                preds.push_back(
                    predict_attributes(style_ds.embeddings[r].values, params, cfg.comp_threshold)
                        .style);
                truths.push_back(*style_ds.labels[r].style);
            }
            style_acc = style_accuracy(preds, truths);
            metric += style_acc;
            ++terms;
        }
        if (cfg.comp_task && !comp_view.val_rows.empty()) {
            std::vector<std::vector<std::uint8_t>> preds, truths;
            for (auto r : comp_view.val_rows) {
                preds.push_back(
                    predict_attributes(comp_ds.embeddings[r].values, params, cfg.comp_threshold)
                        .composition);
                truths.push_back(*comp_ds.labels[r].composition);
            }
            comp_acc = composition_accuracy(preds, truths);
            metric += comp_acc;
            ++terms;
        }
        return terms ? metric / static_cast<double>(terms) : 0.0;
    };

    // Epoch batch plan: balanced dual stream when both tasks are on,
    // otherwise a simple shuffled single-task stream.
    std::optional<BalancedBatchStream> stream;
    if (cfg.style_task && cfg.comp_task)
        stream.emplace(style_view.train_rows.size(), comp_view.train_rows.size(),
                       cfg.stage.batch_size, stream_rng.fork("balanced"));

    for (std::size_t epoch = 0; epoch < cfg.stage.epochs; ++epoch) {
        opt.apply_decay(epoch);
        std::vector<std::vector<TaggedIndex>> batches;
        if (stream) {
            batches = stream->next_epoch();
        } else {
            const Task task = cfg.style_task ? Task::style : Task::composition;
            const auto& rows =
                cfg.style_task ? style_view.train_rows : comp_view.train_rows;
            std::vector<std::size_t> order(rows.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            stream_rng.shuffle(order);
            std::vector<TaggedIndex> flat;
            for (auto i : order) flat.push_back({task, i});
            for (std::size_t i = 0; i < flat.size(); i += cfg.stage.batch_size)
                batches.emplace_back(
                    flat.begin() + static_cast<std::ptrdiff_t>(i),
                    flat.begin() +
                        static_cast<std::ptrdiff_t>(std::min(i + cfg.stage.batch_size, flat.size())));
        }

        double epoch_loss = 0.0;
        std::size_t steps = 0;
        for (const auto& batch : batches) {
            AttrBatch ab;
            std::vector<std::size_t> style_rows, comp_rows;
            for (const auto& s : batch) {
                if (s.task == Task::style)
                    style_rows.push_back(style_view.train_rows[s.index]);
                else
                    comp_rows.push_back(comp_view.train_rows[s.index]);
            }
            if (!style_rows.empty()) {
                ab.style_inputs = batch_tensor(style_ds.embeddings, style_rows, D);
                for (auto r : style_rows) ab.style_targets.push_back(*style_ds.labels[r].style);
            }
            if (!comp_rows.empty()) {
                ab.comp_inputs = batch_tensor(comp_ds.embeddings, comp_rows, D);
                for (auto r : comp_rows)
                    for (auto b : *comp_ds.labels[r].composition)
                        ab.comp_targets.push_back(b ? 1.0 : 0.0);
            }
            auto loss = mtl_loss(ab, params, cfg.mtl, cfg.dropout, &dropout_rng);
            if (!std::isfinite(loss.value()))
                throw NumericError("train_attribute_net: non-finite loss at epoch " +
                                   std::to_string(epoch) + " step " + std::to_string(steps));
            loss.backward();
            opt.step();
            epoch_loss += loss.value();
            ++steps;
        }

        double style_acc, comp_acc;
        const double metric = validate(style_acc, comp_acc);
        result.history.push_back({epoch, steps ? epoch_loss / static_cast<double>(steps) : 0.0,
                                  style_acc, comp_acc, metric});
        if (metric > best_metric) {  // strict: ties keep the earlier epoch
            best_metric = metric;
            result.params = params.clone();
            result.best_epoch = epoch;
        }
    }
    return result;
}

void save_history_csv(const std::vector<EpochRow>& history, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for writing");
    f << "epoch,loss,style_acc,comp_acc,val_metric\n";
    char buf[160];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.loss, r.style_acc,
                      r.comp_acc, r.val_metric);
        f << buf;
    }
}

void save_attr_checkpoint(const AttributeNetParams& p, const std::string& path) {
    auto f = ckpt::open_out(path);
    f.write("ATTR", 4);
    ckpt::put_u32(f, 1);  // version
    ckpt::put_u32(f, static_cast<std::uint32_t>(p.D));
    ckpt::put_u32(f, static_cast<std::uint32_t>(p.E));
    ckpt::put_u32(f, static_cast<std::uint32_t>(p.K_v));
    ckpt::put_u32(f, static_cast<std::uint32_t>(p.K_c));
    for (const Tensor* t : {&p.W_s, &p.b_s, &p.W_v, &p.b_v, &p.W_c, &p.b_c})
        ckpt::put_blob(f, *t);
}

AttributeNetParams load_attr_checkpoint(const std::string& path) {
    auto f = ckpt::open_in(path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "ATTR", 4) != 0)
        throw ValidationError(path + ": bad magic, not an AttributeNet checkpoint");
    const auto version = ckpt::get_u32(f, path);
    if (version != 1)
        throw ValidationError(path + ": unsupported checkpoint version " +
                              std::to_string(version));
    AttributeNetParams p;
    p.D = ckpt::get_u32(f, path);
    p.E = ckpt::get_u32(f, path);
    p.K_v = ckpt::get_u32(f, path);
    p.K_c = ckpt::get_u32(f, path);
    p.W_s = ckpt::get_blob(f, {p.D, p.E}, path);
    p.b_s = ckpt::get_blob(f, {p.E}, path);
    p.W_v = ckpt::get_blob(f, {p.E, p.K_v}, path);
    p.b_v = ckpt::get_blob(f, {p.K_v}, path);
    p.W_c = ckpt::get_blob(f, {p.E, p.K_c}, path);
    p.b_c = ckpt::get_blob(f, {p.K_c}, path);
    return p;
}

}  // namespace aesthnet
