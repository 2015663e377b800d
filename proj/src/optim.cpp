#include "aesthnet/optim.hpp"

#include <cmath>

namespace aesthnet {

Adam::Adam(std::vector<NamedParam> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto& p : params_) {
        m_.emplace_back(p.tensor.size(), 0.0);
        v_.emplace_back(p.tensor.size(), 0.0);
    }
}

void Adam::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& p = params_[pi];
        auto data = p.tensor.mutable_data();
        auto grad = p.tensor.grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = grad[i];
            if (!std::isfinite(g))
                throw NumericError("adam: non-finite gradient for parameter '" + p.name +
                                   "' at step " + std::to_string(step_));
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        p.tensor.zero_grad();
    }
}

void Adam::apply_decay(std::size_t epoch) {
    if (cfg_.decay_every == 0) return;
    const std::size_t target = epoch / cfg_.decay_every;
    while (decays_applied_ < target) {
        cfg_.lr *= cfg_.decay_factor;
        ++decays_applied_;
    }
}

}  // namespace aesthnet
