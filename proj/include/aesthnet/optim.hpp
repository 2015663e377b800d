#pragma once

#include <string>
#include <vector>

#include "aesthnet/tensor.hpp"

namespace aesthnet {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t decay_every = 0;  // epochs; 0 disables decay
    double decay_factor = 0.1;
};

// Adam with bias correction over a fixed parameter set, plus the epoch-based
// step decay (lr multiplied by decay_factor at each decay boundary).
class Adam {
public:
    Adam(std::vector<NamedParam> params, AdamConfig cfg);

    // Reads each parameter's accumulated gradient, updates it in place, then
    // clears the gradient. Throws NumericError on NaN/Inf gradients, naming
    // the parameter and the step.
    void step();

    // Call at the start of each epoch (0-based). Applies decay when the
    // boundary is crossed.
    void apply_decay(std::size_t epoch);

    double lr() const { return cfg_.lr; }
    std::size_t step_count() const { return step_; }
    const std::vector<NamedParam>& params() const { return params_; }

private:
    std::vector<NamedParam> params_;
    AdamConfig cfg_;
    std::size_t step_ = 0;
    std::size_t decays_applied_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace aesthnet
