#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ffpkit/common.hpp"
#include "ffpkit/dit.hpp"
#include "ffpkit/tensor.hpp"

namespace ffpkit {

struct AdamWConfig {
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    void validate() const {
        check_arg(step_size > 0.0 && eps > 0.0, "step size and eps must be positive");
        check_arg(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
                  "betas must lie in [0,1)");
        check_arg(weight_decay >= 0.0, "weight decay must be nonnegative");
    }
};

// Adam with decoupled weight decay. Moment buffers are keyed by position in
// the parameter list, which callers must keep stable across steps.
class AdamW {
public:
    explicit AdamW(const AdamWConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

    int64_t steps_taken() const { return t_; }

    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
        check_arg(params.size() == grads.size(), "parameter and gradient counts differ");
        if (m_.empty()) {
            for (const Tensor* p : params) {
                m_.emplace_back(p->shape());
                v_.emplace_back(p->shape());
            }
        }
        check_arg(params.size() == m_.size(), "parameter list changed size between steps");

        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (size_t k = 0; k < params.size(); ++k) {
            Tensor& p = *params[k];
            const Tensor& g = grads[k];
            check_arg(p.same_shape(g), "gradient shape mismatch at parameter " +
                                           std::to_string(k));
            Tensor& m = m_[k];
            Tensor& v = v_[k];
            for (int64_t i = 0; i < p.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p[i] -= cfg_.step_size *
                        (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p[i]);
            }
        }
    }

private:
    AdamWConfig cfg_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

// Canonical mutable views over every parameter tensor, in visit order.
inline std::vector<Tensor*> parameter_list(DitParams& params) {
    std::vector<Tensor*> out;
    params.visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

}  // namespace ffpkit
