#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "ffpkit/autograd.hpp"

namespace ffpkit::testing {

using BuildFn = std::function<ag::Id(ag::Graph&, const std::vector<ag::Id>&)>;

inline double eval_scalar(const std::vector<Tensor>& inputs, const BuildFn& build) {
    ag::Graph g(false);
    std::vector<ag::Id> ids;
    ids.reserve(inputs.size());
    for (const Tensor& t : inputs) ids.push_back(g.input(t));
    const ag::Id loss = build(g, ids);
    REQUIRE(g.value(loss).size() == 1);
    return g.value(loss)[0];
}

// Central-difference check of analytic gradients for a scalar-valued build.
inline void check_gradients(std::vector<Tensor> inputs, const BuildFn& build,
                            double h = 1e-6, double tol = 1e-6) {
    ag::Graph g(true);
    std::vector<ag::Id> ids;
    for (const Tensor& t : inputs) ids.push_back(g.input(t, true));
    const ag::Id loss = build(g, ids);
    REQUIRE(g.value(loss).size() == 1);
    g.backward(loss);

    for (size_t k = 0; k < inputs.size(); ++k) {
        const Tensor ga = g.grad_or_zeros(ids[k]);
        for (int64_t i = 0; i < inputs[k].size(); ++i) {
            std::vector<Tensor> probe = inputs;
            probe[k][i] = inputs[k][i] + h;
            const double fp = eval_scalar(probe, build);
            probe[k][i] = inputs[k][i] - h;
            const double fm = eval_scalar(probe, build);
            const double fd = (fp - fm) / (2.0 * h);
            const double scale = std::max({1.0, std::fabs(ga[i]), std::fabs(fd)});
            INFO("input " << k << " element " << i << " analytic " << ga[i] << " fd " << fd);
            REQUIRE(std::fabs(ga[i] - fd) <= tol * scale);
        }
    }
}

}  // namespace ffpkit::testing
