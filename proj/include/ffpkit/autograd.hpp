#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ffpkit/tensor.hpp"

namespace ffpkit::ag {

using Id = int32_t;

// Reverse-mode tape over whole tensors. Nodes are appended in evaluation
// order, so walking ids backwards is already a topological order and the
// sweep is bit-deterministic. A non-recording graph evaluates forward
// values only and skips every closure (used for teacher passes, sampling
// and finite-difference probes).
class Graph {
public:
    explicit Graph(bool recording = true) : recording_(recording) {}

    Id input(Tensor v, bool requires_grad = false) {
        return push(std::move(v), requires_grad && recording_, nullptr);
    }

    Id constant(Tensor v) { return input(std::move(v), false); }

    const Tensor& value(Id id) const { return nodes_[size_t(id)].value; }

    // Gradient buffer; empty until something accumulated into it.
    const Tensor& grad(Id id) const { return nodes_[size_t(id)].grad; }

    Tensor grad_or_zeros(Id id) const {
        const Node& n = nodes_[size_t(id)];
        if (n.grad.empty() && n.value.size() > 0) return Tensor(n.value.shape());
        return n.grad;
    }

    size_t node_count() const { return nodes_.size(); }

    // ---- elementwise ----

    Id add(Id a, Id b) {
        const Tensor& av = value(a);
        const Tensor& bv = value(b);
        check_arg(av.same_shape(bv), "add shape mismatch");
        Tensor out = av;
        for (int64_t i = 0; i < out.size(); ++i) out[i] += bv[i];
        return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            if (g.needs(a)) {
                Tensor& ga = g.grad_buf(a);
                for (int64_t i = 0; i < go.size(); ++i) ga[i] += go[i];
            }
            if (g.needs(b)) {
                Tensor& gb = g.grad_buf(b);
                for (int64_t i = 0; i < go.size(); ++i) gb[i] += go[i];
            }
        });
    }

    Id sub(Id a, Id b) {
        const Tensor& av = value(a);
        const Tensor& bv = value(b);
        check_arg(av.same_shape(bv), "sub shape mismatch");
        Tensor out = av;
        for (int64_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
        return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            if (g.needs(a)) {
                Tensor& ga = g.grad_buf(a);
                for (int64_t i = 0; i < go.size(); ++i) ga[i] += go[i];
            }
            if (g.needs(b)) {
                Tensor& gb = g.grad_buf(b);
                for (int64_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
            }
        });
    }

    Id mul(Id a, Id b) {
        const Tensor& av = value(a);
        const Tensor& bv = value(b);
        check_arg(av.same_shape(bv), "mul shape mismatch");
        Tensor out = av;
        for (int64_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
        return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            const Tensor& av = g.value(a);
            const Tensor& bv = g.value(b);
            if (g.needs(a)) {
                Tensor& ga = g.grad_buf(a);
                for (int64_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bv[i];
            }
            if (g.needs(b)) {
                Tensor& gb = g.grad_buf(b);
                for (int64_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
            }
        });
    }

    Id scale(Id a, double c) {
        Tensor out = value(a);
        for (int64_t i = 0; i < out.size(); ++i) out[i] *= c;
        return push(std::move(out), needs(a), [a, c](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            Tensor& ga = g.grad_buf(a);
            for (int64_t i = 0; i < go.size(); ++i) ga[i] += c * go[i];
        });
    }

    // out = a / s, s a scalar node broadcast over a.
    Id div_scalar(Id a, Id s) {
        const Tensor& sv = value(s);
        check_arg(sv.size() == 1, "div_scalar: divisor must be scalar");
        const double d = sv[0];
        Tensor out = value(a);
        for (int64_t i = 0; i < out.size(); ++i) out[i] /= d;
        return push(std::move(out), needs(a) || needs(s), [a, s, d](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            const Tensor& ov = g.value(self);
            if (g.needs(a)) {
                Tensor& ga = g.grad_buf(a);
                for (int64_t i = 0; i < go.size(); ++i) ga[i] += go[i] / d;
            }
            if (g.needs(s)) {
                double acc = 0.0;
                for (int64_t i = 0; i < go.size(); ++i) acc += go[i] * ov[i];
                g.grad_buf(s)[0] -= acc / d;
            }
        });
    }

    Id abs(Id a) {
        Tensor out = value(a);
        for (int64_t i = 0; i < out.size(); ++i) out[i] = std::fabs(out[i]);
        return push(std::move(out), needs(a), [a](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            const Tensor& av = g.value(a);
            Tensor& ga = g.grad_buf(a);
            for (int64_t i = 0; i < go.size(); ++i) {
                const double s = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
                ga[i] += go[i] * s;
            }
        });
    }

    Id exp(Id a) {
        Tensor out = value(a);
        for (int64_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
        return push(std::move(out), needs(a), [a](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            const Tensor& ov = g.value(self);
            Tensor& ga = g.grad_buf(a);
            for (int64_t i = 0; i < go.size(); ++i) ga[i] += go[i] * ov[i];
        });
    }

    Id sqrt(Id a) {
        Tensor out = value(a);
        for (int64_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(out[i]);
        return push(std::move(out), needs(a), [a](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            const Tensor& ov = g.value(self);
            Tensor& ga = g.grad_buf(a);
            for (int64_t i = 0; i < go.size(); ++i) {
                if (ov[i] > 0.0) ga[i] += go[i] * 0.5 / ov[i];
            }
        });
    }

    // Elementwise max with a constant floor.
    Id clamp_min(Id a, double floor) {
        Tensor out = value(a);
        for (int64_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], floor);
        return push(std::move(out), needs(a), [a, floor](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            const Tensor& av = g.value(a);
            Tensor& ga = g.grad_buf(a);
            for (int64_t i = 0; i < go.size(); ++i) {
                if (av[i] > floor) ga[i] += go[i];
            }
        });
    }

    Id sigmoid(Id a) {
        Tensor out = value(a);
        for (int64_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
        return push(std::move(out), needs(a), [a](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            const Tensor& ov = g.value(self);
            Tensor& ga = g.grad_buf(a);
            for (int64_t i = 0; i < go.size(); ++i) ga[i] += go[i] * ov[i] * (1.0 - ov[i]);
        });
    }

    Id gelu(Id a) {
        Tensor out = value(a);
        for (int64_t i = 0; i < out.size(); ++i) {
            const double x = out[i];
            out[i] = x * 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
        }
        return push(std::move(out), needs(a), [a](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            const Tensor& av = g.value(a);
            Tensor& ga = g.grad_buf(a);
            constexpr double inv_sqrt_2pi = 0.3989422804014327;
            for (int64_t i = 0; i < go.size(); ++i) {
                const double x = av[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
                const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
                ga[i] += go[i] * (cdf + x * pdf);
            }
        });
    }

    // ---- reductions ----

    Id sum_all(Id a) {
        double s = 0.0;
        const Tensor& av = value(a);
        for (int64_t i = 0; i < av.size(); ++i) s += av[i];
        return push(Tensor::scalar(s), needs(a), [a](Graph& g, Id self) {
            const double go = g.grad(self)[0];
            Tensor& ga = g.grad_buf(a);
            for (int64_t i = 0; i < ga.size(); ++i) ga[i] += go;
        });
    }

    Id mean_all(Id a) {
        const Tensor& av = value(a);
        check_arg(av.size() > 0, "mean_all on empty tensor");
        double s = 0.0;
        for (int64_t i = 0; i < av.size(); ++i) s += av[i];
        const double inv = 1.0 / double(av.size());
        return push(Tensor::scalar(s * inv), needs(a), [a, inv](Graph& g, Id self) {
            const double go = g.grad(self)[0] * inv;
            Tensor& ga = g.grad_buf(a);
            for (int64_t i = 0; i < ga.size(); ++i) ga[i] += go;
        });
    }

    // (R,C) -> (1,C) column means.
    Id mean_rows(Id a) {
        const Tensor& av = value(a);
        check_arg(av.rank() == 2, "mean_rows expects rank-2");
        const int64_t rows = av.dim(0), cols = av.dim(1);
        Tensor out({1, cols});
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t c = 0; c < cols; ++c) out[c] += av.at(r, c);
        const double inv = 1.0 / double(rows);
        for (int64_t c = 0; c < cols; ++c) out[c] *= inv;
        return push(std::move(out), needs(a), [a, rows, cols, inv](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            Tensor& ga = g.grad_buf(a);
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t c = 0; c < cols; ++c) ga.at(r, c) += go[c] * inv;
        });
    }

    Id gather(Id a, int64_t flat_index) {
        const Tensor& av = value(a);
        check_arg(flat_index >= 0 && flat_index < av.size(), "gather index out of range");
        return push(Tensor::scalar(av[flat_index]), needs(a), [a, flat_index](Graph& g, Id self) {
            g.grad_buf(a)[flat_index] += g.grad(self)[0];
        });
    }

    // ---- linear algebra ----

    Id matmul(Id a, Id b) {
        Tensor out = ffpkit::matmul(value(a), value(b));
        return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            if (g.needs(a)) {
                Tensor& ga = g.grad_buf(a);
                as_matrix(ga).noalias() += as_matrix(go) * as_matrix(g.value(b)).transpose();
            }
            if (g.needs(b)) {
                Tensor& gb = g.grad_buf(b);
                as_matrix(gb).noalias() += as_matrix(g.value(a)).transpose() * as_matrix(go);
            }
        });
    }

    Id matmul_nt(Id a, Id b) {
        Tensor out = ffpkit::matmul_nt(value(a), value(b));
        return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            if (g.needs(a)) {
                Tensor& ga = g.grad_buf(a);
                as_matrix(ga).noalias() += as_matrix(go) * as_matrix(g.value(b));
            }
            if (g.needs(b)) {
                Tensor& gb = g.grad_buf(b);
                as_matrix(gb).noalias() += as_matrix(go).transpose() * as_matrix(g.value(a));
            }
        });
    }

    // y = x W + b with x:(R,Cin), W:(Cin,Cout), b:(1,Cout).
    Id linear(Id x, Id w, Id b) { return add_rowvec(matmul(x, w), b); }

    Id add_rowvec(Id a, Id b) {
        const Tensor& av = value(a);
        const Tensor& bv = value(b);
        check_arg(av.rank() == 2 && bv.rank() == 2 && bv.dim(0) == 1 && bv.dim(1) == av.dim(1),
                  "add_rowvec shape mismatch");
        Tensor out = av;
        const int64_t rows = av.dim(0), cols = av.dim(1);
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t c = 0; c < cols; ++c) out.at(r, c) += bv[c];
        return push(std::move(out), needs(a) || needs(b), [a, b, rows, cols](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            if (g.needs(a)) {
                Tensor& ga = g.grad_buf(a);
                for (int64_t i = 0; i < go.size(); ++i) ga[i] += go[i];
            }
            if (g.needs(b)) {
                Tensor& gb = g.grad_buf(b);
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t c = 0; c < cols; ++c) gb[c] += go.at(r, c);
            }
        });
    }

    // ---- slicing / concatenation (rank-2) ----

    Id cols(Id a, int64_t start, int64_t n) {
        const Tensor& av = value(a);
        check_arg(av.rank() == 2 && start >= 0 && n > 0 && start + n <= av.dim(1),
                  "cols slice out of range");
        const int64_t rows = av.dim(0);
        Tensor out({rows, n});
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t c = 0; c < n; ++c) out.at(r, c) = av.at(r, start + c);
        return push(std::move(out), needs(a), [a, start, n, rows](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            Tensor& ga = g.grad_buf(a);
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t c = 0; c < n; ++c) ga.at(r, start + c) += go.at(r, c);
        });
    }

    Id rows(Id a, int64_t start, int64_t n) {
        const Tensor& av = value(a);
        check_arg(av.rank() == 2 && start >= 0 && n > 0 && start + n <= av.dim(0),
                  "rows slice out of range");
        const int64_t cols = av.dim(1);
        Tensor out({n, cols});
        for (int64_t r = 0; r < n; ++r)
            for (int64_t c = 0; c < cols; ++c) out.at(r, c) = av.at(start + r, c);
        return push(std::move(out), needs(a), [a, start, n, cols](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            Tensor& ga = g.grad_buf(a);
            for (int64_t r = 0; r < n; ++r)
                for (int64_t c = 0; c < cols; ++c) ga.at(start + r, c) += go.at(r, c);
        });
    }

    Id concat_cols(const std::vector<Id>& parts) {
        check_arg(!parts.empty(), "concat_cols: no parts");
        const int64_t rows = value(parts[0]).dim(0);
        int64_t total = 0;
        bool any_grad = false;
        for (Id p : parts) {
            const Tensor& pv = value(p);
            check_arg(pv.rank() == 2 && pv.dim(0) == rows, "concat_cols row mismatch");
            total += pv.dim(1);
            any_grad = any_grad || needs(p);
        }
        Tensor out({rows, total});
        int64_t off = 0;
        for (Id p : parts) {
            const Tensor& pv = value(p);
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t c = 0; c < pv.dim(1); ++c) out.at(r, off + c) = pv.at(r, c);
            off += pv.dim(1);
        }
        std::vector<Id> ps = parts;
        return push(std::move(out), any_grad, [ps, rows](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            int64_t off = 0;
            for (Id p : ps) {
                const int64_t n = g.value(p).dim(1);
                if (g.needs(p)) {
                    Tensor& gp = g.grad_buf(p);
                    for (int64_t r = 0; r < rows; ++r)
                        for (int64_t c = 0; c < n; ++c) gp.at(r, c) += go.at(r, off + c);
                }
                off += n;
            }
        });
    }

    Id concat_rows(const std::vector<Id>& parts) {
        check_arg(!parts.empty(), "concat_rows: no parts");
        const int64_t cols = value(parts[0]).dim(1);
        int64_t total = 0;
        bool any_grad = false;
        for (Id p : parts) {
            const Tensor& pv = value(p);
            check_arg(pv.rank() == 2 && pv.dim(1) == cols, "concat_rows column mismatch");
            total += pv.dim(0);
            any_grad = any_grad || needs(p);
        }
        Tensor out({total, cols});
        int64_t off = 0;
        for (Id p : parts) {
            const Tensor& pv = value(p);
            for (int64_t r = 0; r < pv.dim(0); ++r)
                for (int64_t c = 0; c < cols; ++c) out.at(off + r, c) = pv.at(r, c);
            off += pv.dim(0);
        }
        std::vector<Id> ps = parts;
        return push(std::move(out), any_grad, [ps, cols](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            int64_t off = 0;
            for (Id p : ps) {
                const int64_t n = g.value(p).dim(0);
                if (g.needs(p)) {
                    Tensor& gp = g.grad_buf(p);
                    for (int64_t r = 0; r < n; ++r)
                        for (int64_t c = 0; c < cols; ++c) gp.at(r, c) += go.at(off + r, c);
                }
                off += n;
            }
        });
    }

    // ---- nonlinear blocks ----

    Id softmax_rows(Id a) {
        const Tensor& av = value(a);
        check_arg(av.rank() == 2, "softmax_rows expects rank-2");
        const int64_t rows = av.dim(0), cols = av.dim(1);
        Tensor out = av;
        for (int64_t r = 0; r < rows; ++r) {
            double mx = out.at(r, 0);
            for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, out.at(r, c));
            double s = 0.0;
            for (int64_t c = 0; c < cols; ++c) {
                const double e = std::exp(out.at(r, c) - mx);
                out.at(r, c) = e;
                s += e;
            }
            const double inv = 1.0 / s;
            for (int64_t c = 0; c < cols; ++c) out.at(r, c) *= inv;
        }
        return push(std::move(out), needs(a), [a, rows, cols](Graph& g, Id self) {
            const Tensor& go = g.grad(self);
            const Tensor& ov = g.value(self);
            Tensor& ga = g.grad_buf(a);
            for (int64_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (int64_t c = 0; c < cols; ++c) dot += go.at(r, c) * ov.at(r, c);
                for (int64_t c = 0; c < cols; ++c)
                    ga.at(r, c) += ov.at(r, c) * (go.at(r, c) - dot);
            }
        });
    }

    // y = x / rms(x_row) * gain, rms over the feature axis.
    Id rmsnorm(Id x, Id gain, double eps = 1e-6) {
        const Tensor& xv = value(x);
        const Tensor& gv = value(gain);
        check_arg(xv.rank() == 2 && gv.rank() == 2 && gv.dim(0) == 1 && gv.dim(1) == xv.dim(1),
                  "rmsnorm shape mismatch");
        const int64_t rows = xv.dim(0), cols = xv.dim(1);
        Tensor out({rows, cols});
        Tensor inv_rms({rows});
        for (int64_t r = 0; r < rows; ++r) {
            double m = 0.0;
            for (int64_t c = 0; c < cols; ++c) m += xv.at(r, c) * xv.at(r, c);
            m = m / double(cols) + eps;
            const double s = 1.0 / std::sqrt(m);
            inv_rms[r] = s;
            for (int64_t c = 0; c < cols; ++c) out.at(r, c) = xv.at(r, c) * s * gv[c];
        }
        return push(std::move(out), needs(x) || needs(gain),
                    [x, gain, rows, cols, inv_rms](Graph& g, Id self) {
                        const Tensor& go = g.grad(self);
                        const Tensor& xv = g.value(x);
                        const Tensor& gv = g.value(gain);
                        if (g.needs(gain)) {
                            Tensor& gg = g.grad_buf(gain);
                            for (int64_t r = 0; r < rows; ++r)
                                for (int64_t c = 0; c < cols; ++c)
                                    gg[c] += go.at(r, c) * xv.at(r, c) * inv_rms[r];
                        }
                        if (g.needs(x)) {
                            Tensor& gx = g.grad_buf(x);
                            for (int64_t r = 0; r < rows; ++r) {
                                const double s = inv_rms[r];
                                double dot = 0.0;
                                for (int64_t c = 0; c < cols; ++c)
                                    dot += go.at(r, c) * gv[c] * xv.at(r, c);
                                const double k = s * s * s * dot / double(cols);
                                for (int64_t c = 0; c < cols; ++c)
                                    gx.at(r, c) += go.at(r, c) * gv[c] * s - k * xv.at(r, c);
                            }
                        }
                    });
    }

    // out[i][j] = ||p_i - q_j||^2 over rows of p and q.
    Id pairwise_sqdist(Id p, Id q) {
        const Tensor& pv = value(p);
        const Tensor& qv = value(q);
        check_arg(pv.rank() == 2 && qv.rank() == 2 && pv.dim(1) == qv.dim(1),
                  "pairwise_sqdist shape mismatch");
        const int64_t np = pv.dim(0), nq = qv.dim(0), cdim = pv.dim(1);
        Tensor out({np, nq});
        for (int64_t i = 0; i < np; ++i)
            for (int64_t j = 0; j < nq; ++j) {
                double s = 0.0;
                for (int64_t c = 0; c < cdim; ++c) {
                    const double d = pv.at(i, c) - qv.at(j, c);
                    s += d * d;
                }
                out.at(i, j) = s;
            }
        return push(std::move(out), needs(p) || needs(q),
                    [p, q, np, nq, cdim](Graph& g, Id self) {
                        const Tensor& go = g.grad(self);
                        const Tensor& pv = g.value(p);
                        const Tensor& qv = g.value(q);
                        if (g.needs(p)) {
                            Tensor& gp = g.grad_buf(p);
                            for (int64_t i = 0; i < np; ++i)
                                for (int64_t j = 0; j < nq; ++j) {
                                    const double w = 2.0 * go.at(i, j);
                                    if (w == 0.0) continue;
                                    for (int64_t c = 0; c < cdim; ++c)
                                        gp.at(i, c) += w * (pv.at(i, c) - qv.at(j, c));
                                }
                        }
                        if (g.needs(q)) {
                            Tensor& gq = g.grad_buf(q);
                            for (int64_t i = 0; i < np; ++i)
                                for (int64_t j = 0; j < nq; ++j) {
                                    const double w = 2.0 * go.at(i, j);
                                    if (w == 0.0) continue;
                                    for (int64_t c = 0; c < cdim; ++c)
                                        gq.at(j, c) += w * (qv.at(j, c) - pv.at(i, c));
                                }
                        }
                    });
    }

    // Pairwise rotation of adjacent columns (2p, 2p+1) by angles
    // theta = base + alpha * slope. Pass alpha < 0 as Id for fixed angles.
    // x: (T, 2P), base/slope: (T, P).
    Id rotate_pairs(Id x, Id alpha, const Tensor& base, const Tensor& slope) {
        const Tensor& xv = value(x);
        check_arg(xv.rank() == 2 && xv.dim(1) % 2 == 0, "rotate_pairs needs even width");
        const int64_t tokens = xv.dim(0), pairs = xv.dim(1) / 2;
        check_arg(base.rank() == 2 && base.dim(0) == tokens && base.dim(1) == pairs,
                  "rotate_pairs angle shape mismatch");
        check_arg(slope.same_shape(base), "rotate_pairs slope shape mismatch");
        const double av = alpha >= 0 ? value(alpha)[0] : 0.0;

        Tensor cosv({tokens, pairs}), sinv({tokens, pairs});
        for (int64_t t = 0; t < tokens; ++t)
            for (int64_t p = 0; p < pairs; ++p) {
                const double th = base.at(t, p) + av * slope.at(t, p);
                cosv.at(t, p) = std::cos(th);
                sinv.at(t, p) = std::sin(th);
            }
        Tensor out({tokens, 2 * pairs});
        for (int64_t t = 0; t < tokens; ++t)
            for (int64_t p = 0; p < pairs; ++p) {
                const double x0 = xv.at(t, 2 * p), x1 = xv.at(t, 2 * p + 1);
                const double c = cosv.at(t, p), s = sinv.at(t, p);
                out.at(t, 2 * p) = x0 * c - x1 * s;
                out.at(t, 2 * p + 1) = x0 * s + x1 * c;
            }
        const bool want = needs(x) || (alpha >= 0 && needs(alpha));
        return push(std::move(out), want,
                    [x, alpha, tokens, pairs, cosv, sinv, slope](Graph& g, Id self) {
                        const Tensor& go = g.grad(self);
                        const Tensor& ov = g.value(self);
                        if (g.needs(x)) {
                            Tensor& gx = g.grad_buf(x);
                            for (int64_t t = 0; t < tokens; ++t)
                                for (int64_t p = 0; p < pairs; ++p) {
                                    const double g0 = go.at(t, 2 * p), g1 = go.at(t, 2 * p + 1);
                                    const double c = cosv.at(t, p), s = sinv.at(t, p);
                                    gx.at(t, 2 * p) += g0 * c + g1 * s;
                                    gx.at(t, 2 * p + 1) += -g0 * s + g1 * c;
                                }
                        }
                        if (alpha >= 0 && g.needs(alpha)) {
                            double acc = 0.0;
                            for (int64_t t = 0; t < tokens; ++t)
                                for (int64_t p = 0; p < pairs; ++p) {
                                    const double g0 = go.at(t, 2 * p), g1 = go.at(t, 2 * p + 1);
                                    const double y0 = ov.at(t, 2 * p), y1 = ov.at(t, 2 * p + 1);
                                    // d y0/d theta = -y1, d y1/d theta = y0
                                    acc += (-g0 * y1 + g1 * y0) * slope.at(t, p);
                                }
                            g.grad_buf(alpha)[0] += acc;
                        }
                    });
    }

    // ---- backward ----

    void backward(Id loss) {
        check_arg(recording_, "backward on a non-recording graph");
        check_arg(value(loss).size() == 1, "backward needs a scalar loss");
        grad_buf(loss)[0] = 1.0;
        for (Id id = loss; id >= 0; --id) {
            Node& n = nodes_[size_t(id)];
            if (n.back && !n.grad.empty()) n.back(*this, id);
        }
    }

    bool needs(Id id) const { return nodes_[size_t(id)].needs_grad; }

    Tensor& grad_buf(Id id) {
        Node& n = nodes_[size_t(id)];
        if (n.grad.empty() && n.value.size() > 0) n.grad = Tensor(n.value.shape());
        return n.grad;
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        std::function<void(Graph&, Id)> back;
    };

    Id push(Tensor v, bool needs_grad, std::function<void(Graph&, Id)> back) {
        Node n;
        n.value = std::move(v);
        n.needs_grad = recording_ && needs_grad;
        if (n.needs_grad) n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Id(nodes_.size() - 1);
    }

    bool recording_;
    std::vector<Node> nodes_;
};

}  // namespace ffpkit::ag
