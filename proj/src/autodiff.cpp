// SPDX-License-Identifier: Apache-2.0
#include "cogr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cogr {

Var Tape::push(Vector value, bool needs_grad, Backward backward) {
    Node n;
    n.grad.assign(value.size(), 0.0);
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::constant(Vector value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(std::span<const double> value) {
    return push(Vector(value.begin(), value.end()), true, nullptr);
}

void Tape::backward(Var root) {
    if (value(root).size() != 1) fail(ErrorCode::shape, "backward: root must be a scalar");
    for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
    nodes_[root.id].grad[0] = 1.0;
    for (std::size_t id = root.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.needs_grad || !n.backward) continue;
        n.backward(*this, id);
    }
}

Var Tape::vec_mat(Var x, Var w, std::size_t rows, std::size_t cols) {
    const Vector& xv = value(x);
    const Vector& wv = value(w);
    if (xv.size() != rows || wv.size() != rows * cols) {
        fail(ErrorCode::shape, "tape vec_mat: shape mismatch");
    }
    Vector out(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double xr = xv[r];
        const double* row = wv.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += xr * row[c];
    }
    const bool ng = needs_grad(x) || needs_grad(w);
    return push(std::move(out), ng, [x, w, rows, cols](Tape& t, std::size_t self) {
        const Vector& g = t.grad_of(self);
        if (t.needs_grad(x)) {
            const Vector& wv = t.value(w);
            Vector& gx = t.grad_of(x.id);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* row = wv.data() + r * cols;
                double acc = 0.0;
                for (std::size_t c = 0; c < cols; ++c) acc += row[c] * g[c];
                gx[r] += acc;
            }
        }
        if (t.needs_grad(w)) {
            const Vector& xv = t.value(x);
            Vector& gw = t.grad_of(w.id);
            for (std::size_t r = 0; r < rows; ++r) {
                double* row = gw.data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) row[c] += xv[r] * g[c];
            }
        }
    });
}

Var Tape::add(Var a, Var b) {
    Vector out = cogr::add(value(a), value(b));
    return push(std::move(out), needs_grad(a) || needs_grad(b), [a, b](Tape& t, std::size_t self) {
        const Vector& g = t.grad_of(self);
        for (Var in : {a, b}) {
            if (!t.needs_grad(in)) continue;
            Vector& gi = t.grad_of(in.id);
            for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
        }
    });
}

Var Tape::sub(Var a, Var b) {
    Vector out = cogr::sub(value(a), value(b));
    return push(std::move(out), needs_grad(a) || needs_grad(b), [a, b](Tape& t, std::size_t self) {
        const Vector& g = t.grad_of(self);
        if (t.needs_grad(a)) {
            Vector& ga = t.grad_of(a.id);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.needs_grad(b)) {
            Vector& gb = t.grad_of(b.id);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Var Tape::scale(Var a, double s) {
    Vector out = scaled(value(a), s);
    return push(std::move(out), needs_grad(a), [a, s](Tape& t, std::size_t self) {
        const Vector& g = t.grad_of(self);
        Vector& ga = t.grad_of(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
    });
}

Var Tape::tanh(Var a) {
    Vector out = value(a);
    for (auto& v : out) v = std::tanh(v);
    return push(std::move(out), needs_grad(a), [a](Tape& t, std::size_t self) {
        const Vector& g = t.grad_of(self);
        const Vector& y = t.value(Var{self});
        Vector& ga = t.grad_of(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

Var Tape::gather(Var a, std::span<const std::size_t> indices) {
    const Vector& av = value(a);
    Vector out;
    out.reserve(indices.size());
    for (std::size_t idx : indices) {
        if (idx >= av.size()) fail(ErrorCode::shape, "tape gather: index out of range");
        out.push_back(av[idx]);
    }
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return push(std::move(out), needs_grad(a), [a, idx = std::move(idx)](Tape& t, std::size_t self) {
        const Vector& g = t.grad_of(self);
        Vector& ga = t.grad_of(a.id);
        for (std::size_t k = 0; k < idx.size(); ++k) ga[idx[k]] += g[k];
    });
}

Var Tape::softmax(Var a) {
    Vector out = cogr::softmax(value(a));
    return push(std::move(out), needs_grad(a), [a](Tape& t, std::size_t self) {
        const Vector& g = t.grad_of(self);
        const Vector& y = t.value(Var{self});
        double inner = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * y[i];
        Vector& ga = t.grad_of(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += y[i] * (g[i] - inner);
    });
}

Var Tape::weighted_sum(Var w, std::span<const Var> items) {
    const Vector& wv = value(w);
    if (items.empty() || wv.size() != items.size()) {
        fail(ErrorCode::shape, "tape weighted_sum: weight count does not match item count");
    }
    const std::size_t dim = value(items[0]).size();
    Vector out(dim, 0.0);
    bool ng = needs_grad(w);
    for (std::size_t k = 0; k < items.size(); ++k) {
        const Vector& iv = value(items[k]);
        if (iv.size() != dim) fail(ErrorCode::shape, "tape weighted_sum: ragged items");
        for (std::size_t i = 0; i < dim; ++i) out[i] += wv[k] * iv[i];
        ng = ng || needs_grad(items[k]);
    }
    std::vector<Var> its(items.begin(), items.end());
    return push(std::move(out), ng, [w, its = std::move(its)](Tape& t, std::size_t self) {
        const Vector& g = t.grad_of(self);
        const Vector& wv = t.value(w);
        const bool gw_needed = t.needs_grad(w);
        for (std::size_t k = 0; k < its.size(); ++k) {
            const Vector& iv = t.value(its[k]);
            if (gw_needed) t.grad_of(w.id)[k] += dot(g, iv);
            if (t.needs_grad(its[k])) {
                Vector& gi = t.grad_of(its[k].id);
                for (std::size_t i = 0; i < g.size(); ++i) gi[i] += wv[k] * g[i];
            }
        }
    });
}

Var Tape::cosine(Var a, Var b) {
    const Vector& av = value(a);
    const Vector& bv = value(b);
    if (av.size() != bv.size()) fail(ErrorCode::shape, "tape cosine: dimension mismatch");
    const double na = norm2(av);
    const double nb = norm2(bv);
    if (!(na > 0.0) || !(nb > 0.0)) fail(ErrorCode::degenerate_vector, "tape cosine: zero-norm operand");
    // Unclamped so the value stays consistent with its derivative.
    const double c = dot(av, bv) / (na * nb);
    return push(Vector{c}, needs_grad(a) || needs_grad(b), [a, b, na, nb, c](Tape& t, std::size_t self) {
        const double g = t.grad_of(self)[0];
        const Vector& av = t.value(a);
        const Vector& bv = t.value(b);
        // d cos / da = b/(|a||b|) - cos·a/|a|²
        if (t.needs_grad(a)) {
            Vector& ga = t.grad_of(a.id);
            for (std::size_t i = 0; i < av.size(); ++i) {
                ga[i] += g * (bv[i] / (na * nb) - c * av[i] / (na * na));
            }
        }
        if (t.needs_grad(b)) {
            Vector& gb = t.grad_of(b.id);
            for (std::size_t i = 0; i < bv.size(); ++i) {
                gb[i] += g * (av[i] / (na * nb) - c * bv[i] / (nb * nb));
            }
        }
    });
}

Var Tape::binary_cross_entropy(Var score, int label, double temperature) {
    const double s = scalar_value(score);
    const double loss = cogr::binary_cross_entropy(s, label, temperature);
    const double dloss = binary_cross_entropy_grad(s, label, temperature);
    return push(Vector{loss}, needs_grad(score), [score, dloss](Tape& t, std::size_t self) {
        t.grad_of(score.id)[0] += dloss * t.grad_of(self)[0];
    });
}

Var Tape::kl_from_target(const Vector& target, Var q) {
    const double kl = kl_divergence(target, value(q));
    return push(Vector{kl}, needs_grad(q), [target, q](Tape& t, std::size_t self) {
        const double g = t.grad_of(self)[0];
        const Vector& qv = t.value(q);
        Vector& gq = t.grad_of(q.id);
        for (std::size_t i = 0; i < qv.size(); ++i) {
            if (target[i] != 0.0) gq[i] -= g * target[i] / qv[i];
        }
    });
}

Var Tape::softmax_cross_entropy(Var logits, std::size_t label) {
    const Vector& z = value(logits);
    if (label >= z.size()) fail(ErrorCode::invalid_label, "softmax_cross_entropy: label out of range");
    Vector probs = cogr::softmax(z);
    const double loss = -std::log(std::max(probs[label], kProbClamp));
    return push(Vector{loss}, needs_grad(logits), [logits, label, probs = std::move(probs)](Tape& t, std::size_t self) {
        const double g = t.grad_of(self)[0];
        Vector& gz = t.grad_of(logits.id);
        for (std::size_t i = 0; i < probs.size(); ++i) {
            gz[i] += g * (probs[i] - (i == label ? 1.0 : 0.0));
        }
    });
}

Var Tape::sum(std::span<const Var> scalars) {
    double total = 0.0;
    bool ng = false;
    for (Var s : scalars) {
        total += scalar_value(s);
        ng = ng || needs_grad(s);
    }
    std::vector<Var> ins(scalars.begin(), scalars.end());
    return push(Vector{total}, ng, [ins = std::move(ins)](Tape& t, std::size_t self) {
        const double g = t.grad_of(self)[0];
        for (Var s : ins) {
            if (t.needs_grad(s)) t.grad_of(s.id)[0] += g;
        }
    });
}

Var Tape::stack(std::span<const Var> scalars) {
    Vector out;
    out.reserve(scalars.size());
    bool ng = false;
    for (Var s : scalars) {
        out.push_back(scalar_value(s));
        ng = ng || needs_grad(s);
    }
    std::vector<Var> ins(scalars.begin(), scalars.end());
    return push(std::move(out), ng, [ins = std::move(ins)](Tape& t, std::size_t self) {
        const Vector& g = t.grad_of(self);
        for (std::size_t k = 0; k < ins.size(); ++k) {
            if (t.needs_grad(ins[k])) t.grad_of(ins[k].id)[0] += g[k];
        }
    });
}

}  // namespace cogr
