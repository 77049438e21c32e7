#include "egopack/nn.hpp"

#include <algorithm>
#include <cmath>

namespace egopack::nn {

// --- ParamSet -----------------------------------------------------------

int ParamSet::add(const std::string& name, Tensor value) {
    if (find(name) >= 0) throw ConfigError("duplicate parameter name: " + name);
    Param p;
    p.name = name;
    p.grad = Tensor(value.rows, value.cols);
    p.value = std::move(value);
    items_.push_back(std::move(p));
    return static_cast<int>(items_.size()) - 1;
}

int ParamSet::find(const std::string& name) const {
    for (size_t i = 0; i < items_.size(); ++i)
        if (items_[i].name == name) return static_cast<int>(i);
    return -1;
}

void ParamSet::zero_grads() {
    for (auto& p : items_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

Tensor glorot_uniform(int rows, int cols, uint64_t seed, const std::string& name) {
    Rng rng(mix_seed(seed, name));
    const double limit = std::sqrt(6.0 / (rows + cols));
    Tensor t(rows, cols);
    for (auto& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

void GradBuffer::accumulate_into(ParamSet& params) const {
    for (size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].empty()) continue;
        axpy(1.0, grads[i], params[static_cast<int>(i)].grad);
    }
}

// --- Tape ---------------------------------------------------------------

ValId Tape::push(Tensor value, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    const ValId id = static_cast<ValId>(nodes_.size()) - 1;
    return id;
}

void Tape::check_finite(ValId id, const char* op) const {
    if (!nodes_[static_cast<size_t>(id)].value.finite())
        throw NumericError(std::string("non-finite values produced by ") + op);
}

ValId Tape::leaf(Tensor v) {
    if (!v.finite()) throw NumericError("non-finite input tensor");
    return push(std::move(v), nullptr);
}

ValId Tape::param(int param_index) {
    if (params_ == nullptr) throw ConfigError("tape has no parameter set attached");
    const Param& p = (*params_)[param_index];
    if (!p.value.finite()) throw NumericError("non-finite parameter: " + p.name);
    const ValId id = push(p.value, nullptr);
    nodes_[static_cast<size_t>(id)].param_index = param_index;
    return id;
}

ValId Tape::matmul(ValId a, ValId b) {
    Tensor out;
    egopack::matmul(value(a), value(b), out);
    const ValId id = push(std::move(out), nullptr);
    nodes_.back().back = [a, b, id](Tape& t) {
        const Tensor& g = t.grad(id);
        Tensor da, db;
        matmul_nt(g, t.value(b), da);
        axpy(1.0, da, t.grad_ref(a));
        matmul_tn(t.value(a), g, db);
        axpy(1.0, db, t.grad_ref(b));
    };
    check_finite(id, "matmul");
    return id;
}

ValId Tape::add(ValId a, ValId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) throw ShapeError("add shape mismatch");
    Tensor out = va;
    axpy(1.0, vb, out);
    const ValId id = push(std::move(out), nullptr);
    nodes_.back().back = [a, b, id](Tape& t) {
        axpy(1.0, t.grad(id), t.grad_ref(a));
        axpy(1.0, t.grad(id), t.grad_ref(b));
    };
    check_finite(id, "add");
    return id;
}

ValId Tape::add_row(ValId x, ValId bias) {
    const Tensor& vx = value(x);
    const Tensor& vb = value(bias);
    if (vb.rows != 1 || vb.cols != vx.cols) throw ShapeError("add_row bias must be 1 x cols");
    Tensor out = vx;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out.at(r, c) += vb.at(0, c);
    const ValId id = push(std::move(out), nullptr);
    nodes_.back().back = [x, bias, id](Tape& t) {
        const Tensor& g = t.grad(id);
        axpy(1.0, g, t.grad_ref(x));
        Tensor& gb = t.grad_ref(bias);
        for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) gb.at(0, c) += g.at(r, c);
    };
    check_finite(id, "add_row");
    return id;
}

ValId Tape::scale(ValId x, double s) {
    Tensor out = value(x);
    for (auto& v : out.data) v *= s;
    const ValId id = push(std::move(out), nullptr);
    nodes_.back().back = [x, s, id](Tape& t) { axpy(s, t.grad(id), t.grad_ref(x)); };
    check_finite(id, "scale");
    return id;
}

ValId Tape::leaky_relu(ValId x, double slope) {
    Tensor out = value(x);
    for (auto& v : out.data) v = v > 0.0 ? v : slope * v;
    const ValId id = push(std::move(out), nullptr);
    nodes_.back().back = [x, slope, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& vx = t.value(x);
        Tensor& gx = t.grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i)
            gx.data[i] += g.data[i] * (vx.data[i] > 0.0 ? 1.0 : slope);
    };
    check_finite(id, "leaky_relu");
    return id;
}

ValId Tape::layer_norm(ValId x, ValId gain, ValId bias, double eps) {
    const Tensor& vx = value(x);
    const Tensor& vg = value(gain);
    const Tensor& vb = value(bias);
    if (vg.rows != 1 || vg.cols != vx.cols || vb.rows != 1 || vb.cols != vx.cols)
        throw ShapeError("layer_norm gain/bias must be 1 x cols");
    const int C = vx.cols;
    Tensor xhat(vx.rows, C);
    std::vector<double> inv_std(static_cast<size_t>(vx.rows));
    Tensor out(vx.rows, C);
    for (int r = 0; r < vx.rows; ++r) {
        double mean = 0.0;
        for (int c = 0; c < C; ++c) mean += vx.at(r, c);
        mean /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) {
            const double d = vx.at(r, c) - mean;
            var += d * d;
        }
        var /= C;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(r)] = is;
        for (int c = 0; c < C; ++c) {
            const double h = (vx.at(r, c) - mean) * is;
            xhat.at(r, c) = h;
            out.at(r, c) = vg.at(0, c) * h + vb.at(0, c);
        }
    }
    const ValId id = push(std::move(out), nullptr);
    nodes_.back().back = [x, gain, bias, id, xhat = std::move(xhat),
                          inv_std = std::move(inv_std)](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& vg = t.value(gain);
        Tensor& gx = t.grad_ref(x);
        Tensor& gg = t.grad_ref(gain);
        Tensor& gb = t.grad_ref(bias);
        const int C = g.cols;
        for (int r = 0; r < g.rows; ++r) {
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int c = 0; c < C; ++c) {
                const double dxh = g.at(r, c) * vg.at(0, c);
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * xhat.at(r, c);
                gg.at(0, c) += g.at(r, c) * xhat.at(r, c);
                gb.at(0, c) += g.at(r, c);
            }
            const double is = inv_std[static_cast<size_t>(r)];
            for (int c = 0; c < C; ++c) {
                const double dxh = g.at(r, c) * vg.at(0, c);
                gx.at(r, c) += is * (dxh - sum_dxhat / C - xhat.at(r, c) * sum_dxhat_xhat / C);
            }
        }
    };
    check_finite(id, "layer_norm");
    return id;
}

ValId Tape::select_rows(ValId x, std::vector<int> idx) {
    const Tensor& vx = value(x);
    Tensor out(static_cast<int>(idx.size()), vx.cols);
    for (size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= vx.rows) throw ShapeError("select_rows index out of range");
        for (int c = 0; c < vx.cols; ++c) out.at(static_cast<int>(r), c) = vx.at(idx[r], c);
    }
    const ValId id = push(std::move(out), nullptr);
    nodes_.back().back = [x, idx = std::move(idx), id](Tape& t) {
        const Tensor& g = t.grad(id);
        Tensor& gx = t.grad_ref(x);
        for (size_t r = 0; r < idx.size(); ++r)
            for (int c = 0; c < g.cols; ++c)
                gx.at(idx[r], c) += g.at(static_cast<int>(r), c);
    };
    return id;
}

ValId Tape::max_pool_rows(ValId x, std::vector<int> idx) {
    if (idx.empty()) throw ShapeError("max_pool_rows over empty selection");
    const Tensor& vx = value(x);
    Tensor out(1, vx.cols);
    std::vector<int> argmax(static_cast<size_t>(vx.cols));
    for (int c = 0; c < vx.cols; ++c) {
        int best = idx[0];
        double bestv = vx.at(idx[0], c);
        for (size_t r = 1; r < idx.size(); ++r) {
            const double v = vx.at(idx[r], c);
            if (v > bestv) {
                bestv = v;
                best = idx[r];
            }
        }
        out.at(0, c) = bestv;
        argmax[static_cast<size_t>(c)] = best;
    }
    const ValId id = push(std::move(out), nullptr);
    nodes_.back().back = [x, argmax = std::move(argmax), id](Tape& t) {
        const Tensor& g = t.grad(id);
        Tensor& gx = t.grad_ref(x);
        for (int c = 0; c < g.cols; ++c) gx.at(argmax[static_cast<size_t>(c)], c) += g.at(0, c);
    };
    return id;
}

ValId Tape::softmax_cross_entropy(ValId logits, std::vector<int> labels) {
    const Tensor& vx = value(logits);
    if (static_cast<int>(labels.size()) != vx.rows)
        throw ShapeError("softmax_cross_entropy: one label per row required");
    const int C = vx.cols;
    double loss = 0.0;
    Tensor softmax(vx.rows, C);
    for (int r = 0; r < vx.rows; ++r) {
        const int y = labels[static_cast<size_t>(r)];
        if (y < 0 || y >= C) throw ShapeError("softmax_cross_entropy: label out of range");
        double mx = vx.at(r, 0);
        for (int c = 1; c < C; ++c) mx = std::max(mx, vx.at(r, c));
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::exp(vx.at(r, c) - mx);
        const double lse = mx + std::log(z);
        loss += lse - vx.at(r, y);
        for (int c = 0; c < C; ++c) softmax.at(r, c) = std::exp(vx.at(r, c) - lse);
    }
    loss /= vx.rows;
    const int rows = vx.rows;
    const ValId id = push(Tensor(1, 1, loss), nullptr);
    nodes_.back().back = [logits, labels = std::move(labels), softmax = std::move(softmax), rows,
                          id](Tape& t) {
        const double g = t.grad(id).at(0, 0) / rows;
        Tensor& gx = t.grad_ref(logits);
        for (int r = 0; r < softmax.rows; ++r)
            for (int c = 0; c < softmax.cols; ++c) {
                double d = softmax.at(r, c);
                if (c == labels[static_cast<size_t>(r)]) d -= 1.0;
                gx.at(r, c) += g * d;
            }
    };
    check_finite(id, "softmax_cross_entropy");
    return id;
}

ValId Tape::bce_with_logits(ValId logits, Tensor targets) {
    const Tensor& vx = value(logits);
    if (!vx.same_shape(targets)) throw ShapeError("bce_with_logits shape mismatch");
    const size_t n = vx.size();
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double x = vx.data[i];
        const double t = targets.data[i];
        loss += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    }
    loss /= static_cast<double>(n);
    const ValId id = push(Tensor(1, 1, loss), nullptr);
    nodes_.back().back = [logits, targets = std::move(targets), n, id](Tape& t) {
        const double g = t.grad(id).at(0, 0) / static_cast<double>(n);
        const Tensor& vx = t.value(logits);
        Tensor& gx = t.grad_ref(logits);
        for (size_t i = 0; i < n; ++i) {
            const double sig = 1.0 / (1.0 + std::exp(-vx.data[i]));
            gx.data[i] += g * (sig - targets.data[i]);
        }
    };
    check_finite(id, "bce_with_logits");
    return id;
}

void Tape::backward(ValId root) {
    const Tensor& rv = value(root);
    if (rv.rows != 1 || rv.cols != 1) throw ShapeError("backward root must be scalar");
    for (auto& n : nodes_) n.grad = Tensor(n.value.rows, n.value.cols);
    nodes_[static_cast<size_t>(root)].grad.at(0, 0) = 1.0;
    for (size_t i = nodes_.size(); i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }
}

GradBuffer Tape::take_param_grads() {
    GradBuffer buf;
    if (params_ != nullptr) buf.grads.resize(static_cast<size_t>(params_->size()));
    for (auto& n : nodes_) {
        if (n.param_index < 0) continue;
        auto& slot = buf.grads[static_cast<size_t>(n.param_index)];
        if (slot.empty())
            slot = n.grad;
        else
            axpy(1.0, n.grad, slot);
    }
    return buf;
}

// --- optimizer ----------------------------------------------------------

void AdamState::ensure_shapes(const ParamSet& params) {
    m.resize(static_cast<size_t>(params.size()));
    v.resize(static_cast<size_t>(params.size()));
    for (int i = 0; i < params.size(); ++i) {
        const Tensor& val = params[i].value;
        if (m[static_cast<size_t>(i)].empty()) m[static_cast<size_t>(i)] = Tensor(val.rows, val.cols);
        if (v[static_cast<size_t>(i)].empty()) v[static_cast<size_t>(i)] = Tensor(val.rows, val.cols);
    }
}

void adam_step(ParamSet& params, AdamState& state, double lr_factor) {
    state.ensure_shapes(params);
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    const double lr = state.lr * lr_factor;
    for (int i = 0; i < params.size(); ++i) {
        Param& p = params[i];
        if (!p.trainable) continue;
        Tensor& m = state.m[static_cast<size_t>(i)];
        Tensor& v = state.v[static_cast<size_t>(i)];
        for (size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad.data[j];
            m.data[j] = state.beta1 * m.data[j] + (1.0 - state.beta1) * g;
            v.data[j] = state.beta2 * v.data[j] + (1.0 - state.beta2) * g * g;
            const double mhat = m.data[j] / bc1;
            const double vhat = v.data[j] / bc2;
            p.value.data[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
    params.zero_grads();
}

double warmup_factor(int epoch, int warmup_epochs) {
    if (warmup_epochs <= 0) return 1.0;
    return std::min(1.0, static_cast<double>(epoch + 1) / warmup_epochs);
}

// --- gradient checking ---------------------------------------------------

double rel_err(double analytic, double fd) {
    return std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
}

double grad_check(ParamSet& params, const ForwardFn& forward, double eps) {
    auto eval = [&]() {
        Tape t(&params);
        const ValId root = forward(t);
        return t.value(root).at(0, 0);
    };

    const double f1 = eval();
    const double f2 = eval();
    if (f1 != f2) throw NumericError("non-deterministic forward detected in grad_check");

    // Analytic gradients.
    std::vector<Tensor> analytic(static_cast<size_t>(params.size()));
    {
        Tape t(&params);
        const ValId root = forward(t);
        t.backward(root);
        GradBuffer buf = t.take_param_grads();
        for (int i = 0; i < params.size(); ++i) {
            auto& g = buf.grads[static_cast<size_t>(i)];
            analytic[static_cast<size_t>(i)] =
                g.empty() ? Tensor(params[i].value.rows, params[i].value.cols) : g;
        }
    }

    double max_err = 0.0;
    for (int i = 0; i < params.size(); ++i) {
        if (!params[i].trainable) continue;
        Tensor& value = params[i].value;
        for (size_t j = 0; j < value.size(); ++j) {
            const double saved = value.data[j];
            value.data[j] = saved + eps;
            const double fp = eval();
            value.data[j] = saved - eps;
            const double fm = eval();
            value.data[j] = saved;
            const double g_fd = (fp - fm) / (2.0 * eps);
            max_err = std::max(max_err, rel_err(analytic[static_cast<size_t>(i)].data[j], g_fd));
        }
    }
    return max_err;
}

}  // namespace egopack::nn
