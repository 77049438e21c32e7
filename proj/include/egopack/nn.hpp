#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "egopack/rng.hpp"
#include "egopack/tensor.hpp"

namespace egopack::nn {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;
};

// Flat collection of named parameters. Tapes reference params by index so
// per-sample gradient buffers can be staged and reduced in a fixed order.
class ParamSet {
   public:
    int add(const std::string& name, Tensor value);
    int find(const std::string& name) const;  // -1 when absent
    Param& operator[](int i) { return items_[static_cast<size_t>(i)]; }
    const Param& operator[](int i) const { return items_[static_cast<size_t>(i)]; }
    int size() const { return static_cast<int>(items_.size()); }
    void zero_grads();

    std::vector<Param>& items() { return items_; }
    const std::vector<Param>& items() const { return items_; }

   private:
    std::vector<Param> items_;
};

// Glorot-uniform init seeded per parameter name, so initial values do not
// depend on the order in which parameters are created.
Tensor glorot_uniform(int rows, int cols, uint64_t seed, const std::string& name);

using ValId = int;

// Per-sample gradient staging buffer, aligned with a ParamSet.
struct GradBuffer {
    std::vector<Tensor> grads;  // empty tensor = untouched param
    void accumulate_into(ParamSet& params) const;
};

// Eager reverse-mode tape over Tensor ops. Values are computed at op
// creation; backward() walks nodes in reverse creation order. One tape
// per sample per step.
class Tape {
   public:
    explicit Tape(const ParamSet* params = nullptr) : params_(params) {}

    ValId leaf(Tensor v);              // constant, no gradient
    ValId param(int param_index);      // copies the param's current value

    const Tensor& value(ValId id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Tensor& grad(ValId id) const { return nodes_[static_cast<size_t>(id)].grad; }

    ValId matmul(ValId a, ValId b);
    ValId add(ValId a, ValId b);                       // same shape
    ValId add_row(ValId x, ValId bias);                // bias 1xC broadcast over rows
    ValId scale(ValId x, double s);
    ValId leaky_relu(ValId x, double slope);
    ValId layer_norm(ValId x, ValId gain, ValId bias, double eps);  // row-wise
    ValId select_rows(ValId x, std::vector<int> idx);
    ValId max_pool_rows(ValId x, std::vector<int> idx);             // 1xC coordinate max
    // Mean over rows of (logsumexp - logit[label]); labels.size() == rows.
    ValId softmax_cross_entropy(ValId logits, std::vector<int> labels);
    // Mean over all entries of the stable BCE-with-logits.
    ValId bce_with_logits(ValId logits, Tensor targets);

    void backward(ValId root);
    GradBuffer take_param_grads();  // valid after backward()

   private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&)> back;  // null for leaves
        int param_index = -1;
    };

    ValId push(Tensor value, std::function<void(Tape&)> back);
    Tensor& grad_ref(ValId id) { return nodes_[static_cast<size_t>(id)].grad; }
    void check_finite(ValId id, const char* op) const;

    const ParamSet* params_;
    std::deque<Node> nodes_;
};

// --- optimizer ---------------------------------------------------------

struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    void ensure_shapes(const ParamSet& params);
};

// Standard Adam with bias correction. lr_factor implements the linear
// warm-up; params with trainable=false or an all-zero history stay put.
void adam_step(ParamSet& params, AdamState& state, double lr_factor = 1.0);

// min(1, (epoch+1)/warmup_epochs); factor 1 when warm-up is disabled.
double warmup_factor(int epoch, int warmup_epochs);

// --- gradient checking --------------------------------------------------

// Builds the forward graph with the current parameter values and returns the
// scalar root. Must be deterministic; grad_check runs it repeatedly.
using ForwardFn = std::function<ValId(Tape&)>;

// Compares analytic gradients against central finite differences over every
// coordinate of every trainable param. Returns the max relative error
// |g_a - g_fd| / max(1, |g_a|, |g_fd|). Throws NumericError when two forward
// evaluations disagree (non-deterministic forward).
double grad_check(ParamSet& params, const ForwardFn& forward, double eps = 1e-5);

double rel_err(double analytic, double fd);

}  // namespace egopack::nn
