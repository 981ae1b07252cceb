#pragma once

#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "osd/autodiff.hpp"
#include "osd/rng.hpp"
#include "osd/tensor.hpp"

namespace osd {

// Named parameter registry. std::map keeps iteration order stable, which
// the deterministic optimizer sweep and checkpoint layout rely on.
class ParamStore {
public:
    struct Param {
        Tensor value;
        Tensor grad;
        bool trainable = true;
    };

    Tensor& create(const std::string& name, Tensor init, bool trainable = true);
    bool has(const std::string& name) const { return params_.count(name) > 0; }
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    Tensor& value(const std::string& name) { return at(name).value; }
    const Tensor& value(const std::string& name) const { return at(name).value; }

    void zero_grads();
    std::vector<std::string> names() const;
    std::vector<std::string> names_with_prefix(const std::string& prefix) const;
    void set_trainable_prefix(const std::string& prefix, bool trainable);
    uint64_t hash_prefix(const std::string& prefix) const;

    std::map<std::string, Param>& raw() { return params_; }
    const std::map<std::string, Param>& raw() const { return params_; }

private:
    std::map<std::string, Param> params_;
};

// Binds store parameters into one tape as leaves; harvest() pushes the
// tape's leaf gradients back into the store (accumulating).
class Binder {
public:
    Binder(ad::Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {}

    ad::Var operator()(const std::string& name);
    ad::Var input(Tensor t) { return tape_->leaf(std::move(t)); }
    void harvest();

    ad::Tape& tape() { return *tape_; }
    ParamStore& store() { return *store_; }

private:
    ad::Tape* tape_;
    ParamStore* store_;
    std::unordered_map<std::string, int> bound_;
};

// --- layers: thin descriptors over named parameters ---

struct Conv2dLayer {
    std::string w, b;
    int stride = 1, pad = 1;

    static Conv2dLayer create(ParamStore& ps, const std::string& name, int cin, int cout, int k, int stride, int pad,
                              Rng& rng);
    ad::Var forward(Binder& bind, ad::Var x) const;
};

struct LinearLayer {
    std::string w, b;

    static LinearLayer create(ParamStore& ps, const std::string& name, int in, int out, Rng& rng);
    ad::Var forward(Binder& bind, ad::Var x) const;  // x: [m,in]
};

// Residual self-attention over a [K,d] sequence. The row-stochastic
// attention matrix of the latest forward is kept for inspection.
struct SelfAttention {
    LinearLayer q, k, v, o;
    int width = 0;

    static SelfAttention create(ParamStore& ps, const std::string& name, int d, Rng& rng);
    ad::Var forward(Binder& bind, ad::Var x, Tensor* attn_out = nullptr) const;
};

// Adam / AdamW. Moments are stored per parameter name and serialized with
// checkpoints so resume is bitwise.
class AdamOptimizer {
public:
    struct Config {
        double lr = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.0;  // decoupled
    };

    explicit AdamOptimizer(Config cfg) : cfg_(cfg) {}

    // updates every trainable param whose name starts with `prefix`
    // ("" = all) using accumulated grads scaled by 1/grad_scale
    void step(ParamStore& ps, const std::string& prefix = "", double grad_scale = 1.0);

    Config& config() { return cfg_; }
    const Config& config() const { return cfg_; }
    std::map<std::string, std::pair<Tensor, Tensor>>& moments() { return moments_; }
    int64_t& step_count() { return t_; }

private:
    Config cfg_;
    std::map<std::string, std::pair<Tensor, Tensor>> moments_;  // name -> (m, v)
    int64_t t_ = 0;
};

// Kaiming-style inits
Tensor init_conv_weight(int cin, int cout, int k, Rng& rng);
Tensor init_linear_weight(int in, int out, Rng& rng);

}  // namespace osd
