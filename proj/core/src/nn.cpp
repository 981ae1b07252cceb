#include "osd/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace osd {

using ad::Var;

Tensor& ParamStore::create(const std::string& name, Tensor init, bool trainable) {
    if (params_.count(name)) throw std::invalid_argument("ParamStore: duplicate param " + name);
    Param p;
    p.grad = Tensor(init.shape);
    p.value = std::move(init);
    p.trainable = trainable;
    auto [it, ok] = params_.emplace(name, std::move(p));
    (void)ok;
    return it->second.value;
}

ParamStore::Param& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParamStore: unknown param " + name);
    return it->second;
}

const ParamStore::Param& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParamStore: unknown param " + name);
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& [name, p] : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (auto& [name, p] : params_) out.push_back(name);
    return out;
}

std::vector<std::string> ParamStore::names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (auto& [name, p] : params_)
        if (name.rfind(prefix, 0) == 0) out.push_back(name);
    return out;
}

void ParamStore::set_trainable_prefix(const std::string& prefix, bool trainable) {
    for (auto& [name, p] : params_)
        if (name.rfind(prefix, 0) == 0) p.trainable = trainable;
}

uint64_t ParamStore::hash_prefix(const std::string& prefix) const {
    uint64_t h = 14695981039346656037ull;
    for (auto& [name, p] : params_) {
        if (name.rfind(prefix, 0) != 0) continue;
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        h ^= tensor_hash(p.value);
        h *= 1099511628211ull;
    }
    return h;
}

Var Binder::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return Var{tape_, it->second};
    Var v = tape_->leaf(store_->value(name));
    bound_.emplace(name, v.id);
    return v;
}

void Binder::harvest() {
    for (auto& [name, id] : bound_) {
        const Tensor& g = tape_->grad(Var{tape_, id});
        if (g.data.empty()) continue;  // backward not run
        Tensor& dst = store_->at(name).grad;
        for (int64_t i = 0; i < g.size(); ++i) dst.data[i] += g.data[i];
    }
}

Tensor init_conv_weight(int cin, int cout, int k, Rng& rng) {
    const double std = std::sqrt(2.0 / (cin * k * k));
    return rng.normal_tensor({cout, cin, k, k}, 0.0, std);
}

Tensor init_linear_weight(int in, int out, Rng& rng) {
    const double std = std::sqrt(2.0 / in);
    return rng.normal_tensor({out, in}, 0.0, std);
}

Conv2dLayer Conv2dLayer::create(ParamStore& ps, const std::string& name, int cin, int cout, int k, int stride, int pad,
                                Rng& rng) {
    Conv2dLayer l;
    l.w = name + ".w";
    l.b = name + ".b";
    l.stride = stride;
    l.pad = pad;
    ps.create(l.w, init_conv_weight(cin, cout, k, rng));
    ps.create(l.b, Tensor({cout}, 0.0));
    return l;
}

Var Conv2dLayer::forward(Binder& bind, Var x) const { return ad::conv2d(x, bind(w), bind(b), stride, pad); }

LinearLayer LinearLayer::create(ParamStore& ps, const std::string& name, int in, int out, Rng& rng) {
    LinearLayer l;
    l.w = name + ".w";
    l.b = name + ".b";
    ps.create(l.w, init_linear_weight(in, out, rng));
    ps.create(l.b, Tensor({out}, 0.0));
    return l;
}

Var LinearLayer::forward(Binder& bind, Var x) const { return ad::linear(x, bind(w), bind(b)); }

SelfAttention SelfAttention::create(ParamStore& ps, const std::string& name, int d, Rng& rng) {
    SelfAttention a;
    a.width = d;
    a.q = LinearLayer::create(ps, name + ".q", d, d, rng);
    a.k = LinearLayer::create(ps, name + ".k", d, d, rng);
    a.v = LinearLayer::create(ps, name + ".v", d, d, rng);
    a.o = LinearLayer::create(ps, name + ".o", d, d, rng);
    return a;
}

Var SelfAttention::forward(Binder& bind, Var x, Tensor* attn_out) const {
    Var Q = q.forward(bind, x);
    Var K = k.forward(bind, x);
    Var V = v.forward(bind, x);
    Var logits = ad::affine(ad::matmul(Q, K, false, true), 1.0 / std::sqrt(static_cast<double>(width)), 0.0);
    Var A = ad::softmax_rows(logits);
    if (attn_out) *attn_out = A.val();
    return ad::add(x, o.forward(bind, ad::matmul(A, V)));
}

void AdamOptimizer::step(ParamStore& ps, const std::string& prefix, double grad_scale) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : ps.raw()) {
        if (!p.trainable) continue;
        if (name.rfind(prefix, 0) != 0) continue;
        auto& [m, v] = moments_[name];
        if (m.data.empty()) {
            m = Tensor(p.value.shape);
            v = Tensor(p.value.shape);
        }
        for (int64_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad.data[i] / grad_scale;
            m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g;
            v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g * g;
            const double mh = m.data[i] / bc1;
            const double vh = v.data[i] / bc2;
            p.value.data[i] -= cfg_.lr * (mh / (std::sqrt(vh) + cfg_.eps) + cfg_.weight_decay * p.value.data[i]);
        }
    }
}

}  // namespace osd
