#include "osd/lora.hpp"

#include <cmath>
#include <stdexcept>

namespace osd {

using ad::Var;

LoraAdapter LoraAdapter::create(ParamStore& ps, const std::string& name, int d_in, int d_out, int rank, double scale,
                                Rng& rng) {
    if (rank < 1) throw std::invalid_argument("LoraAdapter: rank must be >= 1");
    LoraAdapter a;
    a.down = name + ".down";
    a.up = name + ".up";
    a.scale = scale;
    a.rank = rank;
    ps.create(a.down, rng.normal_tensor({rank, d_in}, 0.0, 1.0 / std::sqrt(static_cast<double>(d_in))));
    ps.create(a.up, Tensor({d_out, rank}, 0.0));
    return a;
}

Var lora_linear(Binder& bind, Var x, const LinearLayer& base, const LoraAdapter* adapter) {
    Var y = base.forward(bind, x);
    if (!adapter) return y;
    const Tensor& wshape = bind.store().value(base.w);
    const Tensor& dshape = bind.store().value(adapter->down);
    const Tensor& ushape = bind.store().value(adapter->up);
    if (dshape.dim(1) != wshape.dim(1) || ushape.dim(0) != wshape.dim(0))
        throw std::invalid_argument("lora_linear: adapter dims do not match layer " + base.w);
    Var h = ad::matmul(x, bind(adapter->down), false, true);   // [m, r]
    Var delta = ad::matmul(h, bind(adapter->up), false, true);  // [m, out]
    return ad::axpy(y, delta, adapter->scale);
}

Var lora_conv2d(Binder& bind, Var x, const Conv2dLayer& base, const LoraAdapter* adapter) {
    Var w = bind(base.w);
    if (adapter) {
        const Tensor& ws = w.val();
        const int cout = ws.dim(0), flat = ws.dim(1) * ws.dim(2) * ws.dim(3);
        const Tensor& ds = bind.store().value(adapter->down);
        const Tensor& us = bind.store().value(adapter->up);
        if (ds.dim(1) != flat || us.dim(0) != cout)
            throw std::invalid_argument("lora_conv2d: adapter dims do not match layer " + base.w);
        Var delta = ad::matmul(bind(adapter->up), bind(adapter->down));  // [cout, flat]
        Var w2 = ad::axpy(ad::reshape(w, {cout, flat}), delta, adapter->scale);
        w = ad::reshape(w2, ws.shape);
    }
    return ad::conv2d(x, w, bind(base.b), base.stride, base.pad);
}

}  // namespace osd
