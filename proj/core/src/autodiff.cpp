#include "osd/autodiff.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>

namespace osd::ad {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

const Tensor& Var::val() const { return tape->value(*this); }

Var make_node(Tape& t, Tensor value, std::function<void(Tape&)> bp) { return t.emit(std::move(value), std::move(bp)); }
Tensor& node_grad(Tape& t, int id) { return t.grad_mut(id); }

Var Tape::leaf(Tensor value) { return emit(std::move(value), nullptr); }

Var Tape::emit(Tensor value, std::function<void(Tape&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: Var from another tape");
    if (nodes_[static_cast<size_t>(loss.id)].value.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar");
    for (auto& n : nodes_) n.grad = Tensor(n.value.shape);
    nodes_[static_cast<size_t>(loss.id)].grad.data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        auto& n = nodes_[static_cast<size_t>(i)];
        if (n.backprop) n.backprop(*this);
    }
}

namespace {

void check_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw std::invalid_argument("vars from different tapes");
}

void check_same_shape(Var a, Var b, const char* op) {
    if (a.val().shape != b.val().shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.val().shape) + " vs " +
                                    shape_str(b.val().shape));
}

// elementwise binary with custom value & partials
template <class FVal, class FDa, class FDb>
Var ew_binary(Var a, Var b, const char* name, FVal fval, FDa fda, FDb fdb) {
    check_same_tape(a, b);
    check_same_shape(a, b, name);
    const Tensor& va = a.val();
    const Tensor& vb = b.val();
    Tensor out(va.shape);
    for (int64_t i = 0; i < va.size(); ++i) out.data[i] = fval(va.data[i], vb.data[i]);
    int ia = a.id, ib = b.id;
    Var r = make_node(*a.tape, std::move(out), nullptr);
    int ir = r.id;
    a.tape->backprop_slot(ir) = [ia, ib, ir, fda, fdb](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        const Tensor& va2 = t.value(Var{&t, ia});
        const Tensor& vb2 = t.value(Var{&t, ib});
        Tensor& ga = node_grad(t, ia);
        Tensor& gb = node_grad(t, ib);
        for (int64_t i = 0; i < g.size(); ++i) {
            ga.data[i] += g.data[i] * fda(va2.data[i], vb2.data[i]);
            gb.data[i] += g.data[i] * fdb(va2.data[i], vb2.data[i]);
        }
    };
    return r;
}

// elementwise unary; partial computed from input value x and output value y
template <class FVal, class FD>
Var ew_unary(Var a, FVal fval, FD fd) {
    const Tensor& va = a.val();
    Tensor out(va.shape);
    for (int64_t i = 0; i < va.size(); ++i) out.data[i] = fval(va.data[i]);
    int ia = a.id;
    Var r = make_node(*a.tape, std::move(out), nullptr);
    int ir = r.id;
    a.tape->backprop_slot(ir) = [ia, ir, fd](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        const Tensor& x = t.value(Var{&t, ia});
        const Tensor& y = t.value(Var{&t, ir});
        Tensor& ga = node_grad(t, ia);
        for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * fd(x.data[i], y.data[i]);
    };
    return r;
}

}  // namespace

Var add(Var a, Var b) {
    return ew_binary(a, b, "add", [](double x, double y) { return x + y; },
                     [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
    return ew_binary(a, b, "sub", [](double x, double y) { return x - y; },
                     [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
    return ew_binary(a, b, "mul", [](double x, double y) { return x * y; },
                     [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var axpy(Var a, Var b, double alpha) {
    return ew_binary(a, b, "axpy", [alpha](double x, double y) { return x + alpha * y; },
                     [](double, double) { return 1.0; }, [alpha](double, double) { return alpha; });
}

Var affine(Var a, double k, double c) {
    return ew_unary(a, [k, c](double x) { return k * x + c; }, [k](double, double) { return k; });
}

Var neg(Var a) { return affine(a, -1.0, 0.0); }

Var relu(Var a) {
    return ew_unary(a, [](double x) { return x > 0 ? x : 0.0; },
                    [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope) {
    return ew_unary(a, [slope](double x) { return x > 0 ? x : slope * x; },
                    [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var silu(Var a) {
    return ew_unary(a, [](double x) { return x / (1.0 + std::exp(-x)); },
                    [](double x, double) {
                        const double s = 1.0 / (1.0 + std::exp(-x));
                        return s * (1.0 + x * (1.0 - s));
                    });
}

Var sigmoid(Var a) {
    return ew_unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](double, double y) { return y * (1.0 - y); });
}

Var tanh_(Var a) {
    return ew_unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var log_(Var a) {
    return ew_unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var exp_(Var a) {
    return ew_unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var abs_(Var a) {
    return ew_unary(a, [](double x) { return std::abs(x); },
                    [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var square(Var a) {
    return ew_unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt_(Var a) {
    return ew_unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var pow_const(Var a, double p) {
    return ew_unary(a, [p](double x) { return std::pow(x, p); },
                    [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Var clamp_(Var a, double lo, double hi) {
    return ew_unary(a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
                    [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var stopgrad(Var a) {
    // value passes through, gradient is dropped
    return make_node(*a.tape, a.val(), [](Tape&) {});
}

Var reshape(Var a, std::vector<int> shape) {
    Tensor out = a.val().reshaped(shape);
    int ia = a.id;
    Var r = make_node(*a.tape, std::move(out), nullptr);
    int ir = r.id;
    a.tape->backprop_slot(ir) = [ia, ir](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        Tensor& ga = node_grad(t, ia);
        for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
    };
    return r;
}

Var concat_channels(Var a, Var b) {
    check_same_tape(a, b);
    const Tensor& va = a.val();
    const Tensor& vb = b.val();
    if (va.rank() != 3 || vb.rank() != 3 || va.dim(1) != vb.dim(1) || va.dim(2) != vb.dim(2))
        throw std::invalid_argument("concat_channels: incompatible shapes");
    Tensor out({va.dim(0) + vb.dim(0), va.dim(1), va.dim(2)});
    std::copy(va.data.begin(), va.data.end(), out.data.begin());
    std::copy(vb.data.begin(), vb.data.end(), out.data.begin() + va.size());
    int ia = a.id, ib = b.id;
    int64_t na = va.size();
    Var r = make_node(*a.tape, std::move(out), nullptr);
    int ir = r.id;
    a.tape->backprop_slot(ir) = [ia, ib, ir, na](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        Tensor& ga = node_grad(t, ia);
        Tensor& gb = node_grad(t, ib);
        for (int64_t i = 0; i < na; ++i) ga.data[i] += g.data[i];
        for (int64_t i = na; i < g.size(); ++i) gb.data[i - na] += g.data[i];
    };
    return r;
}

Var gather_rows(Var m, const std::vector<int>& indices) {
    const Tensor& vm = m.val();
    if (vm.rank() != 2) throw std::invalid_argument("gather_rows: expected matrix");
    const int d = vm.dim(1);
    Tensor out({static_cast<int>(indices.size()), d});
    for (size_t k = 0; k < indices.size(); ++k) {
        int q = indices[k];
        if (q < 0 || q >= vm.dim(0)) throw std::out_of_range("gather_rows: index out of range");
        std::copy(vm.data.begin() + static_cast<int64_t>(q) * d, vm.data.begin() + static_cast<int64_t>(q + 1) * d,
                  out.data.begin() + static_cast<int64_t>(k) * d);
    }
    int im = m.id;
    std::vector<int> idx = indices;
    Var r = make_node(*m.tape, std::move(out), nullptr);
    int ir = r.id;
    m.tape->backprop_slot(ir) = [im, ir, idx, d](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        Tensor& gm = node_grad(t, im);
        for (size_t k = 0; k < idx.size(); ++k)
            for (int j = 0; j < d; ++j) gm.data[static_cast<int64_t>(idx[k]) * d + j] += g.data[static_cast<int64_t>(k) * d + j];
    };
    return r;
}

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
    check_same_tape(a, b);
    const Tensor& va = a.val();
    const Tensor& vb = b.val();
    if (va.rank() != 2 || vb.rank() != 2) throw std::invalid_argument("matmul: expected matrices");
    const int m = trans_a ? va.dim(1) : va.dim(0);
    const int k = trans_a ? va.dim(0) : va.dim(1);
    const int k2 = trans_b ? vb.dim(1) : vb.dim(0);
    const int n = trans_b ? vb.dim(0) : vb.dim(1);
    if (k != k2)
        throw std::invalid_argument("matmul: inner dims mismatch " + shape_str(va.shape) + " x " + shape_str(vb.shape));
    ECMap A(va.data.data(), va.dim(0), va.dim(1));
    ECMap B(vb.data.data(), vb.dim(0), vb.dim(1));
    Tensor out({m, n});
    EMap C(out.data.data(), m, n);
    if (!trans_a && !trans_b) C.noalias() = A * B;
    else if (trans_a && !trans_b) C.noalias() = A.transpose() * B;
    else if (!trans_a && trans_b) C.noalias() = A * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
    int ia = a.id, ib = b.id;
    Var r = make_node(*a.tape, std::move(out), nullptr);
    int ir = r.id;
    a.tape->backprop_slot(ir) = [ia, ib, ir, trans_a, trans_b](Tape& t) {
        const Tensor& gt = t.grad(Var{&t, ir});
        const Tensor& va2 = t.value(Var{&t, ia});
        const Tensor& vb2 = t.value(Var{&t, ib});
        Tensor& gat = node_grad(t, ia);
        Tensor& gbt = node_grad(t, ib);
        ECMap G(gt.data.data(), gt.dim(0), gt.dim(1));
        ECMap A2(va2.data.data(), va2.dim(0), va2.dim(1));
        ECMap B2(vb2.data.data(), vb2.dim(0), vb2.dim(1));
        EMap GA(gat.data.data(), gat.dim(0), gat.dim(1));
        EMap GB(gbt.data.data(), gbt.dim(0), gbt.dim(1));
        if (!trans_a && !trans_b) {
            GA.noalias() += G * B2.transpose();
            GB.noalias() += A2.transpose() * G;
        } else if (trans_a && !trans_b) {
            GA.noalias() += B2 * G.transpose();
            GB.noalias() += A2 * G;
        } else if (!trans_a && trans_b) {
            GA.noalias() += G * B2;
            GB.noalias() += G.transpose() * A2;
        } else {
            GA.noalias() += B2.transpose() * G.transpose();
            GB.noalias() += G.transpose() * A2.transpose();
        }
    };
    return r;
}

Var transpose(Var a) {
    const Tensor& va = a.val();
    if (va.rank() != 2) throw std::invalid_argument("transpose: expected matrix");
    Tensor out({va.dim(1), va.dim(0)});
    for (int i = 0; i < va.dim(0); ++i)
        for (int j = 0; j < va.dim(1); ++j) out.at(j, i) = va.at(i, j);
    int ia = a.id;
    Var r = make_node(*a.tape, std::move(out), nullptr);
    int ir = r.id;
    a.tape->backprop_slot(ir) = [ia, ir](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        Tensor& ga = node_grad(t, ia);
        for (int i = 0; i < g.dim(0); ++i)
            for (int j = 0; j < g.dim(1); ++j) ga.at(j, i) += g.at(i, j);
    };
    return r;
}

Var add_row_bias(Var x, Var b) {
    check_same_tape(x, b);
    const Tensor& vx = x.val();
    const Tensor& vb = b.val();
    if (vx.rank() != 2 || vb.size() != vx.dim(1)) throw std::invalid_argument("add_row_bias: shape mismatch");
    Tensor out = vx;
    for (int i = 0; i < vx.dim(0); ++i)
        for (int j = 0; j < vx.dim(1); ++j) out.at(i, j) += vb.data[static_cast<size_t>(j)];
    int ix = x.id, ib = b.id;
    Var r = make_node(*x.tape, std::move(out), nullptr);
    int ir = r.id;
    x.tape->backprop_slot(ir) = [ix, ib, ir](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        Tensor& gx = node_grad(t, ix);
        Tensor& gb = node_grad(t, ib);
        for (int i = 0; i < g.dim(0); ++i)
            for (int j = 0; j < g.dim(1); ++j) {
                gx.at(i, j) += g.at(i, j);
                gb.data[static_cast<size_t>(j)] += g.at(i, j);
            }
    };
    return r;
}

Var linear(Var x, Var w, Var b) { return add_row_bias(matmul(x, w, false, true), b); }

Var softmax_rows(Var a) {
    const Tensor& va = a.val();
    if (va.rank() != 2) throw std::invalid_argument("softmax_rows: expected matrix");
    Tensor out(va.shape);
    for (int i = 0; i < va.dim(0); ++i) {
        double mx = -1e300;
        for (int j = 0; j < va.dim(1); ++j) mx = std::max(mx, va.at(i, j));
        double s = 0;
        for (int j = 0; j < va.dim(1); ++j) {
            out.at(i, j) = std::exp(va.at(i, j) - mx);
            s += out.at(i, j);
        }
        for (int j = 0; j < va.dim(1); ++j) out.at(i, j) /= s;
    }
    int ia = a.id;
    Var r = make_node(*a.tape, std::move(out), nullptr);
    int ir = r.id;
    a.tape->backprop_slot(ir) = [ia, ir](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        const Tensor& y = t.value(Var{&t, ir});
        Tensor& ga = node_grad(t, ia);
        for (int i = 0; i < g.dim(0); ++i) {
            double dot = 0;
            for (int j = 0; j < g.dim(1); ++j) dot += g.at(i, j) * y.at(i, j);
            for (int j = 0; j < g.dim(1); ++j) ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
        }
    };
    return r;
}

Var diag(Var a) {
    const Tensor& va = a.val();
    if (va.rank() != 2 || va.dim(0) != va.dim(1)) throw std::invalid_argument("diag: expected square matrix");
    const int n = va.dim(0);
    Tensor out({n});
    for (int i = 0; i < n; ++i) out.data[static_cast<size_t>(i)] = va.at(i, i);
    int ia = a.id;
    Var r = make_node(*a.tape, std::move(out), nullptr);
    int ir = r.id;
    a.tape->backprop_slot(ir) = [ia, ir, n](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        Tensor& ga = node_grad(t, ia);
        for (int i = 0; i < n; ++i) ga.at(i, i) += g.data[static_cast<size_t>(i)];
    };
    return r;
}

Var row_sumsq(Var a) {
    const Tensor& va = a.val();
    if (va.rank() != 2) throw std::invalid_argument("row_sumsq: expected matrix");
    Tensor out({va.dim(0)});
    for (int i = 0; i < va.dim(0); ++i) {
        double s = 0;
        for (int j = 0; j < va.dim(1); ++j) s += va.at(i, j) * va.at(i, j);
        out.data[static_cast<size_t>(i)] = s;
    }
    int ia = a.id;
    Var r = make_node(*a.tape, std::move(out), nullptr);
    int ir = r.id;
    a.tape->backprop_slot(ir) = [ia, ir](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        const Tensor& x = t.value(Var{&t, ia});
        Tensor& ga = node_grad(t, ia);
        for (int i = 0; i < x.dim(0); ++i)
            for (int j = 0; j < x.dim(1); ++j) ga.at(i, j) += 2.0 * x.at(i, j) * g.data[static_cast<size_t>(i)];
    };
    return r;
}

Var rows_scale(Var a, Var s) {
    check_same_tape(a, s);
    const Tensor& va = a.val();
    const Tensor& vs = s.val();
    if (va.rank() != 2 || vs.size() != va.dim(0)) throw std::invalid_argument("rows_scale: shape mismatch");
    Tensor out(va.shape);
    for (int i = 0; i < va.dim(0); ++i)
        for (int j = 0; j < va.dim(1); ++j) out.at(i, j) = va.at(i, j) * vs.data[static_cast<size_t>(i)];
    int ia = a.id, is = s.id;
    Var r = make_node(*a.tape, std::move(out), nullptr);
    int ir = r.id;
    a.tape->backprop_slot(ir) = [ia, is, ir](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        const Tensor& x = t.value(Var{&t, ia});
        const Tensor& sc = t.value(Var{&t, is});
        Tensor& ga = node_grad(t, ia);
        Tensor& gs = node_grad(t, is);
        for (int i = 0; i < x.dim(0); ++i)
            for (int j = 0; j < x.dim(1); ++j) {
                ga.at(i, j) += g.at(i, j) * sc.data[static_cast<size_t>(i)];
                gs.data[static_cast<size_t>(i)] += g.at(i, j) * x.at(i, j);
            }
    };
    return r;
}

Var sum(Var a) {
    Tensor out({1}, {a.val().sum()});
    int ia = a.id;
    Var r = make_node(*a.tape, std::move(out), nullptr);
    int ir = r.id;
    a.tape->backprop_slot(ir) = [ia, ir](Tape& t) {
        const double g = t.grad(Var{&t, ir}).data[0];
        Tensor& ga = node_grad(t, ia);
        for (auto& v : ga.data) v += g;
    };
    return r;
}

Var mean(Var a) {
    const double n = static_cast<double>(a.val().size());
    return affine(sum(a), 1.0 / n, 0.0);
}

Var channel_mean(Var a) {
    const Tensor& va = a.val();
    if (va.rank() != 3) throw std::invalid_argument("channel_mean: expected [C,H,W]");
    const int C = va.dim(0), HW = va.dim(1) * va.dim(2);
    Tensor out({C});
    for (int c = 0; c < C; ++c) {
        double s = 0;
        for (int i = 0; i < HW; ++i) s += va.data[static_cast<size_t>(c) * HW + i];
        out.data[static_cast<size_t>(c)] = s / HW;
    }
    int ia = a.id;
    Var r = make_node(*a.tape, std::move(out), nullptr);
    int ir = r.id;
    a.tape->backprop_slot(ir) = [ia, ir, C, HW](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        Tensor& ga = node_grad(t, ia);
        for (int c = 0; c < C; ++c) {
            const double gc = g.data[static_cast<size_t>(c)] / HW;
            for (int i = 0; i < HW; ++i) ga.data[static_cast<size_t>(c) * HW + i] += gc;
        }
    };
    return r;
}

Var global_avg_pool(Var a) { return channel_mean(a); }

namespace {

struct ConvDims {
    int cin, h, w, cout, kh, kw, oh, ow;
};

ConvDims conv_dims(const Tensor& x, const Tensor& wt, int stride, int pad) {
    if (x.rank() != 3 || wt.rank() != 4) throw std::invalid_argument("conv2d: expected x[C,H,W], w[O,C,kh,kw]");
    ConvDims d;
    d.cin = x.dim(0);
    d.h = x.dim(1);
    d.w = x.dim(2);
    d.cout = wt.dim(0);
    d.kh = wt.dim(2);
    d.kw = wt.dim(3);
    if (wt.dim(1) != d.cin) throw std::invalid_argument("conv2d: channel mismatch");
    d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
    d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
    return d;
}

// cols: [Cin*kh*kw, oh*ow]
void im2col(const Tensor& x, const ConvDims& d, int stride, int pad, Tensor& cols) {
    int row = 0;
    for (int c = 0; c < d.cin; ++c)
        for (int ky = 0; ky < d.kh; ++ky)
            for (int kx = 0; kx < d.kw; ++kx, ++row) {
                double* dst = cols.data.data() + static_cast<int64_t>(row) * d.oh * d.ow;
                for (int oy = 0; oy < d.oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    for (int ox = 0; ox < d.ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        dst[oy * d.ow + ox] =
                            (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w) ? x.at(c, iy, ix) : 0.0;
                    }
                }
            }
}

void col2im_accum(const Tensor& cols, const ConvDims& d, int stride, int pad, Tensor& gx) {
    int row = 0;
    for (int c = 0; c < d.cin; ++c)
        for (int ky = 0; ky < d.kh; ++ky)
            for (int kx = 0; kx < d.kw; ++kx, ++row) {
                const double* src = cols.data.data() + static_cast<int64_t>(row) * d.oh * d.ow;
                for (int oy = 0; oy < d.oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= d.h) continue;
                    for (int ox = 0; ox < d.ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= d.w) continue;
                        gx.at(c, iy, ix) += src[oy * d.ow + ox];
                    }
                }
            }
}

}  // namespace

Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    check_same_tape(x, w);
    check_same_tape(x, b);
    const Tensor& vx = x.val();
    const Tensor& vw = w.val();
    const Tensor& vb = b.val();
    ConvDims d = conv_dims(vx, vw, stride, pad);
    if (vb.size() != d.cout) throw std::invalid_argument("conv2d: bias size mismatch");

    Tensor cols({d.cin * d.kh * d.kw, d.oh * d.ow});
    im2col(vx, d, stride, pad, cols);
    Tensor out({d.cout, d.oh, d.ow});
    {
        ECMap W(vw.data.data(), d.cout, d.cin * d.kh * d.kw);
        ECMap Cc(cols.data.data(), cols.dim(0), cols.dim(1));
        EMap O(out.data.data(), d.cout, d.oh * d.ow);
        O.noalias() = W * Cc;
        for (int c = 0; c < d.cout; ++c) O.row(c).array() += vb.data[static_cast<size_t>(c)];
    }
    int ix = x.id, iw = w.id, ib = b.id;
    Var r = make_node(*x.tape, std::move(out), nullptr);
    int ir = r.id;
    // keep cols alive for backward; recomputing would be cheaper on memory
    auto cols_keep = std::make_shared<Tensor>(std::move(cols));
    x.tape->backprop_slot(ir) = [ix, iw, ib, ir, d, stride, pad, cols_keep](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        const Tensor& vw2 = t.value(Var{&t, iw});
        Tensor& gx = node_grad(t, ix);
        Tensor& gw = node_grad(t, iw);
        Tensor& gb = node_grad(t, ib);
        ECMap G(g.data.data(), d.cout, d.oh * d.ow);
        ECMap W(vw2.data.data(), d.cout, d.cin * d.kh * d.kw);
        ECMap Cc(cols_keep->data.data(), cols_keep->dim(0), cols_keep->dim(1));
        EMap GW(gw.data.data(), d.cout, d.cin * d.kh * d.kw);
        GW.noalias() += G * Cc.transpose();
        for (int c = 0; c < d.cout; ++c) gb.data[static_cast<size_t>(c)] += G.row(c).sum();
        Tensor gcols({d.cin * d.kh * d.kw, d.oh * d.ow});
        EMap GC(gcols.data.data(), gcols.dim(0), gcols.dim(1));
        GC.noalias() = W.transpose() * G;
        col2im_accum(gcols, d, stride, pad, gx);
    };
    return r;
}

Var pad_replicate1(Var x) {
    const Tensor& vx = x.val();
    if (vx.rank() != 3) throw std::invalid_argument("pad_replicate1: expected [C,H,W]");
    const int C = vx.dim(0), H = vx.dim(1), W = vx.dim(2);
    auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    Tensor out({C, H + 2, W + 2});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H + 2; ++y)
            for (int xx = 0; xx < W + 2; ++xx) out.at(c, y, xx) = vx.at(c, clampi(y - 1, H - 1), clampi(xx - 1, W - 1));
    int ix = x.id;
    Var r = make_node(*x.tape, std::move(out), nullptr);
    int ir = r.id;
    x.tape->backprop_slot(ir) = [ix, ir, C, H, W, clampi](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        Tensor& gx = node_grad(t, ix);
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H + 2; ++y)
                for (int xx = 0; xx < W + 2; ++xx)
                    gx.at(c, clampi(y - 1, H - 1), clampi(xx - 1, W - 1)) += g.at(c, y, xx);
    };
    return r;
}

Var upsample_nearest2x(Var x) {
    const Tensor& vx = x.val();
    if (vx.rank() != 3) throw std::invalid_argument("upsample_nearest2x: expected [C,H,W]");
    const int C = vx.dim(0), H = vx.dim(1), W = vx.dim(2);
    Tensor out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < 2 * H; ++y)
            for (int xx = 0; xx < 2 * W; ++xx) out.at(c, y, xx) = vx.at(c, y / 2, xx / 2);
    int ix = x.id;
    Var r = make_node(*x.tape, std::move(out), nullptr);
    int ir = r.id;
    x.tape->backprop_slot(ir) = [ix, ir, C, H, W](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        Tensor& gx = node_grad(t, ix);
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < 2 * H; ++y)
                for (int xx = 0; xx < 2 * W; ++xx) gx.at(c, y / 2, xx / 2) += g.at(c, y, xx);
    };
    return r;
}

Var add_channel_bias(Var x, Var b) {
    check_same_tape(x, b);
    const Tensor& vx = x.val();
    const Tensor& vb = b.val();
    if (vx.rank() != 3 || vb.size() != vx.dim(0)) throw std::invalid_argument("add_channel_bias: shape mismatch");
    const int C = vx.dim(0), HW = vx.dim(1) * vx.dim(2);
    Tensor out = vx;
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < HW; ++i) out.data[static_cast<size_t>(c) * HW + i] += vb.data[static_cast<size_t>(c)];
    int ix = x.id, ib = b.id;
    Var r = make_node(*x.tape, std::move(out), nullptr);
    int ir = r.id;
    x.tape->backprop_slot(ir) = [ix, ib, ir, C, HW](Tape& t) {
        const Tensor& g = t.grad(Var{&t, ir});
        Tensor& gx = node_grad(t, ix);
        Tensor& gb = node_grad(t, ib);
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < HW; ++i) {
                gx.data[static_cast<size_t>(c) * HW + i] += g.data[static_cast<size_t>(c) * HW + i];
                gb.data[static_cast<size_t>(c)] += g.data[static_cast<size_t>(c) * HW + i];
            }
    };
    return r;
}

Var mse(Var a, Var b) { return mean(square(sub(a, b))); }

Var l1(Var a, Var b) { return mean(abs_(sub(a, b))); }

}  // namespace osd::ad
