#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "osd/tensor.hpp"

namespace osd::ad {

class Tape;

// Handle into a tape node. Cheap to copy, valid for the tape's lifetime.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& val() const;
};

// Reverse-mode tape. Build a graph with the free functions below, call
// backward(loss) once, then read gradients via grad().
class Tape {
public:
    Var leaf(Tensor value);
    void backward(Var loss);

    const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
    const Tensor& grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].grad; }

    size_t num_nodes() const { return nodes_.size(); }

    // ops install their reverse closure here right after emitting the node
    std::function<void(Tape&)>& backprop_slot(int id) { return nodes_[static_cast<size_t>(id)].backprop; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&)> backprop;  // empty for leaves
    };
    // deque: references returned by value()/grad() stay valid while the
    // graph grows
    std::deque<Node> nodes_;

    Var emit(Tensor value, std::function<void(Tape&)> backprop);
    Tensor& grad_mut(int id) { return nodes_[static_cast<size_t>(id)].grad; }

    friend Var make_node(Tape& t, Tensor value, std::function<void(Tape&)> bp);
    friend Tensor& node_grad(Tape& t, int id);
};

// --- elementwise ---
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var axpy(Var a, Var b, double alpha);           // a + alpha*b
Var affine(Var a, double k, double c);          // k*a + c
Var neg(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var silu(Var a);
Var sigmoid(Var a);
Var tanh_(Var a);
Var log_(Var a);
Var exp_(Var a);
Var abs_(Var a);
Var square(Var a);
Var sqrt_(Var a);
Var pow_const(Var a, double p);
Var clamp_(Var a, double lo, double hi);        // zero gradient outside [lo,hi]
Var stopgrad(Var a);

// --- shape / structure ---
Var reshape(Var a, std::vector<int> shape);
Var concat_channels(Var a, Var b);              // [C1,H,W] + [C2,H,W] -> [C1+C2,H,W]
Var gather_rows(Var m, const std::vector<int>& indices);  // [N,d] -> [K,d]

// --- linear algebra ---
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
Var transpose(Var a);
Var linear(Var x, Var w, Var b);                // [m,in] x [out,in]^T + bias rows
Var add_row_bias(Var x, Var b);                 // [m,n] + b[n] per row
Var softmax_rows(Var a);                        // [m,n], softmax over each row
Var diag(Var a);                                // [n,n] -> [n]
Var row_sumsq(Var a);                           // [m,n] -> [m]
Var rows_scale(Var a, Var s);                   // row i scaled by s[i]

// --- reductions ---
Var sum(Var a);                                 // -> scalar
Var mean(Var a);                                // -> scalar
Var channel_mean(Var a);                        // [C,H,W] -> [C], spatial mean
Var global_avg_pool(Var a);                     // alias of channel_mean

// --- conv / spatial ---
Var conv2d(Var x, Var w, Var b, int stride, int pad);  // x[Cin,H,W], w[Cout,Cin,kh,kw]
Var pad_replicate1(Var x);                      // [C,H,W] -> [C,H+2,W+2], border replicated
Var upsample_nearest2x(Var x);
Var add_channel_bias(Var x, Var b);             // x[C,H,W] + b[C] broadcast

// --- composite losses ---
Var mse(Var a, Var b);                          // mean squared error
Var l1(Var a, Var b);                           // mean absolute error

}  // namespace osd::ad
