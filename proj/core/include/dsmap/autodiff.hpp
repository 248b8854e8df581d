#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dsmap/tensor.hpp"

namespace dsmap::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the dynamically built computation graph.
struct Node {
    Tensor val;
    Tensor grad;
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    /// Adds this node's contribution into its parents' grads.
    std::function<void(Node&)> backward;
};

/// Handle to a graph node. Cheap to copy; the graph is reference counted
/// and dies when the last handle to its sinks goes away.
class Value {
public:
    Value() = default;
    explicit Value(NodePtr n) : node_(std::move(n)) {}

    bool defined() const { return static_cast<bool>(node_); }
    const Tensor& val() const { return node_->val; }
    const Tensor& grad() const { return node_->grad; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

/// Differentiable leaf (parameter or probed input).
Value leaf(Tensor v, bool requires_grad = true);
/// Non-differentiable input.
Value constant(Tensor v);
/// Cuts the graph: same value, no history.
Value detach(const Value& x);

/// Reverse pass from a scalar root. Grads of every reachable node that
/// requires them are freshly zeroed, then accumulated in one sweep, so a
/// prior pass never leaks into the next one.
void backward(const Value& root);

// ---- elementwise and scalar ----
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value add_scalar(const Value& a, double c);
Value mul_scalar(const Value& a, double c);
Value relu(const Value& x);
Value leaky_relu(const Value& x, double alpha);
Value tanh_act(const Value& x);

// ---- reductions ----
Value mean_all(const Value& x);
/// mean(|a - b|); the shared L1 primitive of all reconstruction losses.
Value mean_abs_diff(const Value& a, const Value& b);
/// mean((x - target)^2); the LSGAN building block.
Value mean_sq_vs(const Value& x, double target);
/// Left-fold weighted sum of scalar values: sum_i w_i * v_i.
Value wsum(const std::vector<Value>& values, const std::vector<double>& weights);

// ---- shape ----
Value slice_cols(const Value& x, int64_t offset, int64_t len);

// ---- NN primitives ----
/// Zero-padded 2-D convolution. x: [B,Ci,H,W], w: [Co,Ci,kh,kw], b: [Co].
Value conv2d(const Value& x, const Value& w, const Value& b, int64_t stride, int64_t pad);
/// x: [B,F], w: [O,F], b: [O] -> [B,O].
Value linear(const Value& x, const Value& w, const Value& b);
/// Per-sample per-channel normalization over spatial dims, no affine.
Value instance_norm(const Value& x, double eps = 1e-5);
/// Per-sample normalization over (C,H,W), no affine.
Value layer_norm_chw(const Value& x, double eps = 1e-5);
/// y[b,c,h,w] = x[b,c,h,w] * g[c] + t[c].
Value channel_affine(const Value& x, const Value& g, const Value& t);
/// y[b,c,h,w] = x[b,c,h,w] * g[b,c] + t[b,c]; the AdaIN application.
Value sample_affine(const Value& x, const Value& g, const Value& t);
Value upsample_nearest2(const Value& x);
/// [B,C,H,W] -> [B,C] spatial mean.
Value global_avg_pool(const Value& x);

}  // namespace dsmap::ad
