#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsmap/autodiff.hpp"
#include "dsmap/rng.hpp"
#include "dsmap/tensor.hpp"

namespace dsmap::nn {

/// Append-only registry of named trainable tensors.
///
/// Every layer registers its tensors here under a dotted path
/// "component.layer.index.kind" at construction time. Registration
/// order is the construction order and is deterministic, so iterating
/// the store gives a stable parameter enumeration for the optimizer and
/// the checkpoint format.
class ParamStore {
public:
    struct Entry {
        std::string name;
        ad::Value value;
    };

    /// Registers a leaf holding `init`. Names must be unique.
    ad::Value add(const std::string& name, Tensor init);

    const std::vector<Entry>& entries() const { return entries_; }
    bool contains(const std::string& name) const;
    /// Throws Error when the name is unknown.
    const ad::Value& find(const std::string& name) const;

    /// Entries whose name starts with `prefix` followed by '.' (or
    /// equals it exactly).
    std::vector<Entry> component(const std::string& prefix) const;

    int64_t total_size() const;
    void set_requires_grad(bool on);

private:
    std::vector<Entry> entries_;
};

void set_requires_grad(const std::vector<ParamStore::Entry>& entries, bool on);

/// Temporarily turns gradient tracking off for every parameter in a
/// store; restores the previous uniform state on destruction.
class InferenceGuard {
public:
    explicit InferenceGuard(ParamStore& store);
    ~InferenceGuard();
    InferenceGuard(const InferenceGuard&) = delete;
    InferenceGuard& operator=(const InferenceGuard&) = delete;

private:
    ParamStore& store_;
    std::vector<bool> saved_;
};

// Layers register their tensors under `prefix` + ".weight" etc. and are
// callable on graph values. All are value types holding graph handles.

struct Conv2d {
    Conv2d() = default;
    Conv2d(ParamStore& ps, const std::string& prefix, int64_t in_ch, int64_t out_ch,
           int64_t kernel, int64_t stride, int64_t pad, Rng& rng);
    ad::Value operator()(const ad::Value& x) const;

    ad::Value w, b;
    int64_t stride = 1;
    int64_t pad = 0;
};

struct Linear {
    Linear() = default;
    Linear(ParamStore& ps, const std::string& prefix, int64_t in_f, int64_t out_f, Rng& rng);
    ad::Value operator()(const ad::Value& x) const;

    ad::Value w, b;
};

/// Per-sample normalization over (C,H,W) with a learned per-channel
/// scale and shift.
struct LayerNormChw {
    LayerNormChw() = default;
    LayerNormChw(ParamStore& ps, const std::string& prefix, int64_t channels);
    ad::Value operator()(const ad::Value& x) const;

    ad::Value gamma, beta;
};

/// conv3x3 -> instance norm -> relu -> conv3x3 -> instance norm, plus
/// identity skip. Channel count is preserved.
struct ResBlock {
    ResBlock() = default;
    ResBlock(ParamStore& ps, const std::string& conv1_prefix, const std::string& conv2_prefix,
             int64_t channels, Rng& rng);
    ad::Value operator()(const ad::Value& x) const;

    Conv2d c1, c2;
};

/// Residual block whose two instance norms take per-sample scale/shift
/// from a style vector: y = (1 + g) * norm(conv(x)) + t. The unit offset
/// keeps the block near identity when the style head starts small.
struct AdainResBlock {
    AdainResBlock() = default;
    AdainResBlock(ParamStore& ps, const std::string& conv1_prefix,
                  const std::string& conv2_prefix, int64_t channels, Rng& rng);
    /// g1,t1,g2,t2: batch x channels slices of the style projection.
    ad::Value operator()(const ad::Value& x, const ad::Value& g1, const ad::Value& t1,
                         const ad::Value& g2, const ad::Value& t2) const;

    Conv2d c1, c2;
};

/// in -> hidden -> hidden -> out fully connected stack with relu
/// between layers and a linear final layer.
struct Mlp {
    Mlp() = default;
    Mlp(ParamStore& ps, const std::string& component, int64_t in_f, int64_t hidden,
        int64_t out_f, Rng& rng);
    ad::Value operator()(const ad::Value& x) const;

    Linear l1, l2, l3;
};

}  // namespace dsmap::nn
