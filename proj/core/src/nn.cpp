#include "dsmap/nn.hpp"

#include <utility>

#include "dsmap/error.hpp"

namespace dsmap::nn {

namespace {

constexpr double kInitStd = 0.02;

Tensor gaussian_init(Rng& rng, std::vector<int64_t> shape) {
    Tensor t(std::move(shape));
    rng.fill_normal(t, 0.0, kInitStd);
    return t;
}

}  // namespace

ad::Value ParamStore::add(const std::string& name, Tensor init) {
    if (contains(name)) throw Error("duplicate parameter name: " + name);
    if (!init.all_finite()) throw NumericError("non-finite init for " + name);
    entries_.push_back({name, ad::leaf(std::move(init), /*requires_grad=*/true)});
    return entries_.back().value;
}

bool ParamStore::contains(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

const ad::Value& ParamStore::find(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.value;
    throw Error("unknown parameter: " + name);
}

std::vector<ParamStore::Entry> ParamStore::component(const std::string& prefix) const {
    std::vector<Entry> out;
    for (const auto& e : entries_)
        if (e.name == prefix || (e.name.size() > prefix.size() && e.name[prefix.size()] == '.' &&
                                 e.name.compare(0, prefix.size(), prefix) == 0))
            out.push_back(e);
    return out;
}

int64_t ParamStore::total_size() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.value.val().numel();
    return n;
}

void ParamStore::set_requires_grad(bool on) {
    for (auto& e : entries_) e.value.node()->requires_grad = on;
}

void set_requires_grad(const std::vector<ParamStore::Entry>& entries, bool on) {
    for (const auto& e : entries) e.value.node()->requires_grad = on;
}

InferenceGuard::InferenceGuard(ParamStore& store) : store_(store) {
    saved_.reserve(store.entries().size());
    for (const auto& e : store.entries()) {
        saved_.push_back(e.value.node()->requires_grad);
        e.value.node()->requires_grad = false;
    }
}

InferenceGuard::~InferenceGuard() {
    const auto& es = store_.entries();
    for (size_t i = 0; i < es.size() && i < saved_.size(); ++i)
        es[i].value.node()->requires_grad = saved_[i];
}

Conv2d::Conv2d(ParamStore& ps, const std::string& prefix, int64_t in_ch, int64_t out_ch,
               int64_t kernel, int64_t stride_, int64_t pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
    w = ps.add(prefix + ".weight", gaussian_init(rng, {out_ch, in_ch, kernel, kernel}));
    b = ps.add(prefix + ".bias", Tensor({out_ch}));
}

ad::Value Conv2d::operator()(const ad::Value& x) const {
    return ad::conv2d(x, w, b, stride, pad);
}

Linear::Linear(ParamStore& ps, const std::string& prefix, int64_t in_f, int64_t out_f, Rng& rng) {
    w = ps.add(prefix + ".weight", gaussian_init(rng, {out_f, in_f}));
    b = ps.add(prefix + ".bias", Tensor({out_f}));
}

ad::Value Linear::operator()(const ad::Value& x) const { return ad::linear(x, w, b); }

LayerNormChw::LayerNormChw(ParamStore& ps, const std::string& prefix, int64_t channels) {
    gamma = ps.add(prefix + ".gamma", Tensor({channels}, 1.0));
    beta = ps.add(prefix + ".beta", Tensor({channels}));
}

ad::Value LayerNormChw::operator()(const ad::Value& x) const {
    return ad::channel_affine(ad::layer_norm_chw(x), gamma, beta);
}

ResBlock::ResBlock(ParamStore& ps, const std::string& conv1_prefix,
                   const std::string& conv2_prefix, int64_t channels, Rng& rng)
    : c1(ps, conv1_prefix, channels, channels, 3, 1, 1, rng),
      c2(ps, conv2_prefix, channels, channels, 3, 1, 1, rng) {}

ad::Value ResBlock::operator()(const ad::Value& x) const {
    ad::Value y = ad::relu(ad::instance_norm(c1(x)));
    y = ad::instance_norm(c2(y));
    return ad::add(x, y);
}

AdainResBlock::AdainResBlock(ParamStore& ps, const std::string& conv1_prefix,
                             const std::string& conv2_prefix, int64_t channels, Rng& rng)
    : c1(ps, conv1_prefix, channels, channels, 3, 1, 1, rng),
      c2(ps, conv2_prefix, channels, channels, 3, 1, 1, rng) {}

ad::Value AdainResBlock::operator()(const ad::Value& x, const ad::Value& g1, const ad::Value& t1,
                                    const ad::Value& g2, const ad::Value& t2) const {
    ad::Value y = ad::sample_affine(ad::instance_norm(c1(x)), ad::add_scalar(g1, 1.0), t1);
    y = ad::relu(y);
    y = ad::sample_affine(ad::instance_norm(c2(y)), ad::add_scalar(g2, 1.0), t2);
    return ad::add(x, y);
}

Mlp::Mlp(ParamStore& ps, const std::string& component, int64_t in_f, int64_t hidden,
         int64_t out_f, Rng& rng)
    : l1(ps, component + ".fc.0", in_f, hidden, rng),
      l2(ps, component + ".fc.1", hidden, hidden, rng),
      l3(ps, component + ".fc.2", hidden, out_f, rng) {}

ad::Value Mlp::operator()(const ad::Value& x) const {
    return l3(ad::relu(l2(ad::relu(l1(x)))));
}

}  // namespace dsmap::nn
