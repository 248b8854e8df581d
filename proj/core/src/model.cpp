#include "dsmap/model.hpp"

#include <utility>

#include "dsmap/error.hpp"

namespace dsmap {

namespace {

constexpr int64_t kImageChannels = 3;
constexpr int64_t kMlpHidden = 256;

std::string idx_name(const std::string& comp, const char* layer, int64_t i) {
    return comp + "." + layer + "." + std::to_string(i);
}

}  // namespace

DomainId other_domain(DomainId d) { return d == DomainId::A ? DomainId::B : DomainId::A; }

const char* domain_name(DomainId d) { return d == DomainId::A ? "A" : "B"; }

DomainId parse_domain(const std::string& s) {
    if (s == "A" || s == "a") return DomainId::A;
    if (s == "B" || s == "b") return DomainId::B;
    throw ConfigError("domain must be A or B, got '" + s + "'");
}

void ModelConfig::validate() const {
    auto positive = [](int64_t v, const char* what) {
        if (v < 1) throw ConfigError(std::string(what) + " must be >= 1");
    };
    positive(image_size, "image_size");
    positive(n_downsample, "n_downsample");
    positive(base_channels, "base_channels");
    positive(n_res_shared, "n_res_shared");
    // 0 is legal here: an empty mapping stack passes codes through
    // unchanged, which is the "mapping disabled" ablation configuration.
    if (n_res_mapping < 0) throw ConfigError("n_res_mapping must be >= 0");
    positive(style_dim, "style_dim");
    positive(n_gen_res, "n_gen_res");
    positive(disc_layers, "disc_layers");
    const int64_t div = int64_t(1) << n_downsample;
    if (image_size % div != 0 || image_size / div < 1)
        throw ConfigError("image_size must be a positive multiple of 2^n_downsample");
    if (image_size >> disc_layers < 1)
        throw ConfigError("image_size too small for disc_layers strided stages");
}

void validate_image_batch(const Tensor& data, const ModelConfig& cfg) {
    if (data.ndim() != 4) throw ShapeError("image batch must be rank 4, got " + data.shape_str());
    if (data.dim(1) != kImageChannels)
        throw ShapeError("image batch must have 3 channels, got " + data.shape_str());
    const int64_t div = int64_t(1) << cfg.n_downsample;
    if (data.dim(2) % div != 0 || data.dim(3) % div != 0)
        throw ShapeError("image height/width must be divisible by 2^n_downsample; got " +
                         data.shape_str());
    if (!data.all_finite()) throw NumericError("image batch contains non-finite values");
    if (data.min() < -1.0 || data.max() > 1.0)
        throw ShapeError("image values must lie in [-1, 1]");
}

// ------------------------------------------------------------- construction

DsmapModel::DsmapModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng = Rng(cfg_.seed).fork("init");
    enc_hc_a_ = make_downsampler("enc_hc_A", rng);
    enc_hc_b_ = make_downsampler("enc_hc_B", rng);
    if (cfg_.share_residual_projector) {
        enc_res_a_ = make_res_stack("enc_res", cfg_.n_res_shared, rng);
        enc_res_b_ = enc_res_a_;  // same leaves, both handles
    } else {
        enc_res_a_ = make_res_stack("enc_res_A", cfg_.n_res_shared, rng);
        enc_res_b_ = make_res_stack("enc_res_B", cfg_.n_res_shared, rng);
    }
    enc_s_a_ = make_style_encoder("enc_s_A", rng);
    enc_s_b_ = make_style_encoder("enc_s_B", rng);
    map_a_ = make_res_stack("map_A", cfg_.n_res_mapping, rng);
    map_b_ = make_res_stack("map_B", cfg_.n_res_mapping, rng);
    gen_a_ = make_generator("gen_A", rng);
    gen_b_ = make_generator("gen_B", rng);
    disc_a_ = make_discriminator("disc_A", rng);
    disc_b_ = make_discriminator("disc_B", rng);
}

DsmapModel::ContentDownsampler DsmapModel::make_downsampler(const std::string& comp, Rng& rng) {
    ContentDownsampler net;
    net.head = nn::Conv2d(params_, idx_name(comp, "conv", 0), kImageChannels, cfg_.base_channels,
                          7, 1, 3, rng);
    int64_t ch = cfg_.base_channels;
    for (int64_t i = 0; i < cfg_.n_downsample; ++i) {
        net.down.push_back(
            nn::Conv2d(params_, idx_name(comp, "conv", i + 1), ch, 2 * ch, 4, 2, 1, rng));
        ch *= 2;
    }
    return net;
}

DsmapModel::ResidualStack DsmapModel::make_res_stack(const std::string& comp, int64_t n_blocks,
                                                     Rng& rng) {
    ResidualStack net;
    const int64_t ch = cfg_.c_channels();
    for (int64_t i = 0; i < n_blocks; ++i)
        net.blocks.push_back(nn::ResBlock(params_, idx_name(comp, "conv", 2 * i),
                                          idx_name(comp, "conv", 2 * i + 1), ch, rng));
    return net;
}

DsmapModel::StyleEncoder DsmapModel::make_style_encoder(const std::string& comp, Rng& rng) {
    StyleEncoder net;
    net.head = nn::Conv2d(params_, idx_name(comp, "conv", 0), kImageChannels, cfg_.base_channels,
                          7, 1, 3, rng);
    int64_t ch = cfg_.base_channels;
    for (int64_t i = 0; i < cfg_.n_downsample; ++i) {
        net.down.push_back(
            nn::Conv2d(params_, idx_name(comp, "conv", i + 1), ch, 2 * ch, 4, 2, 1, rng));
        ch *= 2;
    }
    net.fc = nn::Linear(params_, idx_name(comp, "fc", 0), ch, cfg_.style_dim, rng);
    return net;
}

DsmapModel::Generator DsmapModel::make_generator(const std::string& comp, Rng& rng) {
    Generator net;
    net.channels = cfg_.c_channels();
    net.style_proj = nn::Mlp(params_, comp, cfg_.style_dim, kMlpHidden,
                             cfg_.n_gen_res * 4 * net.channels, rng);
    int64_t conv_idx = 0;
    for (int64_t i = 0; i < cfg_.n_gen_res; ++i) {
        net.blocks.push_back(nn::AdainResBlock(params_, idx_name(comp, "conv", conv_idx),
                                               idx_name(comp, "conv", conv_idx + 1),
                                               net.channels, rng));
        conv_idx += 2;
    }
    int64_t ch = net.channels;
    for (int64_t i = 0; i < cfg_.n_downsample; ++i) {
        net.up.push_back(
            nn::Conv2d(params_, idx_name(comp, "conv", conv_idx++), ch, ch / 2, 5, 1, 2, rng));
        net.up_norm.push_back(nn::LayerNormChw(params_, idx_name(comp, "norm", i), ch / 2));
        ch /= 2;
    }
    net.out = nn::Conv2d(params_, idx_name(comp, "conv", conv_idx), ch, kImageChannels, 7, 1, 3,
                         rng);
    return net;
}

DsmapModel::Discriminator DsmapModel::make_discriminator(const std::string& comp, Rng& rng) {
    Discriminator net;
    int64_t ch = kImageChannels;
    for (int64_t i = 0; i < cfg_.disc_layers; ++i) {
        const int64_t out_ch = cfg_.base_channels << i;
        net.layers.push_back(
            nn::Conv2d(params_, idx_name(comp, "conv", i), ch, out_ch, 4, 2, 1, rng));
        ch = out_ch;
    }
    net.head = nn::Conv2d(params_, idx_name(comp, "conv", cfg_.disc_layers), ch, 1, 1, 1, 0, rng);
    return net;
}

// ----------------------------------------------------------- network bodies

ad::Value DsmapModel::ContentDownsampler::operator()(const ad::Value& x) const {
    ad::Value y = ad::relu(ad::instance_norm(head(x)));
    for (const auto& c : down) y = ad::relu(ad::instance_norm(c(y)));
    return y;
}

ad::Value DsmapModel::ResidualStack::operator()(const ad::Value& x) const {
    ad::Value y = x;
    for (const auto& b : blocks) y = b(y);
    return y;
}

ad::Value DsmapModel::StyleEncoder::operator()(const ad::Value& x) const {
    // No normalization anywhere: the channel statistics are the signal.
    ad::Value y = ad::relu(head(x));
    for (const auto& c : down) y = ad::relu(c(y));
    return fc(ad::global_avg_pool(y));
}

ad::Value DsmapModel::Generator::operator()(const ad::Value& h, const ad::Value& s) const {
    const ad::Value sp = style_proj(s);  // [B, n_blocks * 4 * channels]
    ad::Value y = h;
    for (size_t i = 0; i < blocks.size(); ++i) {
        const int64_t base = static_cast<int64_t>(i) * 4 * channels;
        const ad::Value g1 = ad::slice_cols(sp, base, channels);
        const ad::Value t1 = ad::slice_cols(sp, base + channels, channels);
        const ad::Value g2 = ad::slice_cols(sp, base + 2 * channels, channels);
        const ad::Value t2 = ad::slice_cols(sp, base + 3 * channels, channels);
        y = blocks[i](y, g1, t1, g2, t2);
    }
    for (size_t i = 0; i < up.size(); ++i)
        y = ad::relu(up_norm[i](up[i](ad::upsample_nearest2(y))));
    return ad::tanh_act(out(y));
}

ad::Value DsmapModel::Discriminator::operator()(const ad::Value& x) const {
    ad::Value y = x;
    for (const auto& c : layers) y = ad::leaky_relu(c(y), 0.2);
    return head(y);
}

// ------------------------------------------------------- graph-level access

ad::Value DsmapModel::content_intermediate(const ad::Value& x, DomainId d) const {
    return (d == DomainId::A ? enc_hc_a_ : enc_hc_b_)(x);
}

const DsmapModel::ResidualStack& DsmapModel::projector(DomainId d) const {
    return d == DomainId::A ? enc_res_a_ : enc_res_b_;
}

ad::Value DsmapModel::content_shared(const ad::Value& h, DomainId d) const {
    return projector(d)(h);
}

ad::Value DsmapModel::map_code(const ad::Value& c, DomainId target) const {
    return (target == DomainId::A ? map_a_ : map_b_)(c);
}

ad::Value DsmapModel::style_of(const ad::Value& x, DomainId d) const {
    return (d == DomainId::A ? enc_s_a_ : enc_s_b_)(x);
}

ad::Value DsmapModel::generate_from(const ad::Value& h, const ad::Value& s, DomainId d) const {
    if (h.val().dim(0) != s.val().dim(0))
        throw ShapeError("content/style batch mismatch: " + h.val().shape_str() + " vs " +
                         s.val().shape_str());
    return (d == DomainId::A ? gen_a_ : gen_b_)(h, s);
}

ad::Value DsmapModel::realness_map(const ad::Value& x, DomainId d) const {
    return (d == DomainId::A ? disc_a_ : disc_b_)(x);
}

// ------------------------------------------------------------- tagged API

std::pair<ContentCode, ContentCode> DsmapModel::encode_content(const ImageBatch& x, DomainId d) {
    validate_image_batch(x.data, cfg_);
    nn::InferenceGuard guard(params_);
    const ad::Value h = content_intermediate(ad::constant(x.data), d);
    const ad::Value c = content_shared(h, d);
    return {ContentCode{h.val(), CodeKind::domain_specific, d},
            ContentCode{c.val(), CodeKind::shared, d}};
}

StyleCode DsmapModel::encode_style(const ImageBatch& x, DomainId d) {
    validate_image_batch(x.data, cfg_);
    nn::InferenceGuard guard(params_);
    return StyleCode{style_of(ad::constant(x.data), d).val()};
}

ContentCode DsmapModel::map_content(const ContentCode& c, DomainId target) {
    if (c.kind != CodeKind::shared)
        throw TagError("map_content requires a shared content code; got a domain-specific one");
    nn::InferenceGuard guard(params_);
    return ContentCode{map_code(ad::constant(c.data), target).val(), CodeKind::domain_specific,
                       target};
}

ImageBatch DsmapModel::generate(const ContentCode& h, const StyleCode& s, DomainId d) {
    if (h.kind != CodeKind::domain_specific)
        throw TagError("generate requires a domain-specific content code");
    if (h.domain != d)
        throw TagError(std::string("generate for domain ") + domain_name(d) +
                       " got a code tagged " + domain_name(h.domain));
    nn::InferenceGuard guard(params_);
    return ImageBatch{generate_from(ad::constant(h.data), ad::constant(s.data), d).val()};
}

Tensor DsmapModel::discriminate(const ImageBatch& x, DomainId d) {
    validate_image_batch(x.data, cfg_);
    nn::InferenceGuard guard(params_);
    return realness_map(ad::constant(x.data), d).val();
}

ImageBatch DsmapModel::translate(const ImageBatch& x_src, const ImageBatch& x_style, DomainId src,
                                 DomainId dst) {
    auto [h, c] = encode_content(x_src, src);
    (void)h;
    const ContentCode mapped = map_content(c, dst);
    const StyleCode s = encode_style(x_style, dst);
    return generate(mapped, s, dst);
}

StyleCode DsmapModel::sample_style(int64_t batch, uint64_t seed) const {
    if (batch < 1) throw ShapeError("sample_style: batch must be >= 1");
    Tensor t({batch, cfg_.style_dim});
    Rng rng(seed);
    rng.fill_normal(t);
    return StyleCode{std::move(t)};
}

// -------------------------------------------------------------- partitions

std::vector<nn::ParamStore::Entry> DsmapModel::generator_side_params() const {
    std::vector<nn::ParamStore::Entry> out;
    for (const auto& e : params_.entries())
        if (e.name.rfind("disc_", 0) != 0) out.push_back(e);
    return out;
}

std::vector<nn::ParamStore::Entry> DsmapModel::discriminator_params() const {
    std::vector<nn::ParamStore::Entry> out;
    for (const auto& e : params_.entries())
        if (e.name.rfind("disc_", 0) == 0) out.push_back(e);
    return out;
}

std::vector<std::string> DsmapModel::component_names() const {
    std::vector<std::string> names{"enc_hc_A", "enc_hc_B"};
    if (cfg_.share_residual_projector) {
        names.push_back("enc_res");
    } else {
        names.push_back("enc_res_A");
        names.push_back("enc_res_B");
    }
    for (const char* n : {"enc_s_A", "enc_s_B", "map_A", "map_B", "gen_A", "gen_B", "disc_A",
                          "disc_B"})
        names.emplace_back(n);
    return names;
}

}  // namespace dsmap
