#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dsmap/autodiff.hpp"
#include "dsmap/nn.hpp"
#include "dsmap/rng.hpp"
#include "dsmap/tensor.hpp"

namespace dsmap {

enum class DomainId { A, B };

DomainId other_domain(DomainId d);
const char* domain_name(DomainId d);
/// Parses "A" or "B"; anything else is a ConfigError.
DomainId parse_domain(const std::string& s);

struct ModelConfig {
    int64_t image_size = 64;
    int64_t n_downsample = 2;
    int64_t base_channels = 64;
    int64_t n_res_shared = 2;
    int64_t n_res_mapping = 2;
    int64_t style_dim = 8;
    bool share_residual_projector = true;
    int64_t n_gen_res = 4;
    int64_t disc_layers = 3;
    uint64_t seed = 0;

    int64_t c_channels() const { return base_channels << n_downsample; }
    int64_t content_size() const { return image_size >> n_downsample; }
    /// Throws ConfigError on counts < 1 or an image size the
    /// downsampling stack cannot divide.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

/// Batch of images in [-1, 1], layout batch x 3 x height x width.
struct ImageBatch {
    Tensor data;
};

/// Checks the ImageBatch contract against a config: rank, channel
/// count, range, finiteness, divisibility. Throws ShapeError.
void validate_image_batch(const Tensor& data, const ModelConfig& cfg);

enum class CodeKind { shared, domain_specific };

/// Spatial content feature with a provenance tag. Shared codes live in
/// the domain-invariant space; domain-specific codes belong to one
/// domain's latent space and only they may enter a generator.
struct ContentCode {
    Tensor data;  // batch x c_channels x h x w
    CodeKind kind = CodeKind::shared;
    DomainId domain = DomainId::A;  // meaningful only when domain_specific
};

struct StyleCode {
    Tensor data;  // batch x style_dim
};

/// The full two-domain translation model: per-domain content
/// downsamplers, a residual projector into the shared content space
/// (one instance, or two when unshared), per-domain style encoders,
/// per-domain content mappings out of the shared space, style-driven
/// generators and patch discriminators.
class DsmapModel {
public:
    explicit DsmapModel(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    // ---- graph-level forward (used by the trainer; no tag wrappers) ----
    /// Domain-specific intermediate content h = E_d^hc(x).
    ad::Value content_intermediate(const ad::Value& x, DomainId d) const;
    /// Shared content c = E_res^hc(h) for the domain that produced h.
    ad::Value content_shared(const ad::Value& h, DomainId d) const;
    /// Domain mapping out of the shared space.
    ad::Value map_code(const ad::Value& c, DomainId target) const;
    ad::Value style_of(const ad::Value& x, DomainId d) const;
    ad::Value generate_from(const ad::Value& h, const ad::Value& s, DomainId d) const;
    ad::Value realness_map(const ad::Value& x, DomainId d) const;

    // ---- public tagged API (validated, inference mode) ----
    /// Returns (h tagged domain_specific(d), c tagged shared).
    std::pair<ContentCode, ContentCode> encode_content(const ImageBatch& x, DomainId d);
    StyleCode encode_style(const ImageBatch& x, DomainId d);
    /// Requires a shared-tagged code; returns one tagged for `target`.
    ContentCode map_content(const ContentCode& c, DomainId target);
    /// Requires a code tagged domain_specific(d) and matching batches.
    ImageBatch generate(const ContentCode& h, const StyleCode& s, DomainId d);
    Tensor discriminate(const ImageBatch& x, DomainId d);
    /// G_dst(map(c_src), E_dst^s(x_style)); src == dst is the
    /// within-domain reconstruction path.
    ImageBatch translate(const ImageBatch& x_src, const ImageBatch& x_style, DomainId src,
                         DomainId dst);
    /// Standard-normal style prior draw, reproducible under the seed.
    StyleCode sample_style(int64_t batch, uint64_t seed) const;

    // ---- parameter partition ----
    /// All components the optimizer for the generators updates: every
    /// encoder, mapping and generator (everything but the
    /// discriminators).
    std::vector<nn::ParamStore::Entry> generator_side_params() const;
    std::vector<nn::ParamStore::Entry> discriminator_params() const;
    /// Top-level component names in registration order.
    std::vector<std::string> component_names() const;

private:
    struct ContentDownsampler {
        nn::Conv2d head;
        std::vector<nn::Conv2d> down;
        ad::Value operator()(const ad::Value& x) const;
    };
    struct ResidualStack {
        std::vector<nn::ResBlock> blocks;
        ad::Value operator()(const ad::Value& x) const;
    };
    struct StyleEncoder {
        nn::Conv2d head;
        std::vector<nn::Conv2d> down;
        nn::Linear fc;
        ad::Value operator()(const ad::Value& x) const;
    };
    struct Generator {
        nn::Mlp style_proj;
        std::vector<nn::AdainResBlock> blocks;
        std::vector<nn::Conv2d> up;
        std::vector<nn::LayerNormChw> up_norm;
        nn::Conv2d out;
        int64_t channels = 0;
        ad::Value operator()(const ad::Value& h, const ad::Value& s) const;
    };
    struct Discriminator {
        std::vector<nn::Conv2d> layers;
        nn::Conv2d head;
        ad::Value operator()(const ad::Value& x) const;
    };

    ContentDownsampler make_downsampler(const std::string& comp, Rng& rng);
    ResidualStack make_res_stack(const std::string& comp, int64_t n_blocks, Rng& rng);
    StyleEncoder make_style_encoder(const std::string& comp, Rng& rng);
    Generator make_generator(const std::string& comp, Rng& rng);
    Discriminator make_discriminator(const std::string& comp, Rng& rng);

    const ResidualStack& projector(DomainId d) const;

    ModelConfig cfg_;
    nn::ParamStore params_;
    ContentDownsampler enc_hc_a_, enc_hc_b_;
    ResidualStack enc_res_a_, enc_res_b_;  // aliases of one stack when shared
    StyleEncoder enc_s_a_, enc_s_b_;
    ResidualStack map_a_, map_b_;
    Generator gen_a_, gen_b_;
    Discriminator disc_a_, disc_b_;
};

}  // namespace dsmap
