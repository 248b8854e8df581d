#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dsmap/data.hpp"
#include "dsmap/model.hpp"
#include "dsmap/tensor.hpp"

namespace dsmap {

/// First and second moments of a feature sample.
struct ActivationStats {
    Tensor mean;        // [d]
    Tensor covariance;  // [d, d], unbiased (n-1), exactly symmetric
    int64_t n = 0;
};

/// Sample mean and unbiased covariance of an [n, d] feature matrix.
/// Requires n >= 2.
ActivationStats activation_stats(const Tensor& features);

/// Fréchet distance between two Gaussians summarized by their stats:
/// |mu_p - mu_q|^2 + Tr(S_p + S_q - 2 (S_p S_q)^{1/2}), clamped at 0.
/// The matrix square root runs through the symmetrized form
/// sqrt(S_p^{1/2} S_q S_p^{1/2}) with negative eigenvalues clamped;
/// a failed eigensolve retries once with an extra 1e-6 I.
double frechet_distance(const ActivationStats& p, const ActivationStats& q);

/// Pluggable map from an image batch [n,3,H,W] to feature rows [n,dim].
/// Must be deterministic for fixed weights.
struct FeatureExtractor {
    std::string id;
    int64_t dim = 0;
    std::function<Tensor(const Tensor& images)> fn;
};

/// Default extractor: a fixed-seed random convolutional projector
/// (3->8->16->32 channels, stride 2, ReLU, global average pooling).
/// Fully reproducible with no external weights; its scores are only
/// comparable to other scores from the same projector.
FeatureExtractor make_random_projector(uint64_t seed);

/// Adapter for externally computed features (e.g. from a pretrained
/// classifier): ignores the pixels and hands out the supplied rows in
/// call order. Throws ConfigError when more rows are requested than
/// were supplied.
FeatureExtractor make_precomputed(Tensor features, std::string id);

struct FidOptions {
    int64_t n_content = 100;
    int64_t n_styles = 10;
    int64_t repeats = 10;
    uint64_t seed = 0;
};

struct FidReport {
    std::vector<double> per_repeat;
    double mean = 0.0;
    double stddev = 0.0;  // sample std over repeats, 0 for a single repeat
    DomainId src = DomainId::A;
    DomainId dst = DomainId::B;
    FidOptions options;
    std::string extractor_id;

    /// Structured text: config echo, per-repeat scores, mean, std.
    std::string text() const;
};

/// Example-guided quality protocol: real statistics come from the full
/// dst test split; each repeat samples n_content src test images and
/// n_styles dst style examples per content image, translates them all,
/// and scores the generated set against the real statistics. A test
/// split smaller than the sample count is drawn with replacement (one
/// warning). Fully reproducible under options.seed.
FidReport fid_protocol(DsmapModel& model, const DatasetSpec& data, DomainId src, DomainId dst,
                       const FeatureExtractor& extractor, const FidOptions& options);

/// Mean feature distance over n_pairs pairs of prior-style outputs for
/// one content batch: for each pair two styles are drawn, the two
/// generations are embedded, and their row-wise Euclidean distances are
/// averaged. Zero for a generator that ignores its style input.
double diversity_score(DsmapModel& model, const ImageBatch& x_content, DomainId src,
                       DomainId dst, int64_t n_pairs, const FeatureExtractor& extractor,
                       uint64_t seed);

}  // namespace dsmap
