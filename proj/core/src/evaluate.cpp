#include "dsmap/evaluate.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>
#include <utility>

#include "dsmap/autodiff.hpp"
#include "dsmap/error.hpp"
#include "dsmap/rng.hpp"

namespace dsmap {

namespace {

constexpr double kSqrtRegularizer = 1e-6;

using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd to_eigen(const Tensor& t) {
    return Eigen::Map<const RowMajorMat>(t.data(), t.dim(0), t.dim(1));
}

/// sqrt of a symmetric PSD matrix via eigendecomposition, negative
/// eigenvalues clamped to zero. Returns false when the solver fails.
bool psd_sqrt(const Eigen::MatrixXd& m, Eigen::MatrixXd& out) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success) return false;
    Eigen::VectorXd roots = solver.eigenvalues();
    for (Eigen::Index i = 0; i < roots.size(); ++i)
        roots[i] = roots[i] > 0.0 ? std::sqrt(roots[i]) : 0.0;
    out = solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
    return true;
}

bool sqrt_of_product_trace(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double& trace) {
    Eigen::MatrixXd root_a;
    if (!psd_sqrt(a, root_a)) return false;
    Eigen::MatrixXd inner = root_a * b * root_a;
    inner = 0.5 * (inner + inner.transpose().eval());
    Eigen::MatrixXd root_inner;
    if (!psd_sqrt(inner, root_inner)) return false;
    trace = root_inner.trace();
    return true;
}

Tensor one_image(const Tensor& batch, int64_t index) {
    const int64_t stride = batch.numel() / batch.dim(0);
    Tensor out({1, batch.dim(1), batch.dim(2), batch.dim(3)});
    std::copy(batch.data() + index * stride, batch.data() + (index + 1) * stride, out.data());
    return out;
}

Tensor feature_rows(const FeatureExtractor& extractor, const Tensor& images) {
    Tensor f = extractor.fn(images);
    if (f.ndim() != 2 || f.dim(0) != images.dim(0) || f.dim(1) != extractor.dim)
        throw ShapeError("extractor " + extractor.id + " returned " + f.shape_str());
    return f;
}

}  // namespace

ActivationStats activation_stats(const Tensor& features) {
    if (features.ndim() != 2) throw ShapeError("features must be n x d");
    const int64_t n = features.dim(0), d = features.dim(1);
    if (n < 2) throw ShapeError("need at least 2 feature rows, got " + std::to_string(n));

    ActivationStats stats;
    stats.n = n;
    stats.mean = Tensor({d});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) stats.mean[j] += features.at(i, j);
    for (int64_t j = 0; j < d; ++j) stats.mean[j] /= static_cast<double>(n);

    Eigen::MatrixXd centered = to_eigen(features);
    centered.rowwise() -= Eigen::Map<const Eigen::RowVectorXd>(stats.mean.data(), d);
    Eigen::MatrixXd cov =
        (centered.transpose() * centered) / static_cast<double>(n - 1);

    stats.covariance = Tensor({d, d});
    for (int64_t i = 0; i < d; ++i) {
        stats.covariance.at(i, i) = cov(i, i);
        for (int64_t j = i + 1; j < d; ++j)  // mirror for exact symmetry
            stats.covariance.at(i, j) = stats.covariance.at(j, i) = cov(i, j);
    }
    return stats;
}

double frechet_distance(const ActivationStats& p, const ActivationStats& q) {
    if (p.mean.ndim() != 1 || q.mean.ndim() != 1 || p.mean.dim(0) != q.mean.dim(0))
        throw ShapeError("stats dimensions differ: " + p.mean.shape_str() + " vs " +
                         q.mean.shape_str());
    const int64_t d = p.mean.dim(0);
    if (p.covariance.ndim() != 2 || p.covariance.dim(0) != d || p.covariance.dim(1) != d ||
        q.covariance.shape() != p.covariance.shape())
        throw ShapeError("covariance shapes do not match the mean dimension");

    // Identical statistics have distance zero by definition; short-circuit
    // so the guarantee is exact rather than eigensolver-rounding close.
    const bool same_mean = std::equal(p.mean.data(), p.mean.data() + p.mean.numel(),
                                      q.mean.data());
    const bool same_cov =
        std::equal(p.covariance.data(), p.covariance.data() + p.covariance.numel(),
                   q.covariance.data());
    if (same_mean && same_cov) return 0.0;

    double mean_term = 0.0;
    for (int64_t i = 0; i < d; ++i) {
        const double diff = p.mean[i] - q.mean[i];
        mean_term += diff * diff;
    }

    Eigen::MatrixXd a = to_eigen(p.covariance);
    Eigen::MatrixXd b = to_eigen(q.covariance);
    a = 0.5 * (a + a.transpose().eval());
    b = 0.5 * (b + b.transpose().eval());

    double trace_sqrt = 0.0;
    if (!sqrt_of_product_trace(a, b, trace_sqrt)) {
        const Eigen::MatrixXd reg =
            kSqrtRegularizer * Eigen::MatrixXd::Identity(d, d);
        if (!sqrt_of_product_trace(a + reg, b + reg, trace_sqrt))
            throw NumericError("matrix square root failed even after regularization");
    }

    const double d2 = mean_term + a.trace() + b.trace() - 2.0 * trace_sqrt;
    if (!std::isfinite(d2)) throw NumericError("distance computation produced non-finite value");
    return d2 > 0.0 ? d2 : 0.0;
}

FeatureExtractor make_random_projector(uint64_t seed) {
    struct Layer {
        Tensor w, b;
    };
    auto layers = std::make_shared<std::vector<Layer>>();
    const int64_t channels[4] = {3, 8, 16, 32};
    Rng rng = Rng(seed).fork("feature_projector");
    for (int i = 0; i < 3; ++i) {
        Layer layer;
        layer.w = Tensor({channels[i + 1], channels[i], 3, 3});
        rng.fill_normal(layer.w, 0.0, std::sqrt(2.0 / static_cast<double>(channels[i] * 9)));
        layer.b = Tensor({channels[i + 1]});
        layers->push_back(std::move(layer));
    }

    FeatureExtractor extractor;
    extractor.id = "randproj32@" + std::to_string(seed);
    extractor.dim = 32;
    extractor.fn = [layers](const Tensor& images) {
        ad::Value x = ad::constant(images);
        for (const auto& layer : *layers)
            x = ad::relu(
                ad::conv2d(x, ad::constant(layer.w), ad::constant(layer.b), 2, 1));
        return ad::global_avg_pool(x).val();
    };
    return extractor;
}

FeatureExtractor make_precomputed(Tensor features, std::string id) {
    if (features.ndim() != 2) throw ShapeError("precomputed features must be n x d");
    struct State {
        Tensor rows;
        int64_t cursor = 0;
    };
    auto state = std::make_shared<State>();
    state->rows = std::move(features);

    FeatureExtractor extractor;
    extractor.id = std::move(id);
    extractor.dim = state->rows.dim(1);
    extractor.fn = [state](const Tensor& images) {
        const int64_t n = images.dim(0);
        const int64_t d = state->rows.dim(1);
        if (state->cursor + n > state->rows.dim(0))
            throw ConfigError("precomputed feature rows exhausted after " +
                              std::to_string(state->cursor) + " of " +
                              std::to_string(state->rows.dim(0)));
        Tensor out({n, d});
        std::copy(state->rows.data() + state->cursor * d,
                  state->rows.data() + (state->cursor + n) * d, out.data());
        state->cursor += n;
        return out;
    };
    return extractor;
}

std::string FidReport::text() const {
    std::ostringstream ss;
    char buf[64];
    ss << "quality-score report\n";
    ss << "direction=" << domain_name(src) << "->" << domain_name(dst) << '\n';
    ss << "extractor=" << extractor_id << '\n';
    ss << "n_content=" << options.n_content << " n_styles=" << options.n_styles
       << " repeats=" << options.repeats << " seed=" << options.seed << '\n';
    for (size_t i = 0; i < per_repeat.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", per_repeat[i]);
        ss << "repeat_" << (i + 1) << "=" << buf << '\n';
    }
    std::snprintf(buf, sizeof(buf), "%.17g", mean);
    ss << "mean=" << buf << '\n';
    std::snprintf(buf, sizeof(buf), "%.17g", stddev);
    ss << "std=" << buf << '\n';
    return ss.str();
}

FidReport fid_protocol(DsmapModel& model, const DatasetSpec& data, DomainId src, DomainId dst,
                       const FeatureExtractor& extractor, const FidOptions& options) {
    if (options.n_content < 1 || options.n_styles < 1 || options.repeats < 1)
        throw ConfigError("n_content, n_styles and repeats must all be >= 1");

    const ImageBatch real = load_all(data, dst, SplitKind::test);
    const ImageBatch content_pool = load_all(data, src, SplitKind::test);
    if (real.data.dim(0) < 2)
        throw ConfigError("the quality score needs at least 2 target-domain test images, got " +
                          std::to_string(real.data.dim(0)));
    const ActivationStats real_stats = activation_stats(feature_rows(extractor, real.data));

    const int64_t n_real = real.data.dim(0);
    const int64_t n_src = content_pool.data.dim(0);
    if (n_src < options.n_content)
        std::fprintf(stderr,
                     "warning: %s test split has %lld images, sampling %lld with "
                     "replacement\n",
                     domain_name(src), static_cast<long long>(n_src),
                     static_cast<long long>(options.n_content));
    if (n_real < options.n_styles)
        std::fprintf(stderr,
                     "warning: %s test split has %lld images, sampling %lld styles with "
                     "replacement\n",
                     domain_name(dst), static_cast<long long>(n_real),
                     static_cast<long long>(options.n_styles));

    FidReport report;
    report.src = src;
    report.dst = dst;
    report.options = options;
    report.extractor_id = extractor.id;

    for (int64_t r = 0; r < options.repeats; ++r) {
        Rng rng(mix_seed(options.seed, "fid_repeat", static_cast<uint64_t>(r)));
        Tensor fake_features({options.n_content * options.n_styles, extractor.dim});
        int64_t row = 0;
        for (int64_t i = 0; i < options.n_content; ++i) {
            const ImageBatch content{one_image(content_pool.data, rng.uniform_int(n_src))};
            for (int64_t j = 0; j < options.n_styles; ++j) {
                const ImageBatch style{one_image(real.data, rng.uniform_int(n_real))};
                const ImageBatch out = model.translate(content, style, src, dst);
                const Tensor f = feature_rows(extractor, out.data);
                std::copy(f.data(), f.data() + extractor.dim,
                          fake_features.data() + row * extractor.dim);
                ++row;
            }
        }
        report.per_repeat.push_back(
            frechet_distance(real_stats, activation_stats(fake_features)));
    }

    double sum = 0.0;
    for (double s : report.per_repeat) sum += s;
    report.mean = sum / static_cast<double>(report.per_repeat.size());
    if (report.per_repeat.size() > 1) {
        double ss = 0.0;
        for (double s : report.per_repeat) ss += (s - report.mean) * (s - report.mean);
        report.stddev = std::sqrt(ss / static_cast<double>(report.per_repeat.size() - 1));
    }
    return report;
}

double diversity_score(DsmapModel& model, const ImageBatch& x_content, DomainId src,
                       DomainId dst, int64_t n_pairs, const FeatureExtractor& extractor,
                       uint64_t seed) {
    if (n_pairs < 1) throw ConfigError("diversity_score needs n_pairs >= 1");
    const ContentCode c = model.encode_content(x_content, src).second;
    const ContentCode h = model.map_content(c, dst);
    const int64_t batch = x_content.data.dim(0);

    Rng rng(seed);
    double total = 0.0;
    for (int64_t p = 0; p < n_pairs; ++p) {
        Tensor s1({batch, model.config().style_dim});
        Tensor s2({batch, model.config().style_dim});
        rng.fill_normal(s1);
        rng.fill_normal(s2);
        const ImageBatch o1 = model.generate(h, StyleCode{std::move(s1)}, dst);
        const ImageBatch o2 = model.generate(h, StyleCode{std::move(s2)}, dst);
        const Tensor f1 = feature_rows(extractor, o1.data);
        const Tensor f2 = feature_rows(extractor, o2.data);
        double pair_mean = 0.0;
        for (int64_t i = 0; i < batch; ++i) {
            double sq = 0.0;
            for (int64_t j = 0; j < extractor.dim; ++j) {
                const double diff = f1.at(i, j) - f2.at(i, j);
                sq += diff * diff;
            }
            pair_mean += std::sqrt(sq);
        }
        total += pair_mean / static_cast<double>(batch);
    }
    return total / static_cast<double>(n_pairs);
}

}  // namespace dsmap
