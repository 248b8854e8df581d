#include "dsmap/losses.hpp"

#include <cstdio>

#include "dsmap/error.hpp"

namespace dsmap {

void LossWeights::validate() const {
    for (double v : {lambda_cc, lambda_x, lambda_dsc, lambda_dic, lambda_s, lambda_adv})
        if (v < 0.0) throw ConfigError("loss weights must be nonnegative");
}

std::vector<std::pair<std::string, double>> LossReport::ordered_fields() const {
    return {
        {"dsc_a", comps.dsc_a},     {"dsc_b", comps.dsc_b},     {"style_a", comps.style_a},
        {"style_b", comps.style_b}, {"dic_a", comps.dic_a},     {"dic_b", comps.dic_b},
        {"recon_a", comps.recon_a}, {"recon_b", comps.recon_b}, {"cyc_a", comps.cyc_a},
        {"cyc_b", comps.cyc_b},     {"adv_g_a", comps.adv_g_a}, {"adv_g_b", comps.adv_g_b},
        {"adv_d_a", comps.adv_d_a}, {"adv_d_b", comps.adv_d_b}, {"g_total", g_total},
        {"d_total", d_total},
    };
}

std::string LossReport::line() const {
    std::string out = "step=" + std::to_string(step);
    char buf[64];
    for (const auto& [key, value] : ordered_fields()) {
        std::snprintf(buf, sizeof(buf), " %s=%.17g", key.c_str(), value);
        out += buf;
    }
    return out;
}

ad::Value lsgan_d(const ad::Value& scores_real, const ad::Value& scores_fake) {
    return ad::add(ad::mul_scalar(ad::mean_sq_vs(scores_real, 1.0), 0.5),
                   ad::mul_scalar(ad::mean_sq_vs(scores_fake, 0.0), 0.5));
}

ad::Value lsgan_g(const ad::Value& scores_fake) {
    return ad::mul_scalar(ad::mean_sq_vs(scores_fake, 1.0), 0.5);
}

std::vector<double> generator_term_weights(const LossWeights& w) {
    return {w.lambda_cc,  w.lambda_cc,  w.lambda_x,   w.lambda_x,
            w.lambda_dsc, w.lambda_dsc, w.lambda_dic, w.lambda_dic,
            w.lambda_s,   w.lambda_s,   w.lambda_adv, w.lambda_adv};
}

std::vector<double> discriminator_term_weights(const LossWeights& w) {
    return {w.lambda_adv, w.lambda_adv};
}

double l1_mean(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "l1_mean");
    return ad::mean_abs_diff(ad::constant(a), ad::constant(b)).val()[0];
}

namespace {

void check_domain_specific_pair(const ContentCode& h, const ContentCode& mapped,
                                const char* what) {
    if (h.kind != CodeKind::domain_specific || mapped.kind != CodeKind::domain_specific)
        throw TagError(std::string(what) + " requires two domain-specific codes");
    if (h.domain != mapped.domain)
        throw TagError(std::string(what) + ": codes tagged for different domains");
}

}  // namespace

double loss_dsc(const ContentCode& h, const ContentCode& mapped) {
    check_domain_specific_pair(h, mapped, "loss_dsc");
    return l1_mean(h.data, mapped.data);
}

double loss_style(const StyleCode& sampled, const StyleCode& recovered) {
    return l1_mean(sampled.data, recovered.data);
}

double loss_dic(const ContentCode& c_src, const ContentCode& c_of_translated) {
    if (c_src.kind != CodeKind::shared || c_of_translated.kind != CodeKind::shared)
        throw TagError("loss_dic requires two shared codes");
    return l1_mean(c_src.data, c_of_translated.data);
}

double loss_image_recon(const ImageBatch& x, const ImageBatch& x_recon) {
    return l1_mean(x.data, x_recon.data);
}

double loss_cycle(const ImageBatch& x, const ImageBatch& x_cycled) {
    return l1_mean(x.data, x_cycled.data);
}

double loss_adv_d(const Tensor& scores_real, const Tensor& scores_fake) {
    if (!scores_real.all_finite() || !scores_fake.all_finite())
        throw NumericError("loss_adv_d: non-finite scores");
    return lsgan_d(ad::constant(scores_real), ad::constant(scores_fake)).val()[0];
}

double loss_adv_g(const Tensor& scores_fake) {
    if (!scores_fake.all_finite()) throw NumericError("loss_adv_g: non-finite scores");
    return lsgan_g(ad::constant(scores_fake)).val()[0];
}

std::pair<double, double> total_losses(const LossComponents& c, const LossWeights& w) {
    w.validate();
    // Route both totals through the same weighted-sum op the trainer's
    // graph uses, in the same term order, so they agree bitwise.
    auto fold = [](const std::vector<double>& values, const std::vector<double>& weights) {
        std::vector<ad::Value> vs;
        vs.reserve(values.size());
        for (double v : values) vs.push_back(ad::constant(Tensor::scalar(v)));
        return ad::wsum(vs, weights).val()[0];
    };
    const double g = fold({c.cyc_a, c.cyc_b, c.recon_a, c.recon_b, c.dsc_a, c.dsc_b, c.dic_a,
                           c.dic_b, c.style_a, c.style_b, c.adv_g_a, c.adv_g_b},
                          generator_term_weights(w));
    const double d = fold({c.adv_d_a, c.adv_d_b}, discriminator_term_weights(w));
    return {g, d};
}

}  // namespace dsmap
