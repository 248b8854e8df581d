#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dsmap/autodiff.hpp"
#include "dsmap/model.hpp"
#include "dsmap/tensor.hpp"

namespace dsmap {

struct LossWeights {
    double lambda_cc = 10.0;   // cross-domain cycle reconstruction
    double lambda_x = 10.0;    // within-domain image reconstruction
    double lambda_dsc = 1.0;   // domain-specific content reconstruction
    double lambda_dic = 1.0;   // domain-invariant content consistency
    double lambda_s = 1.0;     // style reconstruction (sampled prior path)
    double lambda_adv = 1.0;   // adversarial terms, both sides

    /// Throws ConfigError on a negative weight.
    void validate() const;

    bool operator==(const LossWeights&) const = default;
};

/// Per-direction scalar values of every loss term for one step.
/// "_a" denotes the term anchored at domain A (reconstruction of an A
/// image, realness of A-domain outputs), "_b" the mirror.
struct LossComponents {
    double dsc_a = 0, dsc_b = 0;
    double style_a = 0, style_b = 0;
    double dic_a = 0, dic_b = 0;
    double recon_a = 0, recon_b = 0;
    double cyc_a = 0, cyc_b = 0;
    double adv_g_a = 0, adv_g_b = 0;
    double adv_d_a = 0, adv_d_b = 0;
};

/// One metrics-log record: the components plus the weighted totals.
struct LossReport {
    int64_t step = 0;
    LossComponents comps;
    double g_total = 0;
    double d_total = 0;

    /// Field names and values in the fixed serialization order
    /// (everything after "step").
    std::vector<std::pair<std::string, double>> ordered_fields() const;
    /// Single machine-parseable line: "step=N key=value ...", values
    /// printed with full round-trip precision, no timestamps.
    std::string line() const;
};

// ---- graph-level builders (used by the trainer) ----

/// Least-squares discriminator objective:
/// 0.5*mean((real-1)^2) + 0.5*mean(fake^2).
ad::Value lsgan_d(const ad::Value& scores_real, const ad::Value& scores_fake);
/// Least-squares generator objective: 0.5*mean((fake-1)^2).
ad::Value lsgan_g(const ad::Value& scores_fake);

/// Generator-side term order of the weighted total. Every loss enters
/// as its A-direction then B-direction value:
///   cyc_a, cyc_b, recon_a, recon_b, dsc_a, dsc_b, dic_a, dic_b,
///   style_a, style_b, adv_g_a, adv_g_b
/// The trainer's graph total and total_losses() both fold this exact
/// sequence left to right, so the two agree bitwise.
std::vector<double> generator_term_weights(const LossWeights& w);
/// Discriminator term order: adv_d_a, adv_d_b.
std::vector<double> discriminator_term_weights(const LossWeights& w);

// ---- scalar operations (validated public surface) ----

/// Mean absolute difference; the L1 primitive behind all
/// reconstruction losses. Resolution independent by construction.
double l1_mean(const Tensor& a, const Tensor& b);

/// ||h - mapped||_1 between a domain-specific code and the mapping's
/// output for the same domain. Tag mismatches are rejected.
double loss_dsc(const ContentCode& h, const ContentCode& mapped);
double loss_style(const StyleCode& sampled, const StyleCode& recovered);
/// Shared-code consistency between source and translated image.
double loss_dic(const ContentCode& c_src, const ContentCode& c_of_translated);
double loss_image_recon(const ImageBatch& x, const ImageBatch& x_recon);
double loss_cycle(const ImageBatch& x, const ImageBatch& x_cycled);
double loss_adv_d(const Tensor& scores_real, const Tensor& scores_fake);
double loss_adv_g(const Tensor& scores_fake);

/// Weighted totals (generator side, discriminator side) from the
/// per-direction components. Exactly the fold described at
/// generator_term_weights.
std::pair<double, double> total_losses(const LossComponents& comps, const LossWeights& w);

}  // namespace dsmap
