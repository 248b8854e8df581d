// Criterion 2: analytic gradients of every loss term, and of the
// weighted composition, match central finite differences (step 1e-5)
// with max relative error < 1e-4 on random inputs.
//
// The L1 terms are non-differentiable where an element pair ties, so
// paired inputs are drawn with |a - b| >= 0.01 everywhere: far enough
// from the kink that the FD stencil stays on one side, while still
// random in sign and magnitude.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "acceptance.hpp"
#include "dsmap/autodiff.hpp"
#include "dsmap/losses.hpp"
#include "dsmap/rng.hpp"
#include "dsmap/tensor.hpp"

using namespace dsmap;

namespace {

constexpr double kFdStep = 1e-5;

Tensor random_tensor(Rng& rng, const std::vector<int64_t>& shape, double lo, double hi) {
    Tensor t(shape);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

/// Partner tensor with a guaranteed elementwise margin from `a`.
Tensor offset_tensor(Rng& rng, const Tensor& a) {
    Tensor b = a;
    for (int64_t i = 0; i < b.numel(); ++i) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        b[i] += sign * rng.uniform(0.01, 1.0);
    }
    return b;
}

struct Term {
    std::string name;
    std::vector<Tensor> inputs;
    std::function<ad::Value(const std::vector<ad::Value>&)> build;
};

double eval_term(const Term& term, const std::vector<Tensor>& inputs) {
    std::vector<ad::Value> consts;
    consts.reserve(inputs.size());
    for (const Tensor& t : inputs) consts.push_back(ad::constant(t));
    return term.build(consts).val()[0];
}

void check_term(acceptance::Criterion& crit, const Term& term, Rng& rng) {
    std::vector<ad::Value> leaves;
    leaves.reserve(term.inputs.size());
    for (const Tensor& t : term.inputs) leaves.push_back(ad::leaf(t));
    ad::backward(term.build(leaves));

    double worst = 0.0;
    for (size_t i = 0; i < term.inputs.size(); ++i) {
        const int64_t numel = term.inputs[i].numel();
        for (int k = 0; k < 12; ++k) {
            const int64_t idx = rng.uniform_int(numel);
            std::vector<Tensor> plus = term.inputs;
            std::vector<Tensor> minus = term.inputs;
            plus[i][idx] += kFdStep;
            minus[i][idx] -= kFdStep;
            const double fd = (eval_term(term, plus) - eval_term(term, minus)) / (2 * kFdStep);
            const double an = leaves[i].grad()[idx];
            if (std::abs(fd) < 1e-7 && std::abs(an) < 1e-7) continue;
            worst = std::max(worst,
                             std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
        }
    }
    crit.check(worst < 1e-4, term.name + ": max relative error " + std::to_string(worst));
}

}  // namespace

int main() {
    acceptance::Criterion crit(2, "loss gradients match central finite differences");
    Rng rng(202);

    const auto mad = [](const std::vector<ad::Value>& v) {
        return ad::mean_abs_diff(v[0], v[1]);
    };
    const std::vector<int64_t> img = {2, 3, 4, 4};
    const std::vector<int64_t> scores = {2, 1, 4, 4};

    for (int round = 0; round < 3; ++round) {
        const Tensor a = random_tensor(rng, img, -2.0, 2.0);
        const Tensor s = random_tensor(rng, {2, 8}, -2.0, 2.0);
        const Tensor sc = random_tensor(rng, scores, -1.5, 1.5);

        check_term(crit, {"content map reconstruction", {a, offset_tensor(rng, a)}, mad}, rng);
        check_term(crit, {"style reconstruction", {s, offset_tensor(rng, s)}, mad}, rng);
        check_term(crit, {"shared content consistency", {a, offset_tensor(rng, a)}, mad}, rng);
        check_term(crit, {"image reconstruction", {a, offset_tensor(rng, a)}, mad}, rng);
        check_term(crit, {"cycle reconstruction", {a, offset_tensor(rng, a)}, mad}, rng);
        check_term(crit,
                   {"adversarial generator", {sc},
                    [](const std::vector<ad::Value>& v) { return lsgan_g(v[0]); }},
                   rng);
        check_term(crit,
                   {"adversarial discriminator", {sc, random_tensor(rng, scores, -1.5, 1.5)},
                    [](const std::vector<ad::Value>& v) { return lsgan_d(v[0], v[1]); }},
                   rng);

        // Weighted composition with the default weights. v[0] feeds two
        // terms so the fold must accumulate gradients; every L1 pair
        // keeps the kink margin (v[1] and v[2] are offsets of v[0] and
        // never pair with each other).
        const LossWeights w;
        Term total;
        total.name = "weighted generator total";
        const Tensor dsc_a = random_tensor(rng, img, -2.0, 2.0);
        total.inputs = {a,      offset_tensor(rng, a), offset_tensor(rng, a),
                        dsc_a,  offset_tensor(rng, dsc_a),
                        s,      offset_tensor(rng, s), sc};
        total.build = [&w](const std::vector<ad::Value>& v) {
            const ad::Value cyc = ad::mean_abs_diff(v[0], v[1]);
            const ad::Value recon = ad::mean_abs_diff(v[0], v[2]);
            const ad::Value dsc = ad::mean_abs_diff(v[3], v[4]);
            const ad::Value sty = ad::mean_abs_diff(v[5], v[6]);
            const ad::Value adv = lsgan_g(v[7]);
            return ad::wsum({cyc, recon, dsc, sty, adv},
                            {w.lambda_cc, w.lambda_x, w.lambda_dsc, w.lambda_s, w.lambda_adv});
        };
        check_term(crit, total, rng);
    }

    return crit.finish();
}
