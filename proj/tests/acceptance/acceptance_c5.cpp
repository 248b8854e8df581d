// Criterion 5: overfitting a small model on a 4+4-image toy training
// set for 2000 steps drives the cycle and image-reconstruction losses
// below 25% of their step-50 moving averages, and the content-map
// reconstruction below 0.1 per element.

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "acceptance.hpp"
#include "dsmap/data.hpp"
#include "dsmap/losses.hpp"
#include "dsmap/model.hpp"
#include "dsmap/train.hpp"

using namespace dsmap;

namespace {

double window_mean(const std::vector<LossReport>& reports, size_t begin, size_t end,
                   double LossComponents::*field_a, double LossComponents::*field_b) {
    double acc = 0.0;
    for (size_t i = begin; i < end; ++i)
        acc += 0.5 * (reports[i].comps.*field_a + reports[i].comps.*field_b);
    return acc / static_cast<double>(end - begin);
}

}  // namespace

int main() {
    acceptance::TempDir dir("c5");
    acceptance::Criterion crit(5, "2000-step overfit collapses the reconstruction losses");

    // n=5 per domain leaves 4 training images per domain after the test
    // split is held out.
    ToySpec toy;
    toy.root = dir.str() + "/toy";
    toy.n_per_domain = 5;
    toy.image_size = 32;
    toy.seed = 7;
    make_toy_dataset(toy);
    DatasetSpec data;
    data.root = toy.root;
    data.image_size = 32;

    ModelConfig mc;
    mc.image_size = 32;
    mc.base_channels = 8;
    mc.n_downsample = 2;
    mc.n_res_shared = 1;
    mc.n_res_mapping = 1;
    mc.style_dim = 4;
    mc.n_gen_res = 2;
    mc.disc_layers = 2;
    DsmapModel model(mc);

    TrainConfig tc;
    tc.steps = 2000;
    tc.checkpoint_every = 2000;
    tc.seed = 5;
    const FitResult result = fit(data, model, tc, dir.str() + "/run");
    const std::vector<LossReport>& r = result.reports;
    crit.check(r.size() == 2000, "expected 2000 step reports, got " +
                                     std::to_string(r.size()));
    if (r.size() == 2000) {
        const double cyc_early = window_mean(r, 0, 50, &LossComponents::cyc_a,
                                             &LossComponents::cyc_b);
        const double cyc_late = window_mean(r, 1950, 2000, &LossComponents::cyc_a,
                                            &LossComponents::cyc_b);
        const double rec_early = window_mean(r, 0, 50, &LossComponents::recon_a,
                                             &LossComponents::recon_b);
        const double rec_late = window_mean(r, 1950, 2000, &LossComponents::recon_a,
                                            &LossComponents::recon_b);
        const double dsc_late = window_mean(r, 1950, 2000, &LossComponents::dsc_a,
                                            &LossComponents::dsc_b);
        crit.check(cyc_late < 0.25 * cyc_early,
                   "cycle loss " + std::to_string(cyc_late) + " not below 25% of " +
                       std::to_string(cyc_early));
        crit.check(rec_late < 0.25 * rec_early,
                   "image reconstruction " + std::to_string(rec_late) +
                       " not below 25% of " + std::to_string(rec_early));
        crit.check(dsc_late < 0.1, "content-map reconstruction " +
                                       std::to_string(dsc_late) + " not below 0.1");
    }

    return crit.finish();
}
