#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dsmap/autodiff.hpp"
#include "dsmap/checkpoint.hpp"
#include "dsmap/data.hpp"
#include "dsmap/losses.hpp"
#include "dsmap/model.hpp"
#include "dsmap/nn.hpp"

namespace dsmap {

struct TrainConfig {
    int64_t steps = 1000;
    int64_t batch_size = 1;
    double learning_rate = 1e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    double weight_decay = 1e-4;
    int64_t checkpoint_every = 500;
    uint64_t seed = 0;
    LossWeights weights;
    /// Ablation switch: stop content-consistency gradients at the
    /// translated image instead of letting them shape both encoders.
    bool detach_translated = false;

    /// Throws ConfigError on invalid settings. learning_rate 0 is
    /// allowed (a well-defined no-op optimizer), negative is not.
    void validate() const;
};

/// Every intermediate of one bidirectional pipeline pass, as live
/// graph values. Field names follow the translation direction:
/// x_ab is A translated into B, c_ab is A's shared content mapped
/// into B's domain-specific space, x_aba is the full cycle.
struct StepOutputs {
    ad::Value h_a, h_b;          // domain-specific content of the inputs
    ad::Value c_a, c_b;          // shared content
    ad::Value c_aa, c_bb;        // shared content mapped back into its own domain
    ad::Value c_ab, c_ba;        // shared content mapped into the other domain
    ad::Value s_a_enc, s_b_enc;  // encoded styles of the inputs
    ad::Value s_a_prior, s_b_prior;
    ad::Value x_ab, x_ba;        // cross-domain translations (prior styles)
    ad::Value x_aa, x_bb;        // within-domain reconstructions (encoded styles)
    ad::Value x_aba, x_bab;      // cycle reconstructions (original encoded styles)
    ad::Value c_ab_re, c_ba_re;  // shared content re-encoded from the translations
    ad::Value s_b_re, s_a_re;    // styles re-encoded from the translations
};

/// Builds the full bidirectional graph: encode both inputs, map the
/// shared codes into both domains, generate the four single-hop images
/// (cross-domain with the prior styles, within-domain with the encoded
/// styles), re-encode the translations, and close both cycles with the
/// original images' encoded styles. Throws NumericError naming the
/// first non-finite field, ShapeError on mismatched batches.
StepOutputs forward_all(DsmapModel& model, const Tensor& x_a, const Tensor& x_b,
                        const Tensor& s_a_prior, const Tensor& s_b_prior,
                        bool detach_translated = false);

/// Adam over a fixed parameter set, with state addressed by parameter
/// name so it can ride along in checkpoints.
class Adam {
public:
    Adam(std::vector<nn::ParamStore::Entry> entries, const TrainConfig& cfg);

    /// Applies one update from the parameters' current gradients.
    /// Decoupled nothing: weight decay folds into the gradient.
    void step();

    int64_t steps_taken() const { return t_; }
    void set_steps_taken(int64_t t);

    /// State arrays named "<prefix>.m.<param>" / "<prefix>.v.<param>".
    std::vector<std::pair<std::string, Tensor>> state_arrays(const std::string& prefix) const;
    /// Restores state from checkpoint extras; throws IoError when a
    /// parameter's state is missing, ShapeError on shape mismatch.
    void load_state(const Checkpoint& ck, const std::string& prefix);

private:
    struct Slot {
        nn::ParamStore::Entry entry;
        Tensor m, v;
    };
    std::vector<Slot> slots_;
    double lr_, beta1_, beta2_, weight_decay_;
    int64_t t_ = 0;
};

/// One alternating update: discriminators first (against freshly
/// generated, graph-free fakes), then the generator side with the
/// discriminators frozen. Returns the step's loss report; `step` is
/// only stamped into it.
LossReport train_step(DsmapModel& model, Adam& opt_g, Adam& opt_d, const Tensor& x_a,
                      const Tensor& x_b, const Tensor& s_a_prior, const Tensor& s_b_prior,
                      const TrainConfig& cfg, int64_t step);

struct FitResult {
    std::vector<LossReport> reports;
    std::string final_checkpoint;
    int64_t start_step = 0;  // first executed step index is start_step + 1
};

/// Full training loop over a trainA/trainB dataset. Writes one metrics
/// line per step to "<out_dir>/metrics.log" and a checkpoint (with
/// optimizer state) every checkpoint_every steps plus a final
/// "ckpt_final.ckpt". Batches and style priors come from per-step
/// stateless substreams of cfg.seed, so a run resumed from a
/// checkpoint continues the exact trajectory of an uninterrupted run.
FitResult fit(const DatasetSpec& data, DsmapModel& model, const TrainConfig& cfg,
              const std::string& out_dir, const std::string& resume_checkpoint = "");

}  // namespace dsmap
