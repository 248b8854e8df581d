#include "dsmap/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dsmap/error.hpp"

namespace fs = std::filesystem;

namespace dsmap {

namespace {

constexpr double kAdamEps = 1e-8;

void require_finite_scalar(double v, const char* what, int64_t step) {
    if (!std::isfinite(v))
        throw NumericError(std::string("step ") + std::to_string(step) + ": " + what +
                           " is non-finite; aborting before the update");
}

}  // namespace

void TrainConfig::validate() const {
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!std::isfinite(learning_rate) || learning_rate < 0.0)
        throw ConfigError("learning_rate must be finite and >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ConfigError("adam betas must lie in [0, 1)");
    if (!std::isfinite(weight_decay) || weight_decay < 0.0)
        throw ConfigError("weight_decay must be finite and >= 0");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    weights.validate();
}

StepOutputs forward_all(DsmapModel& model, const Tensor& x_a, const Tensor& x_b,
                        const Tensor& s_a_prior, const Tensor& s_b_prior,
                        bool detach_translated) {
    validate_image_batch(x_a, model.config());
    validate_image_batch(x_b, model.config());
    if (x_a.dim(0) != x_b.dim(0))
        throw ShapeError("batch sizes differ: " + std::to_string(x_a.dim(0)) + " vs " +
                         std::to_string(x_b.dim(0)));
    for (const Tensor* s : {&s_a_prior, &s_b_prior})
        if (s->ndim() != 2 || s->dim(0) != x_a.dim(0) || s->dim(1) != model.config().style_dim)
            throw ShapeError("style prior must be batch x style_dim, got " + s->shape_str());

    StepOutputs so;
    const ad::Value xa = ad::constant(x_a);
    const ad::Value xb = ad::constant(x_b);
    so.s_a_prior = ad::constant(s_a_prior);
    so.s_b_prior = ad::constant(s_b_prior);

    so.h_a = model.content_intermediate(xa, DomainId::A);
    so.h_b = model.content_intermediate(xb, DomainId::B);
    so.c_a = model.content_shared(so.h_a, DomainId::A);
    so.c_b = model.content_shared(so.h_b, DomainId::B);
    so.c_aa = model.map_code(so.c_a, DomainId::A);
    so.c_bb = model.map_code(so.c_b, DomainId::B);
    so.c_ab = model.map_code(so.c_a, DomainId::B);
    so.c_ba = model.map_code(so.c_b, DomainId::A);
    so.s_a_enc = model.style_of(xa, DomainId::A);
    so.s_b_enc = model.style_of(xb, DomainId::B);

    so.x_ab = model.generate_from(so.c_ab, so.s_b_prior, DomainId::B);
    so.x_ba = model.generate_from(so.c_ba, so.s_a_prior, DomainId::A);
    so.x_aa = model.generate_from(so.c_aa, so.s_a_enc, DomainId::A);
    so.x_bb = model.generate_from(so.c_bb, so.s_b_enc, DomainId::B);

    // Re-encode the translations. The cycle always continues from the
    // live graph; the content-consistency readout optionally runs on a
    // severed copy so its gradients stop at the translated image.
    const ad::Value c_from_ab =
        model.content_shared(model.content_intermediate(so.x_ab, DomainId::B), DomainId::B);
    const ad::Value c_from_ba =
        model.content_shared(model.content_intermediate(so.x_ba, DomainId::A), DomainId::A);
    if (detach_translated) {
        so.c_ab_re = model.content_shared(
            model.content_intermediate(ad::detach(so.x_ab), DomainId::B), DomainId::B);
        so.c_ba_re = model.content_shared(
            model.content_intermediate(ad::detach(so.x_ba), DomainId::A), DomainId::A);
    } else {
        so.c_ab_re = c_from_ab;
        so.c_ba_re = c_from_ba;
    }
    so.s_b_re = model.style_of(so.x_ab, DomainId::B);
    so.s_a_re = model.style_of(so.x_ba, DomainId::A);

    so.x_aba =
        model.generate_from(model.map_code(c_from_ab, DomainId::A), so.s_a_enc, DomainId::A);
    so.x_bab =
        model.generate_from(model.map_code(c_from_ba, DomainId::B), so.s_b_enc, DomainId::B);

    const std::pair<const char*, const ad::Value*> fields[] = {
        {"h_a", &so.h_a},         {"h_b", &so.h_b},         {"c_a", &so.c_a},
        {"c_b", &so.c_b},         {"c_aa", &so.c_aa},       {"c_bb", &so.c_bb},
        {"c_ab", &so.c_ab},       {"c_ba", &so.c_ba},       {"s_a_enc", &so.s_a_enc},
        {"s_b_enc", &so.s_b_enc}, {"x_ab", &so.x_ab},       {"x_ba", &so.x_ba},
        {"x_aa", &so.x_aa},       {"x_bb", &so.x_bb},       {"c_ab_re", &so.c_ab_re},
        {"c_ba_re", &so.c_ba_re}, {"s_a_re", &so.s_a_re},   {"s_b_re", &so.s_b_re},
        {"x_aba", &so.x_aba},     {"x_bab", &so.x_bab},
    };
    for (const auto& [name, value] : fields)
        if (!value->val().all_finite())
            throw NumericError(std::string("forward pass produced non-finite values in ") +
                               name);
    return so;
}

Adam::Adam(std::vector<nn::ParamStore::Entry> entries, const TrainConfig& cfg)
    : lr_(cfg.learning_rate),
      beta1_(cfg.adam_beta1),
      beta2_(cfg.adam_beta2),
      weight_decay_(cfg.weight_decay) {
    slots_.reserve(entries.size());
    for (auto& e : entries) {
        Slot s;
        s.m = Tensor::zeros_like(e.value.val());
        s.v = Tensor::zeros_like(e.value.val());
        s.entry = std::move(e);
        slots_.push_back(std::move(s));
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (Slot& s : slots_) {
        Tensor& p = s.entry.value.node()->val;
        const Tensor& g = s.entry.value.node()->grad;
        const bool has_grad = g.numel() == p.numel();
        for (int64_t i = 0; i < p.numel(); ++i) {
            const double grad = (has_grad ? g[i] : 0.0) + weight_decay_ * p[i];
            double& m = s.m[i];
            double& v = s.v[i];
            m = beta1_ * m + (1.0 - beta1_) * grad;
            v = beta2_ * v + (1.0 - beta2_) * grad * grad;
            p[i] -= lr_ * (m / bc1) / (std::sqrt(v / bc2) + kAdamEps);
        }
    }
}

void Adam::set_steps_taken(int64_t t) {
    if (t < 0) throw ConfigError("optimizer step count cannot be negative");
    t_ = t;
}

std::vector<std::pair<std::string, Tensor>> Adam::state_arrays(
    const std::string& prefix) const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(slots_.size() * 2);
    for (const Slot& s : slots_) {
        out.emplace_back(prefix + ".m." + s.entry.name, s.m);
        out.emplace_back(prefix + ".v." + s.entry.name, s.v);
    }
    return out;
}

void Adam::load_state(const Checkpoint& ck, const std::string& prefix) {
    for (Slot& s : slots_) {
        for (const char* kind : {"m", "v"}) {
            const std::string name = prefix + "." + kind + "." + s.entry.name;
            if (!ck.has_array(name))
                throw IoError("checkpoint lacks optimizer state array " + name);
            const Tensor& src = ck.array(name);
            if (src.shape() != s.entry.value.val().shape())
                throw ShapeError("optimizer state " + name + " has shape " + src.shape_str() +
                                 ", expected " + s.entry.value.val().shape_str());
            (*kind == 'm' ? s.m : s.v) = src;
        }
    }
}

LossReport train_step(DsmapModel& model, Adam& opt_g, Adam& opt_d, const Tensor& x_a,
                      const Tensor& x_b, const Tensor& s_a_prior, const Tensor& s_b_prior,
                      const TrainConfig& cfg, int64_t step) {
    LossComponents comps;
    double d_total = 0.0;
    double g_total = 0.0;

    // ---- discriminator phase: fresh graph-free fakes, update D only ----
    Tensor fake_ab, fake_ba;
    {
        nn::InferenceGuard guard(model.params());
        const ad::Value c_a = model.content_shared(
            model.content_intermediate(ad::constant(x_a), DomainId::A), DomainId::A);
        const ad::Value c_b = model.content_shared(
            model.content_intermediate(ad::constant(x_b), DomainId::B), DomainId::B);
        fake_ab = model
                      .generate_from(model.map_code(c_a, DomainId::B),
                                     ad::constant(s_b_prior), DomainId::B)
                      .val();
        fake_ba = model
                      .generate_from(model.map_code(c_b, DomainId::A),
                                     ad::constant(s_a_prior), DomainId::A)
                      .val();
    }
    {
        const ad::Value adv_d_a =
            lsgan_d(model.realness_map(ad::constant(x_a), DomainId::A),
                    model.realness_map(ad::constant(fake_ba), DomainId::A));
        const ad::Value adv_d_b =
            lsgan_d(model.realness_map(ad::constant(x_b), DomainId::B),
                    model.realness_map(ad::constant(fake_ab), DomainId::B));
        const ad::Value d_loss =
            ad::wsum({adv_d_a, adv_d_b}, discriminator_term_weights(cfg.weights));
        comps.adv_d_a = adv_d_a.val()[0];
        comps.adv_d_b = adv_d_b.val()[0];
        d_total = d_loss.val()[0];
        require_finite_scalar(comps.adv_d_a, "adv_d_a", step);
        require_finite_scalar(comps.adv_d_b, "adv_d_b", step);
        require_finite_scalar(d_total, "d_total", step);
        ad::backward(d_loss);
        opt_d.step();
    }

    // ---- generator phase: full graph, discriminators frozen ----
    {
        nn::set_requires_grad(model.discriminator_params(), false);
        struct Unfreeze {
            DsmapModel& model;
            ~Unfreeze() { nn::set_requires_grad(model.discriminator_params(), true); }
        } unfreeze{model};

        const StepOutputs so =
            forward_all(model, x_a, x_b, s_a_prior, s_b_prior, cfg.detach_translated);
        const ad::Value cyc_a = ad::mean_abs_diff(so.x_aba, ad::constant(x_a));
        const ad::Value cyc_b = ad::mean_abs_diff(so.x_bab, ad::constant(x_b));
        const ad::Value recon_a = ad::mean_abs_diff(so.x_aa, ad::constant(x_a));
        const ad::Value recon_b = ad::mean_abs_diff(so.x_bb, ad::constant(x_b));
        const ad::Value dsc_a = ad::mean_abs_diff(so.h_a, so.c_aa);
        const ad::Value dsc_b = ad::mean_abs_diff(so.h_b, so.c_bb);
        const ad::Value dic_a = ad::mean_abs_diff(so.c_ab_re, so.c_a);
        const ad::Value dic_b = ad::mean_abs_diff(so.c_ba_re, so.c_b);
        const ad::Value style_a = ad::mean_abs_diff(so.s_a_re, so.s_a_prior);
        const ad::Value style_b = ad::mean_abs_diff(so.s_b_re, so.s_b_prior);
        const ad::Value adv_g_a = lsgan_g(model.realness_map(so.x_ba, DomainId::A));
        const ad::Value adv_g_b = lsgan_g(model.realness_map(so.x_ab, DomainId::B));

        const ad::Value g_loss =
            ad::wsum({cyc_a, cyc_b, recon_a, recon_b, dsc_a, dsc_b, dic_a, dic_b, style_a,
                      style_b, adv_g_a, adv_g_b},
                     generator_term_weights(cfg.weights));

        comps.cyc_a = cyc_a.val()[0];
        comps.cyc_b = cyc_b.val()[0];
        comps.recon_a = recon_a.val()[0];
        comps.recon_b = recon_b.val()[0];
        comps.dsc_a = dsc_a.val()[0];
        comps.dsc_b = dsc_b.val()[0];
        comps.dic_a = dic_a.val()[0];
        comps.dic_b = dic_b.val()[0];
        comps.style_a = style_a.val()[0];
        comps.style_b = style_b.val()[0];
        comps.adv_g_a = adv_g_a.val()[0];
        comps.adv_g_b = adv_g_b.val()[0];
        g_total = g_loss.val()[0];
        const std::pair<double, const char*> checks[] = {
            {comps.cyc_a, "cyc_a"},     {comps.cyc_b, "cyc_b"},
            {comps.recon_a, "recon_a"}, {comps.recon_b, "recon_b"},
            {comps.dsc_a, "dsc_a"},     {comps.dsc_b, "dsc_b"},
            {comps.dic_a, "dic_a"},     {comps.dic_b, "dic_b"},
            {comps.style_a, "style_a"}, {comps.style_b, "style_b"},
            {comps.adv_g_a, "adv_g_a"}, {comps.adv_g_b, "adv_g_b"},
            {g_total, "g_total"},
        };
        for (const auto& [v, name] : checks) require_finite_scalar(v, name, step);
        ad::backward(g_loss);
        opt_g.step();
    }

    LossReport report;
    report.step = step;
    report.comps = comps;
    report.g_total = g_total;
    report.d_total = d_total;
    return report;
}

FitResult fit(const DatasetSpec& data, DsmapModel& model, const TrainConfig& cfg,
              const std::string& out_dir, const std::string& resume_checkpoint) {
    cfg.validate();
    fs::create_directories(out_dir);

    Adam opt_g(model.generator_side_params(), cfg);
    Adam opt_d(model.discriminator_params(), cfg);
    int64_t start = 0;
    if (!resume_checkpoint.empty()) {
        const Checkpoint ck = read_checkpoint(resume_checkpoint);
        restore_model(model, ck);
        opt_g.load_state(ck, "opt.g");
        opt_d.load_state(ck, "opt.d");
        opt_g.set_steps_taken(ck.step);
        opt_d.set_steps_taken(ck.step);
        start = ck.step;
    }

    std::ofstream metrics(fs::path(out_dir) / "metrics.log", std::ios::trunc);
    if (!metrics) throw IoError("cannot write metrics log in " + out_dir);

    auto save = [&](int64_t completed, const std::string& name) {
        auto extras = opt_g.state_arrays("opt.g");
        auto d_state = opt_d.state_arrays("opt.d");
        extras.insert(extras.end(), std::make_move_iterator(d_state.begin()),
                      std::make_move_iterator(d_state.end()));
        const std::string path = (fs::path(out_dir) / name).string();
        write_checkpoint(path, snapshot_model(model, completed, cfg.seed, std::move(extras)));
        return path;
    };

    FitResult result;
    result.start_step = start;
    for (int64_t i = start; i < cfg.steps; ++i) {
        Rng rng_a(mix_seed(cfg.seed, "batch_a", static_cast<uint64_t>(i)));
        Rng rng_b(mix_seed(cfg.seed, "batch_b", static_cast<uint64_t>(i)));
        const ImageBatch batch_a =
            load_batch(data, DomainId::A, SplitKind::train, cfg.batch_size, rng_a);
        const ImageBatch batch_b =
            load_batch(data, DomainId::B, SplitKind::train, cfg.batch_size, rng_b);
        const StyleCode prior_a = model.sample_style(
            cfg.batch_size, mix_seed(cfg.seed, "prior_a", static_cast<uint64_t>(i)));
        const StyleCode prior_b = model.sample_style(
            cfg.batch_size, mix_seed(cfg.seed, "prior_b", static_cast<uint64_t>(i)));

        const LossReport report = train_step(model, opt_g, opt_d, batch_a.data, batch_b.data,
                                             prior_a.data, prior_b.data, cfg, i + 1);
        metrics << report.line() << '\n';
        metrics.flush();
        result.reports.push_back(report);

        if ((i + 1) % cfg.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "ckpt_%06lld.ckpt",
                          static_cast<long long>(i + 1));
            save(i + 1, name);
        }
    }
    result.final_checkpoint = save(std::max(start, cfg.steps), "ckpt_final.ckpt");
    if (!metrics.flush()) throw IoError("failed writing metrics log");
    return result;
}

}  // namespace dsmap
