#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "dsmap/checkpoint.hpp"
#include "dsmap/config.hpp"
#include "dsmap/data.hpp"
#include "dsmap/error.hpp"
#include "dsmap/evaluate.hpp"
#include "dsmap/inference.hpp"
#include "dsmap/model.hpp"
#include "dsmap/rng.hpp"
#include "dsmap/train.hpp"

namespace fs = std::filesystem;
using namespace dsmap;

namespace {

// Exit codes: 0 success, 2 for anything wrong with the invocation or its
// inputs (flags, config keys, missing files), 1 for failures once the real
// work is underway. Commands surface invocation problems as ConfigError.
int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

/// Layers the config sources in precedence order: defaults, then the
/// --config file, then each --set key=value flag.
AppConfig layered_config(const std::string& config_path,
                         const std::vector<std::string>& sets) {
    AppConfig cfg;
    if (!config_path.empty()) {
        if (!fs::exists(config_path))
            throw ConfigError("config file not found: " + config_path);
        cfg.apply(read_config_file(config_path));
    }
    for (const std::string& s : sets) {
        const size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + s + "'");
        cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    return cfg;
}

Checkpoint load_checkpoint_or_die(const std::string& path) {
    if (path.empty()) throw ConfigError("--checkpoint is required");
    if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
    return read_checkpoint(path);
}

void require_dataset(const DatasetSpec& spec) {
    try {
        validate_dataset(spec);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
}

ImageBatch first_n(const ImageBatch& all, int64_t n) {
    const int64_t batch = all.data.dim(0);
    const int64_t per = all.data.numel() / batch;
    std::vector<int64_t> shape(all.data.shape().begin(), all.data.shape().end());
    shape[0] = n;
    Tensor out(shape);
    for (int64_t i = 0; i < n * per; ++i) out[i] = all.data[i];
    return ImageBatch{std::move(out)};
}

/// One source image copied batch times, so a single style exemplar can
/// guide a whole batch of content images.
ImageBatch repeat_image(const ImageBatch& all, int64_t index, int64_t batch) {
    const int64_t per = all.data.numel() / all.data.dim(0);
    std::vector<int64_t> shape(all.data.shape().begin(), all.data.shape().end());
    shape[0] = batch;
    Tensor out(shape);
    for (int64_t b = 0; b < batch; ++b)
        for (int64_t i = 0; i < per; ++i) out[b * per + i] = all.data[index * per + i];
    return ImageBatch{std::move(out)};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out.flush()) throw IoError("failed writing " + path);
}

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
    std::string checkpoint;
    std::string data_root;
    uint64_t seed = 0;
    std::string src = "A";
    std::string dst = "B";
};

void add_config_flags(CLI::App* sub, CommonArgs& a) {
    sub->add_option("--config", a.config_path, "flat key = value config file");
    sub->add_option("--set", a.sets, "override one config key, e.g. --set train.steps=50")
        ->take_all();
}

void add_direction_flags(CLI::App* sub, CommonArgs& a) {
    sub->add_option("--src", a.src, "source domain, A or B");
    sub->add_option("--dst", a.dst, "target domain, A or B");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-domain image translation with remapped content codes"};
    app.require_subcommand(1);
    int rc = 0;

    // ---- make-toy ----------------------------------------------------
    auto toy = std::make_shared<ToySpec>();
    CLI::App* sub_toy = app.add_subcommand("make-toy", "generate the synthetic shape dataset");
    sub_toy->add_option("--out", toy->root, "dataset directory")->required();
    sub_toy->add_option("--n", toy->n_per_domain, "images per domain");
    sub_toy->add_option("--size", toy->image_size, "square image size in pixels");
    sub_toy->add_option("--seed", toy->seed, "generator seed");
    sub_toy->callback([&rc, toy] {
        rc = guarded([&] {
            const auto records = make_toy_dataset(*toy);
            std::string echo;
            echo += "toy.n_per_domain = " + std::to_string(toy->n_per_domain) + "\n";
            echo += "toy.image_size = " + std::to_string(toy->image_size) + "\n";
            echo += "toy.seed = " + std::to_string(toy->seed) + "\n";
            write_text((fs::path(toy->root) / "effective_config.txt").string(), echo);
            std::cout << "wrote " << records.size() << " images under " << toy->root
                      << "\n";
        });
    });

    // ---- train -------------------------------------------------------
    auto train_args = std::make_shared<CommonArgs>();
    auto resume = std::make_shared<std::string>();
    CLI::App* sub_train = app.add_subcommand("train", "fit a model on an unpaired dataset");
    add_config_flags(sub_train, *train_args);
    sub_train->add_option("--data", train_args->data_root, "dataset root")->required();
    sub_train->add_option("--out", train_args->out, "run directory")->required();
    sub_train->add_option("--seed", train_args->seed, "training seed override");
    sub_train->add_option("--resume", *resume, "checkpoint to continue from");
    sub_train->callback([&rc, sub_train, train_args, resume] {
        rc = guarded([&] {
            AppConfig cfg = layered_config(train_args->config_path, train_args->sets);
            if (sub_train->count("--seed")) cfg.train.seed = train_args->seed;
            if (!resume->empty() && !fs::exists(*resume))
                throw ConfigError("resume checkpoint not found: " + *resume);
            DatasetSpec data{train_args->data_root, cfg.model.image_size, cfg.aug,
                             cfg.train.seed};
            require_dataset(data);
            write_effective_config(cfg, train_args->out);
            DsmapModel model(cfg.model);
            const FitResult result = fit(data, model, cfg.train, train_args->out, *resume);
            std::cout << "trained steps " << result.start_step + 1 << ".."
                      << cfg.train.steps << "; final checkpoint "
                      << result.final_checkpoint << "\n";
        });
    });

    // ---- translate ---------------------------------------------------
    auto tr_args = std::make_shared<CommonArgs>();
    auto tr_n = std::make_shared<int64_t>(4);
    auto tr_styles = std::make_shared<int64_t>(1);
    auto tr_guided = std::make_shared<bool>(false);
    CLI::App* sub_tr = app.add_subcommand("translate", "map images across domains");
    add_config_flags(sub_tr, *tr_args);
    add_direction_flags(sub_tr, *tr_args);
    sub_tr->add_option("--checkpoint", tr_args->checkpoint, "trained model")->required();
    sub_tr->add_option("--data", tr_args->data_root, "dataset root")->required();
    sub_tr->add_option("--out", tr_args->out, "output directory")->required();
    sub_tr->add_option("--seed", tr_args->seed, "style sampling seed");
    sub_tr->add_option("--n", *tr_n, "content images from the source test split");
    sub_tr->add_option("--n-styles", *tr_styles, "styles per content image");
    sub_tr->add_flag("--guided", *tr_guided,
                     "take styles from target-domain test images instead of the prior");
    sub_tr->callback([&rc, tr_args, tr_n, tr_styles, tr_guided] {
        rc = guarded([&] {
            layered_config(tr_args->config_path, tr_args->sets);  // key validation only
            const DomainId src = parse_domain(tr_args->src);
            const DomainId dst = parse_domain(tr_args->dst);
            const Checkpoint ck = load_checkpoint_or_die(tr_args->checkpoint);
            DsmapModel model(ck.config);
            restore_model(model, ck);
            DatasetSpec data{tr_args->data_root, ck.config.image_size, {},
                             tr_args->seed};
            require_dataset(data);
            if (*tr_n < 1) throw ConfigError("--n must be at least 1");
            if (*tr_styles < 1) throw ConfigError("--n-styles must be at least 1");
            const ImageBatch pool = load_all(data, src, SplitKind::test);
            const int64_t n = std::min<int64_t>(*tr_n, pool.data.dim(0));
            const ImageBatch content = first_n(pool, n);
            std::vector<ImageBatch> frames;
            if (*tr_guided) {
                const ImageBatch styles = load_all(data, dst, SplitKind::test);
                const int64_t k = std::min<int64_t>(*tr_styles, styles.data.dim(0));
                for (int64_t j = 0; j < k; ++j)
                    frames.push_back(example_guided(model, content,
                                                    repeat_image(styles, j, n), src, dst));
            } else {
                frames = multimodal(model, content, src, dst, *tr_styles, tr_args->seed);
            }
            const std::string mode = *tr_guided ? "guided" : "sampled";
            const auto paths = write_frame_grid(tr_args->out, mode, tr_args->seed, frames);
            write_effective_config(layered_config(tr_args->config_path, tr_args->sets),
                                   tr_args->out);
            for (const std::string& p : paths) std::cout << p << "\n";
        });
    });

    // ---- interpolate -------------------------------------------------
    auto ip_args = std::make_shared<CommonArgs>();
    auto ip_steps = std::make_shared<int64_t>(8);
    auto ip_mode = std::make_shared<std::string>("style");
    CLI::App* sub_ip = app.add_subcommand("interpolate", "walk the latent space in images");
    add_config_flags(sub_ip, *ip_args);
    add_direction_flags(sub_ip, *ip_args);
    sub_ip->add_option("--checkpoint", ip_args->checkpoint, "trained model")->required();
    sub_ip->add_option("--data", ip_args->data_root, "dataset root")->required();
    sub_ip->add_option("--out", ip_args->out, "output directory")->required();
    sub_ip->add_option("--seed", ip_args->seed, "style sampling seed");
    sub_ip->add_option("--steps", *ip_steps, "frames including both endpoints");
    sub_ip->add_option("--mode", *ip_mode, "style | content");
    sub_ip->callback([&rc, ip_args, ip_steps, ip_mode] {
        rc = guarded([&] {
            layered_config(ip_args->config_path, ip_args->sets);
            const DomainId src = parse_domain(ip_args->src);
            const DomainId dst = parse_domain(ip_args->dst);
            const Checkpoint ck = load_checkpoint_or_die(ip_args->checkpoint);
            DsmapModel model(ck.config);
            restore_model(model, ck);
            DatasetSpec data{ip_args->data_root, ck.config.image_size, {}, ip_args->seed};
            require_dataset(data);
            std::vector<ImageBatch> frames;
            std::string mode_tag;
            if (*ip_mode == "style") {
                const ImageBatch content = first_n(load_all(data, src, SplitKind::test), 1);
                Rng rng(ip_args->seed);
                Tensor s1({1, ck.config.style_dim}), s2({1, ck.config.style_dim});
                rng.fill_normal(s1);
                rng.fill_normal(s2);
                frames = interpolate_style(model, content, src, StyleCode{std::move(s1)},
                                           StyleCode{std::move(s2)}, *ip_steps, dst);
                mode_tag = "style_interp";
            } else if (*ip_mode == "content") {
                const ImageBatch end_a = first_n(load_all(data, DomainId::A, SplitKind::test), 1);
                const ImageBatch end_b = first_n(load_all(data, DomainId::B, SplitKind::test), 1);
                const ImageBatch style = first_n(load_all(data, dst, SplitKind::test), 1);
                frames = interpolate_content_cross_domain(model, end_a, end_b, style, dst,
                                                          *ip_steps);
                mode_tag = "content_interp";
            } else {
                throw ConfigError("--mode must be style or content, got '" + *ip_mode + "'");
            }
            const auto paths = write_frame_grid(ip_args->out, mode_tag, ip_args->seed, frames);
            write_effective_config(layered_config(ip_args->config_path, ip_args->sets),
                                   ip_args->out);
            for (const std::string& p : paths) std::cout << p << "\n";
        });
    });

    // ---- eval-fid ----------------------------------------------------
    auto ef_args = std::make_shared<CommonArgs>();
    CLI::App* sub_ef = app.add_subcommand("eval-fid", "distribution quality score");
    add_config_flags(sub_ef, *ef_args);
    add_direction_flags(sub_ef, *ef_args);
    sub_ef->add_option("--checkpoint", ef_args->checkpoint, "trained model")->required();
    sub_ef->add_option("--data", ef_args->data_root, "dataset root")->required();
    sub_ef->add_option("--out", ef_args->out, "report directory")->required();
    sub_ef->add_option("--seed", ef_args->seed, "protocol seed override");
    sub_ef->callback([&rc, sub_ef, ef_args] {
        rc = guarded([&] {
            AppConfig cfg = layered_config(ef_args->config_path, ef_args->sets);
            if (sub_ef->count("--seed")) cfg.eval.seed = ef_args->seed;
            const DomainId src = parse_domain(ef_args->src);
            const DomainId dst = parse_domain(ef_args->dst);
            const Checkpoint ck = load_checkpoint_or_die(ef_args->checkpoint);
            DsmapModel model(ck.config);
            restore_model(model, ck);
            DatasetSpec data{ef_args->data_root, ck.config.image_size, {}, cfg.eval.seed};
            require_dataset(data);
            write_effective_config(cfg, ef_args->out);
            const FeatureExtractor extractor = make_random_projector(cfg.eval_feature_seed);
            const FidReport report = fid_protocol(model, data, src, dst, extractor, cfg.eval);
            write_text((fs::path(ef_args->out) / "fid_report.txt").string(), report.text());
            std::cout << report.text();
        });
    });

    // ---- eval-diversity ----------------------------------------------
    auto ed_args = std::make_shared<CommonArgs>();
    auto ed_pairs = std::make_shared<int64_t>(10);
    CLI::App* sub_ed = app.add_subcommand("eval-diversity", "output variety under resampled styles");
    add_config_flags(sub_ed, *ed_args);
    add_direction_flags(sub_ed, *ed_args);
    sub_ed->add_option("--checkpoint", ed_args->checkpoint, "trained model")->required();
    sub_ed->add_option("--data", ed_args->data_root, "dataset root")->required();
    sub_ed->add_option("--out", ed_args->out, "report directory")->required();
    sub_ed->add_option("--seed", ed_args->seed, "style sampling seed override");
    sub_ed->add_option("--n-pairs", *ed_pairs, "style pairs per content image");
    sub_ed->callback([&rc, sub_ed, ed_args, ed_pairs] {
        rc = guarded([&] {
            AppConfig cfg = layered_config(ed_args->config_path, ed_args->sets);
            if (sub_ed->count("--seed")) cfg.eval.seed = ed_args->seed;
            const DomainId src = parse_domain(ed_args->src);
            const DomainId dst = parse_domain(ed_args->dst);
            const Checkpoint ck = load_checkpoint_or_die(ed_args->checkpoint);
            DsmapModel model(ck.config);
            restore_model(model, ck);
            DatasetSpec data{ed_args->data_root, ck.config.image_size, {}, cfg.eval.seed};
            require_dataset(data);
            write_effective_config(cfg, ed_args->out);
            const FeatureExtractor extractor = make_random_projector(cfg.eval_feature_seed);
            const ImageBatch content = first_n(load_all(data, src, SplitKind::test), 1);
            const double score = diversity_score(model, content, src, dst, *ed_pairs,
                                                 extractor, cfg.eval.seed);
            char line[64];
            std::snprintf(line, sizeof line, "score=%.17g\n", score);
            std::string report;
            report += "diversity report\n";
            report += std::string("direction=") + domain_name(src) + "->" + domain_name(dst) + "\n";
            report += "extractor=" + extractor.id + "\n";
            report += "n_pairs=" + std::to_string(*ed_pairs) +
                      " seed=" + std::to_string(cfg.eval.seed) + "\n";
            report += line;
            write_text((fs::path(ed_args->out) / "diversity_report.txt").string(), report);
            std::cout << report;
        });
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return rc;
}
