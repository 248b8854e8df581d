#include "dsmap/inference.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "dsmap/error.hpp"
#include "dsmap/image_io.hpp"
#include "dsmap/rng.hpp"

namespace fs = std::filesystem;

namespace dsmap {

namespace {

void check_t(double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw ConfigError("interpolation factor must lie in [0,1], got " + std::to_string(t));
}

Tensor lerp_tensors(const Tensor& a, const Tensor& b, double t) {
    if (a.shape() != b.shape())
        throw ShapeError("cannot interpolate " + a.shape_str() + " with " + b.shape_str());
    Tensor out(a.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = (1.0 - t) * a[i] + t * b[i];
    return out;
}

}  // namespace

ImageBatch example_guided(DsmapModel& model, const ImageBatch& x_content,
                          const ImageBatch& x_style, DomainId src, DomainId dst) {
    return model.translate(x_content, x_style, src, dst);
}

std::vector<ImageBatch> multimodal(DsmapModel& model, const ImageBatch& x_content,
                                   DomainId src, DomainId dst, int64_t n_styles,
                                   uint64_t seed) {
    if (n_styles < 1) throw ConfigError("multimodal needs n_styles >= 1");
    const ContentCode c = model.encode_content(x_content, src).second;
    const ContentCode h = model.map_content(c, dst);
    Rng rng(seed);
    std::vector<ImageBatch> out;
    out.reserve(static_cast<size_t>(n_styles));
    for (int64_t i = 0; i < n_styles; ++i) {
        Tensor s({x_content.data.dim(0), model.config().style_dim});
        rng.fill_normal(s);
        out.push_back(model.generate(h, StyleCode{std::move(s)}, dst));
    }
    return out;
}

ContentCode lerp_codes(const ContentCode& a, const ContentCode& b, double t) {
    check_t(t);
    if (a.kind != b.kind ||
        (a.kind == CodeKind::domain_specific && a.domain != b.domain))
        throw TagError("cannot interpolate content codes from different spaces");
    if (t == 0.0) return a;
    if (t == 1.0) return b;
    ContentCode out;
    out.kind = a.kind;
    out.domain = a.domain;
    out.data = lerp_tensors(a.data, b.data, t);
    return out;
}

StyleCode lerp_codes(const StyleCode& a, const StyleCode& b, double t) {
    check_t(t);
    if (t == 0.0) return a;
    if (t == 1.0) return b;
    return StyleCode{lerp_tensors(a.data, b.data, t)};
}

std::vector<ImageBatch> interpolate_style(DsmapModel& model, const ImageBatch& x_content,
                                          DomainId src, const StyleCode& s1,
                                          const StyleCode& s2, int64_t steps, DomainId dst) {
    if (steps < 2) throw ConfigError("interpolation needs at least 2 steps");
    const ContentCode c = model.encode_content(x_content, src).second;
    const ContentCode h = model.map_content(c, dst);
    std::vector<ImageBatch> frames;
    frames.reserve(static_cast<size_t>(steps));
    for (int64_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(steps - 1);
        frames.push_back(model.generate(h, lerp_codes(s1, s2, t), dst));
    }
    return frames;
}

std::vector<ImageBatch> interpolate_content_cross_domain(DsmapModel& model,
                                                         const ImageBatch& x_src_a,
                                                         const ImageBatch& x_src_b,
                                                         const ImageBatch& x_style,
                                                         DomainId style_domain,
                                                         int64_t steps) {
    if (steps < 2) throw ConfigError("interpolation needs at least 2 steps");
    const ContentCode c_a = model.encode_content(x_src_a, DomainId::A).second;
    const ContentCode c_b = model.encode_content(x_src_b, DomainId::B).second;
    const StyleCode s = model.encode_style(x_style, style_domain);
    std::vector<ImageBatch> frames;
    frames.reserve(static_cast<size_t>(steps));
    for (int64_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(steps - 1);
        const ContentCode mixed = lerp_codes(c_a, c_b, t);
        frames.push_back(model.generate(model.map_content(mixed, style_domain), s,
                                        style_domain));
    }
    return frames;
}

std::vector<std::string> write_frame_grid(const std::string& out_dir, const std::string& mode,
                                          uint64_t seed,
                                          const std::vector<ImageBatch>& frames) {
    if (frames.empty()) throw ConfigError("no frames to write");
    const Tensor& first = frames.front().data;
    if (first.ndim() != 4 || first.dim(1) != 3)
        throw ShapeError("frames must be batch x 3 x H x W");
    for (const ImageBatch& f : frames)
        if (f.data.shape() != first.shape())
            throw ShapeError("all frames must share one shape");

    fs::create_directories(out_dir);
    const int64_t batch = first.dim(0), height = first.dim(2), width = first.dim(3);
    const int64_t n = static_cast<int64_t>(frames.size());

    ImageU8 grid;
    grid.width = n * width;
    grid.height = batch * height;
    grid.rgb.resize(static_cast<size_t>(grid.width * grid.height * 3));

    std::vector<std::string> paths;
    char name[128];
    std::snprintf(name, sizeof(name), "%s_grid_seed%llu.png", mode.c_str(),
                  static_cast<unsigned long long>(seed));
    paths.push_back((fs::path(out_dir) / name).string());

    for (int64_t k = 0; k < n; ++k) {
        ImageU8 column;
        column.width = width;
        column.height = batch * height;
        column.rgb.resize(static_cast<size_t>(column.width * column.height * 3));
        for (int64_t b = 0; b < batch; ++b) {
            const ImageU8 cell = tensor_to_image(frames[static_cast<size_t>(k)].data, b);
            for (int64_t y = 0; y < height; ++y)
                for (int64_t x = 0; x < width; ++x)
                    for (int64_t c = 0; c < 3; ++c) {
                        const uint8_t v = cell.at(y, x, c);
                        column.at(b * height + y, x, c) = v;
                        grid.at(b * height + y, k * width + x, c) = v;
                    }
        }
        std::snprintf(name, sizeof(name), "%s_t%02lld_seed%llu.png", mode.c_str(),
                      static_cast<long long>(k), static_cast<unsigned long long>(seed));
        const std::string path = (fs::path(out_dir) / name).string();
        write_png(path, column);
        paths.push_back(path);
    }
    write_png(paths.front(), grid);
    return paths;
}

}  // namespace dsmap
