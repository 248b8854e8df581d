#include "dsmap/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dsmap/error.hpp"
#include "dsmap/image_io.hpp"

namespace fs = std::filesystem;

namespace dsmap {

namespace {

constexpr double kSatGate = 0.25;
constexpr double kValGate = 0.15;
constexpr double kWarmMidHue = 30.0;
constexpr double kCoolMidHue = 220.0;
constexpr uint8_t kToyBackground = 64;

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

void flip_horizontal(ImageU8& img) {
    for (int64_t y = 0; y < img.height; ++y)
        for (int64_t x = 0; x < img.width / 2; ++x)
            for (int64_t c = 0; c < 3; ++c)
                std::swap(img.at(y, x, c), img.at(y, img.width - 1 - x, c));
}

/// Reads one file and applies the augmentation pipeline. Throws IoError
/// for anything unusable.
ImageU8 load_augmented(const std::string& path, const DatasetSpec& spec, Rng& rng) {
    ImageU8 img = read_image(path);
    const int64_t size = spec.image_size;
    if (spec.aug.random_crop) {
        const int64_t pad = std::max<int64_t>(2, size / 8);
        ImageU8 big = resize_bilinear(img, size + 2 * pad, size + 2 * pad);
        const int64_t ox = rng.uniform_int(2 * pad + 1);
        const int64_t oy = rng.uniform_int(2 * pad + 1);
        ImageU8 crop;
        crop.width = size;
        crop.height = size;
        crop.rgb.resize(static_cast<size_t>(size * size * 3));
        for (int64_t y = 0; y < size; ++y)
            for (int64_t x = 0; x < size; ++x)
                for (int64_t c = 0; c < 3; ++c) crop.at(y, x, c) = big.at(y + oy, x + ox, c);
        img = std::move(crop);
    } else if (spec.aug.resize) {
        img = resize_bilinear(img, size, size);
    } else if (img.width != size || img.height != size) {
        throw IoError(path + " is " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + " but resizing is disabled");
    }
    if (spec.aug.horizontal_flip && rng.uniform() < 0.5) flip_horizontal(img);
    return img;
}

void hsv_to_rgb_u8(double h, double s, double v, uint8_t out[3]) {
    h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0);
    const double c = v * s;
    const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
    const double m = v - c;
    double r = 0, g = 0, b = 0;
    if (h < 60) {
        r = c; g = x;
    } else if (h < 120) {
        r = x; g = c;
    } else if (h < 180) {
        g = c; b = x;
    } else if (h < 240) {
        g = x; b = c;
    } else if (h < 300) {
        r = x; b = c;
    } else {
        r = c; b = x;
    }
    out[0] = static_cast<uint8_t>(std::lround((r + m) * 255.0));
    out[1] = static_cast<uint8_t>(std::lround((g + m) * 255.0));
    out[2] = static_cast<uint8_t>(std::lround((b + m) * 255.0));
}

/// Anti-aliased primitive rasterizer: 4x4 subsamples per pixel.
ImageU8 render_toy_image(int64_t size, bool circle, double cx, double cy, double r, double hue) {
    uint8_t shape[3];
    hsv_to_rgb_u8(hue, 0.9, 0.9, shape);
    ImageU8 img;
    img.width = size;
    img.height = size;
    img.rgb.assign(static_cast<size_t>(size * size * 3), kToyBackground);
    constexpr int kSub = 4;
    for (int64_t y = 0; y < size; ++y)
        for (int64_t x = 0; x < size; ++x) {
            int inside = 0;
            for (int j = 0; j < kSub; ++j)
                for (int i = 0; i < kSub; ++i) {
                    const double px = x + (i + 0.5) / kSub;
                    const double py = y + (j + 0.5) / kSub;
                    const double dx = px - cx, dy = py - cy;
                    const bool in = circle ? (dx * dx + dy * dy <= r * r)
                                           : (std::abs(dx) <= r && std::abs(dy) <= r);
                    inside += in ? 1 : 0;
                }
            if (inside == 0) continue;
            const double a = static_cast<double>(inside) / (kSub * kSub);
            for (int64_t c = 0; c < 3; ++c)
                img.at(y, x, c) = static_cast<uint8_t>(
                    std::lround(a * shape[c] + (1.0 - a) * kToyBackground));
        }
    return img;
}

std::string csv_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

std::string split_folder(DomainId d, SplitKind s) {
    return std::string(s == SplitKind::train ? "train" : "test") + domain_name(d);
}

std::string domain_dir(const DatasetSpec& spec, DomainId d, SplitKind s) {
    return (fs::path(spec.root) / split_folder(d, s)).string();
}

std::vector<std::string> list_images(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && has_image_extension(entry.path()))
            out.push_back(entry.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

void validate_dataset(const DatasetSpec& spec) {
    for (DomainId d : {DomainId::A, DomainId::B})
        for (SplitKind s : {SplitKind::train, SplitKind::test}) {
            const std::string dir = domain_dir(spec, d, s);
            if (list_images(dir).empty()) throw IoError("dataset folder is empty: " + dir);
        }
}

ImageBatch load_batch(const DatasetSpec& spec, DomainId d, SplitKind s, int64_t batch_size,
                      Rng& rng) {
    if (batch_size < 1) throw ShapeError("batch_size must be >= 1");
    const std::string dir = domain_dir(spec, d, s);
    std::vector<std::string> files = list_images(dir);
    if (files.empty()) throw IoError("dataset folder is empty: " + dir);

    Tensor batch({batch_size, 3, spec.image_size, spec.image_size});
    for (int64_t i = 0; i < batch_size; ++i) {
        for (;;) {
            if (files.empty()) throw IoError("no readable images left in " + dir);
            const size_t pick = static_cast<size_t>(rng.uniform_int(
                static_cast<int64_t>(files.size())));
            try {
                const ImageU8 img = load_augmented(files[pick], spec, rng);
                const Tensor t = image_to_tensor(img);
                std::copy(t.data(), t.data() + t.numel(),
                          batch.data() + i * 3 * spec.image_size * spec.image_size);
                break;
            } catch (const IoError& e) {
                std::fprintf(stderr, "warning: skipping %s (%s)\n", files[pick].c_str(),
                             e.what());
                files.erase(files.begin() + static_cast<std::ptrdiff_t>(pick));
            }
        }
    }
    return ImageBatch{std::move(batch)};
}

ImageBatch load_all(const DatasetSpec& spec, DomainId d, SplitKind s) {
    const std::string dir = domain_dir(spec, d, s);
    std::vector<Tensor> loaded;
    for (const std::string& path : list_images(dir)) {
        try {
            loaded.push_back(image_to_tensor(
                resize_bilinear(read_image(path), spec.image_size, spec.image_size)));
        } catch (const IoError& e) {
            std::fprintf(stderr, "warning: skipping %s (%s)\n", path.c_str(), e.what());
        }
    }
    if (loaded.empty()) throw IoError("no readable images in " + dir);
    Tensor batch({static_cast<int64_t>(loaded.size()), 3, spec.image_size, spec.image_size});
    const int64_t stride = 3 * spec.image_size * spec.image_size;
    for (size_t i = 0; i < loaded.size(); ++i)
        std::copy(loaded[i].data(), loaded[i].data() + stride,
                  batch.data() + static_cast<int64_t>(i) * stride);
    return ImageBatch{std::move(batch)};
}

std::vector<ToyRecord> make_toy_dataset(const ToySpec& spec) {
    if (spec.n_per_domain < 4) throw ConfigError("toy dataset needs n_per_domain >= 4");
    if (spec.image_size < 16) throw ConfigError("toy image_size must be >= 16");

    for (DomainId d : {DomainId::A, DomainId::B})
        for (SplitKind s : {SplitKind::train, SplitKind::test})
            fs::create_directories(fs::path(spec.root) / split_folder(d, s));

    const int64_t n_test = std::max<int64_t>(1, spec.n_per_domain / 4);
    const int64_t n_train = spec.n_per_domain - n_test;
    const double s_min = 0.12 * static_cast<double>(spec.image_size);
    const double s_max = 0.20 * static_cast<double>(spec.image_size);

    std::vector<ToyRecord> records;
    for (DomainId d : {DomainId::A, DomainId::B}) {
        const bool circle = d == DomainId::B;
        for (int64_t i = 0; i < spec.n_per_domain; ++i) {
            Rng rng = Rng(spec.seed).fork(d == DomainId::A ? "toy_A" : "toy_B",
                                          static_cast<uint64_t>(i));
            ToyRecord rec;
            rec.domain = d;
            rec.hue = d == DomainId::A ? rng.uniform(10.0, 50.0) : rng.uniform(190.0, 250.0);
            rec.shape_size = rng.uniform(s_min, s_max);
            const double margin = rec.shape_size + 2.0;
            rec.shape_x = rng.uniform(margin, spec.image_size - margin);
            rec.shape_y = rng.uniform(margin, spec.image_size - margin);

            const SplitKind split = i < n_train ? SplitKind::train : SplitKind::test;
            char name[32];
            std::snprintf(name, sizeof(name), "%s_%04lld.png", domain_name(d),
                          static_cast<long long>(i));
            rec.filename = split_folder(d, split) + "/" + name;

            const ImageU8 img = render_toy_image(spec.image_size, circle, rec.shape_x,
                                                 rec.shape_y, rec.shape_size, rec.hue);
            write_png((fs::path(spec.root) / rec.filename).string(), img);
            records.push_back(std::move(rec));
        }
    }

    std::ofstream manifest(fs::path(spec.root) / "manifest.csv", std::ios::trunc);
    if (!manifest) throw IoError("cannot write toy manifest in " + spec.root);
    manifest << "filename,domain,shape_x,shape_y,shape_size,hue\n";
    for (const auto& r : records)
        manifest << r.filename << ',' << domain_name(r.domain) << ',' << csv_num(r.shape_x)
                 << ',' << csv_num(r.shape_y) << ',' << csv_num(r.shape_size) << ','
                 << csv_num(r.hue) << '\n';
    if (!manifest.flush()) throw IoError("failed writing toy manifest");
    return records;
}

std::vector<ToyRecord> read_toy_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    std::string line;
    if (!std::getline(in, line) || line != "filename,domain,shape_x,shape_y,shape_size,hue")
        throw IoError(path + ": unexpected manifest header");
    std::vector<ToyRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        ToyRecord r;
        if (!std::getline(row, r.filename, ',')) throw IoError(path + ": bad manifest row");
        if (!std::getline(row, field, ',')) throw IoError(path + ": bad manifest row");
        r.domain = parse_domain(field);
        auto num = [&](double& dst) {
            if (!std::getline(row, field, ',')) throw IoError(path + ": bad manifest row");
            dst = std::stod(field);
        };
        num(r.shape_x);
        num(r.shape_y);
        num(r.shape_size);
        num(r.hue);
        out.push_back(std::move(r));
    }
    return out;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    // Inputs in [-1,1]; work in [0,1].
    r = (r + 1.0) / 2.0;
    g = (g + 1.0) / 2.0;
    b = (b + 1.0) / 2.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double c = mx - mn;
    v = mx;
    s = mx > 0.0 ? c / mx : 0.0;
    if (c <= 0.0) {
        h = 0.0;
        return;
    }
    if (mx == r)
        h = 60.0 * std::fmod((g - b) / c + 6.0, 6.0);
    else if (mx == g)
        h = 60.0 * ((b - r) / c + 2.0);
    else
        h = 60.0 * ((r - g) / c + 4.0);
}

HueStats image_hue_stats(const Tensor& batch, int64_t index) {
    if (batch.ndim() != 4 || batch.dim(1) != 3)
        throw ShapeError("image_hue_stats expects batch x 3 x H x W");
    HueStats stats;
    double cx = 0.0, cy = 0.0;
    int64_t count = 0;
    const int64_t h = batch.dim(2), w = batch.dim(3);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            double hue, sat, val;
            rgb_to_hsv(batch.at(index, 0, y, x), batch.at(index, 1, y, x),
                       batch.at(index, 2, y, x), hue, sat, val);
            if (sat > kSatGate && val > kValGate) {
                const double rad = hue * M_PI / 180.0;
                cx += std::cos(rad);
                cy += std::sin(rad);
                ++count;
            }
        }
    if (count > 0) {
        double mean = std::atan2(cy, cx) * 180.0 / M_PI;
        if (mean < 0.0) mean += 360.0;
        stats.mean_hue = mean;
        stats.saturated_fraction = static_cast<double>(count) / static_cast<double>(h * w);
    }
    return stats;
}

DomainId classify_domain_by_hue(const Tensor& batch, int64_t index) {
    const HueStats stats = image_hue_stats(batch, index);
    if (stats.saturated_fraction == 0.0) return DomainId::A;
    auto circ_dist = [](double a, double b) {
        const double d = std::abs(std::fmod(std::abs(a - b), 360.0));
        return std::min(d, 360.0 - d);
    };
    return circ_dist(stats.mean_hue, kWarmMidHue) <= circ_dist(stats.mean_hue, kCoolMidHue)
               ? DomainId::A
               : DomainId::B;
}

Centroid saturation_weighted_centroid(const Tensor& batch, int64_t index) {
    if (batch.ndim() != 4 || batch.dim(1) != 3)
        throw ShapeError("saturation_weighted_centroid expects batch x 3 x H x W");
    const int64_t h = batch.dim(2), w = batch.dim(3);
    double sx = 0.0, sy = 0.0, sw = 0.0;
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            double hue, sat, val;
            rgb_to_hsv(batch.at(index, 0, y, x), batch.at(index, 1, y, x),
                       batch.at(index, 2, y, x), hue, sat, val);
            sx += sat * (static_cast<double>(x) + 0.5);
            sy += sat * (static_cast<double>(y) + 0.5);
            sw += sat;
        }
    if (sw <= 0.0) return {static_cast<double>(w) / 2.0, static_cast<double>(h) / 2.0};
    return {sx / sw, sy / sw};
}

}  // namespace dsmap
