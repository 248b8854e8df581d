#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsmap/model.hpp"
#include "dsmap/rng.hpp"
#include "dsmap/tensor.hpp"

namespace dsmap {

struct Augmentations {
    bool resize = true;          // scale to image_size x image_size
    bool random_crop = false;    // oversize then crop image_size
    bool horizontal_flip = false;
};

/// Unpaired two-domain dataset in the trainA/trainB/testA/testB folder
/// convention.
struct DatasetSpec {
    std::string root;
    int64_t image_size = 64;
    Augmentations aug;
    uint64_t seed = 0;
};

enum class SplitKind { train, test };

std::string split_folder(DomainId d, SplitKind s);  // "trainA", "testB", ...
std::string domain_dir(const DatasetSpec& spec, DomainId d, SplitKind s);

/// Sorted image filenames (PNG/JPEG extensions) in a directory.
/// Throws IoError when the directory is missing.
std::vector<std::string> list_images(const std::string& dir);

/// Requires all four split folders to exist and be nonempty.
void validate_dataset(const DatasetSpec& spec);

/// Draws batch_size images uniformly (with replacement) from one split
/// folder, applies augmentations, returns values in [-1,1] at
/// image_size resolution. Undecodable files are skipped with a warning
/// on stderr; an exhausted folder is a hard error.
ImageBatch load_batch(const DatasetSpec& spec, DomainId d, SplitKind s, int64_t batch_size,
                      Rng& rng);

/// Loads every readable image of a split in filename order, resized,
/// without stochastic augmentation.
ImageBatch load_all(const DatasetSpec& spec, DomainId d, SplitKind s);

/// Synthetic two-domain dataset: domain A draws warm-hued squares,
/// domain B cool-hued circles, over a fixed gray background. Content
/// factors (center position, size) follow identical distributions in
/// both domains; style factors (hue range, primitive) are disjoint.
struct ToySpec {
    std::string root;
    int64_t n_per_domain = 16;
    int64_t image_size = 32;
    uint64_t seed = 7;
};

/// One manifest row per generated image.
struct ToyRecord {
    std::string filename;  // path relative to root, e.g. "trainA/A_0003.png"
    DomainId domain = DomainId::A;
    double shape_x = 0;    // shape center, pixels
    double shape_y = 0;
    double shape_size = 0; // half-side (square) or radius (circle), pixels
    double hue = 0;        // degrees
};

/// Writes the four split folders plus "manifest.csv"; byte-identical
/// output under the same spec. Requires n_per_domain >= 4; a quarter of
/// each domain (at least one image) becomes the test split.
std::vector<ToyRecord> make_toy_dataset(const ToySpec& spec);

std::vector<ToyRecord> read_toy_manifest(const std::string& path);

// ---- toy measurement helpers ----

struct HueStats {
    double mean_hue = 0.0;           // circular mean over saturated pixels, degrees [0,360)
    double saturated_fraction = 0.0; // share of pixels above the saturation gate
};

/// Circular hue statistics over pixels with saturation > 0.25 and
/// value > 0.15 (background and near-gray pixels are ignored).
HueStats image_hue_stats(const Tensor& batch, int64_t index);

/// Nearest warm-mid (30 deg) vs cool-mid (220 deg) call on the mean hue.
/// An image with no saturated pixels classifies as neither: the stats
/// gate makes that impossible for toy data, and this returns A then.
DomainId classify_domain_by_hue(const Tensor& batch, int64_t index);

struct Centroid {
    double x = 0.0;
    double y = 0.0;
};

/// Saturation-weighted centroid of one image; measures where the
/// colorful foreground shape sits.
Centroid saturation_weighted_centroid(const Tensor& batch, int64_t index);

/// Hue/saturation/value of one RGB triple in [-1,1] space. Hue in
/// degrees [0,360), sat and val in [0,1].
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);

}  // namespace dsmap
