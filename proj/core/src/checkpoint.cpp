#include "dsmap/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

#include "dsmap/error.hpp"

namespace dsmap {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'D', 'S', 'M', 'A', 'P', 'C', 'K', '1'};

ordered_json config_to_json(const ModelConfig& c) {
    ordered_json j;
    j["image_size"] = c.image_size;
    j["n_downsample"] = c.n_downsample;
    j["base_channels"] = c.base_channels;
    j["n_res_shared"] = c.n_res_shared;
    j["n_res_mapping"] = c.n_res_mapping;
    j["style_dim"] = c.style_dim;
    j["share_residual_projector"] = c.share_residual_projector;
    j["n_gen_res"] = c.n_gen_res;
    j["disc_layers"] = c.disc_layers;
    j["seed"] = c.seed;
    return j;
}

ModelConfig config_from_json(const ordered_json& j) {
    ModelConfig c;
    c.image_size = j.at("image_size").get<int64_t>();
    c.n_downsample = j.at("n_downsample").get<int64_t>();
    c.base_channels = j.at("base_channels").get<int64_t>();
    c.n_res_shared = j.at("n_res_shared").get<int64_t>();
    c.n_res_mapping = j.at("n_res_mapping").get<int64_t>();
    c.style_dim = j.at("style_dim").get<int64_t>();
    c.share_residual_projector = j.at("share_residual_projector").get<bool>();
    c.n_gen_res = j.at("n_gen_res").get<int64_t>();
    c.disc_layers = j.at("disc_layers").get<int64_t>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

}  // namespace

const Tensor& Checkpoint::array(const std::string& name) const {
    for (const auto& [n, t] : arrays)
        if (n == name) return t;
    throw Error("checkpoint has no array named " + name);
}

bool Checkpoint::has_array(const std::string& name) const {
    for (const auto& [n, t] : arrays)
        if (n == name) return true;
    return false;
}

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
    ordered_json manifest;
    manifest["config"] = config_to_json(ck.config);
    manifest["step"] = ck.step;
    manifest["seed"] = ck.train_seed;
    ordered_json dir = ordered_json::array();
    for (const auto& [name, t] : ck.arrays) {
        ordered_json entry;
        entry["name"] = name;
        entry["shape"] = t.shape();
        dir.push_back(std::move(entry));
    }
    manifest["arrays"] = std::move(dir);
    const std::string text = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    const uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : ck.arrays)
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.numel() * sizeof(double)));
    out.flush();
    if (!out) throw IoError("failed writing checkpoint to " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError(path + " is not a checkpoint file (bad magic)");
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len == 0 || len > (uint64_t(1) << 32))
        throw IoError(path + ": corrupt manifest length");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw IoError(path + ": truncated manifest");

    ordered_json manifest;
    try {
        manifest = ordered_json::parse(text);
    } catch (const ordered_json::exception& e) {
        throw IoError(path + ": malformed manifest: " + e.what());
    }

    Checkpoint ck;
    try {
        ck.config = config_from_json(manifest.at("config"));
        ck.step = manifest.at("step").get<int64_t>();
        ck.train_seed = manifest.at("seed").get<uint64_t>();
        for (const auto& entry : manifest.at("arrays")) {
            const std::string name = entry.at("name").get<std::string>();
            const auto shape = entry.at("shape").get<std::vector<int64_t>>();
            Tensor t(shape);
            in.read(reinterpret_cast<char*>(t.data()),
                    static_cast<std::streamsize>(t.numel() * sizeof(double)));
            if (!in) throw IoError(path + ": truncated payload for " + name);
            ck.arrays.emplace_back(name, std::move(t));
        }
    } catch (const ordered_json::exception& e) {
        throw IoError(path + ": malformed manifest: " + e.what());
    }
    return ck;
}

Checkpoint snapshot_model(const DsmapModel& model, int64_t step, uint64_t train_seed,
                          std::vector<std::pair<std::string, Tensor>> extra_arrays) {
    Checkpoint ck;
    ck.config = model.config();
    ck.step = step;
    ck.train_seed = train_seed;
    for (const auto& e : model.params().entries()) ck.arrays.emplace_back(e.name, e.value.val());
    for (auto& [name, t] : extra_arrays) ck.arrays.emplace_back(name, std::move(t));
    return ck;
}

void restore_model(DsmapModel& model, const Checkpoint& ck) {
    if (!(ck.config == model.config()))
        throw IoError("checkpoint config does not match the model config");
    size_t param_arrays = 0;
    for (const auto& [name, t] : ck.arrays)
        if (name.rfind("opt.", 0) != 0) ++param_arrays;
    if (param_arrays != model.params().entries().size())
        throw IoError("checkpoint parameter arrays do not match the model exactly");
    for (const auto& e : model.params().entries()) {
        const Tensor& src = ck.array(e.name);
        if (!src.same_shape(e.value.val()))
            throw ShapeError("checkpoint array " + e.name + " has shape " + src.shape_str() +
                             ", expected " + e.value.val().shape_str());
        e.value.node()->val = src;
    }
}

}  // namespace dsmap
