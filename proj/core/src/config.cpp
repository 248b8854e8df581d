#include "dsmap/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dsmap/error.hpp"

namespace dsmap {

namespace {

std::string trim(const std::string& s) {
    const size_t first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const size_t last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const char* expected,
                            const std::string& value) {
    throw ConfigError("config key '" + key + "': expected " + expected + ", got '" +
                      value + "'");
}

int64_t parse_int(const std::string& key, const std::string& value) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(value.c_str(), &end, 10);
    if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE)
        bad_value(key, "an integer", value);
    return v;
}

uint64_t parse_uint(const std::string& key, const std::string& value) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE ||
        value.front() == '-')
        bad_value(key, "a non-negative integer", value);
    return v;
}

double parse_double(const std::string& key, const std::string& value) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE)
        bad_value(key, "a number", value);
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, "true/false", value);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void AppConfig::set(const std::string& key, const std::string& value) {
    if (key == "model.image_size") model.image_size = parse_int(key, value);
    else if (key == "model.n_downsample") model.n_downsample = parse_int(key, value);
    else if (key == "model.base_channels") model.base_channels = parse_int(key, value);
    else if (key == "model.n_res_shared") model.n_res_shared = parse_int(key, value);
    else if (key == "model.n_res_mapping") model.n_res_mapping = parse_int(key, value);
    else if (key == "model.style_dim") model.style_dim = parse_int(key, value);
    else if (key == "model.share_residual_projector")
        model.share_residual_projector = parse_bool(key, value);
    else if (key == "model.n_gen_res") model.n_gen_res = parse_int(key, value);
    else if (key == "model.disc_layers") model.disc_layers = parse_int(key, value);
    else if (key == "model.seed") model.seed = parse_uint(key, value);
    else if (key == "train.steps") train.steps = parse_int(key, value);
    else if (key == "train.batch_size") train.batch_size = parse_int(key, value);
    else if (key == "train.learning_rate") train.learning_rate = parse_double(key, value);
    else if (key == "train.adam_beta1") train.adam_beta1 = parse_double(key, value);
    else if (key == "train.adam_beta2") train.adam_beta2 = parse_double(key, value);
    else if (key == "train.weight_decay") train.weight_decay = parse_double(key, value);
    else if (key == "train.checkpoint_every")
        train.checkpoint_every = parse_int(key, value);
    else if (key == "train.seed") train.seed = parse_uint(key, value);
    else if (key == "train.detach_translated")
        train.detach_translated = parse_bool(key, value);
    else if (key == "loss.cc") train.weights.lambda_cc = parse_double(key, value);
    else if (key == "loss.x") train.weights.lambda_x = parse_double(key, value);
    else if (key == "loss.dsc") train.weights.lambda_dsc = parse_double(key, value);
    else if (key == "loss.dic") train.weights.lambda_dic = parse_double(key, value);
    else if (key == "loss.s") train.weights.lambda_s = parse_double(key, value);
    else if (key == "loss.adv") train.weights.lambda_adv = parse_double(key, value);
    else if (key == "eval.n_content") eval.n_content = parse_int(key, value);
    else if (key == "eval.n_styles") eval.n_styles = parse_int(key, value);
    else if (key == "eval.repeats") eval.repeats = parse_int(key, value);
    else if (key == "eval.seed") eval.seed = parse_uint(key, value);
    else if (key == "eval.feature_seed") eval_feature_seed = parse_uint(key, value);
    else if (key == "data.resize") aug.resize = parse_bool(key, value);
    else if (key == "data.random_crop") aug.random_crop = parse_bool(key, value);
    else if (key == "data.horizontal_flip") aug.horizontal_flip = parse_bool(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

void AppConfig::apply(const std::vector<std::pair<std::string, std::string>>& pairs) {
    for (const auto& [key, value] : pairs) set(key, value);
}

std::string AppConfig::echo() const {
    std::ostringstream out;
    const auto line = [&out](const char* key, const std::string& value) {
        out << key << " = " << value << "\n";
    };
    line("model.image_size", std::to_string(model.image_size));
    line("model.n_downsample", std::to_string(model.n_downsample));
    line("model.base_channels", std::to_string(model.base_channels));
    line("model.n_res_shared", std::to_string(model.n_res_shared));
    line("model.n_res_mapping", std::to_string(model.n_res_mapping));
    line("model.style_dim", std::to_string(model.style_dim));
    line("model.share_residual_projector",
         model.share_residual_projector ? "true" : "false");
    line("model.n_gen_res", std::to_string(model.n_gen_res));
    line("model.disc_layers", std::to_string(model.disc_layers));
    line("model.seed", std::to_string(model.seed));
    line("train.steps", std::to_string(train.steps));
    line("train.batch_size", std::to_string(train.batch_size));
    line("train.learning_rate", fmt_double(train.learning_rate));
    line("train.adam_beta1", fmt_double(train.adam_beta1));
    line("train.adam_beta2", fmt_double(train.adam_beta2));
    line("train.weight_decay", fmt_double(train.weight_decay));
    line("train.checkpoint_every", std::to_string(train.checkpoint_every));
    line("train.seed", std::to_string(train.seed));
    line("train.detach_translated", train.detach_translated ? "true" : "false");
    line("loss.cc", fmt_double(train.weights.lambda_cc));
    line("loss.x", fmt_double(train.weights.lambda_x));
    line("loss.dsc", fmt_double(train.weights.lambda_dsc));
    line("loss.dic", fmt_double(train.weights.lambda_dic));
    line("loss.s", fmt_double(train.weights.lambda_s));
    line("loss.adv", fmt_double(train.weights.lambda_adv));
    line("eval.n_content", std::to_string(eval.n_content));
    line("eval.n_styles", std::to_string(eval.n_styles));
    line("eval.repeats", std::to_string(eval.repeats));
    line("eval.seed", std::to_string(eval.seed));
    line("eval.feature_seed", std::to_string(eval_feature_seed));
    line("data.resize", aug.resize ? "true" : "false");
    line("data.random_crop", aug.random_crop ? "true" : "false");
    line("data.horizontal_flip", aug.horizontal_flip ? "true" : "false");
    return out.str();
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string raw;
    for (int line_no = 1; std::getline(in, raw); ++line_no) {
        const std::string stripped = trim(raw);
        if (stripped.empty() || stripped.front() == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + stripped + "'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        pairs.emplace_back(key, value);
    }
    return pairs;
}

void write_effective_config(const AppConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::string path =
        (std::filesystem::path(out_dir) / "effective_config.txt").string();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << cfg.echo();
    if (!out.flush()) throw IoError("failed writing " + path);
}

}  // namespace dsmap
