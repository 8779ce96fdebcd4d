#include "handmesh/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "handmesh/error.hpp"

namespace handmesh {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string widths_str(const std::vector<std::size_t>& widths) {
    std::ostringstream os;
    for (std::size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
    return os.str();
}

std::vector<std::size_t> parse_widths(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(static_cast<std::size_t>(std::stoul(item)));
    }
    return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ContractError("config: bad boolean for " + key + ": " + v);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

RunConfig RunConfig::desk_profile() {
    RunConfig cfg;
    cfg.train_samples = 2000;
    cfg.test_samples = 500;
    cfg.epochs = 10;
    cfg.image_size = 64;
    cfg.backbone_channels = 32;
    cfg.heatmap_channels = 21;
    cfg.regressor_hidden = 64;
    cfg.cat_d_model = 32;
    cfg.eval_subset = 64;
    return cfg;
}

double RunConfig::lr_at_epoch(int epoch) const {
    if (decay_every <= 0) return lr;
    return lr * std::pow(decay_factor, epoch / decay_every);
}

std::map<std::string, std::string> RunConfig::to_map() const {
    std::map<std::string, std::string> kv;
    kv["seed"] = std::to_string(seed);
    kv["data.train_samples"] = std::to_string(train_samples);
    kv["data.test_samples"] = std::to_string(test_samples);
    kv["data.occlusion_level"] = fmt(occlusion_level);
    kv["model.image_size"] = std::to_string(image_size);
    kv["model.seed"] = std::to_string(model_seed);
    kv["model.backbone_channels"] = std::to_string(backbone_channels);
    kv["model.heatmap_channels"] = std::to_string(heatmap_channels);
    kv["model.regressor_hidden"] = std::to_string(regressor_hidden);
    kv["model.fusion"] = fusion_enabled ? "true" : "false";
    kv["kgc.variant"] = kgc_variant;
    kv["kgc.depth"] = std::to_string(kgc_depth);
    kv["kgc.widths"] = widths_str(kgc_widths);
    kv["kgc.noise_sigma"] = fmt(kgc_noise_sigma);
    kv["kgc.normalize_input"] = kgc_normalize_input ? "true" : "false";
    kv["kgc.cheb_order"] = std::to_string(kgc_cheb_order);
    kv["cat.variant"] = cat_variant;
    kv["cat.blocks"] = std::to_string(cat_blocks);
    kv["cat.heads"] = std::to_string(cat_heads);
    kv["cat.d_model"] = std::to_string(cat_d_model);
    kv["optimizer.lr"] = fmt(lr);
    kv["optimizer.batch"] = std::to_string(batch);
    kv["optimizer.epochs"] = std::to_string(epochs);
    kv["optimizer.decay_factor"] = fmt(decay_factor);
    kv["optimizer.decay_every"] = std::to_string(decay_every);
    kv["loss.heatmaps"] = fmt(loss_weights.heatmaps);
    kv["loss.theta"] = fmt(loss_weights.theta);
    kv["loss.beta"] = fmt(loss_weights.beta);
    kv["loss.joints"] = fmt(loss_weights.joints);
    kv["loss.vertices"] = fmt(loss_weights.vertices);
    kv["precision"] = precision;
    kv["run.checkpoint_every"] = std::to_string(checkpoint_every);
    kv["run.eval_subset"] = std::to_string(eval_subset);
    return kv;
}

void RunConfig::apply(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    try {
        if (key == "seed") seed = std::stoull(v);
        else if (key == "data.train_samples") train_samples = std::stoi(v);
        else if (key == "data.test_samples") test_samples = std::stoi(v);
        else if (key == "data.occlusion_level") occlusion_level = std::stod(v);
        else if (key == "model.image_size") image_size = std::stoi(v);
        else if (key == "model.seed") model_seed = std::stoull(v);
        else if (key == "model.backbone_channels") backbone_channels = std::stoi(v);
        else if (key == "model.heatmap_channels") heatmap_channels = std::stoi(v);
        else if (key == "model.regressor_hidden") regressor_hidden = std::stoi(v);
        else if (key == "model.fusion") fusion_enabled = parse_bool(v, key);
        else if (key == "kgc.variant") kgc_variant = v;
        else if (key == "kgc.depth") kgc_depth = std::stoi(v);
        else if (key == "kgc.widths") kgc_widths = parse_widths(v);
        else if (key == "kgc.noise_sigma") kgc_noise_sigma = std::stod(v);
        else if (key == "kgc.normalize_input") kgc_normalize_input = parse_bool(v, key);
        else if (key == "kgc.cheb_order") kgc_cheb_order = std::stoi(v);
        else if (key == "cat.variant") cat_variant = v;
        else if (key == "cat.blocks") cat_blocks = std::stoi(v);
        else if (key == "cat.heads") cat_heads = std::stoi(v);
        else if (key == "cat.d_model") cat_d_model = std::stoi(v);
        else if (key == "optimizer.lr") lr = std::stod(v);
        else if (key == "optimizer.batch") batch = std::stoi(v);
        else if (key == "optimizer.epochs") epochs = std::stoi(v);
        else if (key == "optimizer.decay_factor") decay_factor = std::stod(v);
        else if (key == "optimizer.decay_every") decay_every = std::stoi(v);
        else if (key == "loss.heatmaps") loss_weights.heatmaps = std::stod(v);
        else if (key == "loss.theta") loss_weights.theta = std::stod(v);
        else if (key == "loss.beta") loss_weights.beta = std::stod(v);
        else if (key == "loss.joints") loss_weights.joints = std::stod(v);
        else if (key == "loss.vertices") loss_weights.vertices = std::stod(v);
        else if (key == "precision") precision = v;
        else if (key == "run.checkpoint_every") checkpoint_every = std::stoi(v);
        else if (key == "run.eval_subset") eval_subset = std::stoi(v);
        else throw ContractError("config: unknown key " + key);
    } catch (const std::invalid_argument&) {
        throw ContractError("config: bad value for " + key + ": " + v);
    } catch (const std::out_of_range&) {
        throw ContractError("config: value out of range for " + key + ": " + v);
    }
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    for (const auto& [k, v] : kv) cfg.apply(k, v);
    return cfg;
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : to_map()) os << k << " = " << v << "\n";
    return os.str();
}

RunConfig RunConfig::from_text(const std::string& s) {
    RunConfig cfg;
    std::stringstream ss(s);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ContractError("config: line " + std::to_string(lineno) + " is not key = value");
        cfg.apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
}

} // namespace handmesh
