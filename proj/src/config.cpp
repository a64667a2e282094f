#include "gvdoc/config.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gvdoc/errors.hpp"
#include "gvdoc/hashing.hpp"

namespace gvdoc {

using nlohmann::json;

void TrainConfig::validate() const {
    require(lr > 0.0, "train.lr must be positive");
    require(weight_decay >= 0.0, "train.weight_decay must be non-negative");
    require(beta1 >= 0.0 && beta1 < 1.0, "train.beta1 must be in [0, 1)");
    require(beta2 >= 0.0 && beta2 < 1.0, "train.beta2 must be in [0, 1)");
    require(eps > 0.0, "train.eps must be positive");
    require(mask_rate >= 0.0 && mask_rate <= 1.0, "train.mask_rate must be in [0, 1]");
    require(w_mlm >= 0.0 && w_mpm >= 0.0 && w_cpp >= 0.0, "train loss weights must be non-negative");
    require(batch_size >= 1, "train.batch_size must be >= 1");
    require(epochs >= 1, "train.epochs must be >= 1");
    require(early_stop_accuracy >= 0.0 && early_stop_accuracy <= 1.0,
            "train.early_stop_accuracy must be in [0, 1]");
    require(precision == "f64" || precision == "f32", "train.precision must be f64 or f32");
}

void RunConfig::validate() const {
    model.validate();
    graph.validate();
    train.validate();
}

namespace {

struct TomlValue {
    std::string raw;
    int line = 0;
};

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

class KeyReader {
public:
    explicit KeyReader(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            line = trim(strip_comment(line));
            if (line.empty()) continue;
            size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw DataError("config line " + std::to_string(line_no) + ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string val = trim(line.substr(eq + 1));
            if (key.empty() || val.empty())
                throw DataError("config line " + std::to_string(line_no) + ": expected key = value");
            if (!values_.emplace(key, TomlValue{val, line_no}).second)
                throw DataError("config: duplicate key '" + key + "'");
        }
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double number(const std::string& key, double fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        consumed_.insert(key);
        try {
            size_t pos = 0;
            double v = std::stod(it->second.raw, &pos);
            if (pos != it->second.raw.size()) throw std::invalid_argument(it->second.raw);
            return v;
        } catch (const std::exception&) {
            throw DataError("config key '" + key + "': not a number: " + it->second.raw);
        }
    }

    int integer(const std::string& key, int fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        consumed_.insert(key);
        int v = 0;
        const std::string& raw = it->second.raw;
        auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
        if (ec != std::errc() || p != raw.data() + raw.size())
            throw DataError("config key '" + key + "': not an integer: " + raw);
        return v;
    }

    uint64_t unsigned64(const std::string& key, uint64_t fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        consumed_.insert(key);
        uint64_t v = 0;
        const std::string& raw = it->second.raw;
        auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
        if (ec != std::errc() || p != raw.data() + raw.size())
            throw DataError("config key '" + key + "': not an unsigned integer: " + raw);
        return v;
    }

    bool boolean(const std::string& key, bool fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        consumed_.insert(key);
        if (it->second.raw == "true") return true;
        if (it->second.raw == "false") return false;
        throw DataError("config key '" + key + "': not a boolean: " + it->second.raw);
    }

    std::string text(const std::string& key, const std::string& fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        consumed_.insert(key);
        const std::string& raw = it->second.raw;
        if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
            return raw.substr(1, raw.size() - 2);
        return raw;
    }

    void reject_unknown() const {
        for (const auto& [key, v] : values_)
            if (consumed_.find(key) == consumed_.end())
                throw DataError("config: unknown key '" + key + "' (line " +
                                std::to_string(v.line) + ")");
    }

private:
    std::map<std::string, TomlValue> values_;
    std::set<std::string> consumed_;
};

}  // namespace

RunConfig parse_run_config_toml(const std::string& text) {
    KeyReader r(text);
    RunConfig cfg;

    cfg.graph.mode = graph_mode_from_name(r.text("graph.mode", graph_mode_name(cfg.graph.mode)));
    cfg.graph.max_beta_neighbors = r.integer("graph.max_beta_neighbors", cfg.graph.max_beta_neighbors);
    cfg.graph.para_k_test = r.integer("graph.para_k", cfg.graph.para_k_test);
    cfg.graph.para_k_train_min = r.integer("graph.para_k_train_min", cfg.graph.para_k_train_min);
    cfg.graph.para_k_train_max = r.integer("graph.para_k_train_max", cfg.graph.para_k_train_max);
    cfg.graph.add_self_loops = r.boolean("graph.self_loops", cfg.graph.add_self_loops);

    cfg.model.d = r.integer("model.d", cfg.model.d);
    cfg.model.fusion_heads = r.integer("model.fusion_heads", cfg.model.fusion_heads);
    cfg.model.fusion_softmax = r.boolean("model.fusion_softmax", cfg.model.fusion_softmax);
    cfg.model.gat_layers = r.integer("model.gat_layers", cfg.model.gat_layers);
    cfg.model.gat_heads = r.integer("model.gat_heads", cfg.model.gat_heads);
    cfg.model.vocab_size = r.integer("model.vocab_size", cfg.model.vocab_size);
    cfg.model.n_classes = r.integer("model.classes", cfg.model.n_classes);
    cfg.model.cpp_grid = r.integer("model.cpp_grid", cfg.model.cpp_grid);
    cfg.model.bbox_bins = r.integer("model.bbox_bins", cfg.model.bbox_bins);
    cfg.model.max_pos = r.integer("model.max_pos", cfg.model.max_pos);
    cfg.model.max_tokens = r.integer("model.max_tokens", cfg.model.max_tokens);

    cfg.train.lr = r.number("train.lr", cfg.train.lr);
    cfg.train.weight_decay = r.number("train.weight_decay", cfg.train.weight_decay);
    cfg.train.beta1 = r.number("train.beta1", cfg.train.beta1);
    cfg.train.beta2 = r.number("train.beta2", cfg.train.beta2);
    cfg.train.eps = r.number("train.eps", cfg.train.eps);
    cfg.train.mask_rate = r.number("train.mask_rate", cfg.train.mask_rate);
    cfg.train.w_mlm = r.number("train.w_mlm", cfg.train.w_mlm);
    cfg.train.w_mpm = r.number("train.w_mpm", cfg.train.w_mpm);
    cfg.train.w_cpp = r.number("train.w_cpp", cfg.train.w_cpp);
    cfg.train.batch_size = r.integer("train.batch_size", cfg.train.batch_size);
    cfg.train.epochs = r.integer("train.epochs", cfg.train.epochs);
    cfg.train.seed = r.unsigned64("train.seed", cfg.train.seed);
    cfg.train.early_stop_accuracy = r.number("train.early_stop_accuracy", cfg.train.early_stop_accuracy);
    cfg.train.precision = r.text("train.precision", cfg.train.precision);

    r.reject_unknown();
    cfg.validate();
    return cfg;
}

std::string run_config_json(const RunConfig& cfg) {
    json j;
    j["graph"] = {{"mode", graph_mode_name(cfg.graph.mode)},
                  {"max_beta_neighbors", cfg.graph.max_beta_neighbors},
                  {"para_k", cfg.graph.para_k_test},
                  {"para_k_train_min", cfg.graph.para_k_train_min},
                  {"para_k_train_max", cfg.graph.para_k_train_max},
                  {"self_loops", cfg.graph.add_self_loops}};
    j["model"] = {{"d", cfg.model.d},
                  {"fusion_heads", cfg.model.fusion_heads},
                  {"fusion_softmax", cfg.model.fusion_softmax},
                  {"gat_layers", cfg.model.gat_layers},
                  {"gat_heads", cfg.model.gat_heads},
                  {"vocab_size", cfg.model.vocab_size},
                  {"classes", cfg.model.n_classes},
                  {"cpp_grid", cfg.model.cpp_grid},
                  {"bbox_bins", cfg.model.bbox_bins},
                  {"max_pos", cfg.model.max_pos},
                  {"max_tokens", cfg.model.max_tokens}};
    j["train"] = {{"lr", cfg.train.lr},
                  {"weight_decay", cfg.train.weight_decay},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"eps", cfg.train.eps},
                  {"mask_rate", cfg.train.mask_rate},
                  {"w_mlm", cfg.train.w_mlm},
                  {"w_mpm", cfg.train.w_mpm},
                  {"w_cpp", cfg.train.w_cpp},
                  {"batch_size", cfg.train.batch_size},
                  {"epochs", cfg.train.epochs},
                  {"seed", cfg.train.seed},
                  {"early_stop_accuracy", cfg.train.early_stop_accuracy},
                  {"precision", cfg.train.precision}};
    return j.dump();
}

RunConfig run_config_from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw DataError("run config json: not valid JSON");
    RunConfig cfg;
    try {
        const json& g = j.at("graph");
        cfg.graph.mode = graph_mode_from_name(g.at("mode").get<std::string>());
        cfg.graph.max_beta_neighbors = g.at("max_beta_neighbors").get<int>();
        cfg.graph.para_k_test = g.at("para_k").get<int>();
        cfg.graph.para_k_train_min = g.at("para_k_train_min").get<int>();
        cfg.graph.para_k_train_max = g.at("para_k_train_max").get<int>();
        cfg.graph.add_self_loops = g.at("self_loops").get<bool>();

        const json& m = j.at("model");
        cfg.model.d = m.at("d").get<int>();
        cfg.model.fusion_heads = m.at("fusion_heads").get<int>();
        cfg.model.fusion_softmax = m.at("fusion_softmax").get<bool>();
        cfg.model.gat_layers = m.at("gat_layers").get<int>();
        cfg.model.gat_heads = m.at("gat_heads").get<int>();
        cfg.model.vocab_size = m.at("vocab_size").get<int>();
        cfg.model.n_classes = m.at("classes").get<int>();
        cfg.model.cpp_grid = m.at("cpp_grid").get<int>();
        cfg.model.bbox_bins = m.at("bbox_bins").get<int>();
        cfg.model.max_pos = m.at("max_pos").get<int>();
        cfg.model.max_tokens = m.at("max_tokens").get<int>();

        const json& t = j.at("train");
        cfg.train.lr = t.at("lr").get<double>();
        cfg.train.weight_decay = t.at("weight_decay").get<double>();
        cfg.train.beta1 = t.at("beta1").get<double>();
        cfg.train.beta2 = t.at("beta2").get<double>();
        cfg.train.eps = t.at("eps").get<double>();
        cfg.train.mask_rate = t.at("mask_rate").get<double>();
        cfg.train.w_mlm = t.at("w_mlm").get<double>();
        cfg.train.w_mpm = t.at("w_mpm").get<double>();
        cfg.train.w_cpp = t.at("w_cpp").get<double>();
        cfg.train.batch_size = t.at("batch_size").get<int>();
        cfg.train.epochs = t.at("epochs").get<int>();
        cfg.train.seed = t.at("seed").get<uint64_t>();
        cfg.train.early_stop_accuracy = t.at("early_stop_accuracy").get<double>();
        cfg.train.precision = t.at("precision").get<std::string>();
    } catch (const json::exception& e) {
        throw DataError(std::string("run config json: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string config_hash(const RunConfig& cfg) {
    uint64_t h = fnv1a64(run_config_json(cfg));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace gvdoc
