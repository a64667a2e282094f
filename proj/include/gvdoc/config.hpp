#pragma once

#include <cstdint>
#include <string>

#include "gvdoc/graph.hpp"
#include "gvdoc/model.hpp"

namespace gvdoc {

struct TrainConfig {
    double lr = 0.001;
    double weight_decay = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double mask_rate = 0.15;
    double w_mlm = 1.0;
    double w_mpm = 1.0;
    double w_cpp = 1.0;
    int batch_size = 8;
    int epochs = 30;
    uint64_t seed = 0;
    double early_stop_accuracy = 0.0;  // > 0: stop once the eval split reaches it
    std::string precision = "f64";     // checkpoint tensor dtype, f64 or f32

    void validate() const;
};

struct RunConfig {
    ModelConfig model;
    GraphConfig graph;
    TrainConfig train;

    void validate() const;
};

// Flat dotted-key TOML subset: `section.key = value` lines, `#` comments,
// values are integers, floats, booleans or quoted strings. Unknown keys raise
// DataError naming the key.
RunConfig parse_run_config_toml(const std::string& text);

// Canonical JSON rendering (sorted keys); basis of the config hash embedded
// in artifacts.
std::string run_config_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& json_text);
std::string config_hash(const RunConfig& cfg);

}  // namespace gvdoc
