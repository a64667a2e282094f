#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gvdoc/errors.hpp"
#include "gvdoc/io.hpp"
#include "gvdoc/trainer.hpp"

namespace gvdoc {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'G', 'V', 'D', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const std::string& s, size_t at) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(s[at + static_cast<size_t>(i)])) << (8 * i);
    return v;
}

uint64_t get_u64(const std::string& s, size_t at) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(s[at + static_cast<size_t>(i)])) << (8 * i);
    return v;
}

void append_tensor(std::string& payload, const Tensor& t, bool f32) {
    if (f32) {
        for (double d : t.data) {
            float f = static_cast<float>(d);
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(payload, bits);
        }
    } else {
        for (double d : t.data) {
            uint64_t bits;
            std::memcpy(&bits, &d, 8);
            put_u64(payload, bits);
        }
    }
}

Tensor read_tensor(const std::string& payload, size_t offset, int rows, int cols, bool f32,
                   const std::string& name) {
    Tensor t(rows, cols);
    size_t width = f32 ? 4 : 8;
    size_t need = offset + t.data.size() * width;
    if (need > payload.size()) throw DataError("checkpoint payload truncated at tensor " + name);
    for (size_t i = 0; i < t.data.size(); ++i) {
        if (f32) {
            uint32_t bits = get_u32(payload, offset + i * 4);
            float f;
            std::memcpy(&f, &bits, 4);
            t.data[i] = static_cast<double>(f);
        } else {
            uint64_t bits = get_u64(payload, offset + i * 8);
            double d;
            std::memcpy(&d, &bits, 8);
            t.data[i] = d;
        }
    }
    return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const GraphModel& model, const AdamWState& opt,
                     const RunConfig& cfg, const std::vector<LossRow>& history) {
    bool f32 = cfg.train.precision == "f32";
    const ParamStore& params = model.params();
    require(static_cast<int>(opt.m.size()) == params.count(), "save_checkpoint: state mismatch");

    std::string payload;
    json manifest = json::array();
    auto emit = [&](const std::string& name, const Tensor& t) {
        manifest.push_back({{"name", name},
                            {"rows", t.n_rows},
                            {"cols", t.n_cols},
                            {"offset", payload.size()}});
        append_tensor(payload, t, f32);
    };
    for (int p = 0; p < params.count(); ++p) {
        emit(params.entries[static_cast<size_t>(p)].name, params.value(p));
    }
    for (int p = 0; p < params.count(); ++p) {
        emit("opt.m." + params.entries[static_cast<size_t>(p)].name, opt.m[static_cast<size_t>(p)]);
    }
    for (int p = 0; p < params.count(); ++p) {
        emit("opt.v." + params.entries[static_cast<size_t>(p)].name, opt.v[static_cast<size_t>(p)]);
    }

    json hist = json::array();
    for (const auto& r : history) {
        hist.push_back({r.step, r.epoch, r.mlm, r.mpm, r.cpp, r.total});
    }
    json header = {{"config", json::parse(run_config_json(cfg))},
                   {"config_hash", config_hash(cfg)},
                   {"dtype", f32 ? "f32" : "f64"},
                   {"step", opt.step},
                   {"history", hist},
                   {"tensors", manifest}};
    std::string header_text = header.dump();

    std::string out;
    out.reserve(4 + 4 + 8 + header_text.size() + payload.size());
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, header_text.size());
    out += header_text;
    out += payload;
    write_file(path, out);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::string raw = read_file(path);
    if (raw.size() < 16 || std::memcmp(raw.data(), kMagic, 4) != 0) {
        throw DataError("not a checkpoint (bad magic): " + path);
    }
    uint32_t version = get_u32(raw, 4);
    if (version != kVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    }
    uint64_t header_len = get_u64(raw, 8);
    if (16 + header_len > raw.size()) throw DataError("checkpoint header truncated: " + path);
    json header;
    try {
        header = json::parse(raw.substr(16, header_len));
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    std::string payload = raw.substr(16 + header_len);

    RunConfig cfg = run_config_from_json(header.at("config").dump());
    bool f32 = header.at("dtype").get<std::string>() == "f32";

    LoadedCheckpoint out{cfg, GraphModel(cfg.model), AdamWState{}, {}};
    out.opt = AdamWState::init(out.model.params());
    out.opt.step = header.at("step").get<int64_t>();
    for (const auto& r : header.at("history")) {
        out.history.push_back({r.at(0).get<int64_t>(), r.at(1).get<int>(), r.at(2).get<double>(),
                               r.at(3).get<double>(), r.at(4).get<double>(), r.at(5).get<double>()});
    }

    ParamStore& params = out.model.params();
    std::vector<bool> seen(static_cast<size_t>(params.count()) * 3, false);
    for (const auto& entry : header.at("tensors")) {
        std::string name = entry.at("name").get<std::string>();
        int rows = entry.at("rows").get<int>();
        int cols = entry.at("cols").get<int>();
        size_t offset = entry.at("offset").get<size_t>();

        Tensor* dst = nullptr;
        int slot = -1;
        if (name.rfind("opt.m.", 0) == 0) {
            int p = params.index_of(name.substr(6));
            if (p >= 0) dst = &out.opt.m[static_cast<size_t>(p)], slot = params.count() + p;
        } else if (name.rfind("opt.v.", 0) == 0) {
            int p = params.index_of(name.substr(6));
            if (p >= 0) dst = &out.opt.v[static_cast<size_t>(p)], slot = 2 * params.count() + p;
        } else {
            int p = params.index_of(name);
            if (p >= 0) dst = &params.value(p), slot = p;
        }
        if (dst == nullptr) throw DataError("checkpoint tensor " + name + " has no destination");
        if (dst->n_rows != rows || dst->n_cols != cols) {
            throw DataError("checkpoint tensor " + name + " has shape " + std::to_string(rows) +
                            "x" + std::to_string(cols) + ", expected " +
                            std::to_string(dst->n_rows) + "x" + std::to_string(dst->n_cols));
        }
        *dst = read_tensor(payload, offset, rows, cols, f32, name);
        seen[static_cast<size_t>(slot)] = true;
    }
    for (size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) {
            size_t p = i % static_cast<size_t>(params.count());
            static const char* kPrefix[3] = {"", "opt.m.", "opt.v."};
            throw DataError("checkpoint is missing tensor " +
                            (kPrefix[i / static_cast<size_t>(params.count())] +
                             params.entries[p].name));
        }
    }
    return out;
}

}  // namespace gvdoc
