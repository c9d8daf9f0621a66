#pragma once

// PIFFCKPT1 checkpoints: a magic line, key=value config echo lines, then
// "arrays=<n>" followed by n named arrays, each as a "name dim..." line and
// a line of whitespace-separated values. Values use shortest round-trip
// formatting, so save/load reproduces parameters bit-exactly.

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "piff/error.hpp"
#include "piff/flowmatch.hpp"
#include "piff/textio.hpp"

namespace piff {

inline constexpr const char* kCheckpointMagic = "PIFFCKPT1";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    FlowModel model;
    CfmConfig config;
    std::map<std::string, std::string> notes; // free-form provenance, e.g. truth generator
};

inline std::string to_checkpoint_text(const Checkpoint& ck) {
    using textio::format_double;
    const auto& net = ck.model.net;
    const auto& n = ck.model.norm;
    std::ostringstream os;
    os << kCheckpointMagic << '\n'
       << "version=" << kCheckpointVersion << '\n'
       << "sigma=" << format_double(ck.config.sigma) << '\n'
       << "batch=" << ck.config.batch << '\n'
       << "lr=" << format_double(ck.config.lr) << '\n'
       << "iters=" << ck.config.iters << '\n'
       << "lr_decay=" << format_double(ck.config.lr_decay) << '\n'
       << "decay_every=" << ck.config.decay_every << '\n'
       << "seed=" << ck.config.seed << '\n'
       << "embed_dim=" << net.shape.embed_dim << '\n'
       << "hidden1=" << net.shape.hidden1 << '\n'
       << "hidden2=" << net.shape.hidden2 << '\n'
       << "norm.dem_min=" << format_double(n.dem_min) << '\n'
       << "norm.dem_max=" << format_double(n.dem_max) << '\n'
       << "norm.depth_min=" << format_double(n.depth_min) << '\n'
       << "norm.depth_max=" << format_double(n.depth_max) << '\n'
       << "norm.rain_scale=" << format_double(n.rain_scale) << '\n';
    for (const auto& [k, v] : ck.notes) os << "note." << k << '=' << v << '\n';
    const nn::Layout layout(net.shape);
    os << "arrays=" << layout.entries.size() << '\n';
    for (const auto& e : layout.entries) {
        os << e.name;
        for (auto d : e.shape) os << ' ' << d;
        os << '\n';
        for (std::size_t i = 0; i < e.size; ++i) {
            if (i) os << ' ';
            os << format_double(net.params[e.offset + i]);
        }
        os << '\n';
    }
    return os.str();
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
    out << to_checkpoint_text(ck);
    if (!out) throw CheckpointError("write failed for checkpoint '" + path + "'");
}

inline Checkpoint parse_checkpoint(std::istream& in, const std::string& name = "<stream>") {
    auto fail = [&](const std::string& msg) { return CheckpointError(name + ": " + msg); };
    std::string line;
    if (!std::getline(in, line) || textio::trim(line) != kCheckpointMagic) throw fail("missing PIFFCKPT1 header");

    std::map<std::string, std::string> kv;
    std::size_t n_arrays = 0;
    bool arrays_seen = false;
    while (std::getline(in, line)) {
        const auto body = textio::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw fail("expected key=value, got '" + std::string(body) + "'");
        std::string key(body.substr(0, eq));
        std::string value(body.substr(eq + 1));
        if (key == "arrays") {
            auto n = textio::parse_int<std::size_t>(value);
            if (!n) throw fail("bad array count");
            n_arrays = *n;
            arrays_seen = true;
            break;
        }
        kv[key] = value;
    }
    if (!arrays_seen) throw fail("missing arrays section");

    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw fail("missing key '" + key + "'");
        return it->second;
    };
    auto get_double = [&](const std::string& key) {
        auto v = textio::parse_double(get(key));
        if (!v) throw fail("key '" + key + "' is not a number");
        return *v;
    };
    auto get_size = [&](const std::string& key) {
        auto v = textio::parse_int<std::size_t>(get(key));
        if (!v) throw fail("key '" + key + "' is not a non-negative integer");
        return *v;
    };

    if (get("version") != std::to_string(kCheckpointVersion)) throw fail("unsupported version " + get("version"));
    Checkpoint ck;
    ck.config.sigma = get_double("sigma");
    ck.config.batch = get_size("batch");
    ck.config.lr = get_double("lr");
    ck.config.iters = get_size("iters");
    ck.config.lr_decay = get_double("lr_decay");
    ck.config.decay_every = get_size("decay_every");
    ck.config.seed = textio::parse_int<std::uint64_t>(get("seed")).value_or(0);
    nn::ModelShape shape{get_size("embed_dim"), get_size("hidden1"), get_size("hidden2")};
    ck.model.net = nn::Model(shape);
    ck.model.norm = Normalization{get_double("norm.dem_min"), get_double("norm.dem_max"), get_double("norm.depth_min"),
                                  get_double("norm.depth_max"), get_double("norm.rain_scale")};
    for (const auto& [k, v] : kv)
        if (k.rfind("note.", 0) == 0) ck.notes[k.substr(5)] = v;

    const nn::Layout layout(shape);
    if (n_arrays != layout.entries.size())
        throw fail("expected " + std::to_string(layout.entries.size()) + " arrays, found " + std::to_string(n_arrays));
    std::vector<bool> filled(layout.entries.size(), false);
    for (std::size_t a = 0; a < n_arrays; ++a) {
        if (!std::getline(in, line)) throw fail("truncated array header");
        const auto head = textio::split_ws(line);
        if (head.empty()) throw fail("empty array header");
        std::size_t idx = layout.entries.size();
        for (std::size_t e = 0; e < layout.entries.size(); ++e)
            if (layout.entries[e].name == head[0]) idx = e;
        if (idx == layout.entries.size()) throw fail("unknown array '" + std::string(head[0]) + "'");
        const auto& entry = layout.entries[idx];
        if (head.size() != entry.shape.size() + 1) throw fail("array '" + entry.name + "' has the wrong rank");
        for (std::size_t d = 0; d < entry.shape.size(); ++d)
            if (textio::parse_int<std::size_t>(head[d + 1]) != entry.shape[d])
                throw fail("array '" + entry.name + "' has the wrong shape");
        if (!std::getline(in, line)) throw fail("truncated values for '" + entry.name + "'");
        const auto vals = textio::split_ws(line);
        if (vals.size() != entry.size) throw fail("array '" + entry.name + "' has the wrong number of values");
        for (std::size_t i = 0; i < entry.size; ++i) {
            auto v = textio::parse_double(vals[i]);
            if (!v || !std::isfinite(*v)) throw fail("bad value '" + std::string(vals[i]) + "' in '" + entry.name + "'");
            ck.model.net.params[entry.offset + i] = *v;
        }
        filled[idx] = true;
    }
    for (std::size_t e = 0; e < filled.size(); ++e)
        if (!filled[e]) throw fail("missing array '" + layout.entries[e].name + "'");
    nn::validate(ck.model.net);
    return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
    return parse_checkpoint(in, path);
}

} // namespace piff
