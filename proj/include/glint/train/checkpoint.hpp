#pragma once

// Binary checkpoints: parameter tensors, optimizer state, progress counters
// and the config hash, in a fixed little-endian layout that round-trips
// byte-identically.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "glint/core/error.hpp"
#include "glint/io/hash.hpp"
#include "glint/nn/module.hpp"
#include "glint/train/optim.hpp"

namespace glint::train {

struct Checkpoint {
    std::string config_hash;
    std::string meta;                  // free-form model-config descriptor
    std::int32_t epoch = -1;           // last completed epoch
    double best_metric = 0.0;          // best validation SROCC so far
    std::uint64_t optimizer_steps = 0;
    std::vector<std::pair<std::string, ag::Mat>> parameters;
    std::map<std::string, Adam::Slot> optimizer_slots;

    static Checkpoint capture(const nn::ParamStore& params, const Adam& opt,
                              std::int32_t epoch, double best_metric,
                              const std::string& config_hash) {
        Checkpoint c;
        c.config_hash = config_hash;
        c.epoch = epoch;
        c.best_metric = best_metric;
        c.optimizer_steps = opt.step_count();
        for (const auto& p : params.all())
            c.parameters.emplace_back(p->name, p->node->val);
        c.optimizer_slots = opt.slots();
        return c;
    }

    void restore(nn::ParamStore& params, Adam* opt = nullptr) const {
        for (const auto& [name, val] : parameters) {
            auto& p = params.at(name);
            if (p.node->val.rows() != val.rows() ||
                p.node->val.cols() != val.cols())
                throw DataError("checkpoint: shape mismatch for " + name);
            p.node->val = val;
        }
        if (opt) {
            opt->slots() = optimizer_slots;
            opt->set_step_count(optimizer_steps);
        }
    }

    std::string serialize() const {
        std::ostringstream out(std::ios::binary);
        auto w_u64 = [&](std::uint64_t v) {
            out.write(reinterpret_cast<const char*>(&v), sizeof v);
        };
        auto w_i32 = [&](std::int32_t v) {
            out.write(reinterpret_cast<const char*>(&v), sizeof v);
        };
        auto w_f64 = [&](double v) {
            out.write(reinterpret_cast<const char*>(&v), sizeof v);
        };
        auto w_str = [&](const std::string& s) {
            w_u64(s.size());
            out.write(s.data(), static_cast<std::streamsize>(s.size()));
        };
        auto w_mat = [&](const ag::Mat& m) {
            w_u64(static_cast<std::uint64_t>(m.rows()));
            w_u64(static_cast<std::uint64_t>(m.cols()));
            out.write(reinterpret_cast<const char*>(m.data()),
                      static_cast<std::streamsize>(sizeof(double) * m.size()));
        };
        out.write("GLCK", 4);
        w_i32(1);  // format version
        w_str(config_hash);
        w_str(meta);
        w_i32(epoch);
        w_f64(best_metric);
        w_u64(optimizer_steps);
        w_u64(parameters.size());
        for (const auto& [name, m] : parameters) {
            w_str(name);
            w_mat(m);
        }
        w_u64(optimizer_slots.size());
        for (const auto& [name, slot] : optimizer_slots) {
            w_str(name);
            w_mat(slot.m);
            w_mat(slot.v);
        }
        return out.str();
    }

    static Checkpoint deserialize(const std::string& bytes) {
        std::istringstream in(bytes, std::ios::binary);
        auto r_u64 = [&] {
            std::uint64_t v;
            in.read(reinterpret_cast<char*>(&v), sizeof v);
            return v;
        };
        auto r_i32 = [&] {
            std::int32_t v;
            in.read(reinterpret_cast<char*>(&v), sizeof v);
            return v;
        };
        auto r_f64 = [&] {
            double v;
            in.read(reinterpret_cast<char*>(&v), sizeof v);
            return v;
        };
        auto r_str = [&] {
            std::string s(r_u64(), '\0');
            in.read(s.data(), static_cast<std::streamsize>(s.size()));
            return s;
        };
        auto r_mat = [&] {
            auto rows = static_cast<Eigen::Index>(r_u64());
            auto cols = static_cast<Eigen::Index>(r_u64());
            ag::Mat m(rows, cols);
            in.read(reinterpret_cast<char*>(m.data()),
                    static_cast<std::streamsize>(sizeof(double) * m.size()));
            return m;
        };
        char magic[4];
        in.read(magic, 4);
        if (!in || std::string(magic, 4) != "GLCK")
            throw DataError("checkpoint: bad magic");
        if (r_i32() != 1) throw DataError("checkpoint: unsupported version");
        Checkpoint c;
        c.config_hash = r_str();
        c.meta = r_str();
        c.epoch = r_i32();
        c.best_metric = r_f64();
        c.optimizer_steps = r_u64();
        std::uint64_t np = r_u64();
        for (std::uint64_t i = 0; i < np; ++i) {
            auto name = r_str();
            c.parameters.emplace_back(std::move(name), r_mat());
        }
        std::uint64_t ns = r_u64();
        for (std::uint64_t i = 0; i < ns; ++i) {
            auto name = r_str();
            Adam::Slot s;
            s.m = r_mat();
            s.v = r_mat();
            c.optimizer_slots[name] = std::move(s);
        }
        if (!in) throw DataError("checkpoint: truncated stream");
        return c;
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write checkpoint " + path);
        auto bytes = serialize();
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot read checkpoint " + path);
        std::string bytes((std::istreambuf_iterator<char>(f)), {});
        return deserialize(bytes);
    }

    std::uint64_t state_hash() const { return fnv1a(serialize()); }
};

}  // namespace glint::train
