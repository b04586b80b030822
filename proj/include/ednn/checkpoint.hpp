#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "ednn/model.hpp"

namespace ednn {

/// Everything a checkpoint stores: the config, the parameters with their
/// Adam moments, and run metadata.
struct Checkpoint {
    EDNNConfig config;
    ParamSet<float> params;
    std::uint64_t seed = 0;
    long epoch = 0;
    double loss = 0.0;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_tensor_f32(std::ostream& os, const std::string& name, const Tensor<float>& t) {
    os << "tensor " << name << " " << t.rank();
    for (std::size_t d : t.shape) os << " " << d;
    os << "\n";
    // Raw little-endian 32-bit floats.
    os.write(reinterpret_cast<const char*>(t.ptr()),
             static_cast<std::streamsize>(t.size() * sizeof(float)));
}

inline Tensor<float> read_tensor_f32(std::istream& is, const std::string& header,
                                     std::string& name) {
    std::istringstream hs(header);
    std::string tag;
    std::size_t rank = 0;
    if (!(hs >> tag >> name >> rank) || tag != "tensor" || rank == 0 || rank > 8)
        throw FormatError("corrupt checkpoint: bad tensor header '" + header + "'");
    Shape shape(rank);
    for (auto& d : shape)
        if (!(hs >> d) || d == 0) throw FormatError("corrupt checkpoint: bad shape for " + name);
    Tensor<float> t(shape);
    is.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (static_cast<std::size_t>(is.gcount()) != t.size() * sizeof(float))
        throw FormatError("corrupt checkpoint: truncated data for tensor " + name);
    return t;
}

}  // namespace detail

inline constexpr const char* kCheckpointMagic = "EDNN-CHECKPOINT v1";

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint " + path);
    const EDNNConfig& c = ckpt.config;
    os << kCheckpointMagic << "\n"
       << "focus " << c.focus << "\n"
       << "context " << c.context << "\n"
       << "channels " << c.channels << "\n"
       << "classes " << c.classes << "\n"
       << "kernels " << c.kernels << "\n"
       << "kernel_size " << c.kernel_size << "\n"
       << "stride " << c.stride << "\n"
       << "dense_width " << c.dense_width << "\n"
       << "seed " << ckpt.seed << "\n"
       << "epoch " << ckpt.epoch << "\n"
       << "loss " << detail::format_double(ckpt.loss) << "\n"
       << "adam_step " << ckpt.params.step_count << "\n"
       << "tensors " << ckpt.params.size() * 3 << "\n";
    for (const auto& e : ckpt.params.entries) {
        detail::write_tensor_f32(os, e.name, e.value);
        detail::write_tensor_f32(os, e.name + ".m", e.m);
        detail::write_tensor_f32(os, e.name + ".v", e.v);
    }
    if (!os) throw IoError("write failed for checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint " + path);
    std::string line;
    if (!std::getline(is, line) || line != kCheckpointMagic)
        throw FormatError(path + " is not an EDNN checkpoint (bad magic)");

    std::map<std::string, std::string> manifest;
    long tensor_count = -1;
    while (std::getline(is, line)) {
        auto sp = line.find(' ');
        if (sp == std::string::npos) throw FormatError("corrupt checkpoint manifest line: " + line);
        std::string key = line.substr(0, sp), value = line.substr(sp + 1);
        if (key == "tensors") {
            tensor_count = std::stol(value);
            break;
        }
        manifest[key] = value;
    }
    if (tensor_count < 0) throw FormatError("corrupt checkpoint: missing tensor table");

    auto field = [&](const char* key) -> const std::string& {
        auto it = manifest.find(key);
        if (it == manifest.end())
            throw FormatError(std::string("corrupt checkpoint: missing field ") + key);
        return it->second;
    };

    Checkpoint ckpt;
    ckpt.config.focus = std::stoi(field("focus"));
    ckpt.config.context = std::stoi(field("context"));
    ckpt.config.channels = std::stoi(field("channels"));
    ckpt.config.classes = std::stoi(field("classes"));
    ckpt.config.kernels = std::stoi(field("kernels"));
    ckpt.config.kernel_size = std::stoi(field("kernel_size"));
    ckpt.config.stride = std::stoi(field("stride"));
    ckpt.config.dense_width = std::stoi(field("dense_width"));
    ckpt.seed = std::stoull(field("seed"));
    ckpt.epoch = std::stol(field("epoch"));
    ckpt.loss = std::stod(field("loss"));
    ckpt.params.step_count = std::stol(field("adam_step"));
    ckpt.config.validate();

    if (tensor_count % 3 != 0) throw FormatError("corrupt checkpoint: tensor count not a multiple of 3");
    for (long i = 0; i < tensor_count / 3; ++i) {
        std::string name, mname, vname;
        if (!std::getline(is, line)) throw FormatError("corrupt checkpoint: truncated tensor table");
        Tensor<float> value = detail::read_tensor_f32(is, line, name);
        if (!std::getline(is, line)) throw FormatError("corrupt checkpoint: truncated tensor table");
        Tensor<float> m = detail::read_tensor_f32(is, line, mname);
        if (!std::getline(is, line)) throw FormatError("corrupt checkpoint: truncated tensor table");
        Tensor<float> v = detail::read_tensor_f32(is, line, vname);
        if (mname != name + ".m" || vname != name + ".v")
            throw FormatError("corrupt checkpoint: moment tensors out of order at " + name);
        if (m.shape != value.shape || v.shape != value.shape)
            throw FormatError("corrupt checkpoint: moment shape mismatch for " + name);
        ParamSet<float>::Entry e;
        e.name = name;
        e.value = std::move(value);
        e.m = std::move(m);
        e.v = std::move(v);
        ckpt.params.entries.push_back(std::move(e));
    }
    check_params_match(ckpt.config, ckpt.params);
    return ckpt;
}

}  // namespace ednn
