#include "sgm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sgm {

namespace {

constexpr char kMagic[8] = {'S', 'G', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr char kSgmTag[4] = {'S', 'G', 'M', 'S'};
constexpr unsigned char kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    write_u32(out, std::uint32_t(v & 0xffffffffu));
    write_u32(out, std::uint32_t(v >> 32));
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in) {
    const std::uint64_t lo = read_u32(in);
    const std::uint64_t hi = read_u32(in);
    return lo | (hi << 32);
}

void write_array(std::ostream& out, const float* data, std::size_t size) {
    // Little-endian f32; byte-exact on the platforms this artifact targets.
    for (std::size_t i = 0; i < size; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &data[i], 4);
        write_u32(out, bits);
    }
}

void read_array(std::istream& in, float* data, std::size_t size) {
    for (std::size_t i = 0; i < size; ++i) {
        const std::uint32_t bits = read_u32(in);
        std::memcpy(&data[i], &bits, 4);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const std::vector<SGModule>* sgms) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_checkpoint: cannot open " + path);
    }
    out.write(kMagic, 8);
    out.put(char(kVersion));
    write_u64(out, model.config.digest());

    Model& m = const_cast<Model&>(model);  // views are read here only
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        for (const ParamView& v : layer_state_views(m, int(i))) {
            write_array(out, v.data, v.size);
        }
    }

    if (sgms != nullptr && !sgms->empty()) {
        out.write(kSgmTag, 4);
        write_u32(out, std::uint32_t(sgms->size()));
        for (const SGModule& s : *sgms) {
            write_u32(out, std::uint32_t(s.config.attach_layer));
            write_u32(out, std::uint32_t(s.config.channels));
            write_u32(out, std::uint32_t(s.config.hidden));
            write_u32(out, std::uint32_t(s.config.kernel));
            out.put(s.is_static ? char(1) : char(0));
            SGModule& sm = const_cast<SGModule&>(s);
            for (const ParamView& v : sgm_param_views(sm)) {
                write_array(out, v.data, v.size);
            }
        }
    }
    if (!out) {
        throw std::runtime_error("save_checkpoint: write failed for " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_checkpoint: cannot open " + path);
    }
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    }
    const int version = in.get();
    if (version != kVersion) {
        throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint64_t digest = read_u64(in);
    if (digest != expected.digest()) {
        throw std::runtime_error("load_checkpoint: config digest mismatch (file written for another architecture)");
    }

    Checkpoint ck;
    ck.model = build_model(expected, 0);
    for (std::size_t i = 0; i < ck.model.layers.size(); ++i) {
        for (const ParamView& v : layer_state_views(ck.model, int(i))) {
            read_array(in, v.data, v.size);
        }
    }
    if (!in) {
        throw std::runtime_error("load_checkpoint: truncated file " + path);
    }

    char tag[4];
    in.read(tag, 4);
    if (in && std::memcmp(tag, kSgmTag, 4) == 0) {
        const std::uint32_t count = read_u32(in);
        for (std::uint32_t i = 0; i < count; ++i) {
            SGMConfig cfg;
            cfg.attach_layer = int(read_u32(in));
            cfg.channels = int(read_u32(in));
            cfg.hidden = int(read_u32(in));
            cfg.kernel = int(read_u32(in));
            const int is_static = in.get();
            SGModule s = build_sgm(cfg, 0);
            s.is_static = is_static != 0;
            for (const ParamView& v : sgm_param_views(s)) {
                read_array(in, v.data, v.size);
            }
            ck.sgms.push_back(std::move(s));
        }
    }
    if (in.bad() || (in.fail() && !in.eof())) {
        throw std::runtime_error("load_checkpoint: truncated file " + path);
    }
    return ck;
}

}  // namespace sgm
