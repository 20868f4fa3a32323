#include "fastbat/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace fastbat {

namespace {

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw ContractError(path + ": truncated checkpoint");
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

} // namespace

void save_checkpoint(const std::string& path, const ParamVector& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("cannot open checkpoint for writing: " + path);
    out.write("FBAT", 4);
    out.put(0x01);
    write_u32(out, static_cast<uint32_t>(params.num_segments()));
    for (int i = 0; i < params.num_segments(); ++i) {
        const auto& seg = params.segment(i);
        write_u32(out, static_cast<uint32_t>(seg.name.size()));
        out.write(seg.name.data(), static_cast<std::streamsize>(seg.name.size()));
        write_u32(out, static_cast<uint32_t>(seg.shape.size()));
        for (int d : seg.shape) write_u32(out, static_cast<uint32_t>(d));
        TensorData t = params.unpack(i);
        for (double v : t.data) {
            float f = static_cast<float>(v);
            static_assert(sizeof(float) == 4);
            char bytes[4];
            std::memcpy(bytes, &f, 4); // host is little-endian
            out.write(bytes, 4);
        }
    }
    if (!out) throw NumericError("checkpoint write failed: " + path);
}

ParamVector load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("cannot open checkpoint: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "FBAT", 4) != 0)
        throw ContractError(path + ": bad checkpoint magic (expected \"FBAT\")");
    const int version = in.get();
    if (version != 0x01)
        throw ContractError(path + ": unsupported checkpoint version " + std::to_string(version));
    const uint32_t count = read_u32(in, path);
    ParamVector p;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_u32(in, path);
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw ContractError(path + ": truncated tensor name");
        const uint32_t rank = read_u32(in, path);
        std::vector<int> shape(rank);
        for (uint32_t r = 0; r < rank; ++r) shape[r] = static_cast<int>(read_u32(in, path));
        const int seg = p.add_segment(name, shape);
        TensorData t = p.unpack(seg);
        for (double& v : t.data) {
            char bytes[4];
            if (!in.read(bytes, 4)) throw ContractError(path + ": truncated tensor data");
            float f;
            std::memcpy(&f, bytes, 4);
            v = f;
        }
        p.pack(seg, t);
    }
    return p;
}

} // namespace fastbat
