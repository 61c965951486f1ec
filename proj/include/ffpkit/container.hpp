#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ffpkit/common.hpp"
#include "ffpkit/tensor.hpp"

namespace ffpkit {

// Binary tensor container: magic "FFPK", little-endian throughout, a u32
// version, then a table of (name, shape, dtype, byte offset) entries followed
// by raw payloads. Doubles are written verbatim, so a save/load round trip is
// bitwise lossless. f32 payloads load (widened to f64) but are never written.
struct NamedTensor {
    std::string name;
    Tensor value;
};

namespace detail {

constexpr uint32_t kContainerVersion = 1;
constexpr uint8_t kDtypeF32 = 0;
constexpr uint8_t kDtypeF64 = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    check(bool(is), ErrorCode::io_error, "container truncated");
    return v;
}

}  // namespace detail

inline void save_tensors(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    check(bool(os), ErrorCode::io_error, "cannot open for writing: " + path);

    uint64_t header = 4 + 4 + 8;
    for (const NamedTensor& t : tensors) {
        check_arg(!t.name.empty(), "tensor names must be nonempty");
        header += 8 + t.name.size() + 8 + 8 * uint64_t(t.value.rank()) + 1 + 8;
    }

    os.write("FFPK", 4);
    detail::write_pod<uint32_t>(os, detail::kContainerVersion);
    detail::write_pod<uint64_t>(os, tensors.size());
    uint64_t offset = header;
    for (const NamedTensor& t : tensors) {
        detail::write_pod<uint64_t>(os, t.name.size());
        os.write(t.name.data(), std::streamsize(t.name.size()));
        detail::write_pod<uint64_t>(os, uint64_t(t.value.rank()));
        for (int i = 0; i < t.value.rank(); ++i) detail::write_pod<int64_t>(os, t.value.dim(i));
        detail::write_pod<uint8_t>(os, detail::kDtypeF64);
        detail::write_pod<uint64_t>(os, offset);
        offset += uint64_t(t.value.size()) * sizeof(double);
    }
    for (const NamedTensor& t : tensors)
        os.write(reinterpret_cast<const char*>(t.value.data()),
                 std::streamsize(size_t(t.value.size()) * sizeof(double)));
    os.flush();
    check(bool(os), ErrorCode::io_error, "write failed: " + path);
}

inline std::vector<NamedTensor> load_tensors(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check(bool(is), ErrorCode::io_error, "cannot open for reading: " + path);

    char magic[4] = {};
    is.read(magic, 4);
    check(bool(is) && std::memcmp(magic, "FFPK", 4) == 0, ErrorCode::io_error,
          "not a tensor container: " + path);
    const uint32_t version = detail::read_pod<uint32_t>(is);
    check(version == detail::kContainerVersion, ErrorCode::io_error,
          "unsupported container version " + std::to_string(version));
    const uint64_t count = detail::read_pod<uint64_t>(is);
    check(count <= (1u << 24), ErrorCode::io_error, "implausible tensor count");

    struct Entry {
        std::string name;
        std::vector<int64_t> shape;
        uint8_t dtype;
        uint64_t offset;
    };
    std::vector<Entry> entries;
    entries.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        Entry e;
        const uint64_t name_len = detail::read_pod<uint64_t>(is);
        check(name_len >= 1 && name_len <= 4096, ErrorCode::io_error, "bad tensor name length");
        e.name.resize(name_len);
        is.read(e.name.data(), std::streamsize(name_len));
        const uint64_t rank = detail::read_pod<uint64_t>(is);
        check(rank <= 8, ErrorCode::io_error, "bad tensor rank");
        for (uint64_t r = 0; r < rank; ++r) {
            const int64_t d = detail::read_pod<int64_t>(is);
            check(d >= 0, ErrorCode::io_error, "negative dimension");
            e.shape.push_back(d);
        }
        e.dtype = detail::read_pod<uint8_t>(is);
        check(e.dtype == detail::kDtypeF32 || e.dtype == detail::kDtypeF64, ErrorCode::io_error,
              "unknown dtype tag");
        e.offset = detail::read_pod<uint64_t>(is);
        check(bool(is), ErrorCode::io_error, "container truncated");
        entries.push_back(std::move(e));
    }

    std::vector<NamedTensor> out;
    out.reserve(count);
    for (const Entry& e : entries) {
        Tensor t(e.shape);
        is.seekg(std::streamoff(e.offset));
        check(bool(is), ErrorCode::io_error, "bad payload offset for " + e.name);
        if (e.dtype == detail::kDtypeF64) {
            is.read(reinterpret_cast<char*>(t.data()),
                    std::streamsize(size_t(t.size()) * sizeof(double)));
        } else {
            std::vector<float> buf(size_t(t.size()));
            is.read(reinterpret_cast<char*>(buf.data()),
                    std::streamsize(buf.size() * sizeof(float)));
            for (int64_t i = 0; i < t.size(); ++i) t[i] = double(buf[size_t(i)]);
        }
        check(bool(is), ErrorCode::io_error, "payload truncated for " + e.name);
        out.push_back(NamedTensor{e.name, std::move(t)});
    }
    return out;
}

// Strings ride in the container as one byte per f64 element.
inline Tensor string_to_tensor(const std::string& s) {
    Tensor t({int64_t(s.size())});
    for (size_t i = 0; i < s.size(); ++i) t[int64_t(i)] = double(uint8_t(s[i]));
    return t;
}

inline std::string tensor_to_string(const Tensor& t) {
    std::string s;
    s.reserve(size_t(t.size()));
    for (int64_t i = 0; i < t.size(); ++i) {
        const double v = t[i];
        check(v >= 0.0 && v <= 255.0 && v == double(uint8_t(v)), ErrorCode::io_error,
              "tensor does not encode a byte string");
        s.push_back(char(uint8_t(v)));
    }
    return s;
}

}  // namespace ffpkit
