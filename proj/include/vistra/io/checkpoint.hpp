#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "vistra/nn/params.hpp"

namespace vistra {

// Checkpoint container: magic + version, a fingerprint of the canonicalized
// model config, ordered named tensors (little-endian row-major payloads) and
// a small u64 metadata map (step counter, RNG state, ...).
//
//   magic "VSTCKPT1" | u32 version | u64 fingerprint | u32 n_entries
//   entry: u16 name_len | name | u8 dtype (0=f32,1=f64) | u8 flags (bit0 =
//          learnable) | u8 rank | u64 extents[rank] | payload
//   u32 n_meta | meta: u16 key_len | key | u64 value
inline constexpr char kCheckpointMagic[8] = {'V', 'S', 'T', 'C', 'K', 'P', 'T', '1'};

namespace detail {

inline void put_u16(std::string& out, uint16_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
}
inline void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

class ByteReader {
public:
    ByteReader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}
    uint16_t u16() { return uint16_t(u(2)); }
    uint32_t u32() { return uint32_t(u(4)); }
    uint64_t u64() { return u(8); }
    std::string bytes(size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    const char* raw(size_t n) {
        need(n);
        const char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    bool done() const { return pos_ == buf_.size(); }

private:
    uint64_t u(int n) {
        need(size_t(n));
        uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= uint64_t(uint8_t(buf_[pos_ + size_t(i)])) << (8 * i);
        pos_ += size_t(n);
        return v;
    }
    void need(size_t n) {
        if (pos_ + n > buf_.size()) throw IoError("truncated checkpoint: " + path_);
    }
    const std::string& buf_;
    std::string path_;
    size_t pos_ = 0;
};

template <typename T>
constexpr uint8_t dtype_tag() {
    return sizeof(T) == 4 ? 0 : 1;
}

template <typename T>
void put_scalar_le(std::string& out, T v) {
    if constexpr (sizeof(T) == 4) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(out, bits);
    } else {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(out, bits);
    }
}

}  // namespace detail

// Writes via a temp file + rename so failed runs never leave partial output.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out.write(contents.data(), std::streamsize(contents.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

// Borrowed view of one tensor to serialize.
template <typename T>
struct TensorView {
    std::string name;
    Shape shape;
    const T* data = nullptr;
    bool learnable = true;

    int64_t count() const { return numel(shape); }
};

template <typename T>
std::vector<TensorView<T>> views_of(const ParamStore<T>& store) {
    std::vector<TensorView<T>> out;
    for (const auto& e : store.entries())
        out.push_back({e.name, e.tensor.shape, e.tensor.ptr(), e.learnable});
    return out;
}

template <typename T>
void save_checkpoint(const std::string& path, const std::vector<TensorView<T>>& entries,
                     uint64_t fingerprint, const std::map<std::string, uint64_t>& meta = {}) {
    std::string out;
    out.append(kCheckpointMagic, 8);
    detail::put_u32(out, 1);
    detail::put_u64(out, fingerprint);
    detail::put_u32(out, uint32_t(entries.size()));
    for (const auto& e : entries) {
        detail::put_u16(out, uint16_t(e.name.size()));
        out.append(e.name);
        out.push_back(char(detail::dtype_tag<T>()));
        out.push_back(char(e.learnable ? 1 : 0));
        out.push_back(char(e.shape.size()));
        for (int64_t d : e.shape) detail::put_u64(out, uint64_t(d));
        for (int64_t i = 0; i < e.count(); ++i) detail::put_scalar_le(out, e.data[i]);
    }
    detail::put_u32(out, uint32_t(meta.size()));
    for (const auto& [k, v] : meta) {
        detail::put_u16(out, uint16_t(k.size()));
        out.append(k);
        detail::put_u64(out, v);
    }
    write_file_atomic(path, out);
}

template <typename T>
void save_checkpoint(const std::string& path, const ParamStore<T>& store, uint64_t fingerprint,
                     const std::map<std::string, uint64_t>& meta = {}) {
    save_checkpoint(path, views_of(store), fingerprint, meta);
}

struct LoadedCheckpoint {
    uint64_t fingerprint = 0;

    struct Entry {
        Shape shape;
        std::vector<double> values;  // widened; dtype preserved via tag
        uint8_t dtype = 0;
        bool learnable = true;
    };
    // insertion-ordered
    std::vector<std::pair<std::string, Entry>> entries;
    std::map<std::string, uint64_t> meta;

    const Entry* find(const std::string& name) const {
        for (const auto& [n, e] : entries)
            if (n == name) return &e;
        return nullptr;
    }
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    detail::ByteReader r(buf, path);
    if (r.bytes(8) != std::string(kCheckpointMagic, 8)) throw IoError("bad checkpoint magic: " + path);
    const uint32_t version = r.u32();
    if (version != 1) throw IoError(strcat_all("unsupported checkpoint version ", version, ": ", path));
    LoadedCheckpoint ck;
    ck.fingerprint = r.u64();
    const uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = r.bytes(r.u16());
        LoadedCheckpoint::Entry e;
        e.dtype = uint8_t(r.bytes(1)[0]);
        e.learnable = r.bytes(1)[0] != 0;
        const int rank = int(uint8_t(r.bytes(1)[0]));
        for (int d = 0; d < rank; ++d) e.shape.push_back(int64_t(r.u64()));
        const int64_t count = numel(e.shape);
        e.values.resize(size_t(count));
        if (e.dtype == 0) {
            const char* p = r.raw(size_t(count) * 4);
            for (int64_t j = 0; j < count; ++j) {
                uint32_t bits = 0;
                for (int b = 0; b < 4; ++b) bits |= uint32_t(uint8_t(p[j * 4 + b])) << (8 * b);
                float f;
                std::memcpy(&f, &bits, 4);
                e.values[size_t(j)] = double(f);
            }
        } else {
            const char* p = r.raw(size_t(count) * 8);
            for (int64_t j = 0; j < count; ++j) {
                uint64_t bits = 0;
                for (int b = 0; b < 8; ++b) bits |= uint64_t(uint8_t(p[j * 8 + b])) << (8 * b);
                double f;
                std::memcpy(&f, &bits, 8);
                e.values[size_t(j)] = f;
            }
        }
        ck.entries.emplace_back(std::move(name), std::move(e));
    }
    const uint32_t n_meta = r.u32();
    for (uint32_t i = 0; i < n_meta; ++i) {
        std::string key = r.bytes(r.u16());
        ck.meta[key] = r.u64();
    }
    return ck;
}

// Copies checkpoint values into a freshly built store. Every store entry must
// be present with an identical shape; the fingerprint must match unless
// explicitly overridden.
template <typename T>
void restore_into(const LoadedCheckpoint& ck, ParamStore<T>& store, uint64_t expected_fingerprint,
                  bool allow_fingerprint_mismatch = false) {
    if (ck.fingerprint != expected_fingerprint && !allow_fingerprint_mismatch)
        throw IoError(strcat_all("checkpoint fingerprint ", ck.fingerprint, " does not match model config ",
                                 expected_fingerprint, " (pass --force-load to override)"));
    for (auto& e : store.entries()) {
        const auto* src = ck.find(e.name);
        if (!src) throw IoError("checkpoint missing tensor '" + e.name + "'");
        if (src->shape != e.tensor.shape)
            throw IoError(strcat_all("checkpoint tensor '", e.name, "' has shape ", shape_str(src->shape),
                                     ", model expects ", shape_str(e.tensor.shape)));
        for (int64_t i = 0; i < e.tensor.numel(); ++i) (*e.tensor.data)[size_t(i)] = T(src->values[size_t(i)]);
    }
}

}  // namespace vistra
