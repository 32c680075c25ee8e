// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "uapforge/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace uapforge {
namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor container I/O assumes a little-endian host");

constexpr char kMagic[4] = {'U', 'A', 'P', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }

    const std::uint8_t* take(std::size_t n) {
        need(n);
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError("tensor container truncated");
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

template <Real T>
Tensor<T> decode_payload(Reader& in, Shape shape) {
    const std::size_t n = shape_numel(shape);
    std::vector<T> data(n);
    const std::uint8_t* raw = in.take(n * sizeof(T));
    std::memcpy(data.data(), raw, n * sizeof(T));
    return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace

template <Real T>
std::vector<std::uint8_t> encode_tensor(const Tensor<T>& t) {
    std::vector<std::uint8_t> out;
    out.reserve(13 + 4 * t.rank() + t.numel() * sizeof(T));
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(out, kTensorFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    out.push_back(static_cast<std::uint8_t>(dtype_of<T>()));
    const auto* raw = reinterpret_cast<const std::uint8_t*>(t.data().data());
    out.insert(out.end(), raw, raw + t.numel() * sizeof(T));
    return out;
}

AnyTensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
    Reader in(bytes);
    const std::uint8_t* magic = in.take(4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad tensor magic (expected UAPT)");
    const std::uint32_t version = in.u32();
    if (version != kTensorFormatVersion) {
        throw FormatError("unsupported tensor format version " + std::to_string(version));
    }
    const std::uint32_t rank = in.u32();
    Shape shape(rank);
    for (auto& d : shape) d = in.u32();
    const std::uint8_t tag = in.u8();
    AnyTensor result;
    switch (tag) {
        case static_cast<std::uint8_t>(DType::f32):
            result = decode_payload<float>(in, std::move(shape));
            break;
        case static_cast<std::uint8_t>(DType::f64):
            result = decode_payload<double>(in, std::move(shape));
            break;
        default:
            throw FormatError("unknown tensor dtype tag " + std::to_string(tag));
    }
    if (in.remaining() != 0) throw FormatError("trailing bytes after tensor payload");
    return result;
}

template <Real T>
void write_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
    write_file_bytes(path, encode_tensor(t));
}

AnyTensor read_tensor_any(const std::filesystem::path& path) {
    return decode_tensor(read_file_bytes(path));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw MissingFileError("missing file " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

template std::vector<std::uint8_t> encode_tensor(const Tensor<float>&);
template std::vector<std::uint8_t> encode_tensor(const Tensor<double>&);
template void write_tensor(const std::filesystem::path&, const Tensor<float>&);
template void write_tensor(const std::filesystem::path&, const Tensor<double>&);

}  // namespace uapforge
