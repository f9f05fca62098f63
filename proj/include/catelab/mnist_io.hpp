/*
 * Copyright 2026 The catelab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// IDX files as used by the MNIST distribution.
//
// Layout: two zero bytes, a dtype byte, a dimension-count byte, one
// big-endian u32 per dimension, then the row-major payload. Only unsigned
// bytes (dtype 0x08) are supported. Paths ending in ".gz" are read and
// written through zlib.

#ifndef CATELAB_MNIST_IO_HPP
#define CATELAB_MNIST_IO_HPP

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "catelab/common.hpp"
#include "catelab/dgp.hpp"

namespace catelab::mnist {

inline constexpr std::uint8_t kUnsignedByte = 0x08;

struct IdxArray {
    std::uint8_t dtype = kUnsignedByte;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> data;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

inline IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
    require(bytes.size() >= 4, "idx: file shorter than its 4-byte header");
    require(bytes[0] == 0 && bytes[1] == 0, "idx: bad magic (first two bytes must be zero)");
    require(bytes[2] == kUnsignedByte, "idx: unsupported dtype 0x" + [&] {
        const char* hex = "0123456789abcdef";
        return std::string{hex[bytes[2] >> 4], hex[bytes[2] & 0xF]};
    }() + " (only unsigned bytes, 0x08, are supported)");
    IdxArray out;
    out.dtype = bytes[2];
    const std::size_t ndim = bytes[3];
    require(ndim >= 1, "idx: zero dimensions");
    require(bytes.size() >= 4 + 4 * ndim, "idx: truncated dimension header");
    for (std::size_t k = 0; k < ndim; ++k) {
        const std::uint8_t* p = bytes.data() + 4 + 4 * k;
        out.dims.push_back(static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
                           static_cast<std::uint32_t>(p[2]) << 8 | static_cast<std::uint32_t>(p[3]));
    }
    const std::size_t offset = 4 + 4 * ndim;
    const std::size_t expected = out.element_count();
    require(bytes.size() - offset >= expected, "idx: truncated payload (" + std::to_string(bytes.size() - offset) +
                                                   " bytes, expected " + std::to_string(expected) + ")");
    require(bytes.size() - offset == expected, "idx: trailing bytes after payload");
    out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
    return out;
}

inline std::vector<std::uint8_t> serialize_idx(const IdxArray& arr) {
    require(arr.dtype == kUnsignedByte, "idx: only unsigned-byte arrays can be written");
    require(!arr.dims.empty() && arr.dims.size() <= 255, "idx: dimension count must be 1..255");
    require(arr.data.size() == arr.element_count(), "idx: payload size does not match dimensions");
    std::vector<std::uint8_t> out{0, 0, arr.dtype, static_cast<std::uint8_t>(arr.dims.size())};
    for (auto d : arr.dims) {
        for (int shift : {24, 16, 8, 0}) out.push_back(static_cast<std::uint8_t>(d >> shift));
    }
    out.insert(out.end(), arr.data.begin(), arr.data.end());
    return out;
}

inline bool is_gzip_path(const std::string& path) { return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0; }

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::vector<std::uint8_t> bytes;
    if (is_gzip_path(path)) {
        gzFile f = gzopen(path.c_str(), "rb");
        require(f != nullptr, "cannot open '" + path + "'");
        std::uint8_t buf[1 << 16];
        int got = 0;
        while ((got = gzread(f, buf, sizeof buf)) > 0) bytes.insert(bytes.end(), buf, buf + got);
        int err = 0;
        const char* msg = gzerror(f, &err);
        gzclose(f);
        require(got == 0 && err == Z_OK, "gzip read failed for '" + path + "': " + msg);
        return bytes;
    }
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot open '" + path + "'");
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    if (is_gzip_path(path)) {
        gzFile f = gzopen(path.c_str(), "wb");
        require(f != nullptr, "cannot open '" + path + "' for writing");
        const int wrote = bytes.empty() ? 0 : gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
        const int closed = gzclose(f);
        require(wrote == static_cast<int>(bytes.size()) && closed == Z_OK, "gzip write failed for '" + path + "'");
        return;
    }
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), "write failed for '" + path + "'");
}

inline IdxArray read_idx(const std::string& path) {
    try {
        return parse_idx(read_bytes(path));
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

inline void write_idx(const std::string& path, const IdxArray& arr) { write_bytes(path, serialize_idx(arr)); }

/// Labels of a one-dimensional array, checked to be digits.
inline std::vector<int> labels_from(const IdxArray& arr) {
    require(arr.dims.size() == 1, "idx: labels must be one-dimensional");
    std::vector<int> labels(arr.data.begin(), arr.data.end());
    for (int l : labels) require(l <= 9, "idx: label " + std::to_string(l) + " outside 0..9");
    return labels;
}

/// One row per leading index, intensities scaled to [0, 1].
inline Matrix to_unit_matrix(const IdxArray& arr) {
    require(!arr.dims.empty(), "idx: empty array");
    const Eigen::Index rows = arr.dims[0];
    const Eigen::Index cols = rows == 0 ? 0 : static_cast<Eigen::Index>(arr.element_count()) / rows;
    Matrix x(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) x(r, c) = arr.data[static_cast<std::size_t>(r * cols + c)] / 255.0;
    }
    return x;
}

/// Square images and their labels, average-pooled by `factor`
/// (1: 784 features, 2: 196, 4: 49 for 28 x 28 digits).
inline dgp::LabeledImages load_labeled_images(const std::string& images_path, const std::string& labels_path,
                                              int factor = 1) {
    const IdxArray images = read_idx(images_path);
    const IdxArray labels = read_idx(labels_path);
    require(images.dims.size() == 3 && images.dims[1] == images.dims[2], "idx: images must be [count, side, side]");
    std::vector<int> l = labels_from(labels);
    require(l.size() == images.dims[0], "idx: image and label counts differ");
    return {dgp::pool_images(images.data, images.dims[0], static_cast<int>(images.dims[1]), factor), std::move(l)};
}

}  // namespace catelab::mnist

#endif  // CATELAB_MNIST_IO_HPP
