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

#include "catelab/mnist_io.hpp"

#include <array>
#include <filesystem>
#include <numeric>

#include "gtest/gtest.h"

namespace catelab::mnist {
namespace {

const std::string kImages = std::string(CATELAB_TEST_DATA_DIR) + "/mnist/t10k-images-idx3-ubyte.gz";
const std::string kLabels = std::string(CATELAB_TEST_DATA_DIR) + "/mnist/t10k-labels-idx1-ubyte.gz";

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("catelab_mnist_io_" + name)).string();
}

TEST(Idx, MinimalVector) {
    const std::vector<std::uint8_t> bytes{0, 0, 8, 1, 0, 0, 0, 3, 7, 8, 9};
    const IdxArray a = parse_idx(bytes);
    EXPECT_EQ(a.dims, (std::vector<std::uint32_t>{3}));
    EXPECT_EQ(a.data, (std::vector<std::uint8_t>{7, 8, 9}));
    EXPECT_EQ(serialize_idx(a), bytes);
}

TEST(Idx, DimensionsAreBigEndian) {
    std::vector<std::uint8_t> bytes{0, 0, 8, 2, 0, 0, 1, 2, 0, 0, 0, 1};
    bytes.resize(bytes.size() + 258, 5);
    const IdxArray a = parse_idx(bytes);
    EXPECT_EQ(a.dims, (std::vector<std::uint32_t>{258, 1}));
    EXPECT_EQ(serialize_idx(a), bytes);
}

TEST(Idx, RejectsMalformedInput) {
    EXPECT_THROW(parse_idx(std::vector<std::uint8_t>{0, 1, 8, 1, 0, 0, 0, 0}), Error);  // magic
    EXPECT_THROW(parse_idx(std::vector<std::uint8_t>{0, 0, 8, 1, 0, 0, 0, 3, 1}), Error);  // truncated
    EXPECT_THROW(parse_idx(std::vector<std::uint8_t>{0, 0, 8, 1, 0, 0}), Error);  // short dims
    EXPECT_THROW(parse_idx(std::vector<std::uint8_t>{0, 0, 8, 1, 0, 0, 0, 1, 1, 2}), Error);  // trailing
    try {
        parse_idx(std::vector<std::uint8_t>{0, 0, 0x0D, 1, 0, 0, 0, 1, 0, 0, 0, 0});
        FAIL() << "float dtype accepted";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("0x0d"), std::string::npos);
    }
    EXPECT_THROW(read_idx(temp_path("missing.idx")), Error);
}

TEST(Idx, FileRoundTripPlainAndCompressed) {
    IdxArray a;
    a.dims = {2, 2, 3};
    a.data = {0, 1, 2, 3, 4, 5, 250, 251, 252, 253, 254, 255};
    for (const std::string name : {"fixture.idx", "fixture.idx.gz"}) {
        const std::string path = temp_path(name);
        write_idx(path, a);
        const IdxArray b = read_idx(path);
        EXPECT_EQ(b.dims, a.dims);
        EXPECT_EQ(b.data, a.data);
        std::filesystem::remove(path);
    }
    const std::string plain = temp_path("bytes.idx");
    write_idx(plain, a);
    EXPECT_EQ(read_bytes(plain), serialize_idx(a));
    std::filesystem::remove(plain);
}

TEST(Mnist, TestSetLabels) {
    const IdxArray labels = read_idx(kLabels);
    EXPECT_EQ(labels.dims, (std::vector<std::uint32_t>{10000}));
    const auto l = labels_from(labels);
    std::array<int, 10> histogram{};
    for (int v : l) ++histogram[static_cast<std::size_t>(v)];
    EXPECT_EQ(histogram, (std::array<int, 10>{980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009}));
    EXPECT_EQ(std::vector<int>(l.begin(), l.begin() + 10), (std::vector<int>{7, 2, 1, 0, 4, 1, 4, 9, 5, 9}));
    EXPECT_EQ(std::vector<int>(l.end() - 5, l.end()), (std::vector<int>{2, 3, 4, 5, 6}));
}

TEST(Mnist, TestSetImages) {
    const IdxArray images = read_idx(kImages);
    EXPECT_EQ(images.dims, (std::vector<std::uint32_t>{10000, 28, 28}));
    EXPECT_EQ(images.data.size(), 7840000u);
    EXPECT_EQ(std::accumulate(images.data.begin(), images.data.end(), std::uint64_t{0}), 264923200u);
    EXPECT_EQ(std::accumulate(images.data.begin(), images.data.begin() + 784, 0), 18454);
    const std::vector<std::uint8_t> row14(images.data.begin() + 14 * 28 + 16, images.data.begin() + 14 * 28 + 20);
    EXPECT_EQ(row14, (std::vector<std::uint8_t>{0x3b, 0xf9, 0xfe, 0x3e}));
    const Matrix x = to_unit_matrix(images);
    EXPECT_EQ(x.rows(), 10000);
    EXPECT_EQ(x.cols(), 784);
    EXPECT_GE(x.minCoeff(), 0.0);
    EXPECT_LE(x.maxCoeff(), 1.0);
}

TEST(Mnist, DecompressedFileRoundTripsByteForByte) {
    const auto bytes = read_bytes(kLabels);
    EXPECT_EQ(serialize_idx(parse_idx(bytes)), bytes);
}

TEST(Mnist, PooledLabeledImages) {
    const auto data = load_labeled_images(kImages, kLabels, 4);
    EXPECT_EQ(data.x.rows(), 10000);
    EXPECT_EQ(data.x.cols(), 49);
    EXPECT_NEAR(data.x.row(0).sum() * 16.0 * 255.0, 18454.0, 1e-6);
    EXPECT_EQ(data.labels[0], 7);
    EXPECT_THROW(load_labeled_images(kLabels, kLabels), Error);
}

}  // namespace
}  // namespace catelab::mnist
