#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fastbat/data.hpp"
#include "test_helpers.hpp"

using namespace fastbat;
using namespace fastbat::testing;

namespace {

void put_u32_be(std::string& s, uint32_t v) {
    s.push_back(static_cast<char>((v >> 24) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>(v & 0xff));
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& bytes)
        : path("/tmp/fastbat_test_" + name) {
        std::ofstream f(path, std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    ~TempFile() { std::remove(path.c_str()); }
};

std::string idx_images(const std::vector<uint8_t>& pixels, int n, int rows, int cols,
                       uint32_t magic = 0x0803) {
    std::string s;
    put_u32_be(s, magic);
    put_u32_be(s, static_cast<uint32_t>(n));
    put_u32_be(s, static_cast<uint32_t>(rows));
    put_u32_be(s, static_cast<uint32_t>(cols));
    for (uint8_t p : pixels) s.push_back(static_cast<char>(p));
    return s;
}

std::string idx_labels(const std::vector<uint8_t>& labels, uint32_t magic = 0x0801) {
    std::string s;
    put_u32_be(s, magic);
    put_u32_be(s, static_cast<uint32_t>(labels.size()));
    for (uint8_t l : labels) s.push_back(static_cast<char>(l));
    return s;
}

} // namespace

TEST_CASE("two moons: shape, range, split, determinism") {
    Dataset a = gen_two_moons(100, 0.1, 5);
    CHECK(a.size() == 100);
    CHECK(a.dim() == 2);
    CHECK(a.num_classes == 2);
    CHECK(a.train_idx.size() == 80);
    CHECK(a.test_idx.size() == 20);
    for (double v : a.features.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    for (int l : a.labels) CHECK((l == 0 || l == 1));
    Dataset b = gen_two_moons(100, 0.1, 5);
    CHECK(dataset_digest(a) == dataset_digest(b));
    Dataset c = gen_two_moons(100, 0.1, 6);
    CHECK(dataset_digest(a) != dataset_digest(c));
    // Smallest legal dataset still has both splits non-degenerate in size fields.
    Dataset tiny = gen_two_moons(2, 0.0, 1);
    CHECK(tiny.size() == 2);
}

TEST_CASE("blob labels cover the requested centres") {
    Dataset d = gen_blobs(60, 3, 0.05, 9, 4);
    CHECK(d.dim() == 4);
    CHECK(d.num_classes == 3);
    for (int l : d.labels) {
        CHECK(l >= 0);
        CHECK(l < 3);
    }
}

TEST_CASE("IDX ingestion is bit-faithful") {
    std::vector<uint8_t> pixels = {0, 255, 128, 64, 255, 0, 32, 16};
    std::vector<uint8_t> labels = {3, 1};
    TempFile fi("imgs", idx_images(pixels, 2, 2, 2));
    TempFile fl("labs", idx_labels(labels));
    Dataset d = load_mnist_idx(fi.path, fl.path, 0);
    CHECK(d.size() == 2);
    CHECK(d.dim() == 4);
    CHECK(d.features.data[0] == doctest::Approx(0.0));
    CHECK(d.features.data[1] == doctest::Approx(1.0));
    CHECK(d.features.data[2] == doctest::Approx(128.0 / 255.0));
    CHECK(d.labels[0] == 3);
    CHECK(d.labels[1] == 1);
    CHECK(d.num_classes >= 4);
}

TEST_CASE("IDX limit truncates from the front") {
    std::vector<uint8_t> pixels(4 * 3, 7);
    for (size_t i = 0; i < 4; ++i) pixels[i * 3] = static_cast<uint8_t>(i * 10);
    TempFile fi("imgs_lim", idx_images(pixels, 4, 1, 3));
    TempFile fl("labs_lim", idx_labels({0, 1, 2, 3}));
    Dataset d = load_mnist_idx(fi.path, fl.path, 2);
    CHECK(d.size() == 2);
    CHECK(d.labels == std::vector<int>{0, 1});
    CHECK(d.features.data[0] == doctest::Approx(0.0));
    CHECK(d.features.data[3] == doctest::Approx(10.0 / 255.0));
}

TEST_CASE("IDX rejects bad magic, count mismatch, and truncation") {
    std::vector<uint8_t> pixels(4, 1);
    TempFile good_l("l_ok", idx_labels({1, 2}));
    TempFile bad_magic("i_badmagic", idx_images(pixels, 1, 2, 2, 0x0804));
    CHECK_THROWS_AS(load_mnist_idx(bad_magic.path, good_l.path, 0), ContractError);

    TempFile good_i("i_ok", idx_images(pixels, 1, 2, 2));
    TempFile bad_count("l_count", idx_labels({1, 2, 3}));
    CHECK_THROWS_AS(load_mnist_idx(good_i.path, bad_count.path, 0), ContractError);

    std::string truncated = idx_images(pixels, 2, 2, 2); // claims 2 images, has 1
    TempFile short_i("i_short", truncated);
    TempFile two_l("l_two", idx_labels({1, 2}));
    CHECK_THROWS_AS(load_mnist_idx(short_i.path, two_l.path, 0), ContractError);

    CHECK_THROWS_AS(load_mnist_idx("/nonexistent/p.idx", good_l.path, 0), ContractError);
}

TEST_CASE("digest reacts to label flips") {
    Dataset d = gen_two_moons(50, 0.1, 2);
    const uint64_t before = dataset_digest(d);
    d.labels[0] ^= 1;
    CHECK(dataset_digest(d) != before);
}

TEST_CASE("row gathering preserves order") {
    Dataset d = gen_two_moons(10, 0.1, 3);
    std::vector<int> idx = {4, 1, 7};
    TensorData f = d.features_at(idx);
    std::vector<int> l = d.labels_at(idx);
    REQUIRE(f.shape == std::vector<int>{3, 2});
    for (int r = 0; r < 3; ++r) {
        CHECK(f.data[static_cast<size_t>(r) * 2] ==
              d.features.data[static_cast<size_t>(idx[static_cast<size_t>(r)]) * 2]);
        CHECK(l[static_cast<size_t>(r)] == d.labels[static_cast<size_t>(idx[static_cast<size_t>(r)])]);
    }
}

#include "fastbat/checkpoint.hpp"

TEST_CASE("checkpoints round-trip layout and float32 values") {
    ParamVector p;
    p.add_segment("layer0.W", {2, 3});
    p.add_segment("layer0.b", {3});
    Rng rng(77);
    for (double& v : p.values()) v = rng.uniform(-1, 1);
    const std::string path = "/tmp/fastbat_test_ckpt.bin";
    save_checkpoint(path, p);
    ParamVector q = load_checkpoint(path);
    std::remove(path.c_str());
    REQUIRE(q.same_layout(p));
    for (size_t i = 0; i < p.values().size(); ++i)
        CHECK(q.values()[i] == static_cast<double>(static_cast<float>(p.values()[i])));
    CHECK_THROWS_AS(load_checkpoint("/tmp/definitely_missing_ckpt.bin"), ContractError);
}
