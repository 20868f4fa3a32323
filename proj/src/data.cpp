#include "fastbat/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "fastbat/rng.hpp"

namespace fastbat {

TensorData Dataset::features_at(const std::vector<int>& idx) const {
    const int d = dim();
    TensorData out = TensorData::zeros({static_cast<int>(idx.size()), d});
    for (size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= size()) throw ContractError("features_at: index out of range");
        std::copy(features.data.begin() + static_cast<int64_t>(idx[r]) * d,
                  features.data.begin() + static_cast<int64_t>(idx[r] + 1) * d,
                  out.data.begin() + static_cast<int64_t>(r) * d);
    }
    return out;
}

std::vector<int> Dataset::labels_at(const std::vector<int>& idx) const {
    std::vector<int> out(idx.size());
    for (size_t r = 0; r < idx.size(); ++r) out[r] = labels.at(idx[r]);
    return out;
}

namespace {

// Affine rescale of each feature column into [0,1].
void rescale_unit(TensorData& f) {
    const int n = f.rows(), d = f.cols();
    for (int j = 0; j < d; ++j) {
        double lo = f.data[j], hi = f.data[j];
        for (int i = 0; i < n; ++i) {
            lo = std::min(lo, f.data[i * d + j]);
            hi = std::max(hi, f.data[i * d + j]);
        }
        const double span = hi - lo;
        for (int i = 0; i < n; ++i)
            f.data[i * d + j] = span > 0.0 ? (f.data[i * d + j] - lo) / span : 0.5;
    }
}

void split_train_test(Dataset& ds, Rng rng) {
    const int n = ds.size();
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    // Fisher-Yates with the dataset stream.
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(i + 1));
        std::swap(idx[i], idx[j]);
    }
    const int ntest = std::max(1, n / 5);
    ds.train_idx.assign(idx.begin(), idx.end() - ntest);
    ds.test_idx.assign(idx.end() - ntest, idx.end());
    if (ds.train_idx.empty()) { // n == 1 edge
        ds.train_idx = ds.test_idx;
    }
}

} // namespace

Dataset gen_two_moons(int n, double noise, uint64_t seed) {
    if (n < 2) throw ContractError("gen_two_moons: n must be >= 2");
    Rng rng(seed);
    Rng pts = rng.stream("moons");
    Dataset ds;
    ds.features = TensorData::zeros({n, 2});
    ds.labels.resize(n);
    ds.num_classes = 2;
    ds.provenance = "two_moons";
    const int n0 = n / 2 + (n % 2);
    for (int i = 0; i < n; ++i) {
        const bool outer = i < n0;
        const double t = M_PI * pts.next_double();
        double x = outer ? std::cos(t) : 1.0 - std::cos(t);
        double y = outer ? std::sin(t) : 0.5 - std::sin(t);
        x += noise * pts.next_gauss();
        y += noise * pts.next_gauss();
        ds.features.data[i * 2] = x;
        ds.features.data[i * 2 + 1] = y;
        ds.labels[i] = outer ? 0 : 1;
    }
    rescale_unit(ds.features);
    split_train_test(ds, rng.stream("split"));
    return ds;
}

Dataset gen_blobs(int n, int centers, double spread, uint64_t seed, int dim) {
    if (n < 2) throw ContractError("gen_blobs: n must be >= 2");
    if (centers < 1 || dim < 1) throw ContractError("gen_blobs: centers and dim must be positive");
    Rng rng(seed);
    Rng cs = rng.stream("centers");
    std::vector<double> centre(static_cast<size_t>(centers) * dim);
    for (double& v : centre) v = cs.next_double();
    Dataset ds;
    ds.features = TensorData::zeros({n, dim});
    ds.labels.resize(n);
    ds.num_classes = centers;
    ds.provenance = "gaussian_blobs";
    Rng pts = rng.stream("points");
    for (int i = 0; i < n; ++i) {
        const int c = i % centers;
        for (int j = 0; j < dim; ++j)
            ds.features.data[i * dim + j] = centre[c * dim + j] + spread * pts.next_gauss();
        ds.labels[i] = c;
    }
    rescale_unit(ds.features);
    split_train_test(ds, rng.stream("split"));
    return ds;
}

namespace {

uint32_t read_be_u32(std::istream& in, const std::string& path, int64_t offset) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw ContractError(path + ": truncated file, expected 4 bytes at offset " +
                            std::to_string(offset));
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

} // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path, int limit) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw ContractError("cannot open images file: " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw ContractError("cannot open labels file: " + labels_path);

    const uint32_t img_magic = read_be_u32(img, images_path, 0);
    if (img_magic != 0x00000803u) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "0x%08x", img_magic);
        throw ContractError(images_path + ": bad magic " + buf +
                            " at offset 0 (expected 0x00000803)");
    }
    const uint32_t lab_magic = read_be_u32(lab, labels_path, 0);
    if (lab_magic != 0x00000801u) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "0x%08x", lab_magic);
        throw ContractError(labels_path + ": bad magic " + buf +
                            " at offset 0 (expected 0x00000801)");
    }

    const uint32_t n_img = read_be_u32(img, images_path, 4);
    const uint32_t rows = read_be_u32(img, images_path, 8);
    const uint32_t cols = read_be_u32(img, images_path, 12);
    const uint32_t n_lab = read_be_u32(lab, labels_path, 4);
    if (n_img != n_lab)
        throw ContractError("image count " + std::to_string(n_img) + " (offset 4 of " + images_path +
                            ") != label count " + std::to_string(n_lab) + " (offset 4 of " +
                            labels_path + ")");

    uint32_t n = n_img;
    if (limit > 0 && static_cast<uint32_t>(limit) < n) n = static_cast<uint32_t>(limit);
    const int64_t d = static_cast<int64_t>(rows) * cols;

    Dataset ds;
    ds.provenance = "mnist_subset";
    ds.features = TensorData::zeros({static_cast<int>(n), static_cast<int>(d)});
    ds.labels.resize(n);

    std::vector<unsigned char> pix(static_cast<size_t>(d));
    for (uint32_t i = 0; i < n; ++i) {
        if (!img.read(reinterpret_cast<char*>(pix.data()), d))
            throw ContractError(images_path + ": truncated pixel data at offset " +
                                std::to_string(16 + static_cast<int64_t>(i) * d));
        for (int64_t j = 0; j < d; ++j)
            ds.features.data[static_cast<int64_t>(i) * d + j] = pix[j] / 255.0;
        unsigned char y;
        if (!lab.read(reinterpret_cast<char*>(&y), 1))
            throw ContractError(labels_path + ": truncated label data at offset " +
                                std::to_string(8 + static_cast<int64_t>(i)));
        ds.labels[i] = y;
    }
    ds.num_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    split_train_test(ds, Rng(0).stream("mnist_split"));
    return ds;
}

uint64_t dataset_digest(const Dataset& ds) {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const void* p, size_t len) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ull;
        }
    };
    mix(ds.features.data.data(), ds.features.data.size() * sizeof(double));
    mix(ds.labels.data(), ds.labels.size() * sizeof(int));
    return h;
}

} // namespace fastbat
