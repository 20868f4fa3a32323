#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fastbat/tensor.hpp"

namespace fastbat {

// Feature matrix in [0,1] plus integer labels; train/test index split.
struct Dataset {
    TensorData features; // [N, d]
    std::vector<int> labels;
    std::vector<int> train_idx;
    std::vector<int> test_idx;
    int num_classes = 0;
    std::string provenance;

    int size() const { return features.shape.empty() ? 0 : features.shape[0]; }
    int dim() const { return features.shape.size() == 2 ? features.shape[1] : 0; }

    // Features/labels for a list of row indices.
    TensorData features_at(const std::vector<int>& idx) const;
    std::vector<int> labels_at(const std::vector<int>& idx) const;
};

// Two interleaved half-circles with Gaussian noise, rescaled into [0,1]^2.
Dataset gen_two_moons(int n, double noise, uint64_t seed);

// Isotropic Gaussian blobs around `centers` class centres, rescaled into
// [0,1]^dim.
Dataset gen_blobs(int n, int centers, double spread, uint64_t seed, int dim = 2);

// Bit-exact IDX ingestion: images magic 0x00000803, labels magic 0x00000801,
// big-endian u32 counts/dims, u8 pixels scaled by 1/255. limit > 0 truncates
// from the front.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path, int limit);

// FNV-1a digest of features+labels; pinned by golden-value tests.
uint64_t dataset_digest(const Dataset& ds);

} // namespace fastbat
