#pragma once

#include <string>
#include <vector>

#include "fastbat/tensor.hpp"

namespace fastbat {

// Flattened view of all model parameters with named-tensor round-tripping.
// Offsets are contiguous and non-overlapping by construction.
class ParamVector {
  public:
    struct Segment {
        std::string name;
        std::vector<int> shape;
        int64_t offset = 0;
    };

    ParamVector() = default;

    // Appends a named segment; returns its index.
    int add_segment(std::string name, std::vector<int> shape);

    int num_segments() const { return static_cast<int>(segments_.size()); }
    const Segment& segment(int i) const { return segments_.at(i); }
    int64_t size() const { return static_cast<int64_t>(values_.size()); }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    TensorData unpack(int i) const;
    void pack(int i, const TensorData& t);

    bool same_layout(const ParamVector& o) const;
    bool all_finite() const;

  private:
    std::vector<Segment> segments_;
    std::vector<double> values_;
};

// Elementwise helpers on flat parameter buffers.
double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);
double norm_inf(const std::vector<double>& a);
void axpy(double c, const std::vector<double>& x, std::vector<double>& y); // y += c x

} // namespace fastbat
