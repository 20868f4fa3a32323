#include "fastbat/param_vector.hpp"

#include <cmath>

namespace fastbat {

int ParamVector::add_segment(std::string name, std::vector<int> shape) {
    Segment s;
    s.name = std::move(name);
    s.shape = std::move(shape);
    s.offset = size();
    const int64_t n = shape_numel(s.shape);
    segments_.push_back(std::move(s));
    values_.resize(values_.size() + static_cast<size_t>(n), 0.0);
    return num_segments() - 1;
}

TensorData ParamVector::unpack(int i) const {
    const Segment& s = segment(i);
    const int64_t n = shape_numel(s.shape);
    std::vector<double> d(values_.begin() + s.offset, values_.begin() + s.offset + n);
    return TensorData(s.shape, std::move(d));
}

void ParamVector::pack(int i, const TensorData& t) {
    const Segment& s = segment(i);
    if (t.shape != s.shape)
        throw ContractError("ParamVector::pack: shape mismatch for segment '" + s.name + "'");
    std::copy(t.data.begin(), t.data.end(), values_.begin() + s.offset);
}

bool ParamVector::same_layout(const ParamVector& o) const {
    if (num_segments() != o.num_segments()) return false;
    for (int i = 0; i < num_segments(); ++i) {
        if (segments_[i].name != o.segments_[i].name || segments_[i].shape != o.segments_[i].shape)
            return false;
    }
    return true;
}

bool ParamVector::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ContractError("dot: length mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

void axpy(double c, const std::vector<double>& x, std::vector<double>& y) {
    if (x.size() != y.size()) throw ContractError("axpy: length mismatch");
    for (size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

} // namespace fastbat
