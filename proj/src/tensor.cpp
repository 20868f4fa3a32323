#include "fastbat/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fastbat {

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

TensorData::TensorData(std::vector<int> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw ContractError("TensorData: shape " + shape_str(shape) + " does not match data length " +
                            std::to_string(data.size()));
}

TensorData TensorData::scalar(double v) { return TensorData({}, {v}); }

TensorData TensorData::zeros(std::vector<int> s) {
    auto n = shape_numel(s);
    return TensorData(std::move(s), std::vector<double>(static_cast<size_t>(n), 0.0));
}

TensorData TensorData::filled(std::vector<int> s, double v) {
    auto n = shape_numel(s);
    return TensorData(std::move(s), std::vector<double>(static_cast<size_t>(n), v));
}

int TensorData::rows() const {
    if (shape.size() != 2) throw ContractError("rows(): tensor is not rank 2");
    return shape[0];
}

int TensorData::cols() const {
    if (shape.size() != 2) throw ContractError("cols(): tensor is not rank 2");
    return shape[1];
}

double TensorData::item() const {
    if (data.size() != 1) throw ContractError("item(): tensor is not a scalar");
    return data[0];
}

bool TensorData::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

int Tape::check(ValueId id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
        throw ContractError("Tape: invalid node id " + std::to_string(id));
    return id;
}

ValueId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<ValueId>(nodes_.size() - 1);
}

ValueId Tape::leaf(TensorData t) {
    Node n;
    n.op = Op::kLeaf;
    n.val = std::move(t);
    return push(std::move(n));
}

ValueId Tape::zeros_like(ValueId a) { return leaf(TensorData::zeros(val(a).shape)); }

namespace {

void require_same_shape(const TensorData& a, const TensorData& b, const char* op) {
    if (!a.same_shape(b))
        throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                            shape_str(b.shape));
}

} // namespace

ValueId Tape::add(ValueId a, ValueId b) {
    require_same_shape(val(a), val(b), "add");
    Node n{Op::kAdd, a, b};
    n.val = val(a);
    const auto& vb = val(b).data;
    for (size_t i = 0; i < n.val.data.size(); ++i) n.val.data[i] += vb[i];
    return push(std::move(n));
}

ValueId Tape::sub(ValueId a, ValueId b) {
    require_same_shape(val(a), val(b), "sub");
    Node n{Op::kSub, a, b};
    n.val = val(a);
    const auto& vb = val(b).data;
    for (size_t i = 0; i < n.val.data.size(); ++i) n.val.data[i] -= vb[i];
    return push(std::move(n));
}

ValueId Tape::mul(ValueId a, ValueId b) {
    require_same_shape(val(a), val(b), "mul");
    Node n{Op::kMul, a, b};
    n.val = val(a);
    const auto& vb = val(b).data;
    for (size_t i = 0; i < n.val.data.size(); ++i) n.val.data[i] *= vb[i];
    return push(std::move(n));
}

ValueId Tape::div(ValueId a, ValueId b) {
    require_same_shape(val(a), val(b), "div");
    Node n{Op::kDiv, a, b};
    n.val = val(a);
    const auto& vb = val(b).data;
    for (size_t i = 0; i < n.val.data.size(); ++i) n.val.data[i] /= vb[i];
    return push(std::move(n));
}

ValueId Tape::scale(double c, ValueId a) {
    Node n{Op::kScale, a, -1, c};
    n.val = val(a);
    for (double& v : n.val.data) v *= c;
    return push(std::move(n));
}

ValueId Tape::smul(ValueId s, ValueId a) {
    if (val(s).data.size() != 1) throw ContractError("smul: first argument must be a scalar");
    Node n{Op::kSMul, s, a};
    const double c = val(s).data[0];
    n.val = val(a);
    for (double& v : n.val.data) v *= c;
    return push(std::move(n));
}

ValueId Tape::matmul(ValueId a, ValueId b) {
    const auto& A = val(a);
    const auto& B = val(b);
    if (A.shape.size() != 2 || B.shape.size() != 2 || A.cols() != B.rows())
        throw ContractError("matmul: incompatible shapes " + shape_str(A.shape) + " x " +
                            shape_str(B.shape));
    const int m = A.rows(), k = A.cols(), p = B.cols();
    Node n{Op::kMatMul, a, b};
    n.val = TensorData::zeros({m, p});
    const double* pa = A.data.data();
    const double* pb = B.data.data();
    double* pc = n.val.data.data();
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
            const double aik = pa[i * k + l];
            if (aik == 0.0) continue;
            const double* brow = pb + l * p;
            double* crow = pc + i * p;
            for (int j = 0; j < p; ++j) crow[j] += aik * brow[j];
        }
    }
    return push(std::move(n));
}

ValueId Tape::transpose(ValueId a) {
    const auto& A = val(a);
    if (A.shape.size() != 2) throw ContractError("transpose: rank-2 tensor required");
    const int m = A.rows(), k = A.cols();
    Node n{Op::kTranspose, a};
    n.val = TensorData::zeros({k, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) n.val.data[j * m + i] = A.data[i * k + j];
    return push(std::move(n));
}

ValueId Tape::add_row(ValueId m, ValueId row) {
    const auto& M = val(m);
    const auto& R = val(row);
    if (M.shape.size() != 2 || R.shape.size() != 1 || R.shape[0] != M.cols())
        throw ContractError("add_row: shapes " + shape_str(M.shape) + " + " + shape_str(R.shape));
    Node n{Op::kAddRow, m, row};
    n.val = M;
    const int rows = M.rows(), cols = M.cols();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) n.val.data[i * cols + j] += R.data[j];
    return push(std::move(n));
}

ValueId Tape::col_sum(ValueId a) {
    const auto& A = val(a);
    if (A.shape.size() != 2) throw ContractError("col_sum: rank-2 tensor required");
    Node n{Op::kColSum, a};
    n.val = TensorData::zeros({A.cols()});
    const int rows = A.rows(), cols = A.cols();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) n.val.data[j] += A.data[i * cols + j];
    return push(std::move(n));
}

ValueId Tape::row_sum(ValueId a) {
    const auto& A = val(a);
    if (A.shape.size() != 2) throw ContractError("row_sum: rank-2 tensor required");
    Node n{Op::kRowSum, a};
    n.val = TensorData::zeros({A.rows(), 1});
    const int rows = A.rows(), cols = A.cols();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) n.val.data[i] += A.data[i * cols + j];
    return push(std::move(n));
}

ValueId Tape::row_bcast(ValueId a, int ncols) {
    const auto& A = val(a);
    if (A.shape.size() != 2 || A.cols() != 1)
        throw ContractError("row_bcast: [m,1] tensor required, got " + shape_str(A.shape));
    Node n{Op::kRowBcast, a};
    n.val = TensorData::zeros({A.rows(), ncols});
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < ncols; ++j) n.val.data[i * ncols + j] = A.data[i];
    return push(std::move(n));
}

ValueId Tape::row_from_bcast(ValueId row, int m) {
    const auto& R = val(row);
    if (R.shape.size() != 1) throw ContractError("row_from_bcast: rank-1 tensor required");
    const int cols = R.shape[0];
    Node n{Op::kRowFromBcast, row};
    n.val = TensorData::zeros({m, cols});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < cols; ++j) n.val.data[i * cols + j] = R.data[j];
    return push(std::move(n));
}

ValueId Tape::bcast_scalar(ValueId s, std::vector<int> shape) {
    if (val(s).data.size() != 1) throw ContractError("bcast_scalar: scalar node required");
    Node n{Op::kBcastScalar, s};
    n.val = TensorData::filled(std::move(shape), val(s).data[0]);
    return push(std::move(n));
}

ValueId Tape::sum_all(ValueId a) {
    Node n{Op::kSumAll, a};
    const auto& d = val(a).data;
    n.val = TensorData::scalar(std::accumulate(d.begin(), d.end(), 0.0));
    return push(std::move(n));
}

ValueId Tape::mean_all(ValueId a) {
    Node n{Op::kMeanAll, a};
    const auto& d = val(a).data;
    n.val = TensorData::scalar(std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size()));
    return push(std::move(n));
}

ValueId Tape::relu(ValueId a) {
    Node n{Op::kRelu, a};
    n.val = val(a);
    for (double& v : n.val.data) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
}

ValueId Tape::relu_mask_mul(ValueId x, ValueId g) {
    require_same_shape(val(x), val(g), "relu_mask_mul");
    Node n{Op::kReluMaskMul, x, g};
    n.val = val(g);
    const auto& vx = val(x).data;
    for (size_t i = 0; i < n.val.data.size(); ++i)
        if (vx[i] <= 0.0) n.val.data[i] = 0.0;
    return push(std::move(n));
}

ValueId Tape::softplus(ValueId a) {
    Node n{Op::kSoftplus, a};
    n.val = val(a);
    for (double& v : n.val.data) {
        // log(1+e^v), overflow-safe
        v = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    }
    return push(std::move(n));
}

ValueId Tape::sigmoid(ValueId a) {
    Node n{Op::kSigmoid, a};
    n.val = val(a);
    for (double& v : n.val.data) {
        v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    return push(std::move(n));
}

ValueId Tape::swish(ValueId a) { return mul(a, sigmoid(a)); }

ValueId Tape::sqrt(ValueId a) {
    Node n{Op::kSqrt, a};
    n.val = val(a);
    for (double& v : n.val.data) v = std::sqrt(v);
    return push(std::move(n));
}

ValueId Tape::softmax(ValueId a) {
    const auto& A = val(a);
    if (A.shape.size() != 2) throw ContractError("softmax: rank-2 tensor required");
    Node n{Op::kSoftmax, a};
    n.val = A;
    const int rows = A.rows(), cols = A.cols();
    for (int i = 0; i < rows; ++i) {
        double* r = n.val.data.data() + static_cast<size_t>(i) * cols;
        const double mx = *std::max_element(r, r + cols);
        double z = 0.0;
        for (int j = 0; j < cols; ++j) {
            r[j] = std::exp(r[j] - mx);
            z += r[j];
        }
        for (int j = 0; j < cols; ++j) r[j] /= z;
    }
    return push(std::move(n));
}

ValueId Tape::softmax_xent_mean(ValueId logits, std::vector<int> labels) {
    const auto& Z = val(logits);
    if (Z.shape.size() != 2) throw ContractError("softmax_xent_mean: rank-2 logits required");
    const int rows = Z.rows(), cols = Z.cols();
    if (static_cast<int>(labels.size()) != rows)
        throw ContractError("softmax_xent_mean: label count " + std::to_string(labels.size()) +
                            " != batch size " + std::to_string(rows));
    for (int y : labels)
        if (y < 0 || y >= cols)
            throw ContractError("softmax_xent_mean: label " + std::to_string(y) + " out of range [0," +
                                std::to_string(cols) + ")");
    double total = 0.0;
    for (int i = 0; i < rows; ++i) {
        const double* r = Z.data.data() + static_cast<size_t>(i) * cols;
        const double mx = *std::max_element(r, r + cols);
        double z = 0.0;
        for (int j = 0; j < cols; ++j) z += std::exp(r[j] - mx);
        total += mx + std::log(z) - r[labels[i]];
    }
    Node n{Op::kSoftmaxXentMean, logits};
    n.labels = std::move(labels);
    n.val = TensorData::scalar(total / rows);
    return push(std::move(n));
}

std::vector<ValueId> Tape::gradient(ValueId f, std::span<const ValueId> wrt) {
    if (val(check(f)).data.size() != 1)
        throw ContractError("gradient: objective must be scalar, got " + shape_str(val(f).shape));
    // grad[i] holds the node id of d f / d node_i, or -1 if untouched.
    std::vector<ValueId> grad(f + 1, -1);
    grad[f] = leaf(TensorData::filled(val(f).shape, 1.0));

    auto accum = [&](ValueId target, ValueId g) {
        if (target > f) throw ContractError("gradient: tape ordering violated");
        grad[target] = grad[target] < 0 ? g : add(grad[target], g);
    };

    for (ValueId i = f; i >= 0; --i) {
        const ValueId g = grad[i];
        if (g < 0) continue;
        // Snapshot: nodes_ grows while we append backward ops.
        const Op op = nodes_[i].op;
        const ValueId a = nodes_[i].a, b = nodes_[i].b;
        const double c = nodes_[i].c;
        switch (op) {
            case Op::kLeaf:
                break;
            case Op::kAdd:
                accum(a, g);
                accum(b, g);
                break;
            case Op::kSub:
                accum(a, g);
                accum(b, scale(-1.0, g));
                break;
            case Op::kMul:
                accum(a, mul(g, b));
                accum(b, mul(g, a));
                break;
            case Op::kDiv:
                accum(a, div(g, b));
                accum(b, scale(-1.0, div(mul(g, i), b)));
                break;
            case Op::kScale:
                accum(a, scale(c, g));
                break;
            case Op::kSMul:
                accum(a, sum_all(mul(g, b)));
                accum(b, smul(a, g));
                break;
            case Op::kMatMul:
                accum(a, matmul(g, transpose(b)));
                accum(b, matmul(transpose(a), g));
                break;
            case Op::kTranspose:
                accum(a, transpose(g));
                break;
            case Op::kAddRow:
                accum(a, g);
                accum(b, col_sum(g));
                break;
            case Op::kColSum:
                accum(a, row_from_bcast(g, val(a).rows()));
                break;
            case Op::kRowSum:
                accum(a, row_bcast(g, val(a).cols()));
                break;
            case Op::kRowBcast:
                accum(a, row_sum(g));
                break;
            case Op::kRowFromBcast:
                accum(a, col_sum(g));
                break;
            case Op::kBcastScalar:
                accum(a, sum_all(g));
                break;
            case Op::kSumAll:
                accum(a, bcast_scalar(g, val(a).shape));
                break;
            case Op::kMeanAll:
                accum(a, scale(1.0 / static_cast<double>(val(a).size()),
                               bcast_scalar(g, val(a).shape)));
                break;
            case Op::kRelu:
                accum(a, relu_mask_mul(a, g));
                break;
            case Op::kReluMaskMul:
                // d/dx is defined as zero everywhere (second derivative of relu).
                accum(b, relu_mask_mul(a, g));
                break;
            case Op::kSoftplus:
                accum(a, mul(g, sigmoid(a)));
                break;
            case Op::kSigmoid: {
                // s' = s (1 - s); i is the output node.
                ValueId one = leaf(TensorData::filled(val(i).shape, 1.0));
                accum(a, mul(mul(g, i), sub(one, i)));
                break;
            }
            case Op::kSqrt:
                accum(a, div(g, scale(2.0, i)));
                break;
            case Op::kSoftmax: {
                // ds = s . (g - rowsum(g.s))
                ValueId gs = mul(g, i);
                ValueId corr = row_bcast(row_sum(gs), val(i).cols());
                accum(a, mul(i, sub(g, corr)));
                break;
            }
            case Op::kSoftmaxXentMean: {
                // dz = g/B . (softmax(z) - onehot)
                const auto& labels = nodes_[i].labels;
                const int rows = val(a).rows(), cols = val(a).cols();
                TensorData onehot = TensorData::zeros({rows, cols});
                for (int r = 0; r < rows; ++r) onehot.data[r * cols + labels[r]] = 1.0;
                ValueId diff = sub(softmax(a), leaf(std::move(onehot)));
                accum(a, smul(g, scale(1.0 / rows, diff)));
                break;
            }
        }
    }

    std::vector<ValueId> out;
    out.reserve(wrt.size());
    for (ValueId w : wrt) {
        check(w);
        if (w <= f && grad[w] >= 0)
            out.push_back(grad[w]);
        else
            out.push_back(zeros_like(w));
    }
    return out;
}

} // namespace fastbat
