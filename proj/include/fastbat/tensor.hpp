#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastbat {

// Thrown when an operation's preconditions are violated (shape mismatch,
// out-of-range label, non-scalar objective, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on numerical failures (CG non-convergence, NaN loss, ...).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major tensor of 64-bit floats. Rank 0 (scalar), 1 and 2 are the
// shapes that actually occur; the op set below is fixed accordingly.
struct TensorData {
    std::vector<int> shape;
    std::vector<double> data;

    TensorData() = default;
    TensorData(std::vector<int> s, std::vector<double> d);

    static TensorData scalar(double v);
    static TensorData zeros(std::vector<int> s);
    static TensorData filled(std::vector<int> s, double v);

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int rows() const;
    int cols() const;
    bool same_shape(const TensorData& o) const { return shape == o.shape; }
    double item() const;
    bool all_finite() const;
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

enum class Op {
    kLeaf,
    kAdd,
    kSub,
    kMul,         // elementwise, same shape
    kDiv,         // elementwise, same shape
    kScale,       // constant * tensor
    kSMul,        // scalar node * tensor node
    kMatMul,      // [m,k] x [k,n]
    kTranspose,   // [m,n] -> [n,m]
    kAddRow,      // [m,n] + row [n]
    kColSum,      // [m,n] -> [n]
    kRowSum,      // [m,n] -> [m,1]
    kRowBcast,    // [m,1] -> [m,n]
    kRowFromBcast,// [n] -> [m,n]
    kBcastScalar, // scalar -> filled shape
    kSumAll,
    kMeanAll,
    kRelu,
    kReluMaskMul, // 1[x>0] . g  (derivative w.r.t. x defined as zero)
    kSoftplus,
    kSigmoid,
    kSqrt,
    kSoftmax,         // rowwise
    kSoftmaxXentMean, // fused mean_i(logsumexp(z_i) - z_{i,y_i})
};

using ValueId = int;

// Append-only record of primitive operations. Values are computed eagerly at
// record time. gradient() emits the backward pass as new nodes on the same
// tape, so gradients are themselves differentiable (closure under
// differentiation for the whole op set).
class Tape {
  public:
    ValueId leaf(TensorData t);
    ValueId scalar(double v) { return leaf(TensorData::scalar(v)); }

    ValueId add(ValueId a, ValueId b);
    ValueId sub(ValueId a, ValueId b);
    ValueId mul(ValueId a, ValueId b);
    ValueId div(ValueId a, ValueId b);
    ValueId scale(double c, ValueId a);
    ValueId smul(ValueId s, ValueId a);
    ValueId matmul(ValueId a, ValueId b);
    ValueId transpose(ValueId a);
    ValueId add_row(ValueId m, ValueId row);
    ValueId col_sum(ValueId a);
    ValueId row_sum(ValueId a);
    ValueId row_bcast(ValueId a, int n);
    ValueId row_from_bcast(ValueId row, int m);
    ValueId bcast_scalar(ValueId s, std::vector<int> shape);
    ValueId sum_all(ValueId a);
    ValueId mean_all(ValueId a);
    ValueId relu(ValueId a);
    ValueId relu_mask_mul(ValueId x, ValueId g);
    ValueId softplus(ValueId a);
    ValueId sigmoid(ValueId a);
    ValueId swish(ValueId a); // composition a * sigmoid(a)
    ValueId sqrt(ValueId a);
    ValueId softmax(ValueId a);
    // labels must be in [0, cols); stored as a constant, not a node.
    ValueId softmax_xent_mean(ValueId logits, std::vector<int> labels);

    const TensorData& val(ValueId id) const { return nodes_[check(id)].val; }
    size_t num_nodes() const { return nodes_.size(); }

    // Reverse-mode gradients of scalar node f w.r.t. the given nodes; results
    // are node ids on this tape (differentiable again). Nodes f does not
    // depend on get zero-filled gradients.
    std::vector<ValueId> gradient(ValueId f, std::span<const ValueId> wrt);

  private:
    struct Node {
        Op op;
        ValueId a = -1;
        ValueId b = -1;
        double c = 0.0;
        std::vector<int> labels; // kSoftmaxXentMean only
        TensorData val;
    };

    ValueId push(Node n);
    int check(ValueId id) const;
    ValueId zeros_like(ValueId a);

    std::vector<Node> nodes_;
};

// Convenience wrapper binding a node id to its tape, with operators used by
// the model code.
struct Var {
    Tape* tape = nullptr;
    ValueId id = -1;

    Var() = default;
    Var(Tape& t, ValueId i) : tape(&t), id(i) {}
    const TensorData& val() const { return tape->val(id); }
};

inline Var operator+(Var a, Var b) { return {*a.tape, a.tape->add(a.id, b.id)}; }
inline Var operator-(Var a, Var b) { return {*a.tape, a.tape->sub(a.id, b.id)}; }
inline Var operator*(Var a, Var b) { return {*a.tape, a.tape->mul(a.id, b.id)}; }
inline Var operator*(double c, Var a) { return {*a.tape, a.tape->scale(c, a.id)}; }
inline Var matmul(Var a, Var b) { return {*a.tape, a.tape->matmul(a.id, b.id)}; }

} // namespace fastbat
