#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vlfsig/errors.hpp"

namespace vlfsig {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

namespace detail {
struct TensorData {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    bool is_leaf = true;
    std::uint64_t id = 0;
};
}  // namespace detail

// Shared handle to a dense double-precision array. Copies alias the same
// storage; a Tensor participating in a Graph keeps its gradient accumulator
// on the shared node, so parameters can be updated between steps while the
// handle stays live.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double fill, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const;
    int rank() const { return static_cast<int>(shape().size()); }
    int dim(int i) const;
    std::int64_t size() const;

    std::span<const double> values() const;
    // Mutating values is only legal on leaves (parameters, inputs); op outputs
    // are owned by the recording graph.
    std::span<double> values_mut();

    bool requires_grad() const;
    void set_requires_grad(bool rg);
    bool is_leaf() const;

    bool has_grad() const;
    std::span<const double> grad() const;  // throws StateError when absent
    std::span<double> grad_mut();          // allocates a zeroed accumulator on demand
    void zero_grad();

    std::uint64_t id() const;
    double item() const;  // scalar tensors only

private:
    friend class Graph;
    static Tensor op_output(Shape shape, bool requires_grad);
    detail::TensorData* node() const { return d_.get(); }

    std::shared_ptr<detail::TensorData> d_;
};

// Tape of recorded operations. Forward calls compute immediately and append a
// backward closure when any input requires a gradient. One graph is confined
// to one thread; independent graphs may run concurrently.
class Graph {
public:
    explicit Graph(bool record = true) : record_(record) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // --- primitive operations ---
    Tensor matmul(const Tensor& a, const Tensor& b);
    // op(a)·op(b) with optional transposes; public matmul is (false,false).
    Tensor matmul_ex(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b);

    // x:[Cin,L], w:[Cout,Cin,K], b:[Cout]; symmetric zero padding.
    Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
    // Asymmetric variant; pad_right may be negative (crops the input tail).
    Tensor conv1d_asym(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                       int pad_left, int pad_right);

    Tensor softmax(const Tensor& x, int axis);
    Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

    Tensor add(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor relu(const Tensor& x);
    Tensor scale(const Tensor& x, double c);
    Tensor mean(const Tensor& x);       // -> scalar [1]
    Tensor mean_rows(const Tensor& x);  // [T,D] -> [1,D]
    // x:[C,L] -> [C,target_len]; output index j reads input floor(j*L/target_len).
    Tensor upsample_nearest(const Tensor& x, int target_len);

    Tensor add_bias(const Tensor& x, const Tensor& b);  // [T,D] + [D] per row
    Tensor transpose(const Tensor& x);                  // [R,C] -> [C,R]
    Tensor reshape(const Tensor& x, Shape shape);
    Tensor concat_rows(std::span<const Tensor> parts);
    Tensor concat_cols(std::span<const Tensor> parts);
    Tensor slice_cols(const Tensor& x, int c0, int c1);
    // [N,C,L] -> [C,L] plane at index n (batch record extraction).
    Tensor slice_plane(const Tensor& x, int n);

    // softmax(alpha · q·kᵀ) in one op; the [T,T] weight matrix is the only
    // saved activation, which matters at 468 tokens.
    Tensor attend_scaled(const Tensor& q, const Tensor& k, double alpha);

    // mean over rows of -log softmax(logits)[label]; log-sum-exp stabilized.
    Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

    void backward(const Tensor& loss);

    bool recording() const { return record_; }
    bool consumed() const { return consumed_; }
    std::size_t op_count() const { return tape_.size(); }
    // Tape inspection for structural checks: (input ids, output id) per op.
    std::vector<std::pair<std::vector<std::uint64_t>, std::uint64_t>> topology() const;

private:
    struct OpRecord {
        std::shared_ptr<detail::TensorData> out;
        std::vector<std::shared_ptr<detail::TensorData>> inputs;
        std::function<void()> back;
    };

    bool wants_grad(std::initializer_list<const Tensor*> inputs) const;
    void push(Tensor& out, std::initializer_list<const Tensor*> inputs, std::function<void()> back);

    std::vector<OpRecord> tape_;
    bool record_;
    bool consumed_ = false;
};

}  // namespace vlfsig
