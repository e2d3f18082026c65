#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gswan/array.hpp"

namespace gswan::diff {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Array& value() const;
    const Array& grad() const;
    // by value: the node store may reallocate as later ops are recorded
    Shape shape() const { return value().shape(); }
};

struct Node {
    std::string op;
    std::vector<int> inputs;
    Array value;
    Array grad;  // same shape as value, zero until backward()
    std::function<void(Tape&, const Node&)> backward;  // empty for leaves
};

// Reverse-mode computation graph. Nodes are appended in topological
// (creation) order; backward() sweeps them in reverse. A tape is confined
// to one thread; independent tapes may run in parallel.
class Tape {
public:
    Var leaf(Array value, std::string name = "leaf");

    const Array& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    const Array& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
    Array& grad_mut(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // Reverse sweep from a scalar loss; gradients accumulate additively
    // across fan-out. All grads are re-zeroed at the start of the sweep.
    void backward(Var loss);

    Var emplace(std::string op, std::vector<int> inputs, Array value,
                std::function<void(Tape&, const Node&)> backward);

private:
    std::vector<Node> nodes_;
};

enum class Act { Mish, Sigmoid, Tanh, Relu };
enum class BnMode { Train, Eval };

// Running statistics for one batch-norm layer; owned outside the tape.
struct BatchNormState {
    Array running_mean;  // [C]
    Array running_var;   // [C]
    explicit BatchNormState(std::int64_t channels = 0)
        : running_mean(Shape{channels}), running_var(Shape{channels}, 1.0) {}
};

// elementwise, with trailing-axis broadcasting (extents equal or 1)
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var abs(Var a);
Var activation(Var x, Act kind);
inline Var mish(Var x) { return activation(x, Act::Mish); }
inline Var sigmoid(Var x) { return activation(x, Act::Sigmoid); }
inline Var tanh(Var x) { return activation(x, Act::Tanh); }
inline Var relu(Var x) { return activation(x, Act::Relu); }

// batched matrix product a[..,m,p] * b[..,p,n]; leading extents equal or 1
Var matmul(Var a, Var b);
Var transpose_last2(Var a);

// valid dilated convolution along the last axis, kernel w[C_out,C_in,1,k],
// input x[B,C_in,N,L]; output length L - dilation*(k-1)
Var conv1d(Var x, Var w, int dilation);

// numerically stabilized softmax with temperature along one axis
Var softmax(Var x, double tau, int axis);

// x[B,C,N,L], per-channel gamma/beta[C]; train mode uses batch statistics
// over (B,N,L) and updates `state` with the given momentum
Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, BnMode mode,
               double eps = 1e-5, double momentum = 0.1);

// graph propagation: x[B,D,N,L] through m[N,N] or m[B,N,N];
// out[b,d,w,l] = sum_v x[b,d,v,l] * m[(b,)v,w]
Var propagate(Var x, Var m);

Var concat_channels(const std::vector<Var>& xs);
Var slice(Var x, int axis, std::int64_t start, std::int64_t len);
Var reshape(Var x, Shape shape);
Var pad_last_left(Var x, std::int64_t n);
Var reduce_mean_axis(Var x, int axis);  // drops the axis
Var sum_all(Var x);
Var mean_all(Var x);

}  // namespace gswan::diff
