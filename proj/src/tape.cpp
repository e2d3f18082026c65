#include "gswan/tape.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "gswan/errors.hpp"

namespace gswan::diff {

const Array& Var::value() const { return tape->value(*this); }
const Array& Var::grad() const { return tape->grad(*this); }

Var Tape::leaf(Array value, std::string name) {
    return emplace(std::move(name), {}, std::move(value), nullptr);
}

Var Tape::emplace(std::string op, std::vector<int> inputs, Array value,
                  std::function<void(Tape&, const Node&)> backward) {
    Node n;
    n.op = std::move(op);
    n.inputs = std::move(inputs);
    n.grad = Array(value.shape());
    n.value = std::move(value);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss from a different tape");
    Node& top = nodes_[static_cast<std::size_t>(loss.id)];
    if (top.value.size() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got shape " + top.value.shape().str());
    }
    for (Node& n : nodes_) std::fill(n.grad.vec().begin(), n.grad.vec().end(), 0.0);
    top.grad[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.backward) n.backward(*this, n);
    }
}

namespace {

void check_same_tape(Var a, Var b, const char* op) {
    if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape) {
        throw std::invalid_argument(std::string(op) + ": operands from different tapes");
    }
}

// Trailing-axis broadcast plan, all extents/strides padded to rank 4.
struct BcPlan {
    Shape out;
    std::array<std::int64_t, 4> ext{1, 1, 1, 1};
    std::array<std::int64_t, 4> sa{0, 0, 0, 0};
    std::array<std::int64_t, 4> sb{0, 0, 0, 0};
};

std::array<std::int64_t, 4> padded_strides(const Shape& s, const std::array<std::int64_t, 4>& out_ext) {
    std::array<std::int64_t, 4> ext{1, 1, 1, 1};
    const int off = 4 - s.rank();
    for (int i = 0; i < s.rank(); ++i) ext[static_cast<std::size_t>(off + i)] = s[i];
    std::array<std::int64_t, 4> st{0, 0, 0, 0};
    std::int64_t acc = 1;
    for (int i = 3; i >= 0; --i) {
        st[static_cast<std::size_t>(i)] = (ext[static_cast<std::size_t>(i)] == 1) ? 0 : acc;
        acc *= ext[static_cast<std::size_t>(i)];
    }
    // broadcast axes keep stride 0; others must match the output extent
    for (int i = 0; i < 4; ++i) {
        if (ext[static_cast<std::size_t>(i)] != 1 && ext[static_cast<std::size_t>(i)] != out_ext[static_cast<std::size_t>(i)]) {
            throw std::invalid_argument("broadcast: incompatible extents");
        }
    }
    return st;
}

BcPlan broadcast_plan(const Shape& a, const Shape& b, const char* op) {
    const int rank = std::max(a.rank(), b.rank());
    std::vector<std::int64_t> out;
    out.resize(static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i) {
        const int ia = a.rank() - rank + i;
        const int ib = b.rank() - rank + i;
        const std::int64_t ea = ia >= 0 ? a[ia] : 1;
        const std::int64_t eb = ib >= 0 ? b[ib] : 1;
        if (ea == eb || ea == 1 || eb == 1) {
            out[static_cast<std::size_t>(i)] = std::max(ea, eb);
        } else {
            throw std::invalid_argument(std::string(op) + ": shapes " + a.str() + " and " + b.str() +
                                        " are not broadcastable");
        }
    }
    BcPlan p;
    p.out = Shape(out);
    const int off = 4 - rank;
    for (int i = 0; i < rank; ++i) p.ext[static_cast<std::size_t>(off + i)] = out[static_cast<std::size_t>(i)];
    p.sa = padded_strides(a, p.ext);
    p.sb = padded_strides(b, p.ext);
    return p;
}

template <class F>
void bc_for_each(const BcPlan& p, F f) {
    std::int64_t o = 0;
    for (std::int64_t i0 = 0; i0 < p.ext[0]; ++i0)
        for (std::int64_t i1 = 0; i1 < p.ext[1]; ++i1)
            for (std::int64_t i2 = 0; i2 < p.ext[2]; ++i2) {
                const std::int64_t ia0 = i0 * p.sa[0] + i1 * p.sa[1] + i2 * p.sa[2];
                const std::int64_t ib0 = i0 * p.sb[0] + i1 * p.sb[1] + i2 * p.sb[2];
                for (std::int64_t i3 = 0; i3 < p.ext[3]; ++i3, ++o) {
                    f(o, ia0 + i3 * p.sa[3], ib0 + i3 * p.sb[3]);
                }
            }
}

Var binary_op(Var a, Var b, const char* name, double (*fwd)(double, double),
              void (*bwd)(double g, double x, double y, double& gx, double& gy)) {
    check_same_tape(a, b, name);
    const BcPlan plan = broadcast_plan(a.shape(), b.shape(), name);
    Array out(plan.out);
    {
        const double* pa = a.value().data();
        const double* pb = b.value().data();
        double* po = out.data();
        bc_for_each(plan, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) { po[o] = fwd(pa[ia], pb[ib]); });
    }
    const int aid = a.id, bid = b.id;
    return a.tape->emplace(name, {aid, bid}, std::move(out), [plan, aid, bid, bwd](Tape& t, const Node& n) {
        const double* g = n.grad.data();
        const double* pa = t.node(aid).value.data();
        const double* pb = t.node(bid).value.data();
        double* ga = t.grad_mut(aid).data();
        double* gb = t.grad_mut(bid).data();
        bc_for_each(plan, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
            bwd(g[o], pa[ia], pb[ib], ga[ia], gb[ib]);
        });
    });
}

}  // namespace

Var add(Var a, Var b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double g, double, double, double& gx, double& gy) {
            gx += g;
            gy += g;
        });
}

Var sub(Var a, Var b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double g, double, double, double& gx, double& gy) {
            gx += g;
            gy -= g;
        });
}

Var mul(Var a, Var b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double g, double x, double y, double& gx, double& gy) {
            gx += g * y;
            gy += g * x;
        });
}

Var scale(Var a, double c) {
    Array out = a.value();
    for (double& v : out.vec()) v *= c;
    const int aid = a.id;
    return a.tape->emplace("scale", {aid}, std::move(out), [aid, c](Tape& t, const Node& n) {
        double* ga = t.grad_mut(aid).data();
        const double* g = n.grad.data();
        for (std::int64_t i = 0; i < n.grad.size(); ++i) ga[i] += c * g[i];
    });
}

Var add_scalar(Var a, double c) {
    Array out = a.value();
    for (double& v : out.vec()) v += c;
    const int aid = a.id;
    return a.tape->emplace("add_scalar", {aid}, std::move(out), [aid](Tape& t, const Node& n) {
        double* ga = t.grad_mut(aid).data();
        const double* g = n.grad.data();
        for (std::int64_t i = 0; i < n.grad.size(); ++i) ga[i] += g[i];
    });
}

Var abs(Var a) {
    Array out = a.value();
    for (double& v : out.vec()) v = std::fabs(v);
    const int aid = a.id;
    return a.tape->emplace("abs", {aid}, std::move(out), [aid](Tape& t, const Node& n) {
        const Array& x = t.node(aid).value;
        double* ga = t.grad_mut(aid).data();
        const double* g = n.grad.data();
        for (std::int64_t i = 0; i < n.grad.size(); ++i) {
            const double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
            ga[i] += s * g[i];
        }
    });
}

namespace {

// softplus with overflow guard: identity for x > 30
inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid_s(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double act_fwd(Act kind, double x) {
    switch (kind) {
        case Act::Mish:
            return x * std::tanh(softplus(x));
        case Act::Sigmoid:
            return sigmoid_s(x);
        case Act::Tanh:
            return std::tanh(x);
        case Act::Relu:
            return x > 0.0 ? x : 0.0;
    }
    return 0.0;
}

inline double act_grad(Act kind, double x, double y) {
    switch (kind) {
        case Act::Mish: {
            const double t = std::tanh(softplus(x));
            return t + x * (1.0 - t * t) * sigmoid_s(x);
        }
        case Act::Sigmoid:
            return y * (1.0 - y);
        case Act::Tanh:
            return 1.0 - y * y;
        case Act::Relu:
            return x > 0.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

const char* act_name(Act kind) {
    switch (kind) {
        case Act::Mish:
            return "mish";
        case Act::Sigmoid:
            return "sigmoid";
        case Act::Tanh:
            return "tanh";
        case Act::Relu:
            return "relu";
    }
    return "?";
}

}  // namespace

Var activation(Var x, Act kind) {
    Array out = x.value();
    for (double& v : out.vec()) v = act_fwd(kind, v);
    const int xid = x.id;
    return x.tape->emplace(act_name(kind), {xid}, std::move(out), [xid, kind](Tape& t, const Node& n) {
        const Array& xin = t.node(xid).value;
        double* gx = t.grad_mut(xid).data();
        const double* g = n.grad.data();
        const double* y = n.value.data();
        for (std::int64_t i = 0; i < n.grad.size(); ++i) gx[i] += act_grad(kind, xin[i], y[i]) * g[i];
    });
}

Var slice(Var x, int axis, std::int64_t start, std::int64_t len) {
    const Shape& s = x.shape();
    if (axis < 0 || axis >= s.rank()) throw std::invalid_argument("slice: bad axis");
    if (start < 0 || len < 0 || start + len > s[axis]) {
        throw std::invalid_argument("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                                    ") out of bounds for shape " + s.str());
    }
    std::vector<std::int64_t> oe = s.extents();
    oe[static_cast<std::size_t>(axis)] = len;
    const Shape out_shape{oe};

    // decompose as (outer, axis, inner)
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[i];
    for (int i = axis + 1; i < s.rank(); ++i) inner *= s[i];
    const std::int64_t n_in = s[axis];

    Array out(out_shape);
    {
        const double* px = x.value().data();
        double* po = out.data();
        for (std::int64_t o = 0; o < outer; ++o) {
            std::memcpy(po + o * len * inner, px + (o * n_in + start) * inner,
                        sizeof(double) * static_cast<std::size_t>(len * inner));
        }
    }
    const int xid = x.id;
    return x.tape->emplace("slice", {xid}, std::move(out), [xid, outer, inner, n_in, start, len](Tape& t, const Node& n) {
        double* gx = t.grad_mut(xid).data();
        const double* g = n.grad.data();
        for (std::int64_t o = 0; o < outer; ++o) {
            const double* gsrc = g + o * len * inner;
            double* gdst = gx + (o * n_in + start) * inner;
            for (std::int64_t i = 0; i < len * inner; ++i) gdst[i] += gsrc[i];
        }
    });
}

Var reshape(Var x, Shape shape) {
    if (shape.size() != x.shape().size()) {
        throw std::invalid_argument("reshape: size mismatch " + x.shape().str() + " -> " + shape.str());
    }
    Array out(shape, x.value().vec());
    const int xid = x.id;
    return x.tape->emplace("reshape", {xid}, std::move(out), [xid](Tape& t, const Node& n) {
        double* gx = t.grad_mut(xid).data();
        const double* g = n.grad.data();
        for (std::int64_t i = 0; i < n.grad.size(); ++i) gx[i] += g[i];
    });
}

Var pad_last_left(Var x, std::int64_t n) {
    const Shape& s = x.shape();
    if (s.rank() < 1) throw std::invalid_argument("pad_last_left: rank-0 input");
    if (n < 0) throw std::invalid_argument("pad_last_left: negative pad");
    std::vector<std::int64_t> oe = s.extents();
    const std::int64_t L = oe.back();
    oe.back() = L + n;
    Array out{Shape(oe)};
    const std::int64_t rows = s.size() / std::max<std::int64_t>(L, 1);
    {
        const double* px = x.value().data();
        double* po = out.data();
        for (std::int64_t r = 0; r < rows; ++r) {
            std::memcpy(po + r * (L + n) + n, px + r * L, sizeof(double) * static_cast<std::size_t>(L));
        }
    }
    const int xid = x.id;
    return x.tape->emplace("pad_last_left", {xid}, std::move(out), [xid, rows, L, n](Tape& t, const Node& nd) {
        double* gx = t.grad_mut(xid).data();
        const double* g = nd.grad.data();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* gsrc = g + r * (L + n) + n;
            double* gdst = gx + r * L;
            for (std::int64_t i = 0; i < L; ++i) gdst[i] += gsrc[i];
        }
    });
}

Var reduce_mean_axis(Var x, int axis) {
    const Shape& s = x.shape();
    if (axis < 0 || axis >= s.rank()) throw std::invalid_argument("reduce_mean_axis: bad axis");
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[i];
    for (int i = axis + 1; i < s.rank(); ++i) inner *= s[i];
    const std::int64_t n = s[axis];
    if (n == 0) throw std::invalid_argument("reduce_mean_axis: empty axis");

    std::vector<std::int64_t> oe;
    for (int i = 0; i < s.rank(); ++i) {
        if (i != axis) oe.push_back(s[i]);
    }
    Array out{Shape(oe)};
    {
        const double* px = x.value().data();
        double* po = out.data();
        for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t k = 0; k < n; ++k) {
                const double* row = px + (o * n + k) * inner;
                double* dst = po + o * inner;
                for (std::int64_t i = 0; i < inner; ++i) dst[i] += row[i];
            }
        }
        const double inv = 1.0 / static_cast<double>(n);
        for (std::int64_t i = 0; i < out.size(); ++i) po[i] *= inv;
    }
    const int xid = x.id;
    return x.tape->emplace("reduce_mean_axis", {xid}, std::move(out), [xid, outer, inner, n](Tape& t, const Node& nd) {
        double* gx = t.grad_mut(xid).data();
        const double* g = nd.grad.data();
        const double inv = 1.0 / static_cast<double>(n);
        for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t k = 0; k < n; ++k) {
                double* dst = gx + (o * n + k) * inner;
                const double* src = g + o * inner;
                for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i] * inv;
            }
        }
    });
}

Var sum_all(Var x) {
    double s = 0.0;
    for (std::int64_t i = 0; i < x.value().size(); ++i) s += x.value()[i];
    const int xid = x.id;
    return x.tape->emplace("sum_all", {xid}, Array::scalar(s), [xid](Tape& t, const Node& n) {
        double* gx = t.grad_mut(xid).data();
        const double g = n.grad[0];
        const std::int64_t m = t.node(xid).value.size();
        for (std::int64_t i = 0; i < m; ++i) gx[i] += g;
    });
}

Var mean_all(Var x) {
    const std::int64_t m = x.value().size();
    if (m == 0) throw std::invalid_argument("mean_all: empty input");
    return scale(sum_all(x), 1.0 / static_cast<double>(m));
}

}  // namespace gswan::diff
