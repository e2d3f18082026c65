#include <cmath>
#include <cstring>
#include <stdexcept>

#include "gswan/errors.hpp"
#include "gswan/tape.hpp"

namespace gswan::diff {

namespace {

struct MatmulPlan {
    std::int64_t m, p, n;
    std::array<std::int64_t, 2> ext{1, 1};  // batch extents, padded left
    std::array<std::int64_t, 2> sa{0, 0};   // batch strides in slices
    std::array<std::int64_t, 2> sb{0, 0};
    Shape out;
};

MatmulPlan matmul_plan(const Shape& a, const Shape& b) {
    if (a.rank() < 2 || b.rank() < 2) {
        throw std::invalid_argument("matmul: operands must have rank >= 2, got " + a.str() + " and " + b.str());
    }
    MatmulPlan pl;
    pl.m = a[a.rank() - 2];
    pl.p = a[a.rank() - 1];
    pl.n = b[b.rank() - 1];
    if (b[b.rank() - 2] != pl.p) {
        throw std::invalid_argument("matmul: inner extents differ, " + a.str() + " vs " + b.str());
    }
    const int ba = a.rank() - 2, bb = b.rank() - 2;
    const int rank = std::max(ba, bb);
    std::vector<std::int64_t> batch(static_cast<std::size_t>(rank), 1);
    for (int i = 0; i < rank; ++i) {
        const int ia = ba - rank + i, ib = bb - rank + i;
        const std::int64_t ea = ia >= 0 ? a[ia] : 1;
        const std::int64_t eb = ib >= 0 ? b[ib] : 1;
        if (ea != eb && ea != 1 && eb != 1) {
            throw std::invalid_argument("matmul: batch extents differ, " + a.str() + " vs " + b.str());
        }
        batch[static_cast<std::size_t>(i)] = std::max(ea, eb);
    }
    const int off = 2 - rank;
    for (int i = 0; i < rank; ++i) pl.ext[static_cast<std::size_t>(off + i)] = batch[static_cast<std::size_t>(i)];
    // slice strides over the batch axes, 0 where the operand broadcasts
    auto strides_for = [&](const Shape& s, int brank) {
        std::array<std::int64_t, 2> st{0, 0};
        std::int64_t acc = 1;
        for (int i = brank - 1; i >= 0; --i) {
            const int oi = off + (rank - brank) + i;
            st[static_cast<std::size_t>(oi)] = (s[i] == 1 && pl.ext[static_cast<std::size_t>(oi)] != 1) ? 0 : acc;
            acc *= s[i];
        }
        return st;
    };
    pl.sa = strides_for(a, ba);
    pl.sb = strides_for(b, bb);
    std::vector<std::int64_t> oe = batch;
    oe.push_back(pl.m);
    oe.push_back(pl.n);
    pl.out = Shape(oe);
    return pl;
}

template <class F>
void for_each_batch(const MatmulPlan& pl, F f) {
    std::int64_t c = 0;
    for (std::int64_t i0 = 0; i0 < pl.ext[0]; ++i0)
        for (std::int64_t i1 = 0; i1 < pl.ext[1]; ++i1, ++c)
            f(c, i0 * pl.sa[0] + i1 * pl.sa[1], i0 * pl.sb[0] + i1 * pl.sb[1]);
}

}  // namespace

Var matmul(Var a, Var b) {
    if (a.tape != b.tape) throw std::invalid_argument("matmul: operands from different tapes");
    const MatmulPlan pl = matmul_plan(a.shape(), b.shape());
    Array out(pl.out);
    {
        const double* pa = a.value().data();
        const double* pb = b.value().data();
        double* po = out.data();
        for_each_batch(pl, [&](std::int64_t c, std::int64_t ia, std::int64_t ib) {
            const double* A = pa + ia * pl.m * pl.p;
            const double* B = pb + ib * pl.p * pl.n;
            double* C = po + c * pl.m * pl.n;
            for (std::int64_t i = 0; i < pl.m; ++i) {
                for (std::int64_t k = 0; k < pl.p; ++k) {
                    const double aik = A[i * pl.p + k];
                    const double* Brow = B + k * pl.n;
                    double* Crow = C + i * pl.n;
                    for (std::int64_t j = 0; j < pl.n; ++j) Crow[j] += aik * Brow[j];
                }
            }
        });
    }
    const int aid = a.id, bid = b.id;
    return a.tape->emplace("matmul", {aid, bid}, std::move(out), [pl, aid, bid](Tape& t, const Node& nd) {
        const double* pa = t.node(aid).value.data();
        const double* pb = t.node(bid).value.data();
        const double* g = nd.grad.data();
        double* ga = t.grad_mut(aid).data();
        double* gb = t.grad_mut(bid).data();
        for_each_batch(pl, [&](std::int64_t c, std::int64_t ia, std::int64_t ib) {
            const double* A = pa + ia * pl.m * pl.p;
            const double* B = pb + ib * pl.p * pl.n;
            const double* G = g + c * pl.m * pl.n;
            double* dA = ga + ia * pl.m * pl.p;
            double* dB = gb + ib * pl.p * pl.n;
            // dA = G * B^T
            for (std::int64_t i = 0; i < pl.m; ++i) {
                for (std::int64_t k = 0; k < pl.p; ++k) {
                    double s = 0.0;
                    const double* Grow = G + i * pl.n;
                    const double* Brow = B + k * pl.n;
                    for (std::int64_t j = 0; j < pl.n; ++j) s += Grow[j] * Brow[j];
                    dA[i * pl.p + k] += s;
                }
            }
            // dB = A^T * G
            for (std::int64_t i = 0; i < pl.m; ++i) {
                for (std::int64_t k = 0; k < pl.p; ++k) {
                    const double aik = A[i * pl.p + k];
                    const double* Grow = G + i * pl.n;
                    double* dBrow = dB + k * pl.n;
                    for (std::int64_t j = 0; j < pl.n; ++j) dBrow[j] += aik * Grow[j];
                }
            }
        });
    });
}

Var transpose_last2(Var a) {
    const Shape& s = a.shape();
    if (s.rank() < 2) throw std::invalid_argument("transpose_last2: rank < 2");
    const std::int64_t m = s[s.rank() - 2], n = s[s.rank() - 1];
    const std::int64_t batch = s.size() / (m * n);
    std::vector<std::int64_t> oe = s.extents();
    std::swap(oe[oe.size() - 1], oe[oe.size() - 2]);
    Array out{Shape(oe)};
    {
        const double* pa = a.value().data();
        double* po = out.data();
        for (std::int64_t c = 0; c < batch; ++c) {
            const double* A = pa + c * m * n;
            double* O = po + c * m * n;
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) O[j * m + i] = A[i * n + j];
        }
    }
    const int aid = a.id;
    return a.tape->emplace("transpose_last2", {aid}, std::move(out), [aid, batch, m, n](Tape& t, const Node& nd) {
        double* ga = t.grad_mut(aid).data();
        const double* g = nd.grad.data();
        for (std::int64_t c = 0; c < batch; ++c) {
            const double* G = g + c * m * n;
            double* dA = ga + c * m * n;
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) dA[i * n + j] += G[j * m + i];
        }
    });
}

Var conv1d(Var x, Var w, int dilation) {
    if (x.tape != w.tape) throw std::invalid_argument("conv1d: operands from different tapes");
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (xs.rank() != 4 || ws.rank() != 4 || ws[2] != 1) {
        throw std::invalid_argument("conv1d: expected x[B,C,N,L] and w[Co,Ci,1,k], got " + xs.str() + " and " + ws.str());
    }
    if (xs[1] != ws[1]) {
        throw std::invalid_argument("conv1d: channel mismatch, x " + xs.str() + " vs w " + ws.str());
    }
    if (dilation < 1) throw std::invalid_argument("conv1d: dilation must be >= 1");
    const std::int64_t B = xs[0], Ci = xs[1], N = xs[2], L = xs[3];
    const std::int64_t Co = ws[0], k = ws[3];
    if (k < 1) throw std::invalid_argument("conv1d: kernel width must be >= 1");
    const std::int64_t need = dilation * (k - 1) + 1;
    if (L < need) {
        throw std::invalid_argument("conv1d: input length " + std::to_string(L) + " below receptive field; need at least " +
                                    std::to_string(need) + " timesteps for k=" + std::to_string(k) +
                                    ", dilation=" + std::to_string(dilation));
    }
    const std::int64_t Lo = L - dilation * (k - 1);
    Array out(Shape{B, Co, N, Lo});
    {
        const double* px = x.value().data();
        const double* pw = w.value().data();
        double* po = out.data();
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t o = 0; o < Co; ++o)
                for (std::int64_t i = 0; i < Ci; ++i)
                    for (std::int64_t j = 0; j < k; ++j) {
                        const double wv = pw[(o * Ci + i) * k + j];
                        if (wv == 0.0) continue;
                        const std::int64_t off = dilation * j;
                        for (std::int64_t n = 0; n < N; ++n) {
                            const double* xr = px + ((b * Ci + i) * N + n) * L + off;
                            double* orr = po + ((b * Co + o) * N + n) * Lo;
                            for (std::int64_t tt = 0; tt < Lo; ++tt) orr[tt] += wv * xr[tt];
                        }
                    }
    }
    const int xid = x.id, wid = w.id;
    return x.tape->emplace("conv1d", {xid, wid}, std::move(out),
                           [xid, wid, B, Ci, Co, N, L, Lo, k, dilation](Tape& t, const Node& nd) {
                               const double* px = t.node(xid).value.data();
                               const double* pw = t.node(wid).value.data();
                               const double* g = nd.grad.data();
                               double* gx = t.grad_mut(xid).data();
                               double* gw = t.grad_mut(wid).data();
                               for (std::int64_t b = 0; b < B; ++b)
                                   for (std::int64_t o = 0; o < Co; ++o)
                                       for (std::int64_t i = 0; i < Ci; ++i)
                                           for (std::int64_t j = 0; j < k; ++j) {
                                               const double wv = pw[(o * Ci + i) * k + j];
                                               const std::int64_t off = dilation * j;
                                               double dw = 0.0;
                                               for (std::int64_t n = 0; n < N; ++n) {
                                                   const double* xr = px + ((b * Ci + i) * N + n) * L + off;
                                                   double* gxr = gx + ((b * Ci + i) * N + n) * L + off;
                                                   const double* gr = g + ((b * Co + o) * N + n) * Lo;
                                                   for (std::int64_t tt = 0; tt < Lo; ++tt) {
                                                       gxr[tt] += wv * gr[tt];
                                                       dw += xr[tt] * gr[tt];
                                                   }
                                               }
                                               gw[(o * Ci + i) * k + j] += dw;
                                           }
                           });
}

Var softmax(Var x, double tau, int axis) {
    if (!(tau > 0.0)) throw std::invalid_argument("softmax: temperature must be positive, got " + std::to_string(tau));
    const Shape& s = x.shape();
    if (axis < 0 || axis >= s.rank()) throw std::invalid_argument("softmax: bad axis for shape " + s.str());
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[i];
    for (int i = axis + 1; i < s.rank(); ++i) inner *= s[i];
    const std::int64_t n = s[axis];

    Array out(s);
    {
        const double* px = x.value().data();
        double* po = out.data();
        for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t in = 0; in < inner; ++in) {
                const std::int64_t base = o * n * inner + in;
                double mx = -1e300;
                for (std::int64_t kk = 0; kk < n; ++kk) mx = std::max(mx, px[base + kk * inner] / tau);
                double sum = 0.0;
                for (std::int64_t kk = 0; kk < n; ++kk) {
                    const double e = std::exp(px[base + kk * inner] / tau - mx);
                    po[base + kk * inner] = e;
                    sum += e;
                }
                for (std::int64_t kk = 0; kk < n; ++kk) po[base + kk * inner] /= sum;
            }
    }
    const int xid = x.id;
    return x.tape->emplace("softmax", {xid}, std::move(out), [xid, outer, inner, n, tau](Tape& t, const Node& nd) {
        const double* y = nd.value.data();
        const double* g = nd.grad.data();
        double* gx = t.grad_mut(xid).data();
        for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t in = 0; in < inner; ++in) {
                const std::int64_t base = o * n * inner + in;
                double dot = 0.0;
                for (std::int64_t kk = 0; kk < n; ++kk) dot += g[base + kk * inner] * y[base + kk * inner];
                for (std::int64_t kk = 0; kk < n; ++kk) {
                    const std::int64_t idx = base + kk * inner;
                    gx[idx] += y[idx] * (g[idx] - dot) / tau;
                }
            }
    });
}

Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, BnMode mode, double eps, double momentum) {
    if (x.tape != gamma.tape || x.tape != beta.tape) throw std::invalid_argument("batch_norm: mixed tapes");
    const Shape& s = x.shape();
    if (s.rank() != 4) throw std::invalid_argument("batch_norm: expected rank-4 input, got " + s.str());
    if (!(eps > 0.0)) throw std::invalid_argument("batch_norm: eps must be positive");
    const std::int64_t B = s[0], C = s[1], N = s[2], L = s[3];
    if (gamma.shape() != Shape{C} || beta.shape() != Shape{C}) {
        throw std::invalid_argument("batch_norm: gamma/beta must have shape [C]");
    }
    if (state.running_mean.shape() != Shape{C}) {
        throw std::invalid_argument("batch_norm: state has wrong channel count");
    }
    const std::int64_t M = B * N * L;

    std::vector<double> mean(static_cast<std::size_t>(C), 0.0);
    std::vector<double> inv_std(static_cast<std::size_t>(C), 0.0);
    const double* px = x.value().data();
    if (mode == BnMode::Train) {
        for (std::int64_t c = 0; c < C; ++c) {
            double sum = 0.0;
            for (std::int64_t b = 0; b < B; ++b) {
                const double* blk = px + (b * C + c) * N * L;
                for (std::int64_t i = 0; i < N * L; ++i) sum += blk[i];
            }
            const double mu = sum / static_cast<double>(M);
            double var = 0.0;
            for (std::int64_t b = 0; b < B; ++b) {
                const double* blk = px + (b * C + c) * N * L;
                for (std::int64_t i = 0; i < N * L; ++i) {
                    const double d = blk[i] - mu;
                    var += d * d;
                }
            }
            var /= static_cast<double>(M);
            mean[static_cast<std::size_t>(c)] = mu;
            inv_std[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var + eps);
            state.running_mean[c] = (1.0 - momentum) * state.running_mean[c] + momentum * mu;
            state.running_var[c] = (1.0 - momentum) * state.running_var[c] + momentum * var;
        }
    } else {
        for (std::int64_t c = 0; c < C; ++c) {
            mean[static_cast<std::size_t>(c)] = state.running_mean[c];
            inv_std[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(state.running_var[c] + eps);
        }
    }

    Array out(s);
    {
        const double* pg = gamma.value().data();
        const double* pb = beta.value().data();
        double* po = out.data();
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t c = 0; c < C; ++c) {
                const double mu = mean[static_cast<std::size_t>(c)];
                const double is = inv_std[static_cast<std::size_t>(c)];
                const double ga = pg[c], be = pb[c];
                const double* xr = px + (b * C + c) * N * L;
                double* orr = po + (b * C + c) * N * L;
                for (std::int64_t i = 0; i < N * L; ++i) orr[i] = (xr[i] - mu) * is * ga + be;
            }
    }

    const int xid = x.id, gid = gamma.id, bid = beta.id;
    return x.tape->emplace(
        "batch_norm", {xid, gid, bid}, std::move(out),
        [xid, gid, bid, B, C, N, L, M, mode, mean, inv_std](Tape& t, const Node& nd) {
            const double* pxv = t.node(xid).value.data();
            const double* pg = t.node(gid).value.data();
            const double* g = nd.grad.data();
            double* gx = t.grad_mut(xid).data();
            double* gg = t.grad_mut(gid).data();
            double* gb = t.grad_mut(bid).data();
            for (std::int64_t c = 0; c < C; ++c) {
                const double mu = mean[static_cast<std::size_t>(c)];
                const double is = inv_std[static_cast<std::size_t>(c)];
                double sum_g = 0.0, sum_gx = 0.0;
                for (std::int64_t b = 0; b < B; ++b) {
                    const double* xr = pxv + (b * C + c) * N * L;
                    const double* gr = g + (b * C + c) * N * L;
                    for (std::int64_t i = 0; i < N * L; ++i) {
                        sum_g += gr[i];
                        sum_gx += gr[i] * (xr[i] - mu) * is;
                    }
                }
                gg[c] += sum_gx;
                gb[c] += sum_g;
                const double scale = pg[c] * is;
                if (mode == BnMode::Train) {
                    const double mg = sum_g / static_cast<double>(M);
                    const double mgx = sum_gx / static_cast<double>(M);
                    for (std::int64_t b = 0; b < B; ++b) {
                        const double* xr = pxv + (b * C + c) * N * L;
                        const double* gr = g + (b * C + c) * N * L;
                        double* gxr = gx + (b * C + c) * N * L;
                        for (std::int64_t i = 0; i < N * L; ++i) {
                            const double xhat = (xr[i] - mu) * is;
                            gxr[i] += scale * (gr[i] - mg - xhat * mgx);
                        }
                    }
                } else {
                    for (std::int64_t b = 0; b < B; ++b) {
                        const double* gr = g + (b * C + c) * N * L;
                        double* gxr = gx + (b * C + c) * N * L;
                        for (std::int64_t i = 0; i < N * L; ++i) gxr[i] += scale * gr[i];
                    }
                }
            }
        });
}

Var propagate(Var x, Var m) {
    if (x.tape != m.tape) throw std::invalid_argument("propagate: operands from different tapes");
    const Shape& xs = x.shape();
    const Shape& ms = m.shape();
    if (xs.rank() != 4) throw std::invalid_argument("propagate: expected x[B,D,N,L], got " + xs.str());
    const std::int64_t B = xs[0], D = xs[1], N = xs[2], L = xs[3];
    const bool batched = ms.rank() == 3;
    if (batched) {
        if (ms[0] != B || ms[1] != N || ms[2] != N) {
            throw std::invalid_argument("propagate: matrix " + ms.str() + " incompatible with input " + xs.str());
        }
    } else if (ms.rank() != 2 || ms[0] != N || ms[1] != N) {
        throw std::invalid_argument("propagate: matrix " + ms.str() + " incompatible with input " + xs.str());
    }

    Array out(xs);
    {
        const double* px = x.value().data();
        const double* pm = m.value().data();
        double* po = out.data();
        for (std::int64_t b = 0; b < B; ++b) {
            const double* Mb = pm + (batched ? b * N * N : 0);
            for (std::int64_t d = 0; d < D; ++d) {
                const double* xbd = px + (b * D + d) * N * L;
                double* obd = po + (b * D + d) * N * L;
                for (std::int64_t v = 0; v < N; ++v) {
                    const double* xr = xbd + v * L;
                    for (std::int64_t w = 0; w < N; ++w) {
                        const double c = Mb[v * N + w];
                        if (c == 0.0) continue;
                        double* orr = obd + w * L;
                        for (std::int64_t l = 0; l < L; ++l) orr[l] += c * xr[l];
                    }
                }
            }
        }
    }
    const int xid = x.id, mid = m.id;
    return x.tape->emplace("propagate", {xid, mid}, std::move(out), [xid, mid, B, D, N, L, batched](Tape& t, const Node& nd) {
        const double* px = t.node(xid).value.data();
        const double* pm = t.node(mid).value.data();
        const double* g = nd.grad.data();
        double* gx = t.grad_mut(xid).data();
        double* gm = t.grad_mut(mid).data();
        for (std::int64_t b = 0; b < B; ++b) {
            const double* Mb = pm + (batched ? b * N * N : 0);
            double* gMb = gm + (batched ? b * N * N : 0);
            for (std::int64_t d = 0; d < D; ++d) {
                const double* xbd = px + (b * D + d) * N * L;
                const double* gbd = g + (b * D + d) * N * L;
                double* gxbd = gx + (b * D + d) * N * L;
                for (std::int64_t v = 0; v < N; ++v) {
                    const double* xr = xbd + v * L;
                    double* gxr = gxbd + v * L;
                    for (std::int64_t w = 0; w < N; ++w) {
                        const double c = Mb[v * N + w];
                        const double* gr = gbd + w * L;
                        double dm = 0.0;
                        for (std::int64_t l = 0; l < L; ++l) {
                            gxr[l] += c * gr[l];
                            dm += xr[l] * gr[l];
                        }
                        gMb[v * N + w] += dm;
                    }
                }
            }
        }
    });
}

Var concat_channels(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
    Tape* tape = xs[0].tape;
    const Shape& s0 = xs[0].shape();
    if (s0.rank() != 4) throw std::invalid_argument("concat_channels: expected rank-4 inputs");
    const std::int64_t B = s0[0], N = s0[2], L = s0[3];
    std::int64_t Ctot = 0;
    std::vector<int> ids;
    std::vector<std::int64_t> widths;
    for (const Var& v : xs) {
        if (v.tape != tape) throw std::invalid_argument("concat_channels: mixed tapes");
        const Shape& s = v.shape();
        if (s.rank() != 4 || s[0] != B || s[2] != N || s[3] != L) {
            throw std::invalid_argument("concat_channels: incompatible shape " + s.str() + " vs " + s0.str());
        }
        Ctot += s[1];
        ids.push_back(v.id);
        widths.push_back(s[1]);
    }
    Array out(Shape{B, Ctot, N, L});
    {
        double* po = out.data();
        for (std::int64_t b = 0; b < B; ++b) {
            std::int64_t coff = 0;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const Array& xv = tape->node(ids[i]).value;
                const std::int64_t Ci = widths[i];
                std::memcpy(po + (b * Ctot + coff) * N * L, xv.data() + b * Ci * N * L,
                            sizeof(double) * static_cast<std::size_t>(Ci * N * L));
                coff += Ci;
            }
        }
    }
    return tape->emplace("concat_channels", ids, std::move(out), [ids, widths, B, Ctot, N, L](Tape& t, const Node& nd) {
        const double* g = nd.grad.data();
        for (std::int64_t b = 0; b < B; ++b) {
            std::int64_t coff = 0;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const std::int64_t Ci = widths[i];
                double* gi = t.grad_mut(ids[i]).data() + b * Ci * N * L;
                const double* gs = g + (b * Ctot + coff) * N * L;
                for (std::int64_t j = 0; j < Ci * N * L; ++j) gi[j] += gs[j];
                coff += Ci;
            }
        }
    });
}

}  // namespace gswan::diff
