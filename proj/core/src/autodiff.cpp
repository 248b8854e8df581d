#include "dsmap/autodiff.hpp"

#include <Eigen/Core>

#include <cmath>
#include <unordered_set>
#include <utility>

namespace dsmap::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Value make_node(Tensor out, std::vector<Value> parents, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    n->requires_grad = rg;
    if (rg) {
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backward = std::move(fn);
    }
    return Value(std::move(n));
}

bool need(const Node& self, size_t i) { return self.parents[i]->requires_grad; }

Tensor& pgrad(Node& self, size_t i) { return self.parents[i]->grad; }
const Tensor& pval(const Node& self, size_t i) { return self.parents[i]->val; }

}  // namespace

Value leaf(Tensor v, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    n->requires_grad = requires_grad;
    return Value(std::move(n));
}

Value constant(Tensor v) { return leaf(std::move(v), false); }

Value detach(const Value& x) { return constant(x.val()); }

void backward(const Value& root) {
    if (!root.defined()) throw Error("backward on undefined value");
    if (root.val().numel() != 1) throw ShapeError("backward root must be scalar");
    if (!root.requires_grad()) throw Error("backward root does not require grad");

    // Post-order DFS; the list has every node after all of its parents.
    std::vector<Node*> topo;
    std::unordered_set<Node*> seen;
    struct Frame {
        Node* n;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root.node().get(), 0});
    seen.insert(root.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.n->parents.size()) {
            Node* p = f.n->parents[f.next_parent++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            topo.push_back(f.n);
            stack.pop_back();
        }
    }

    for (Node* n : topo) n->grad = Tensor(n->val.shape());
    root.node()->grad.fill(1.0);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        if (n->backward) n->backward(*n);
    }
}

// ---------------------------------------------------------------- elementwise

Value add(const Value& a, const Value& b) {
    check_same_shape(a.val(), b.val(), "add");
    Tensor out = a.val();
    out.axpy(1.0, b.val());
    return make_node(std::move(out), {a, b}, [](Node& self) {
        if (need(self, 0)) pgrad(self, 0).axpy(1.0, self.grad);
        if (need(self, 1)) pgrad(self, 1).axpy(1.0, self.grad);
    });
}

Value sub(const Value& a, const Value& b) {
    check_same_shape(a.val(), b.val(), "sub");
    Tensor out = a.val();
    out.axpy(-1.0, b.val());
    return make_node(std::move(out), {a, b}, [](Node& self) {
        if (need(self, 0)) pgrad(self, 0).axpy(1.0, self.grad);
        if (need(self, 1)) pgrad(self, 1).axpy(-1.0, self.grad);
    });
}

Value mul(const Value& a, const Value& b) {
    check_same_shape(a.val(), b.val(), "mul");
    Tensor out(a.val().shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = a.val()[i] * b.val()[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        const int64_t n = self.val.numel();
        if (need(self, 0)) {
            Tensor& da = pgrad(self, 0);
            const Tensor& bv = pval(self, 1);
            for (int64_t i = 0; i < n; ++i) da[i] += self.grad[i] * bv[i];
        }
        if (need(self, 1)) {
            Tensor& db = pgrad(self, 1);
            const Tensor& av = pval(self, 0);
            for (int64_t i = 0; i < n; ++i) db[i] += self.grad[i] * av[i];
        }
    });
}

Value add_scalar(const Value& a, double c) {
    Tensor out = a.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += c;
    return make_node(std::move(out), {a}, [](Node& self) {
        if (need(self, 0)) pgrad(self, 0).axpy(1.0, self.grad);
    });
}

Value mul_scalar(const Value& a, double c) {
    Tensor out = a.val();
    out.scale(c);
    return make_node(std::move(out), {a}, [c](Node& self) {
        if (need(self, 0)) pgrad(self, 0).axpy(c, self.grad);
    });
}

Value relu(const Value& x) {
    Tensor out = x.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return make_node(std::move(out), {x}, [](Node& self) {
        if (!need(self, 0)) return;
        Tensor& dx = pgrad(self, 0);
        const Tensor& xv = pval(self, 0);
        for (int64_t i = 0; i < self.val.numel(); ++i)
            if (xv[i] > 0.0) dx[i] += self.grad[i];
    });
}

Value leaky_relu(const Value& x, double alpha) {
    Tensor out = x.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : alpha * out[i];
    return make_node(std::move(out), {x}, [alpha](Node& self) {
        if (!need(self, 0)) return;
        Tensor& dx = pgrad(self, 0);
        const Tensor& xv = pval(self, 0);
        for (int64_t i = 0; i < self.val.numel(); ++i)
            dx[i] += self.grad[i] * (xv[i] > 0.0 ? 1.0 : alpha);
    });
}

Value tanh_act(const Value& x) {
    Tensor out = x.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    return make_node(std::move(out), {x}, [](Node& self) {
        if (!need(self, 0)) return;
        Tensor& dx = pgrad(self, 0);
        for (int64_t i = 0; i < self.val.numel(); ++i)
            dx[i] += self.grad[i] * (1.0 - self.val[i] * self.val[i]);
    });
}

// ---------------------------------------------------------------- reductions

Value mean_all(const Value& x) {
    const int64_t n = x.val().numel();
    Tensor out = Tensor::scalar(x.val().mean());
    return make_node(std::move(out), {x}, [n](Node& self) {
        if (!need(self, 0)) return;
        Tensor& dx = pgrad(self, 0);
        const double g = self.grad[0] / static_cast<double>(n);
        for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += g;
    });
}

Value mean_abs_diff(const Value& a, const Value& b) {
    check_same_shape(a.val(), b.val(), "mean_abs_diff");
    const int64_t n = a.val().numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += std::abs(a.val()[i] - b.val()[i]);
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));
    return make_node(std::move(out), {a, b}, [n](Node& self) {
        const double g = self.grad[0] / static_cast<double>(n);
        const Tensor& av = pval(self, 0);
        const Tensor& bv = pval(self, 1);
        const bool na = need(self, 0), nb = need(self, 1);
        for (int64_t i = 0; i < n; ++i) {
            const double d = av[i] - bv[i];
            const double s = d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
            if (na) pgrad(self, 0)[i] += s;
            if (nb) pgrad(self, 1)[i] -= s;
        }
    });
}

Value mean_sq_vs(const Value& x, double target) {
    const int64_t n = x.val().numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = x.val()[i] - target;
        acc += d * d;
    }
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));
    return make_node(std::move(out), {x}, [n, target](Node& self) {
        if (!need(self, 0)) return;
        Tensor& dx = pgrad(self, 0);
        const Tensor& xv = pval(self, 0);
        const double g = 2.0 * self.grad[0] / static_cast<double>(n);
        for (int64_t i = 0; i < n; ++i) dx[i] += g * (xv[i] - target);
    });
}

Value wsum(const std::vector<Value>& values, const std::vector<double>& weights) {
    if (values.size() != weights.size()) throw ShapeError("wsum: size mismatch");
    if (values.empty()) throw ShapeError("wsum: empty");
    double acc = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        if (values[i].val().numel() != 1) throw ShapeError("wsum: non-scalar term");
        acc += weights[i] * values[i].val()[0];
    }
    std::vector<Value> parents(values.begin(), values.end());
    auto w = weights;
    return make_node(Tensor::scalar(acc), std::move(parents), [w](Node& self) {
        for (size_t i = 0; i < self.parents.size(); ++i)
            if (need(self, i)) pgrad(self, i)[0] += w[i] * self.grad[0];
    });
}

// ---------------------------------------------------------------- shape

Value slice_cols(const Value& x, int64_t offset, int64_t len) {
    if (x.val().ndim() != 2) throw ShapeError("slice_cols expects rank 2");
    const int64_t b = x.val().dim(0), f = x.val().dim(1);
    if (offset < 0 || len < 1 || offset + len > f) throw ShapeError("slice_cols out of range");
    Tensor out({b, len});
    for (int64_t i = 0; i < b; ++i)
        for (int64_t j = 0; j < len; ++j) out.at(i, j) = x.val().at(i, offset + j);
    return make_node(std::move(out), {x}, [offset, len, b](Node& self) {
        if (!need(self, 0)) return;
        Tensor& dx = pgrad(self, 0);
        for (int64_t i = 0; i < b; ++i)
            for (int64_t j = 0; j < len; ++j) dx.at(i, offset + j) += self.grad.at(i, j);
    });
}

// ---------------------------------------------------------------- conv2d

namespace {

struct ConvDims {
    int64_t batch, ci, h, w, co, kh, kw, stride, pad, ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int64_t stride, int64_t pad) {
    if (x.ndim() != 4 || w.ndim() != 4) throw ShapeError("conv2d expects rank-4 x and w");
    ConvDims d{};
    d.batch = x.dim(0);
    d.ci = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.co = w.dim(0);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    d.stride = stride;
    d.pad = pad;
    if (w.dim(1) != d.ci)
        throw ShapeError("conv2d: input channels " + std::to_string(d.ci) +
                         " vs kernel " + std::to_string(w.dim(1)));
    if (d.h + 2 * pad < d.kh || d.w + 2 * pad < d.kw)
        throw ShapeError("conv2d: kernel larger than padded input");
    d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
    return d;
}

// col layout: [ci*kh*kw, ho*wo] row-major.
void im2col(const double* x, const ConvDims& d, double* col) {
    const int64_t n = d.ho * d.wo;
    for (int64_t c = 0; c < d.ci; ++c) {
        for (int64_t ky = 0; ky < d.kh; ++ky) {
            for (int64_t kx = 0; kx < d.kw; ++kx) {
                double* row = col + ((c * d.kh + ky) * d.kw + kx) * n;
                for (int64_t oy = 0; oy < d.ho; ++oy) {
                    const int64_t iy = oy * d.stride + ky - d.pad;
                    double* dst = row + oy * d.wo;
                    if (iy < 0 || iy >= d.h) {
                        for (int64_t ox = 0; ox < d.wo; ++ox) dst[ox] = 0.0;
                        continue;
                    }
                    const double* src = x + (c * d.h + iy) * d.w;
                    for (int64_t ox = 0; ox < d.wo; ++ox) {
                        const int64_t ix = ox * d.stride + kx - d.pad;
                        dst[ox] = (ix >= 0 && ix < d.w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, const ConvDims& d, double* dx) {
    const int64_t n = d.ho * d.wo;
    for (int64_t c = 0; c < d.ci; ++c) {
        for (int64_t ky = 0; ky < d.kh; ++ky) {
            for (int64_t kx = 0; kx < d.kw; ++kx) {
                const double* row = col + ((c * d.kh + ky) * d.kw + kx) * n;
                for (int64_t oy = 0; oy < d.ho; ++oy) {
                    const int64_t iy = oy * d.stride + ky - d.pad;
                    if (iy < 0 || iy >= d.h) continue;
                    double* dst = dx + (c * d.h + iy) * d.w;
                    const double* src = row + oy * d.wo;
                    for (int64_t ox = 0; ox < d.wo; ++ox) {
                        const int64_t ix = ox * d.stride + kx - d.pad;
                        if (ix >= 0 && ix < d.w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Value conv2d(const Value& x, const Value& w, const Value& b, int64_t stride, int64_t pad) {
    const ConvDims d = conv_dims(x.val(), w.val(), stride, pad);
    if (b.val().ndim() != 1 || b.val().dim(0) != d.co) throw ShapeError("conv2d: bad bias shape");

    const int64_t k = d.ci * d.kh * d.kw;
    const int64_t n = d.ho * d.wo;
    Tensor out({d.batch, d.co, d.ho, d.wo});

    // Keep the unfolded inputs for the weight-gradient GEMM.
    auto cols = std::make_shared<std::vector<double>>(static_cast<size_t>(d.batch * k * n));
    CMapMat wmat(w.val().data(), d.co, k);
    for (int64_t s = 0; s < d.batch; ++s) {
        double* col = cols->data() + s * k * n;
        im2col(x.val().data() + s * d.ci * d.h * d.w, d, col);
        MapMat ymat(out.data() + s * d.co * n, d.co, n);
        ymat.noalias() = wmat * CMapMat(col, k, n);
        for (int64_t c = 0; c < d.co; ++c) {
            double* yrow = out.data() + (s * d.co + c) * n;
            const double bias = b.val()[c];
            for (int64_t i = 0; i < n; ++i) yrow[i] += bias;
        }
    }

    return make_node(std::move(out), {x, w, b}, [d, k, n, cols](Node& self) {
        const bool nx = need(self, 0), nw = need(self, 1), nb = need(self, 2);
        CMapMat wmat(pval(self, 1).data(), d.co, k);
        std::vector<double> dcol;
        if (nx) dcol.resize(static_cast<size_t>(k * n));
        for (int64_t s = 0; s < d.batch; ++s) {
            CMapMat dy(self.grad.data() + s * d.co * n, d.co, n);
            if (nw) {
                MapMat dw(pgrad(self, 1).data(), d.co, k);
                dw.noalias() += dy * CMapMat(cols->data() + s * k * n, k, n).transpose();
            }
            if (nx) {
                MapMat dc(dcol.data(), k, n);
                dc.noalias() = wmat.transpose() * dy;
                col2im_add(dcol.data(), d, pgrad(self, 0).data() + s * d.ci * d.h * d.w);
            }
            if (nb) {
                Tensor& db = pgrad(self, 2);
                for (int64_t c = 0; c < d.co; ++c) {
                    const double* row = self.grad.data() + (s * d.co + c) * n;
                    double acc = 0.0;
                    for (int64_t i = 0; i < n; ++i) acc += row[i];
                    db[c] += acc;
                }
            }
        }
    });
}

Value linear(const Value& x, const Value& w, const Value& b) {
    if (x.val().ndim() != 2 || w.val().ndim() != 2) throw ShapeError("linear expects rank 2");
    const int64_t bs = x.val().dim(0), f = x.val().dim(1), o = w.val().dim(0);
    if (w.val().dim(1) != f) throw ShapeError("linear: feature mismatch");
    if (b.val().ndim() != 1 || b.val().dim(0) != o) throw ShapeError("linear: bad bias shape");

    Tensor out({bs, o});
    CMapMat xm(x.val().data(), bs, f);
    CMapMat wm(w.val().data(), o, f);
    MapMat ym(out.data(), bs, o);
    ym.noalias() = xm * wm.transpose();
    for (int64_t i = 0; i < bs; ++i)
        for (int64_t j = 0; j < o; ++j) out.at(i, j) += b.val()[j];

    return make_node(std::move(out), {x, w, b}, [bs, f, o](Node& self) {
        CMapMat dy(self.grad.data(), bs, o);
        if (need(self, 0)) {
            MapMat dx(pgrad(self, 0).data(), bs, f);
            dx.noalias() += dy * CMapMat(pval(self, 1).data(), o, f);
        }
        if (need(self, 1)) {
            MapMat dw(pgrad(self, 1).data(), o, f);
            dw.noalias() += dy.transpose() * CMapMat(pval(self, 0).data(), bs, f);
        }
        if (need(self, 2)) {
            Tensor& db = pgrad(self, 2);
            for (int64_t i = 0; i < bs; ++i)
                for (int64_t j = 0; j < o; ++j) db[j] += self.grad.at(i, j);
        }
    });
}

// ---------------------------------------------------------------- norms

namespace {

// Shared normalization kernel: x is seen as [groups, m]; y = (x - mu) / std.
Value norm_groups(const Value& x, int64_t groups, int64_t m, double eps, const char* what) {
    if (x.val().numel() != groups * m) throw ShapeError(std::string(what) + ": bad shape");
    if (m < 1) throw ShapeError(std::string(what) + ": empty group");
    Tensor out(x.val().shape());
    auto istd = std::make_shared<std::vector<double>>(static_cast<size_t>(groups));
    const double* xd = x.val().data();
    double* yd = out.data();
    for (int64_t g = 0; g < groups; ++g) {
        const double* xs = xd + g * m;
        double* ys = yd + g * m;
        double mu = 0.0;
        for (int64_t i = 0; i < m; ++i) mu += xs[i];
        mu /= static_cast<double>(m);
        double var = 0.0;
        for (int64_t i = 0; i < m; ++i) {
            const double c = xs[i] - mu;
            var += c * c;
        }
        var /= static_cast<double>(m);
        const double is = 1.0 / std::sqrt(var + eps);
        (*istd)[static_cast<size_t>(g)] = is;
        for (int64_t i = 0; i < m; ++i) ys[i] = (xs[i] - mu) * is;
    }
    return make_node(std::move(out), {x}, [groups, m, istd](Node& self) {
        if (!need(self, 0)) return;
        double* dx = pgrad(self, 0).data();
        const double* y = self.val.data();
        const double* dy = self.grad.data();
        const double dm = static_cast<double>(m);
        for (int64_t g = 0; g < groups; ++g) {
            const double* ys = y + g * m;
            const double* dys = dy + g * m;
            double* dxs = dx + g * m;
            double s1 = 0.0, s2 = 0.0;
            for (int64_t i = 0; i < m; ++i) {
                s1 += dys[i];
                s2 += dys[i] * ys[i];
            }
            s1 /= dm;
            s2 /= dm;
            const double is = (*istd)[static_cast<size_t>(g)];
            for (int64_t i = 0; i < m; ++i) dxs[i] += is * (dys[i] - s1 - ys[i] * s2);
        }
    });
}

}  // namespace

Value instance_norm(const Value& x, double eps) {
    if (x.val().ndim() != 4) throw ShapeError("instance_norm expects rank 4");
    return norm_groups(x, x.val().dim(0) * x.val().dim(1), x.val().dim(2) * x.val().dim(3), eps,
                       "instance_norm");
}

Value layer_norm_chw(const Value& x, double eps) {
    if (x.val().ndim() != 4) throw ShapeError("layer_norm_chw expects rank 4");
    return norm_groups(x, x.val().dim(0), x.val().dim(1) * x.val().dim(2) * x.val().dim(3), eps,
                       "layer_norm_chw");
}

Value channel_affine(const Value& x, const Value& g, const Value& t) {
    if (x.val().ndim() != 4) throw ShapeError("channel_affine expects rank 4");
    const int64_t bs = x.val().dim(0), c = x.val().dim(1), hw = x.val().dim(2) * x.val().dim(3);
    if (g.val().ndim() != 1 || g.val().dim(0) != c || !g.val().same_shape(t.val()))
        throw ShapeError("channel_affine: bad gamma/beta shape");
    Tensor out(x.val().shape());
    for (int64_t s = 0; s < bs; ++s)
        for (int64_t ch = 0; ch < c; ++ch) {
            const double gv = g.val()[ch], tv = t.val()[ch];
            const double* xs = x.val().data() + (s * c + ch) * hw;
            double* ys = out.data() + (s * c + ch) * hw;
            for (int64_t i = 0; i < hw; ++i) ys[i] = xs[i] * gv + tv;
        }
    return make_node(std::move(out), {x, g, t}, [bs, c, hw](Node& self) {
        for (int64_t s = 0; s < bs; ++s)
            for (int64_t ch = 0; ch < c; ++ch) {
                const double* dys = self.grad.data() + (s * c + ch) * hw;
                if (need(self, 0)) {
                    const double gv = pval(self, 1)[ch];
                    double* dxs = pgrad(self, 0).data() + (s * c + ch) * hw;
                    for (int64_t i = 0; i < hw; ++i) dxs[i] += dys[i] * gv;
                }
                if (need(self, 1)) {
                    const double* xs = pval(self, 0).data() + (s * c + ch) * hw;
                    double acc = 0.0;
                    for (int64_t i = 0; i < hw; ++i) acc += dys[i] * xs[i];
                    pgrad(self, 1)[ch] += acc;
                }
                if (need(self, 2)) {
                    double acc = 0.0;
                    for (int64_t i = 0; i < hw; ++i) acc += dys[i];
                    pgrad(self, 2)[ch] += acc;
                }
            }
    });
}

Value sample_affine(const Value& x, const Value& g, const Value& t) {
    if (x.val().ndim() != 4) throw ShapeError("sample_affine expects rank 4");
    const int64_t bs = x.val().dim(0), c = x.val().dim(1), hw = x.val().dim(2) * x.val().dim(3);
    if (g.val().ndim() != 2 || g.val().dim(0) != bs || g.val().dim(1) != c ||
        !g.val().same_shape(t.val()))
        throw ShapeError("sample_affine: bad gamma/beta shape");
    Tensor out(x.val().shape());
    for (int64_t s = 0; s < bs; ++s)
        for (int64_t ch = 0; ch < c; ++ch) {
            const double gv = g.val().at(s, ch), tv = t.val().at(s, ch);
            const double* xs = x.val().data() + (s * c + ch) * hw;
            double* ys = out.data() + (s * c + ch) * hw;
            for (int64_t i = 0; i < hw; ++i) ys[i] = xs[i] * gv + tv;
        }
    return make_node(std::move(out), {x, g, t}, [bs, c, hw](Node& self) {
        for (int64_t s = 0; s < bs; ++s)
            for (int64_t ch = 0; ch < c; ++ch) {
                const double* dys = self.grad.data() + (s * c + ch) * hw;
                if (need(self, 0)) {
                    const double gv = pval(self, 1).at(s, ch);
                    double* dxs = pgrad(self, 0).data() + (s * c + ch) * hw;
                    for (int64_t i = 0; i < hw; ++i) dxs[i] += dys[i] * gv;
                }
                if (need(self, 1)) {
                    const double* xs = pval(self, 0).data() + (s * c + ch) * hw;
                    double acc = 0.0;
                    for (int64_t i = 0; i < hw; ++i) acc += dys[i] * xs[i];
                    pgrad(self, 1).at(s, ch) += acc;
                }
                if (need(self, 2)) {
                    double acc = 0.0;
                    for (int64_t i = 0; i < hw; ++i) acc += dys[i];
                    pgrad(self, 2).at(s, ch) += acc;
                }
            }
    });
}

Value upsample_nearest2(const Value& x) {
    if (x.val().ndim() != 4) throw ShapeError("upsample_nearest2 expects rank 4");
    const int64_t bs = x.val().dim(0), c = x.val().dim(1), h = x.val().dim(2), w = x.val().dim(3);
    Tensor out({bs, c, 2 * h, 2 * w});
    for (int64_t s = 0; s < bs; ++s)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t y = 0; y < h; ++y) {
                const double* src = x.val().data() + ((s * c + ch) * h + y) * w;
                double* d0 = out.data() + ((s * c + ch) * 2 * h + 2 * y) * 2 * w;
                double* d1 = d0 + 2 * w;
                for (int64_t xx = 0; xx < w; ++xx) {
                    d0[2 * xx] = d0[2 * xx + 1] = src[xx];
                    d1[2 * xx] = d1[2 * xx + 1] = src[xx];
                }
            }
    return make_node(std::move(out), {x}, [bs, c, h, w](Node& self) {
        if (!need(self, 0)) return;
        Tensor& dx = pgrad(self, 0);
        for (int64_t s = 0; s < bs; ++s)
            for (int64_t ch = 0; ch < c; ++ch)
                for (int64_t y = 0; y < h; ++y) {
                    double* dst = dx.data() + ((s * c + ch) * h + y) * w;
                    const double* g0 = self.grad.data() + ((s * c + ch) * 2 * h + 2 * y) * 2 * w;
                    const double* g1 = g0 + 2 * w;
                    for (int64_t xx = 0; xx < w; ++xx)
                        dst[xx] += g0[2 * xx] + g0[2 * xx + 1] + g1[2 * xx] + g1[2 * xx + 1];
                }
    });
}

Value global_avg_pool(const Value& x) {
    if (x.val().ndim() != 4) throw ShapeError("global_avg_pool expects rank 4");
    const int64_t bs = x.val().dim(0), c = x.val().dim(1), hw = x.val().dim(2) * x.val().dim(3);
    Tensor out({bs, c});
    for (int64_t s = 0; s < bs; ++s)
        for (int64_t ch = 0; ch < c; ++ch) {
            const double* xs = x.val().data() + (s * c + ch) * hw;
            double acc = 0.0;
            for (int64_t i = 0; i < hw; ++i) acc += xs[i];
            out.at(s, ch) = acc / static_cast<double>(hw);
        }
    return make_node(std::move(out), {x}, [bs, c, hw](Node& self) {
        if (!need(self, 0)) return;
        Tensor& dx = pgrad(self, 0);
        for (int64_t s = 0; s < bs; ++s)
            for (int64_t ch = 0; ch < c; ++ch) {
                const double g = self.grad.at(s, ch) / static_cast<double>(hw);
                double* dxs = dx.data() + (s * c + ch) * hw;
                for (int64_t i = 0; i < hw; ++i) dxs[i] += g;
            }
    });
}

}  // namespace dsmap::ad
