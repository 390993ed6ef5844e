// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include "mvht/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstring>

namespace mvht::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using MapC = Eigen::Map<const RowMat>;

void acc(Tensor& dst, const Tensor& src) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

// One sample: x [C,H,W] -> cols [C*kh*kw, Ho*Wo], zero padded.
void im2col(const double* x, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho,
            int Wo, double* cols) {
    for (int c = 0; c < C; ++c)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                double* row = cols + (static_cast<size_t>(c) * kh * kw + ki * kw + kj) *
                                         (static_cast<size_t>(Ho) * Wo);
                for (int oh = 0; oh < Ho; ++oh) {
                    int ih = oh * stride + ki - pad;
                    for (int ow = 0; ow < Wo; ++ow) {
                        int iw = ow * stride + kj - pad;
                        row[oh * Wo + ow] =
                            (ih >= 0 && ih < H && iw >= 0 && iw < W)
                                ? x[(static_cast<size_t>(c) * H + ih) * W + iw]
                                : 0.0;
                    }
                }
            }
}

// Adjoint of im2col: scatter-add cols gradient back into gx [C,H,W].
void col2im(const double* cols, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho,
            int Wo, double* gx) {
    for (int c = 0; c < C; ++c)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                const double* row = cols + (static_cast<size_t>(c) * kh * kw + ki * kw + kj) *
                                               (static_cast<size_t>(Ho) * Wo);
                for (int oh = 0; oh < Ho; ++oh) {
                    int ih = oh * stride + ki - pad;
                    if (ih < 0 || ih >= H) continue;
                    for (int ow = 0; ow < Wo; ++ow) {
                        int iw = ow * stride + kj - pad;
                        if (iw < 0 || iw >= W) continue;
                        gx[(static_cast<size_t>(c) * H + ih) * W + iw] += row[oh * Wo + ow];
                    }
                }
            }
}

}  // namespace

NodePtr add(const NodePtr& a, const NodePtr& b) {
    if (!a->val.same_shape(b->val)) throw param_error("add: shape mismatch");
    Tensor out = a->val;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->val.data[i];
    Node* pa = a.get();
    Node* pb = b.get();
    return make_node(std::move(out), {a, b}, [pa, pb](Node& self) {
        if (pa->needs) {
            pa->ensure_grad();
            acc(pa->grad, self.grad);
        }
        if (pb->needs) {
            pb->ensure_grad();
            acc(pb->grad, self.grad);
        }
    });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    if (!a->val.same_shape(b->val)) throw param_error("sub: shape mismatch");
    Tensor out = a->val;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->val.data[i];
    Node* pa = a.get();
    Node* pb = b.get();
    return make_node(std::move(out), {a, b}, [pa, pb](Node& self) {
        if (pa->needs) {
            pa->ensure_grad();
            acc(pa->grad, self.grad);
        }
        if (pb->needs) {
            pb->ensure_grad();
            for (size_t i = 0; i < self.grad.data.size(); ++i)
                pb->grad.data[i] -= self.grad.data[i];
        }
    });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    if (!a->val.same_shape(b->val)) throw param_error("mul: shape mismatch");
    Tensor out = a->val;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->val.data[i];
    Node* pa = a.get();
    Node* pb = b.get();
    return make_node(std::move(out), {a, b}, [pa, pb](Node& self) {
        if (pa->needs) {
            pa->ensure_grad();
            for (size_t i = 0; i < self.grad.data.size(); ++i)
                pa->grad.data[i] += self.grad.data[i] * pb->val.data[i];
        }
        if (pb->needs) {
            pb->ensure_grad();
            for (size_t i = 0; i < self.grad.data.size(); ++i)
                pb->grad.data[i] += self.grad.data[i] * pa->val.data[i];
        }
    });
}

NodePtr mul_scalar(const NodePtr& a, double s) {
    Tensor out = a->val;
    for (double& v : out.data) v *= s;
    Node* pa = a.get();
    return make_node(std::move(out), {a}, [pa, s](Node& self) {
        if (!pa->needs) return;
        pa->ensure_grad();
        for (size_t i = 0; i < self.grad.data.size(); ++i)
            pa->grad.data[i] += self.grad.data[i] * s;
    });
}

NodePtr silu(const NodePtr& a) {
    Tensor out = a->val;
    for (double& v : out.data) v = v / (1.0 + std::exp(-v));
    Node* pa = a.get();
    return make_node(std::move(out), {a}, [pa](Node& self) {
        if (!pa->needs) return;
        pa->ensure_grad();
        for (size_t i = 0; i < self.grad.data.size(); ++i) {
            double x = pa->val.data[i];
            double sg = 1.0 / (1.0 + std::exp(-x));
            pa->grad.data[i] += self.grad.data[i] * sg * (1.0 + x * (1.0 - sg));
        }
    });
}

NodePtr sum_all(const NodePtr& a) {
    double s = 0.0;
    for (double v : a->val.data) s += v;
    Node* pa = a.get();
    return make_node(Tensor::scalar(s), {a}, [pa](Node& self) {
        if (!pa->needs) return;
        pa->ensure_grad();
        double g = self.grad.data[0];
        for (double& v : pa->grad.data) v += g;
    });
}

NodePtr mean_all(const NodePtr& a) {
    double s = 0.0;
    for (double v : a->val.data) s += v;
    double n = static_cast<double>(a->val.numel());
    Node* pa = a.get();
    return make_node(Tensor::scalar(s / n), {a}, [pa, n](Node& self) {
        if (!pa->needs) return;
        pa->ensure_grad();
        double g = self.grad.data[0] / n;
        for (double& v : pa->grad.data) v += g;
    });
}

NodePtr mse(const NodePtr& a, const NodePtr& b) {
    NodePtr d = sub(a, b);
    return mean_all(mul(d, d));
}

NodePtr linear(const NodePtr& x, const NodePtr& w, const NodePtr& b) {
    if (x->val.rank() != 2 || w->val.rank() != 2 || b->val.rank() != 1)
        throw param_error("linear: want x[N,K] w[K,M] b[M]");
    int N = x->val.dim(0), K = x->val.dim(1), M = w->val.dim(1);
    if (w->val.dim(0) != K || b->val.dim(0) != M) throw param_error("linear: dim mismatch");

    Tensor out({N, M});
    {
        MapC xm(x->val.data.data(), N, K);
        MapC wm(w->val.data.data(), K, M);
        MapM om(out.data.data(), N, M);
        om.noalias() = xm * wm;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < M; ++j) out.at2(i, j) += b->val[j];
    }
    Node* px = x.get();
    Node* pw = w.get();
    Node* pb = b.get();
    return make_node(std::move(out), {x, w, b}, [px, pw, pb, N, K, M](Node& self) {
        MapC gm(self.grad.data.data(), N, M);
        if (px->needs) {
            px->ensure_grad();
            MapM gx(px->grad.data.data(), N, K);
            MapC wm(pw->val.data.data(), K, M);
            gx.noalias() += gm * wm.transpose();
        }
        if (pw->needs) {
            pw->ensure_grad();
            MapM gw(pw->grad.data.data(), K, M);
            MapC xm(px->val.data.data(), N, K);
            gw.noalias() += xm.transpose() * gm;
        }
        if (pb->needs) {
            pb->ensure_grad();
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < M; ++j) pb->grad[j] += self.grad.at2(i, j);
        }
    });
}

NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b, int stride, int pad) {
    if (x->val.rank() != 4 || w->val.rank() != 4 || b->val.rank() != 1)
        throw param_error("conv2d: want x[B,C,H,W] w[O,C,kh,kw] b[O]");
    int B = x->val.dim(0), C = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
    int O = w->val.dim(0), kh = w->val.dim(2), kw = w->val.dim(3);
    if (w->val.dim(1) != C || b->val.dim(0) != O) throw param_error("conv2d: channel mismatch");
    if (stride < 1 || pad < 0) throw param_error("conv2d: bad stride/pad");
    int Ho = (H + 2 * pad - kh) / stride + 1;
    int Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw param_error("conv2d: empty output");

    int K2 = C * kh * kw;
    int64_t N2 = static_cast<int64_t>(Ho) * Wo;
    Tensor out({B, O, Ho, Wo});
    {
        std::vector<double> cols(static_cast<size_t>(K2) * B * N2);
        for (int bi = 0; bi < B; ++bi) {
            // Column block for sample bi lives at column offset bi*N2 of a
            // K2 x (B*N2) matrix; build it in place via strided rows.
            std::vector<double> tmp(static_cast<size_t>(K2) * N2);
            im2col(x->val.data.data() + static_cast<size_t>(bi) * C * H * W, C, H, W, kh, kw,
                   stride, pad, Ho, Wo, tmp.data());
            for (int r = 0; r < K2; ++r)
                std::memcpy(cols.data() + (static_cast<size_t>(r) * B + bi) * N2,
                            tmp.data() + static_cast<size_t>(r) * N2, sizeof(double) * N2);
        }
        MapC wm(w->val.data.data(), O, K2);
        MapC cm(cols.data(), K2, B * N2);
        std::vector<double> y(static_cast<size_t>(O) * B * N2);
        MapM ym(y.data(), O, B * N2);
        ym.noalias() = wm * cm;
        for (int bi = 0; bi < B; ++bi)
            for (int o = 0; o < O; ++o) {
                const double* src = y.data() + (static_cast<size_t>(o) * B + bi) * N2;
                double* dst =
                    out.data.data() + (static_cast<size_t>(bi) * O + o) * N2;
                double bias = b->val[o];
                for (int64_t i = 0; i < N2; ++i) dst[i] = src[i] + bias;
            }
    }
    Node* px = x.get();
    Node* pw = w.get();
    Node* pb = b.get();
    return make_node(
        std::move(out), {x, w, b},
        [px, pw, pb, B, C, H, W, O, kh, kw, stride, pad, Ho, Wo, K2, N2](Node& self) {
            // Gather grad as [O, B*N2] to match the forward GEMM layout.
            std::vector<double> gmat(static_cast<size_t>(O) * B * N2);
            for (int bi = 0; bi < B; ++bi)
                for (int o = 0; o < O; ++o)
                    std::memcpy(gmat.data() + (static_cast<size_t>(o) * B + bi) * N2,
                                self.grad.data.data() + (static_cast<size_t>(bi) * O + o) * N2,
                                sizeof(double) * N2);
            MapC gm(gmat.data(), O, B * N2);

            if (pb->needs) {
                pb->ensure_grad();
                for (int o = 0; o < O; ++o) {
                    double s = 0.0;
                    const double* row = gmat.data() + static_cast<size_t>(o) * B * N2;
                    for (int64_t i = 0; i < static_cast<int64_t>(B) * N2; ++i) s += row[i];
                    pb->grad[o] += s;
                }
            }
            if (pw->needs || px->needs) {
                std::vector<double> cols;
                if (pw->needs) {
                    // Recompute im2col; cheaper than retaining it on the tape.
                    cols.resize(static_cast<size_t>(K2) * B * N2);
                    for (int bi = 0; bi < B; ++bi) {
                        std::vector<double> tmp(static_cast<size_t>(K2) * N2);
                        im2col(px->val.data.data() + static_cast<size_t>(bi) * C * H * W, C, H, W,
                               kh, kw, stride, pad, Ho, Wo, tmp.data());
                        for (int r = 0; r < K2; ++r)
                            std::memcpy(cols.data() + (static_cast<size_t>(r) * B + bi) * N2,
                                        tmp.data() + static_cast<size_t>(r) * N2,
                                        sizeof(double) * N2);
                    }
                    pw->ensure_grad();
                    MapM gw(pw->grad.data.data(), O, K2);
                    MapC cm(cols.data(), K2, B * N2);
                    gw.noalias() += gm * cm.transpose();
                }
                if (px->needs) {
                    px->ensure_grad();
                    MapC wm(pw->val.data.data(), O, K2);
                    std::vector<double> gcols(static_cast<size_t>(K2) * B * N2);
                    MapM gc(gcols.data(), K2, B * N2);
                    gc.noalias() = wm.transpose() * gm;
                    std::vector<double> tmp(static_cast<size_t>(K2) * N2);
                    for (int bi = 0; bi < B; ++bi) {
                        for (int r = 0; r < K2; ++r)
                            std::memcpy(tmp.data() + static_cast<size_t>(r) * N2,
                                        gcols.data() + (static_cast<size_t>(r) * B + bi) * N2,
                                        sizeof(double) * N2);
                        col2im(tmp.data(), C, H, W, kh, kw, stride, pad, Ho, Wo,
                               px->grad.data.data() + static_cast<size_t>(bi) * C * H * W);
                    }
                }
            }
        });
}

NodePtr group_norm(const NodePtr& x, const NodePtr& gamma, const NodePtr& beta, int groups,
                   double eps) {
    if (x->val.rank() != 4) throw param_error("group_norm: want x[B,C,H,W]");
    int B = x->val.dim(0), C = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
    if (groups < 1 || C % groups != 0) throw param_error("group_norm: groups must divide C");
    check_shape(gamma->val, {C}, "group_norm gamma");
    check_shape(beta->val, {C}, "group_norm beta");
    int cg = C / groups;
    int64_t m = static_cast<int64_t>(cg) * H * W;
    int64_t hw = static_cast<int64_t>(H) * W;

    Tensor out({B, C, H, W});
    std::vector<double> mu(static_cast<size_t>(B) * groups), inv(static_cast<size_t>(B) * groups);
    for (int bi = 0; bi < B; ++bi)
        for (int g = 0; g < groups; ++g) {
            const double* xs = x->val.data.data() + (static_cast<size_t>(bi) * C + g * cg) * hw;
            double s = 0.0, s2 = 0.0;
            for (int64_t i = 0; i < m; ++i) {
                s += xs[i];
                s2 += xs[i] * xs[i];
            }
            double mean = s / static_cast<double>(m);
            double var = s2 / static_cast<double>(m) - mean * mean;
            double iv = 1.0 / std::sqrt(var + eps);
            mu[static_cast<size_t>(bi) * groups + g] = mean;
            inv[static_cast<size_t>(bi) * groups + g] = iv;
            double* ys = out.data.data() + (static_cast<size_t>(bi) * C + g * cg) * hw;
            for (int ci = 0; ci < cg; ++ci) {
                int c = g * cg + ci;
                double ga = gamma->val[c], be = beta->val[c];
                for (int64_t i = 0; i < hw; ++i)
                    ys[ci * hw + i] = ga * (xs[ci * hw + i] - mean) * iv + be;
            }
        }

    Node* px = x.get();
    Node* pg = gamma.get();
    Node* pb = beta.get();
    return make_node(
        std::move(out), {x, gamma, beta},
        [px, pg, pb, B, C, H, W, groups, cg, m, hw, mu, inv](Node& self) {
            if (pg->needs) pg->ensure_grad();
            if (pb->needs) pb->ensure_grad();
            if (px->needs) px->ensure_grad();
            for (int bi = 0; bi < B; ++bi)
                for (int g = 0; g < groups; ++g) {
                    size_t base = (static_cast<size_t>(bi) * C + static_cast<size_t>(g) * cg) * hw;
                    const double* xs = px->val.data.data() + base;
                    const double* gy = self.grad.data.data() + base;
                    double mean = mu[static_cast<size_t>(bi) * groups + g];
                    double iv = inv[static_cast<size_t>(bi) * groups + g];
                    if (pg->needs || pb->needs) {
                        for (int ci = 0; ci < cg; ++ci) {
                            int c = g * cg + ci;
                            double sg = 0.0, sb = 0.0;
                            for (int64_t i = 0; i < hw; ++i) {
                                double xh = (xs[ci * hw + i] - mean) * iv;
                                sg += gy[ci * hw + i] * xh;
                                sb += gy[ci * hw + i];
                            }
                            if (pg->needs) pg->grad[c] += sg;
                            if (pb->needs) pb->grad[c] += sb;
                        }
                    }
                    if (px->needs) {
                        double s1 = 0.0, s2 = 0.0;
                        for (int ci = 0; ci < cg; ++ci) {
                            double ga = pg->val[g * cg + ci];
                            for (int64_t i = 0; i < hw; ++i) {
                                double dyh = gy[ci * hw + i] * ga;
                                s1 += dyh;
                                s2 += dyh * (xs[ci * hw + i] - mean) * iv;
                            }
                        }
                        double im = 1.0 / static_cast<double>(m);
                        double* gx = px->grad.data.data() + base;
                        for (int ci = 0; ci < cg; ++ci) {
                            double ga = pg->val[g * cg + ci];
                            for (int64_t i = 0; i < hw; ++i) {
                                double xh = (xs[ci * hw + i] - mean) * iv;
                                double dyh = gy[ci * hw + i] * ga;
                                gx[ci * hw + i] += iv * (dyh - s1 * im - xh * s2 * im);
                            }
                        }
                    }
                }
        });
}

NodePtr softmax_lastdim(const NodePtr& x) {
    if (x->val.rank() < 1) throw param_error("softmax: rank 0");
    int L = x->val.dim(x->val.rank() - 1);
    int64_t rows = x->val.numel() / L;
    Tensor out = x->val;
    for (int64_t r = 0; r < rows; ++r) {
        double* row = out.data.data() + r * L;
        double mx = row[0];
        for (int i = 1; i < L; ++i) mx = std::max(mx, row[i]);
        double s = 0.0;
        for (int i = 0; i < L; ++i) {
            row[i] = std::exp(row[i] - mx);
            s += row[i];
        }
        for (int i = 0; i < L; ++i) row[i] /= s;
    }
    Node* px = x.get();
    return make_node(std::move(out), {x}, [px, rows, L](Node& self) {
        if (!px->needs) return;
        px->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const double* y = self.val.data.data() + r * L;
            const double* gy = self.grad.data.data() + r * L;
            double dot = 0.0;
            for (int i = 0; i < L; ++i) dot += gy[i] * y[i];
            double* gx = px->grad.data.data() + r * L;
            for (int i = 0; i < L; ++i) gx[i] += y[i] * (gy[i] - dot);
        }
    });
}

NodePtr bmm_nn(const NodePtr& a, const NodePtr& b) {
    if (a->val.rank() != 3 || b->val.rank() != 3) throw param_error("bmm_nn: want rank 3");
    int B = a->val.dim(0), M = a->val.dim(1), K = a->val.dim(2), N = b->val.dim(2);
    if (b->val.dim(0) != B || b->val.dim(1) != K) throw param_error("bmm_nn: dim mismatch");
    Tensor out({B, M, N});
    for (int bi = 0; bi < B; ++bi) {
        MapC am(a->val.data.data() + static_cast<size_t>(bi) * M * K, M, K);
        MapC bm(b->val.data.data() + static_cast<size_t>(bi) * K * N, K, N);
        MapM om(out.data.data() + static_cast<size_t>(bi) * M * N, M, N);
        om.noalias() = am * bm;
    }
    Node* pa = a.get();
    Node* pb = b.get();
    return make_node(std::move(out), {a, b}, [pa, pb, B, M, K, N](Node& self) {
        for (int bi = 0; bi < B; ++bi) {
            MapC gm(self.grad.data.data() + static_cast<size_t>(bi) * M * N, M, N);
            if (pa->needs) {
                pa->ensure_grad();
                MapM ga(pa->grad.data.data() + static_cast<size_t>(bi) * M * K, M, K);
                MapC bm(pb->val.data.data() + static_cast<size_t>(bi) * K * N, K, N);
                ga.noalias() += gm * bm.transpose();
            }
            if (pb->needs) {
                pb->ensure_grad();
                MapM gb(pb->grad.data.data() + static_cast<size_t>(bi) * K * N, K, N);
                MapC am(pa->val.data.data() + static_cast<size_t>(bi) * M * K, M, K);
                gb.noalias() += am.transpose() * gm;
            }
        }
    });
}

NodePtr bmm_nt(const NodePtr& a, const NodePtr& b) {
    if (a->val.rank() != 3 || b->val.rank() != 3) throw param_error("bmm_nt: want rank 3");
    int B = a->val.dim(0), M = a->val.dim(1), K = a->val.dim(2), N = b->val.dim(1);
    if (b->val.dim(0) != B || b->val.dim(2) != K) throw param_error("bmm_nt: dim mismatch");
    Tensor out({B, M, N});
    for (int bi = 0; bi < B; ++bi) {
        MapC am(a->val.data.data() + static_cast<size_t>(bi) * M * K, M, K);
        MapC bm(b->val.data.data() + static_cast<size_t>(bi) * N * K, N, K);
        MapM om(out.data.data() + static_cast<size_t>(bi) * M * N, M, N);
        om.noalias() = am * bm.transpose();
    }
    Node* pa = a.get();
    Node* pb = b.get();
    return make_node(std::move(out), {a, b}, [pa, pb, B, M, K, N](Node& self) {
        for (int bi = 0; bi < B; ++bi) {
            MapC gm(self.grad.data.data() + static_cast<size_t>(bi) * M * N, M, N);
            if (pa->needs) {
                pa->ensure_grad();
                MapM ga(pa->grad.data.data() + static_cast<size_t>(bi) * M * K, M, K);
                MapC bm(pb->val.data.data() + static_cast<size_t>(bi) * N * K, N, K);
                ga.noalias() += gm * bm;
            }
            if (pb->needs) {
                pb->ensure_grad();
                MapM gb(pb->grad.data.data() + static_cast<size_t>(bi) * N * K, N, K);
                MapC am(pa->val.data.data() + static_cast<size_t>(bi) * M * K, M, K);
                gb.noalias() += gm.transpose() * am;
            }
        }
    });
}

NodePtr reshape(const NodePtr& x, std::vector<int> shape) {
    if (Tensor::count(shape) != x->val.numel()) throw param_error("reshape: element count");
    Tensor out(std::move(shape), x->val.data);
    Node* px = x.get();
    return make_node(std::move(out), {x}, [px](Node& self) {
        if (!px->needs) return;
        px->ensure_grad();
        acc(px->grad, self.grad);
    });
}

namespace {
std::vector<int64_t> strides_of(const std::vector<int>& shape) {
    std::vector<int64_t> st(shape.size());
    int64_t s = 1;
    for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = s;
        s *= shape[static_cast<size_t>(i)];
    }
    return st;
}
}  // namespace

NodePtr permute(const NodePtr& x, const std::vector<int>& perm) {
    int r = x->val.rank();
    if (static_cast<int>(perm.size()) != r || r > 4) throw param_error("permute: bad perm");
    std::vector<int> oshape(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) oshape[static_cast<size_t>(i)] = x->val.dim(perm[static_cast<size_t>(i)]);
    auto ist = strides_of(x->val.shape);
    auto ost = strides_of(oshape);
    // ostride_for_input[d] = stride in output of the axis input dim d maps to.
    std::vector<int64_t> map_st(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) map_st[static_cast<size_t>(perm[static_cast<size_t>(i)])] = ost[static_cast<size_t>(i)];

    Tensor out(oshape);
    std::vector<int> idx(static_cast<size_t>(r), 0);
    int64_t n = x->val.numel();
    for (int64_t lin = 0; lin < n; ++lin) {
        int64_t off = 0;
        for (int d = 0; d < r; ++d) off += idx[static_cast<size_t>(d)] * map_st[static_cast<size_t>(d)];
        out.data[static_cast<size_t>(off)] = x->val.data[static_cast<size_t>(lin)];
        for (int d = r - 1; d >= 0; --d) {
            if (++idx[static_cast<size_t>(d)] < x->val.shape[static_cast<size_t>(d)]) break;
            idx[static_cast<size_t>(d)] = 0;
        }
    }
    Node* px = x.get();
    return make_node(std::move(out), {x}, [px, map_st, r](Node& self) {
        if (!px->needs) return;
        px->ensure_grad();
        std::vector<int> idx(static_cast<size_t>(r), 0);
        int64_t n = px->val.numel();
        for (int64_t lin = 0; lin < n; ++lin) {
            int64_t off = 0;
            for (int d = 0; d < r; ++d) off += idx[static_cast<size_t>(d)] * map_st[static_cast<size_t>(d)];
            px->grad.data[static_cast<size_t>(lin)] += self.grad.data[static_cast<size_t>(off)];
            for (int d = r - 1; d >= 0; --d) {
                if (++idx[static_cast<size_t>(d)] < px->val.shape[static_cast<size_t>(d)]) break;
                idx[static_cast<size_t>(d)] = 0;
            }
        }
    });
}

NodePtr slice0(const NodePtr& x, int start, int len) {
    if (x->val.rank() < 1 || start < 0 || len < 1 || start + len > x->val.dim(0))
        throw param_error("slice0: out of range");
    int64_t row = x->val.numel() / x->val.dim(0);
    std::vector<int> oshape = x->val.shape;
    oshape[0] = len;
    Tensor out(oshape);
    std::memcpy(out.data.data(), x->val.data.data() + start * row,
                sizeof(double) * static_cast<size_t>(len) * row);
    Node* px = x.get();
    return make_node(std::move(out), {x}, [px, start, len, row](Node& self) {
        if (!px->needs) return;
        px->ensure_grad();
        double* g = px->grad.data.data() + start * row;
        for (int64_t i = 0; i < len * row; ++i) g[i] += self.grad.data[static_cast<size_t>(i)];
    });
}

NodePtr concat0(const std::vector<NodePtr>& parts) {
    if (parts.empty()) throw param_error("concat0: empty");
    std::vector<int> oshape = parts[0]->val.shape;
    int total = 0;
    for (const auto& p : parts) {
        if (p->val.rank() != static_cast<int>(oshape.size())) throw param_error("concat0: rank");
        for (size_t d = 1; d < oshape.size(); ++d)
            if (p->val.shape[d] != oshape[d]) throw param_error("concat0: trailing dims");
        total += p->val.dim(0);
    }
    oshape[0] = total;
    Tensor out(oshape);
    int64_t off = 0;
    for (const auto& p : parts) {
        std::memcpy(out.data.data() + off, p->val.data.data(), sizeof(double) * p->val.data.size());
        off += p->val.numel();
    }
    std::vector<Node*> raw;
    raw.reserve(parts.size());
    for (const auto& p : parts) raw.push_back(p.get());
    return make_node(std::move(out), parts, [raw](Node& self) {
        int64_t off = 0;
        for (Node* p : raw) {
            int64_t n = p->val.numel();
            if (p->needs) {
                p->ensure_grad();
                for (int64_t i = 0; i < n; ++i)
                    p->grad.data[static_cast<size_t>(i)] += self.grad.data[static_cast<size_t>(off + i)];
            }
            off += n;
        }
    });
}

NodePtr concat_lastdim(const std::vector<NodePtr>& parts) {
    if (parts.empty()) throw param_error("concat_lastdim: empty");
    int r = parts[0]->val.rank();
    std::vector<int> oshape = parts[0]->val.shape;
    int64_t rows = parts[0]->val.numel() / oshape[static_cast<size_t>(r - 1)];
    int total = 0;
    std::vector<int> widths;
    for (const auto& p : parts) {
        if (p->val.rank() != r) throw param_error("concat_lastdim: rank");
        for (int d = 0; d < r - 1; ++d)
            if (p->val.shape[static_cast<size_t>(d)] != oshape[static_cast<size_t>(d)])
                throw param_error("concat_lastdim: leading dims");
        widths.push_back(p->val.dim(r - 1));
        total += widths.back();
    }
    oshape[static_cast<size_t>(r - 1)] = total;
    Tensor out(oshape);
    for (int64_t row = 0; row < rows; ++row) {
        int64_t off = 0;
        for (size_t pi = 0; pi < parts.size(); ++pi) {
            const auto& pv = parts[pi]->val;
            std::memcpy(out.data.data() + row * total + off,
                        pv.data.data() + row * widths[pi], sizeof(double) * widths[pi]);
            off += widths[pi];
        }
    }
    std::vector<Node*> raw;
    for (const auto& p : parts) raw.push_back(p.get());
    return make_node(std::move(out), parts, [raw, widths, rows, total](Node& self) {
        for (int64_t row = 0; row < rows; ++row) {
            int64_t off = 0;
            for (size_t pi = 0; pi < raw.size(); ++pi) {
                if (raw[pi]->needs) {
                    raw[pi]->ensure_grad();
                    for (int i = 0; i < widths[pi]; ++i)
                        raw[pi]->grad.data[static_cast<size_t>(row * widths[pi] + i)] +=
                            self.grad.data[static_cast<size_t>(row * total + off + i)];
                }
                off += widths[pi];
            }
        }
    });
}

NodePtr concat_channels(const NodePtr& a, const NodePtr& b) {
    if (a->val.rank() != 4 || b->val.rank() != 4) throw param_error("concat_channels: want rank 4");
    int B = a->val.dim(0), Ca = a->val.dim(1), H = a->val.dim(2), W = a->val.dim(3);
    int Cb = b->val.dim(1);
    if (b->val.dim(0) != B || b->val.dim(2) != H || b->val.dim(3) != W)
        throw param_error("concat_channels: dim mismatch");
    int64_t hw = static_cast<int64_t>(H) * W;
    Tensor out({B, Ca + Cb, H, W});
    for (int bi = 0; bi < B; ++bi) {
        std::memcpy(out.data.data() + static_cast<size_t>(bi) * (Ca + Cb) * hw,
                    a->val.data.data() + static_cast<size_t>(bi) * Ca * hw,
                    sizeof(double) * static_cast<size_t>(Ca) * hw);
        std::memcpy(out.data.data() + (static_cast<size_t>(bi) * (Ca + Cb) + Ca) * hw,
                    b->val.data.data() + static_cast<size_t>(bi) * Cb * hw,
                    sizeof(double) * static_cast<size_t>(Cb) * hw);
    }
    Node* pa = a.get();
    Node* pb = b.get();
    return make_node(std::move(out), {a, b}, [pa, pb, B, Ca, Cb, hw](Node& self) {
        for (int bi = 0; bi < B; ++bi) {
            const double* g = self.grad.data.data() + static_cast<size_t>(bi) * (Ca + Cb) * hw;
            if (pa->needs) {
                pa->ensure_grad();
                double* ga = pa->grad.data.data() + static_cast<size_t>(bi) * Ca * hw;
                for (int64_t i = 0; i < Ca * hw; ++i) ga[i] += g[i];
            }
            if (pb->needs) {
                pb->ensure_grad();
                double* gb = pb->grad.data.data() + static_cast<size_t>(bi) * Cb * hw;
                for (int64_t i = 0; i < Cb * hw; ++i) gb[i] += g[Ca * hw + i];
            }
        }
    });
}

NodePtr upsample_nearest2(const NodePtr& x) {
    if (x->val.rank() != 4) throw param_error("upsample_nearest2: want [B,C,H,W]");
    int B = x->val.dim(0), C = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
    Tensor out({B, C, 2 * H, 2 * W});
    for (int bc = 0; bc < B * C; ++bc) {
        const double* src = x->val.data.data() + static_cast<size_t>(bc) * H * W;
        double* dst = out.data.data() + static_cast<size_t>(bc) * 4 * H * W;
        for (int i = 0; i < 2 * H; ++i)
            for (int j = 0; j < 2 * W; ++j)
                dst[i * 2 * W + j] = src[(i / 2) * W + j / 2];
    }
    Node* px = x.get();
    return make_node(std::move(out), {x}, [px, B, C, H, W](Node& self) {
        if (!px->needs) return;
        px->ensure_grad();
        for (int bc = 0; bc < B * C; ++bc) {
            double* g = px->grad.data.data() + static_cast<size_t>(bc) * H * W;
            const double* go = self.grad.data.data() + static_cast<size_t>(bc) * 4 * H * W;
            for (int i = 0; i < 2 * H; ++i)
                for (int j = 0; j < 2 * W; ++j) g[(i / 2) * W + j / 2] += go[i * 2 * W + j];
        }
    });
}

NodePtr add_channel_vec(const NodePtr& x, const NodePtr& v) {
    if (x->val.rank() != 4 || v->val.rank() != 2) throw param_error("add_channel_vec: ranks");
    int B = x->val.dim(0), C = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
    if (v->val.dim(0) != B || v->val.dim(1) != C) throw param_error("add_channel_vec: dims");
    int64_t hw = static_cast<int64_t>(H) * W;
    Tensor out = x->val;
    for (int bi = 0; bi < B; ++bi)
        for (int c = 0; c < C; ++c) {
            double a = v->val.at2(bi, c);
            double* dst = out.data.data() + (static_cast<size_t>(bi) * C + c) * hw;
            for (int64_t i = 0; i < hw; ++i) dst[i] += a;
        }
    Node* px = x.get();
    Node* pv = v.get();
    return make_node(std::move(out), {x, v}, [px, pv, B, C, hw](Node& self) {
        if (px->needs) {
            px->ensure_grad();
            acc(px->grad, self.grad);
        }
        if (pv->needs) {
            pv->ensure_grad();
            for (int bi = 0; bi < B; ++bi)
                for (int c = 0; c < C; ++c) {
                    const double* g = self.grad.data.data() + (static_cast<size_t>(bi) * C + c) * hw;
                    double s = 0.0;
                    for (int64_t i = 0; i < hw; ++i) s += g[i];
                    pv->grad.at2(bi, c) += s;
                }
        }
    });
}

}  // namespace mvht::ops
