#pragma once

// Differentiable blocks: LSTM cell (scalar or vector input), RBF kernel layer,
// MLP with ReLU hiddens, softmax cross-entropy, and the generator /
// discriminator losses. Forward passes are pure; backward passes accumulate
// into the ParamStore gradient buffers.

#include "fmrnn/numcore.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace fmrnn {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Keeps -log(p) finite when a discriminator saturates.
inline constexpr double kProbClampEps = 1e-7;

// ---------------------------------------------------------------------------
// LSTM cell
// ---------------------------------------------------------------------------

// Gate order used throughout: input, forget, candidate, output.
enum LstmGate { kGateIn = 0, kGateForget = 1, kGateCand = 2, kGateOut = 3 };

struct LstmCell {
    std::size_t input_dim = 0;
    std::size_t hidden = 0;
    std::array<ParamId, 4> wx;  // hidden x input_dim
    std::array<ParamId, 4> wh;  // hidden x hidden
    std::array<ParamId, 4> b;   // hidden
};

inline LstmCell make_lstm_cell(ParamStore& store, const std::string& prefix,
                               std::size_t input_dim, std::size_t hidden) {
    require(input_dim > 0 && hidden > 0, "make_lstm_cell: dimensions must be positive");
    static const char* gate_names[4] = {"i", "f", "g", "o"};
    LstmCell cell;
    cell.input_dim = input_dim;
    cell.hidden = hidden;
    for (int g = 0; g < 4; ++g) {
        cell.wx[g] = store.add(prefix + ".wx_" + gate_names[g], {hidden, input_dim});
        cell.wh[g] = store.add(prefix + ".wh_" + gate_names[g], {hidden, hidden});
        cell.b[g] = store.add(prefix + ".b_" + gate_names[g], {hidden});
    }
    return cell;
}

// Glorot weights; forget-gate bias 1.0, other biases 0.
inline void init_lstm_cell(ParamStore& store, const LstmCell& cell, Rng& rng) {
    for (int g = 0; g < 4; ++g) {
        init_glorot(store[cell.wx[g]], cell.input_dim, cell.hidden, rng);
        init_glorot(store[cell.wh[g]], cell.hidden, cell.hidden, rng);
        std::fill(store[cell.b[g]].value.begin(), store[cell.b[g]].value.end(),
                  g == kGateForget ? 1.0 : 0.0);
    }
}

inline std::size_t lstm_param_count(const LstmCell& cell) {
    return 4 * (cell.hidden * cell.input_dim + cell.hidden * cell.hidden + cell.hidden);
}

struct LstmState {
    Vec h;
    Vec c;

    LstmState() = default;
    explicit LstmState(std::size_t hidden) : h(hidden, 0.0), c(hidden, 0.0) {}
};

struct LstmStepCache {
    Vec x, h_prev, c_prev;
    Vec gate_i, gate_f, gate_g, gate_o;
    Vec c, tanh_c;
};

inline LstmState lstm_step(const ParamStore& store, const LstmCell& cell, const Vec& x,
                           const LstmState& state, LstmStepCache* cache = nullptr) {
    const std::size_t H = cell.hidden;
    require(x.size() == cell.input_dim, "lstm_step: input length does not match input_dim");
    require(state.h.size() == H && state.c.size() == H,
            "lstm_step: state dimensions do not match hidden size");

    auto affine = [&](int g, Vec& out) {
        const Tensor& Wx = store[cell.wx[g]];
        const Tensor& Wh = store[cell.wh[g]];
        const Tensor& B = store[cell.b[g]];
        out.assign(H, 0.0);
        for (std::size_t r = 0; r < H; ++r) {
            double z = B.value[r];
            const double* wxr = Wx.value.data() + r * cell.input_dim;
            for (std::size_t cidx = 0; cidx < cell.input_dim; ++cidx) z += wxr[cidx] * x[cidx];
            const double* whr = Wh.value.data() + r * H;
            for (std::size_t cidx = 0; cidx < H; ++cidx) z += whr[cidx] * state.h[cidx];
            out[r] = z;
        }
    };

    Vec zi, zf, zg, zo;
    affine(kGateIn, zi);
    affine(kGateForget, zf);
    affine(kGateCand, zg);
    affine(kGateOut, zo);

    LstmState next(H);
    Vec gi(H), gf(H), gg(H), go(H), tc(H);
    for (std::size_t r = 0; r < H; ++r) {
        gi[r] = logistic(zi[r]);
        gf[r] = logistic(zf[r]);
        gg[r] = std::tanh(zg[r]);
        go[r] = logistic(zo[r]);
        next.c[r] = gf[r] * state.c[r] + gi[r] * gg[r];
        tc[r] = std::tanh(next.c[r]);
        next.h[r] = go[r] * tc[r];
    }

    if (cache) {
        cache->x = x;
        cache->h_prev = state.h;
        cache->c_prev = state.c;
        cache->gate_i = std::move(gi);
        cache->gate_f = std::move(gf);
        cache->gate_g = std::move(gg);
        cache->gate_o = std::move(go);
        cache->c = next.c;
        cache->tanh_c = std::move(tc);
    }
    return next;
}

// Backward through one step. d_h/d_c are gradients w.r.t. this step's outputs;
// on return d_h_prev/d_c_prev hold the gradients w.r.t. the incoming state and
// d_x (when non-null) the gradient w.r.t. the input.
inline void lstm_step_backward(ParamStore& store, const LstmCell& cell, const LstmStepCache& cc,
                               const Vec& d_h, const Vec& d_c, Vec& d_h_prev, Vec& d_c_prev,
                               Vec* d_x = nullptr) {
    const std::size_t H = cell.hidden;
    Vec dzi(H), dzf(H), dzg(H), dzo(H);
    d_h_prev.assign(H, 0.0);
    d_c_prev.assign(H, 0.0);
    if (d_x) d_x->assign(cell.input_dim, 0.0);

    for (std::size_t r = 0; r < H; ++r) {
        const double dho = d_h[r];
        const double do_ = dho * cc.tanh_c[r];
        double dc = d_c[r] + dho * cc.gate_o[r] * (1.0 - cc.tanh_c[r] * cc.tanh_c[r]);
        const double di = dc * cc.gate_g[r];
        const double df = dc * cc.c_prev[r];
        const double dg = dc * cc.gate_i[r];
        d_c_prev[r] = dc * cc.gate_f[r];
        dzi[r] = di * cc.gate_i[r] * (1.0 - cc.gate_i[r]);
        dzf[r] = df * cc.gate_f[r] * (1.0 - cc.gate_f[r]);
        dzg[r] = dg * (1.0 - cc.gate_g[r] * cc.gate_g[r]);
        dzo[r] = do_ * cc.gate_o[r] * (1.0 - cc.gate_o[r]);
    }

    const Vec* dz[4] = {&dzi, &dzf, &dzg, &dzo};
    for (int g = 0; g < 4; ++g) {
        Tensor& Wx = store[cell.wx[g]];
        Tensor& Wh = store[cell.wh[g]];
        Tensor& B = store[cell.b[g]];
        const Vec& d = *dz[g];
        for (std::size_t r = 0; r < H; ++r) {
            const double dr = d[r];
            B.grad[r] += dr;
            double* gx = Wx.grad.data() + r * cell.input_dim;
            const double* wx = Wx.value.data() + r * cell.input_dim;
            for (std::size_t cidx = 0; cidx < cell.input_dim; ++cidx) {
                gx[cidx] += dr * cc.x[cidx];
                if (d_x) (*d_x)[cidx] += dr * wx[cidx];
            }
            double* gh = Wh.grad.data() + r * H;
            const double* wh = Wh.value.data() + r * H;
            for (std::size_t cidx = 0; cidx < H; ++cidx) {
                gh[cidx] += dr * cc.h_prev[cidx];
                d_h_prev[cidx] += dr * wh[cidx];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// RBF kernel layer
// ---------------------------------------------------------------------------

// n Gaussian kernels over an in_dim input; output out_c = sum_j coeff[j][c] *
// exp(-||h - center_j||^2 / width_j^2). Widths are stored as logs so they stay
// positive under SGD.
struct RbfLayer {
    std::size_t kernels = 0;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    ParamId centers;     // n x in_dim
    ParamId log_widths;  // n
    ParamId coeffs;      // n x out_dim
};

inline RbfLayer make_rbf_layer(ParamStore& store, const std::string& prefix, std::size_t kernels,
                               std::size_t in_dim, std::size_t out_dim) {
    require(kernels > 0 && in_dim > 0 && out_dim > 0, "make_rbf_layer: dimensions must be positive");
    RbfLayer l;
    l.kernels = kernels;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    l.centers = store.add(prefix + ".centers", {kernels, in_dim});
    l.log_widths = store.add(prefix + ".log_widths", {kernels});
    l.coeffs = store.add(prefix + ".coeffs", {kernels, out_dim});
    return l;
}

// Standard-normal centers, dimension-normalized widths, small uniform
// coefficients. sigma^2 = in_dim keeps exp(-||h - mu||^2 / sigma^2) of order
// exp(-1) at init for any input width; a fixed unit width collapses to
// exp(-in_dim), which underflows for wide layers and freezes every gradient
// through the kernel.
inline void init_rbf_layer(ParamStore& store, const RbfLayer& l, Rng& rng) {
    for (auto& v : store[l.centers].value) v = rng.gaussian();
    std::fill(store[l.log_widths].value.begin(), store[l.log_widths].value.end(),
              0.5 * std::log(static_cast<double>(l.in_dim)));
    for (auto& v : store[l.coeffs].value) v = rng.uniform(-0.1, 0.1);
}

inline Vec rbf_forward(const ParamStore& store, const RbfLayer& l, const Vec& h) {
    require(h.size() == l.in_dim, "rbf_forward: input length does not match layer");
    const Tensor& mu = store[l.centers];
    const Tensor& lw = store[l.log_widths];
    const Tensor& al = store[l.coeffs];
    Vec out(l.out_dim, 0.0);
    for (std::size_t j = 0; j < l.kernels; ++j) {
        const double* muj = mu.value.data() + j * l.in_dim;
        double q = 0.0;
        for (std::size_t t = 0; t < l.in_dim; ++t) {
            const double dtj = h[t] - muj[t];
            q += dtj * dtj;
        }
        const double sigma = std::exp(lw.value[j]);
        const double r = std::exp(-q / (sigma * sigma));
        const double* aj = al.value.data() + j * l.out_dim;
        for (std::size_t c = 0; c < l.out_dim; ++c) out[c] += aj[c] * r;
    }
    return out;
}

// Accumulates parameter gradients and returns d loss / d h. The width
// gradient is routed through sigma = exp(log_width).
inline Vec rbf_backward(ParamStore& store, const RbfLayer& l, const Vec& h, const Vec& upstream) {
    require(h.size() == l.in_dim, "rbf_backward: input length does not match layer");
    require(upstream.size() == l.out_dim, "rbf_backward: upstream length does not match layer");
    Tensor& mu = store[l.centers];
    Tensor& lw = store[l.log_widths];
    Tensor& al = store[l.coeffs];
    Vec d_h(l.in_dim, 0.0);
    for (std::size_t j = 0; j < l.kernels; ++j) {
        const double* muj = mu.value.data() + j * l.in_dim;
        double q = 0.0;
        for (std::size_t t = 0; t < l.in_dim; ++t) {
            const double dtj = h[t] - muj[t];
            q += dtj * dtj;
        }
        const double sigma = std::exp(lw.value[j]);
        const double inv_s2 = 1.0 / (sigma * sigma);
        const double r = std::exp(-q * inv_s2);
        const double* aj = al.value.data() + j * l.out_dim;
        double* gaj = al.grad.data() + j * l.out_dim;
        double gj = 0.0;  // upstream dot coeff row
        for (std::size_t c = 0; c < l.out_dim; ++c) {
            gaj[c] += upstream[c] * r;
            gj += upstream[c] * aj[c];
        }
        const double common = gj * r * inv_s2;
        double* gmuj = mu.grad.data() + j * l.in_dim;
        for (std::size_t t = 0; t < l.in_dim; ++t) {
            const double dtj = h[t] - muj[t];
            d_h[t] += common * (-2.0) * dtj;
            gmuj[t] += common * 2.0 * dtj;
        }
        // d/d log_width = d/d sigma * sigma = gj * r * 2 q / sigma^2
        lw.grad[j] += common * 2.0 * q;
    }
    return d_h;
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

// Affine + ReLU per hidden layer, affine final layer.
struct Mlp {
    std::vector<std::size_t> widths;  // input, hidden..., output
    std::vector<ParamId> w;           // widths[l+1] x widths[l]
    std::vector<ParamId> b;
};

inline Mlp make_mlp(ParamStore& store, const std::string& prefix,
                    std::vector<std::size_t> widths) {
    require(widths.size() >= 2, "make_mlp: need at least input and output widths");
    for (std::size_t wd : widths) require(wd > 0, "make_mlp: widths must be positive");
    Mlp m;
    m.widths = std::move(widths);
    for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
        m.w.push_back(store.add(prefix + ".w" + std::to_string(l), {m.widths[l + 1], m.widths[l]}));
        m.b.push_back(store.add(prefix + ".b" + std::to_string(l), {m.widths[l + 1]}));
    }
    return m;
}

inline void init_mlp(ParamStore& store, const Mlp& m, Rng& rng) {
    for (std::size_t l = 0; l < m.w.size(); ++l)
        init_glorot(store[m.w[l]], m.widths[l], m.widths[l + 1], rng);
}

struct MlpCache {
    std::vector<Vec> acts;  // acts[0] = input, acts[l+1] = output of layer l
};

inline Vec mlp_forward(const ParamStore& store, const Mlp& m, const Vec& x,
                       MlpCache* cache = nullptr) {
    require(x.size() == m.widths.front(), "mlp_forward: input length does not match first width");
    if (cache) {
        cache->acts.clear();
        cache->acts.push_back(x);
    }
    Vec cur = x;
    for (std::size_t l = 0; l < m.w.size(); ++l) {
        const Tensor& W = store[m.w[l]];
        const Tensor& B = store[m.b[l]];
        const std::size_t out_w = m.widths[l + 1];
        const std::size_t in_w = m.widths[l];
        Vec next(out_w);
        const bool last = (l + 1 == m.w.size());
        for (std::size_t r = 0; r < out_w; ++r) {
            double z = B.value[r];
            const double* wr = W.value.data() + r * in_w;
            for (std::size_t c = 0; c < in_w; ++c) z += wr[c] * cur[c];
            next[r] = last ? z : std::max(0.0, z);
        }
        cur = std::move(next);
        if (cache) cache->acts.push_back(cur);
    }
    return cur;
}

// Accumulates parameter gradients and returns d loss / d input.
inline Vec mlp_backward(ParamStore& store, const Mlp& m, const MlpCache& cache,
                        const Vec& upstream) {
    require(cache.acts.size() == m.w.size() + 1, "mlp_backward: cache does not match network");
    require(upstream.size() == m.widths.back(), "mlp_backward: upstream length does not match");
    Vec d = upstream;
    for (std::size_t li = m.w.size(); li-- > 0;) {
        const bool last = (li + 1 == m.w.size());
        const std::size_t out_w = m.widths[li + 1];
        const std::size_t in_w = m.widths[li];
        const Vec& out_act = cache.acts[li + 1];
        const Vec& in_act = cache.acts[li];
        if (!last) {
            for (std::size_t r = 0; r < out_w; ++r)
                if (out_act[r] <= 0.0) d[r] = 0.0;
        }
        Tensor& W = store[m.w[li]];
        Tensor& B = store[m.b[li]];
        Vec d_in(in_w, 0.0);
        for (std::size_t r = 0; r < out_w; ++r) {
            const double dr = d[r];
            B.grad[r] += dr;
            double* gw = W.grad.data() + r * in_w;
            const double* wv = W.value.data() + r * in_w;
            for (std::size_t c = 0; c < in_w; ++c) {
                gw[c] += dr * in_act[c];
                d_in[c] += dr * wv[c];
            }
        }
        d = std::move(d_in);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Mean over coordinates of squared differences.
inline double l2_loss(const Vec& x_true, const Vec& x_pred) {
    require(x_true.size() == x_pred.size(), "l2_loss: length mismatch");
    require(!x_true.empty(), "l2_loss: empty vectors");
    double s = 0.0;
    for (std::size_t i = 0; i < x_true.size(); ++i) {
        const double d = x_pred[i] - x_true[i];
        s += d * d;
    }
    return s / static_cast<double>(x_true.size());
}

// d l2_loss / d x_pred.
inline Vec l2_loss_grad(const Vec& x_true, const Vec& x_pred) {
    require(x_true.size() == x_pred.size(), "l2_loss_grad: length mismatch");
    Vec g(x_true.size());
    const double scale = 2.0 / static_cast<double>(x_true.size());
    for (std::size_t i = 0; i < x_true.size(); ++i) g[i] = scale * (x_pred[i] - x_true[i]);
    return g;
}

inline double gen_adv_loss(double d_out) {
    return -std::log(std::clamp(d_out, kProbClampEps, 1.0));
}

// Zero where the clamp is active; that is the derivative of the function as
// implemented.
inline double gen_adv_loss_grad(double d_out) {
    if (d_out <= kProbClampEps || d_out > 1.0) return 0.0;
    return -1.0 / d_out;
}

inline double disc_loss(double d_real, double d_fake) {
    return -std::log(std::clamp(d_real, kProbClampEps, 1.0)) -
           std::log(std::clamp(1.0 - d_fake, kProbClampEps, 1.0));
}

// (d/d d_real, d/d d_fake)
inline std::pair<double, double> disc_loss_grad(double d_real, double d_fake) {
    double gr = 0.0, gf = 0.0;
    if (d_real > kProbClampEps && d_real <= 1.0) gr = -1.0 / d_real;
    const double one_minus = 1.0 - d_fake;
    if (one_minus > kProbClampEps && one_minus <= 1.0) gf = 1.0 / one_minus;
    return {gr, gf};
}

inline double total_gen_loss(double l2, double adv, double w_l2, double w_adv) {
    require(w_l2 >= 0.0 && w_adv >= 0.0, "total_gen_loss: weights must be non-negative");
    return w_l2 * l2 + w_adv * adv;
}

// Numerically stabilized softmax.
inline Vec softmax(const Vec& logits) {
    require(!logits.empty(), "softmax: empty logits");
    const double mx = *std::max_element(logits.begin(), logits.end());
    Vec probs(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - mx);
        z += probs[i];
    }
    for (auto& p : probs) p /= z;
    return probs;
}

// Numerically stabilized softmax + cross-entropy. Returns {loss, probs}.
inline std::pair<double, Vec> softmax_cross_entropy(const Vec& logits, std::size_t label) {
    require(!logits.empty(), "softmax_cross_entropy: empty logits");
    require(label < logits.size(), "softmax_cross_entropy: label out of range");
    const double mx = *std::max_element(logits.begin(), logits.end());
    Vec probs(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - mx);
        z += probs[i];
    }
    for (auto& p : probs) p /= z;
    const double loss = -(logits[label] - mx - std::log(z));
    return {loss, probs};
}

// d loss / d logits = probs - onehot(label).
inline Vec softmax_cross_entropy_grad(const Vec& probs, std::size_t label) {
    require(label < probs.size(), "softmax_cross_entropy_grad: label out of range");
    Vec g = probs;
    g[label] -= 1.0;
    return g;
}

}  // namespace fmrnn
