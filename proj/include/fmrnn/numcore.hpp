#pragma once

// Numeric core: dense row-major matrices, a named parameter store with paired
// gradient buffers, seeded deterministic RNG, SGD with exponential decay, and
// the central-difference gradient checker used to validate every backward pass.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fmrnn {

using Vec = std::vector<double>;

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    double* row(std::size_t r) { return a.data() + r * cols; }
    const double* row(std::size_t r) const { return a.data() + r * cols; }

    Vec row_vec(std::size_t r) const { return Vec(row(r), row(r) + cols); }

    bool operator==(const Matrix& o) const { return rows == o.rows && cols == o.cols && a == o.a; }
};

// One named parameter: flat value array with a gradient buffer of equal length.
struct Tensor {
    std::vector<std::size_t> shape;
    Vec value;
    Vec grad;

    std::size_t size() const { return value.size(); }
};

// Opaque handle into a ParamStore; stable for the lifetime of the store.
struct ParamId {
    std::size_t idx = static_cast<std::size_t>(-1);
};

// Ordered collection of uniquely named parameters. Entry order is the
// serialization order for checkpoints.
class ParamStore {
public:
    ParamId add(const std::string& name, std::vector<std::size_t> shape) {
        for (const auto& e : entries_)
            require(e.first != name, "duplicate parameter name: " + name);
        std::size_t n = 1;
        for (std::size_t s : shape) n *= s;
        Tensor t;
        t.shape = std::move(shape);
        t.value.assign(n, 0.0);
        t.grad.assign(n, 0.0);
        entries_.emplace_back(name, std::move(t));
        return ParamId{entries_.size() - 1};
    }

    Tensor& operator[](ParamId id) { return entries_.at(id.idx).second; }
    const Tensor& operator[](ParamId id) const { return entries_.at(id.idx).second; }

    const std::string& name(ParamId id) const { return entries_.at(id.idx).first; }

    ParamId find(const std::string& name) const {
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (entries_[i].first == name) return ParamId{i};
        throw std::runtime_error("no such parameter: " + name);
    }

    std::size_t count() const { return entries_.size(); }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.second.size();
        return n;
    }

    void zero_grad() {
        for (auto& e : entries_)
            std::fill(e.second.grad.begin(), e.second.grad.end(), 0.0);
    }

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

// Learning-rate schedule: base_lr * decay_rate^epoch.
struct OptimState {
    double base_lr = 0.001;
    double decay_rate = 0.9;
    std::size_t epoch = 0;

    double effective_lr() const { return base_lr * std::pow(decay_rate, static_cast<double>(epoch)); }
};

// One SGD update: w <- w - effective_lr * grad, then gradients are cleared.
// A non-finite gradient aborts and names the offending parameter.
inline void sgd_step(ParamStore& store, const OptimState& opt) {
    const double lr = opt.effective_lr();
    for (std::size_t i = 0; i < store.count(); ++i) {
        Tensor& t = store[ParamId{i}];
        for (double g : t.grad)
            require(std::isfinite(g),
                    "non-finite gradient in parameter '" + store.name(ParamId{i}) + "'");
        for (std::size_t j = 0; j < t.size(); ++j) t.value[j] -= lr * t.grad[j];
    }
    store.zero_grad();
}

// Counter-based deterministic RNG (splitmix64 core, Box-Muller for normals).
// The draw sequence depends only on the seed, on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::size_t index(std::size_t n) {
        require(n > 0, "Rng::index: empty range");
        // Modulo bias is negligible at 64 bits for desk-scale n.
        return static_cast<std::size_t>(next_u64() % n);
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] keeps the log finite.
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    Vec gaussian_vec(std::size_t n) {
        Vec v(n);
        for (auto& x : v) x = gaussian();
        return v;
    }

    // Independent child stream; pure function of (current seed, label).
    Rng derive(std::uint64_t label) const {
        Rng mix(state_ ^ (0x6a09e667f3bcc909ULL + label * 0x9e3779b97f4a7c15ULL));
        return Rng(mix.next_u64());
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Max relative error between analytic gradients (filled by f) and central
// differences. f evaluates the loss from the parameters in `store` and
// accumulates d loss / d params into the paired gradient buffers.
inline double grad_check(const std::function<double(ParamStore&)>& f, ParamStore& store,
                         double eps) {
    require(eps > 0.0, "grad_check: eps must be positive");
    store.zero_grad();
    double base = f(store);
    require(std::isfinite(base), "grad_check: function returned non-finite value");

    // Snapshot analytic gradients before the perturbation runs overwrite them.
    std::vector<Vec> analytic(store.count());
    for (std::size_t i = 0; i < store.count(); ++i) analytic[i] = store[ParamId{i}].grad;

    double worst = 0.0;
    for (std::size_t i = 0; i < store.count(); ++i) {
        Tensor& t = store[ParamId{i}];
        for (std::size_t j = 0; j < t.size(); ++j) {
            const double saved = t.value[j];
            t.value[j] = saved + eps;
            store.zero_grad();
            double up = f(store);
            t.value[j] = saved - eps;
            store.zero_grad();
            double down = f(store);
            t.value[j] = saved;
            require(std::isfinite(up) && std::isfinite(down),
                    "grad_check: function returned non-finite value");
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[i][j];
            const double denom = std::max(1e-12, std::fabs(a) + std::fabs(numeric));
            worst = std::max(worst, std::fabs(a - numeric) / denom);
        }
    }
    store.zero_grad();
    return worst;
}

// Glorot-uniform init for a weight matrix stored as [fan_out x fan_in].
inline void init_glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : t.value) v = rng.uniform(-bound, bound);
}

}  // namespace fmrnn
