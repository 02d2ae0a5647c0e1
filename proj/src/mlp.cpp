#include "neolink/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace neolink {

namespace {

double softplus(double x) {
    // log(1 + e^x) without overflow for large |x|.
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double softplus_slope(double x) {
    // logistic(x)
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Mlp::Mlp(int in_dim, int hidden_dim, int out_dim, OutputActivation act)
    : w1(static_cast<std::size_t>(hidden_dim) * in_dim, 0.0),
      b1(static_cast<std::size_t>(hidden_dim), 0.0),
      w2(static_cast<std::size_t>(out_dim) * hidden_dim, 0.0),
      b2(static_cast<std::size_t>(out_dim), 0.0),
      in_dim_(in_dim),
      hidden_dim_(hidden_dim),
      out_dim_(out_dim),
      act_(act) {
    if (in_dim <= 0 || hidden_dim <= 0 || out_dim <= 0)
        throw std::invalid_argument("Mlp: dimensions must be positive");
}

void Mlp::init(std::mt19937_64& rng) {
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in_dim_));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim_));
    std::uniform_real_distribution<double> d1(-s1, s1);
    std::uniform_real_distribution<double> d2(-s2, s2);
    for (auto& w : w1) w = d1(rng);
    for (auto& b : b1) b = d1(rng);
    for (auto& w : w2) w = d2(rng);
    for (auto& b : b2) b = d2(rng);
}

void Mlp::forward(std::span<const double> x, std::span<double> y,
                  Trace* trace) const {
    if (static_cast<int>(x.size()) != in_dim_ ||
        static_cast<int>(y.size()) != out_dim_)
        throw std::invalid_argument("Mlp::forward: dimension mismatch");

    std::vector<double> pre_hidden(static_cast<std::size_t>(hidden_dim_));
    std::vector<double> hidden(static_cast<std::size_t>(hidden_dim_));
    for (int j = 0; j < hidden_dim_; ++j) {
        double acc = b1[static_cast<std::size_t>(j)];
        const double* wrow = w1.data() + static_cast<std::size_t>(j) * in_dim_;
        for (int i = 0; i < in_dim_; ++i) acc += wrow[i] * x[static_cast<std::size_t>(i)];
        pre_hidden[static_cast<std::size_t>(j)] = acc;
        hidden[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : 0.0;
    }

    std::vector<double> pre_out(static_cast<std::size_t>(out_dim_));
    for (int k = 0; k < out_dim_; ++k) {
        double acc = b2[static_cast<std::size_t>(k)];
        const double* wrow = w2.data() + static_cast<std::size_t>(k) * hidden_dim_;
        for (int j = 0; j < hidden_dim_; ++j) acc += wrow[j] * hidden[static_cast<std::size_t>(j)];
        pre_out[static_cast<std::size_t>(k)] = acc;
        y[static_cast<std::size_t>(k)] =
            act_ == OutputActivation::softplus ? softplus(acc) : acc;
    }

    if (trace) {
        trace->input.assign(x.begin(), x.end());
        trace->pre_hidden = std::move(pre_hidden);
        trace->hidden = std::move(hidden);
        trace->pre_out = std::move(pre_out);
    }
}

void Mlp::backward(const Trace& trace, std::span<const double> dy, Mlp& grad,
                   std::span<double> dx) const {
    if (static_cast<int>(dy.size()) != out_dim_)
        throw std::invalid_argument("Mlp::backward: dy dimension mismatch");
    if (!dx.empty() && static_cast<int>(dx.size()) != in_dim_)
        throw std::invalid_argument("Mlp::backward: dx dimension mismatch");

    // Through the output activation.
    std::vector<double> dpre_out(static_cast<std::size_t>(out_dim_));
    for (int k = 0; k < out_dim_; ++k) {
        double g = dy[static_cast<std::size_t>(k)];
        if (act_ == OutputActivation::softplus)
            g *= softplus_slope(trace.pre_out[static_cast<std::size_t>(k)]);
        dpre_out[static_cast<std::size_t>(k)] = g;
    }

    // Second layer: y_k = b2_k + sum_j w2_kj h_j.
    std::vector<double> dhidden(static_cast<std::size_t>(hidden_dim_), 0.0);
    for (int k = 0; k < out_dim_; ++k) {
        const double g = dpre_out[static_cast<std::size_t>(k)];
        grad.b2[static_cast<std::size_t>(k)] += g;
        double* gw = grad.w2.data() + static_cast<std::size_t>(k) * hidden_dim_;
        const double* w = w2.data() + static_cast<std::size_t>(k) * hidden_dim_;
        for (int j = 0; j < hidden_dim_; ++j) {
            gw[j] += g * trace.hidden[static_cast<std::size_t>(j)];
            dhidden[static_cast<std::size_t>(j)] += g * w[j];
        }
    }

    // ReLU.
    for (int j = 0; j < hidden_dim_; ++j)
        if (trace.pre_hidden[static_cast<std::size_t>(j)] <= 0.0)
            dhidden[static_cast<std::size_t>(j)] = 0.0;

    // First layer.
    for (int j = 0; j < hidden_dim_; ++j) {
        const double g = dhidden[static_cast<std::size_t>(j)];
        grad.b1[static_cast<std::size_t>(j)] += g;
        double* gw = grad.w1.data() + static_cast<std::size_t>(j) * in_dim_;
        const double* w = w1.data() + static_cast<std::size_t>(j) * in_dim_;
        for (int i = 0; i < in_dim_; ++i) {
            gw[i] += g * trace.input[static_cast<std::size_t>(i)];
            if (!dx.empty()) dx[static_cast<std::size_t>(i)] += g * w[i];
        }
    }
}

void Mlp::zero() {
    std::fill(w1.begin(), w1.end(), 0.0);
    std::fill(b1.begin(), b1.end(), 0.0);
    std::fill(w2.begin(), w2.end(), 0.0);
    std::fill(b2.begin(), b2.end(), 0.0);
}

Mlp Mlp::zeros_like() const {
    if (in_dim_ == 0) return Mlp{};
    return Mlp(in_dim_, hidden_dim_, out_dim_, act_);
}

std::size_t Mlp::param_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
}

void Mlp::collect_params(std::vector<double*>& out) {
    for (auto& v : w1) out.push_back(&v);
    for (auto& v : b1) out.push_back(&v);
    for (auto& v : w2) out.push_back(&v);
    for (auto& v : b2) out.push_back(&v);
}

const char* scalar_kind_name(ScalarKind kind) {
    switch (kind) {
        case ScalarKind::mlp: return "mlp";
        case ScalarKind::identity: return "identity";
        case ScalarKind::one: return "one";
        case ScalarKind::inv_log: return "inv_log";
        case ScalarKind::inv_sqrt_log: return "inv_sqrt_log";
        case ScalarKind::inv_sqrt: return "inv_sqrt";
    }
    return "?";
}

ScalarKind scalar_kind_from_name(const std::string& name) {
    if (name == "mlp") return ScalarKind::mlp;
    if (name == "identity") return ScalarKind::identity;
    if (name == "one") return ScalarKind::one;
    if (name == "inv_log") return ScalarKind::inv_log;
    if (name == "inv_sqrt_log") return ScalarKind::inv_sqrt_log;
    if (name == "inv_sqrt") return ScalarKind::inv_sqrt;
    throw DataError("unknown scalar map kind: " + name);
}

ScalarMap ScalarMap::analytic(ScalarKind kind) {
    if (kind == ScalarKind::mlp)
        throw std::invalid_argument("ScalarMap::analytic: mlp is not analytic");
    ScalarMap m;
    m.kind_ = kind;
    return m;
}

ScalarMap ScalarMap::trainable(int hidden_dim, std::mt19937_64& rng,
                               OutputActivation act) {
    ScalarMap m;
    m.kind_ = ScalarKind::mlp;
    m.mlp_ = Mlp(1, hidden_dim, 1, act);
    m.mlp_.init(rng);
    return m;
}

double ScalarMap::value(double x) const {
    switch (kind_) {
        case ScalarKind::mlp: {
            double y = 0.0;
            mlp_.forward({&x, 1}, {&y, 1});
            return y;
        }
        case ScalarKind::identity:
            return x;
        case ScalarKind::one:
            return 1.0;
        case ScalarKind::inv_log:
            // Degrees <= 1 would blow 1/log(d) up; treat them as contributing
            // nothing, mirroring the classical AA skip rule.
            return x > 1.0 ? 1.0 / std::log(x) : 0.0;
        case ScalarKind::inv_sqrt_log:
            return x > 1.0 ? 1.0 / std::sqrt(std::log(x)) : 0.0;
        case ScalarKind::inv_sqrt:
            return x > 0.0 ? 1.0 / std::sqrt(x) : 0.0;
    }
    return 0.0;
}

double ScalarMap::slope(double x) const {
    switch (kind_) {
        case ScalarKind::mlp: {
            Mlp::Trace trace;
            double y = 0.0;
            mlp_.forward({&x, 1}, {&y, 1}, &trace);
            Mlp scratch = mlp_.zeros_like();
            double dx = 0.0;
            const double dy = 1.0;
            mlp_.backward(trace, {&dy, 1}, scratch, {&dx, 1});
            return dx;
        }
        case ScalarKind::identity:
            return 1.0;
        case ScalarKind::one:
            return 0.0;
        case ScalarKind::inv_log: {
            if (x <= 1.0) return 0.0;
            const double lg = std::log(x);
            return -1.0 / (x * lg * lg);
        }
        case ScalarKind::inv_sqrt_log: {
            if (x <= 1.0) return 0.0;
            const double lg = std::log(x);
            return -0.5 / (x * lg * std::sqrt(lg));
        }
        case ScalarKind::inv_sqrt:
            return x > 0.0 ? -0.5 / (x * std::sqrt(x)) : 0.0;
    }
    return 0.0;
}

double ScalarMap::backward(double x, double dy, ScalarMap* grad) const {
    if (kind_ != ScalarKind::mlp) return dy * slope(x);
    Mlp::Trace trace;
    double y = 0.0;
    mlp_.forward({&x, 1}, {&y, 1}, &trace);
    double dx = 0.0;
    if (grad && grad->kind_ == ScalarKind::mlp) {
        mlp_.backward(trace, {&dy, 1}, grad->mlp_, {&dx, 1});
    } else {
        Mlp scratch = mlp_.zeros_like();
        mlp_.backward(trace, {&dy, 1}, scratch, {&dx, 1});
    }
    return dx;
}

void ScalarMap::zero() {
    if (kind_ == ScalarKind::mlp) mlp_.zero();
}

ScalarMap ScalarMap::zeros_like() const {
    ScalarMap m;
    m.kind_ = kind_;
    if (kind_ == ScalarKind::mlp) m.mlp_ = mlp_.zeros_like();
    return m;
}

std::size_t ScalarMap::param_count() const {
    return kind_ == ScalarKind::mlp ? mlp_.param_count() : 0;
}

void ScalarMap::collect_params(std::vector<double*>& out) {
    if (kind_ == ScalarKind::mlp) mlp_.collect_params(out);
}

}  // namespace neolink
