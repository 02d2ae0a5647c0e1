#pragma once

#include <random>
#include <span>
#include <vector>

#include "neolink/common.hpp"

namespace neolink {

enum class OutputActivation { identity, softplus };

// Two fully-connected layers with ReLU in between. Parameters live in flat
// vectors so optimizers can walk them uniformly; gradients are accumulated
// into a second Mlp with identical shape.
class Mlp {
public:
    Mlp() = default;
    Mlp(int in_dim, int hidden_dim, int out_dim,
        OutputActivation act = OutputActivation::identity);

    // Captures everything backward() needs from one forward pass.
    struct Trace {
        std::vector<double> input;
        std::vector<double> pre_hidden;
        std::vector<double> hidden;
        std::vector<double> pre_out;
    };

    int in_dim() const { return in_dim_; }
    int hidden_dim() const { return hidden_dim_; }
    int out_dim() const { return out_dim_; }
    OutputActivation activation() const { return act_; }

    // Uniform(-s, s) with s = 1/sqrt(fan_in), weights and biases alike.
    void init(std::mt19937_64& rng);

    void forward(std::span<const double> x, std::span<double> y,
                 Trace* trace = nullptr) const;

    // Accumulates parameter gradients into `grad` (same shape, not cleared)
    // and, when `dx` is non-empty, adds the input gradient into it.
    void backward(const Trace& trace, std::span<const double> dy, Mlp& grad,
                  std::span<double> dx = {}) const;

    void zero();
    Mlp zeros_like() const;
    std::size_t param_count() const;
    void collect_params(std::vector<double*>& out);

    // Layout: w1 is hidden x in, w2 is out x hidden, both row-major.
    std::vector<double> w1, b1, w2, b2;

private:
    int in_dim_ = 0;
    int hidden_dim_ = 0;
    int out_dim_ = 0;
    OutputActivation act_ = OutputActivation::identity;
};

// Scalar-to-scalar map used for the edge/node/readout transforms. Either a
// trainable 1->1 Mlp or one of the frozen closed forms that reproduce the
// classical overlap heuristics.
enum class ScalarKind { mlp, identity, one, inv_log, inv_sqrt_log, inv_sqrt };

const char* scalar_kind_name(ScalarKind kind);
ScalarKind scalar_kind_from_name(const std::string& name);

class ScalarMap {
public:
    ScalarMap() = default;

    static ScalarMap analytic(ScalarKind kind);
    static ScalarMap trainable(int hidden_dim, std::mt19937_64& rng,
                               OutputActivation act = OutputActivation::identity);

    ScalarKind kind() const { return kind_; }
    bool is_trainable() const { return kind_ == ScalarKind::mlp; }

    double value(double x) const;
    // d value / d x. For the frozen kinds this is the closed-form derivative,
    // zero on the clipped region.
    double slope(double x) const;

    // Returns d loss / d x given upstream dy; for the mlp kind additionally
    // accumulates parameter gradients into `grad` (ignored otherwise).
    double backward(double x, double dy, ScalarMap* grad) const;

    void zero();
    ScalarMap zeros_like() const;
    std::size_t param_count() const;
    void collect_params(std::vector<double*>& out);

    Mlp& mlp() { return mlp_; }
    const Mlp& mlp() const { return mlp_; }

private:
    ScalarKind kind_ = ScalarKind::identity;
    Mlp mlp_;
};

}  // namespace neolink
