#pragma once

#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neolink/dense_matrix.hpp"
#include "neolink/graph.hpp"
#include "neolink/mlp.hpp"
#include "neolink/sparse_matrix.hpp"

namespace neolink {

// How the feature branch turns a pair of node representations into a score.
enum class PairScoreMode { hadamard_mlp, inner_product };

const char* pair_score_mode_name(PairScoreMode mode);
PairScoreMode pair_score_mode_from_name(const std::string& name);

struct ModelConfig {
    int num_nodes = 0;

    // Structural branch: x_i = f_node(sum_j f_edge(A_ij)), lifted to a
    // diagonal matrix and propagated through sum_l beta^{l-1} A^l.
    int hops = 1;  // L
    double beta = 0.5;
    double tau = 0.0;
    ScalarKind f_edge_kind = ScalarKind::mlp;
    ScalarKind f_node_kind = ScalarKind::mlp;
    ScalarKind g_phi_kind = ScalarKind::mlp;
    int scalar_hidden = 32;
    bool g_phi_softplus = false;

    // Feature branch (disable for the structure-only "no-gcn" mode).
    bool use_gcn = true;
    int gcn_layers = 3;
    int gcn_width = 256;
    int feature_dim = 0;      // 0 -> learnable free embeddings
    int embedding_dim = 256;  // width of free embeddings when feature_dim == 0
    PairScoreMode pair_mode = PairScoreMode::hadamard_mlp;
    int pair_hidden = 256;

    // Fusion and loss: y_hat = alpha * p_struct + (1 - alpha) * p_feat,
    // loss = sum lambda1*BCE(y_hat) + lambda2*BCE(p_struct) + lambda3*BCE(p_feat).
    double alpha_init = 0.0;  // alpha_raw; alpha = logistic(alpha_raw)
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lambda3 = 1.0;

    void validate() const;  // throws DataError
};

// Everything derived from the training graph that stays fixed across steps.
struct ModelInputs {
    SparseMatrix adjacency;
    PowerSeries series;
    SparseMatrix norm_adj;  // empty when use_gcn is off
    DenseMatrix features;   // empty when using free embeddings
};

// Per-forward cache of the structural branch.
struct StructuralState {
    std::vector<double> edge_aggregate;  // sum_j f_edge(A_ij) per node
    std::vector<double> x_struct;
    SparseMatrix x_diag;  // diag(x_struct)
    SparseMatrix z;       // g_phi applied entrywise to combined * diag(x_struct)
    // series.combined value per stored z entry; the pre-activation of entry k
    // is z_combined[k] * x_struct[col(k)].
    std::vector<double> z_combined;
};

struct GcnTrace {
    std::vector<DenseMatrix> inputs;      // H^0 .. H^layers (post-activation)
    std::vector<DenseMatrix> propagated;  // norm_adj * H^l
    std::vector<DenseMatrix> pre;         // (norm_adj * H^l) W^l
};

struct ModelForward {
    StructuralState state;
    DenseMatrix h;  // final representations; empty when use_gcn is off
    GcnTrace trace;
};

struct PairScore {
    double y_hat = 0.0;
    double p_struct = 0.0;
    double p_feat = 0.0;
    double raw_struct = 0.0;  // z_u . z_v
    double raw_feat = 0.0;    // s(h_u, h_v)
};

struct BatchExample {
    NodeId u = 0;
    NodeId v = 0;
    double label = 0.0;  // 0 or 1
};

struct TargetExample {
    NodeId u = 0;
    NodeId v = 0;
    double target = 0.0;  // heuristic score to regress z_u . z_v onto
};

double logistic(double x);

// Builds adjacency powers, the normalized adjacency and the feature block for
// a training graph. `features` must be num_nodes x feature_dim when the
// config asks for supplied features; pass {} otherwise.
ModelInputs prepare_inputs(const Graph& g, const ModelConfig& cfg,
                           DenseMatrix features = {});

class NeoModel {
public:
    NeoModel() = default;
    NeoModel(const ModelConfig& cfg, std::mt19937_64& rng);

    const ModelConfig& config() const { return config_; }
    double alpha_raw() const { return alpha_raw_; }
    void set_alpha_raw(double v) { alpha_raw_ = v; }
    double alpha() const { return logistic(alpha_raw_); }

    ScalarMap& f_edge() { return f_edge_; }
    const ScalarMap& f_edge() const { return f_edge_; }
    ScalarMap& f_node() { return f_node_; }
    const ScalarMap& f_node() const { return f_node_; }
    ScalarMap& g_phi() { return g_phi_; }
    const ScalarMap& g_phi() const { return g_phi_; }
    std::vector<DenseMatrix>& gcn_weights() { return gcn_weights_; }
    const std::vector<DenseMatrix>& gcn_weights() const { return gcn_weights_; }
    Mlp& pair_mlp() { return pair_mlp_; }
    const Mlp& pair_mlp() const { return pair_mlp_; }
    DenseMatrix& embeddings() { return embeddings_; }
    const DenseMatrix& embeddings() const { return embeddings_; }

    // x_struct[i] = f_node(sum over stored entries of row i of f_edge(value)).
    std::vector<double> struct_feature(const SparseMatrix& adjacency) const;

    // g_phi applied to the nonzero entries of series.combined * diag(x_struct);
    // exact zeros stay zero (and are not stored). When combined_out is given it
    // receives the combined coefficient per stored entry.
    SparseMatrix overlap_embed(std::span<const double> x_struct,
                               const PowerSeries& series,
                               std::vector<double>* combined_out = nullptr) const;

    StructuralState build_structural_state(const SparseMatrix& adjacency,
                                           const PowerSeries& series) const;

    // H^{l+1} = act(norm_adj H^l W^l), ReLU on hidden layers, identity on the
    // last. `features` empty -> free embeddings are H^0.
    DenseMatrix gcn_forward(const SparseMatrix& norm_adj,
                            const DenseMatrix& features,
                            GcnTrace* trace = nullptr) const;

    ModelForward forward(const ModelInputs& in) const;

    PairScore score_pair(const ModelForward& fwd, NodeId u, NodeId v) const;

    double loss(const ModelForward& fwd, std::span<const BatchExample> batch) const;

    // Accumulates exact reverse-mode gradients of loss() into `grad` (same
    // shapes, not cleared).
    void backward(const ModelInputs& in, const ModelForward& fwd,
                  std::span<const BatchExample> batch, NeoModel& grad) const;

    // Mean squared error between z_u . z_v and target, and its gradients.
    double fit_loss(const ModelForward& fwd,
                    std::span<const TargetExample> batch) const;
    void fit_backward(const ModelInputs& in, const ModelForward& fwd,
                      std::span<const TargetExample> batch, NeoModel& grad) const;

    NeoModel zeros_like() const;
    void zero();
    std::size_t param_count() const;
    void collect_params(std::vector<double*>& out);
    // Throws NumericError naming the first offending block if any parameter
    // is not finite.
    void check_finite(const std::string& context) const;

    // Visits every parameter block in a fixed order as (name, span). The
    // order defines the flat parameter layout used by optimizers and
    // checkpoints.
    template <typename F>
    void for_each_block(F&& fn) {
        visit_blocks(*this, fn);
    }
    template <typename F>
    void for_each_block(F&& fn) const {
        visit_blocks(*this, fn);
    }

private:
    ModelConfig config_;
    ScalarMap f_edge_;
    ScalarMap f_node_;
    ScalarMap g_phi_;
    std::vector<DenseMatrix> gcn_weights_;
    Mlp pair_mlp_;
    DenseMatrix embeddings_;
    double alpha_raw_ = 0.0;

    struct PairGrad {
        NodeId u;
        NodeId v;
        double d;
    };
    void accumulate_struct_grads(const ModelInputs& in, const ModelForward& fwd,
                                 std::span<const PairGrad> pairs,
                                 NeoModel& grad) const;
    void accumulate_feat_grads(const ModelInputs& in, const ModelForward& fwd,
                               std::span<const PairGrad> pairs,
                               NeoModel& grad) const;

    template <typename Model, typename F>
    static void visit_blocks(Model& m, F& fn) {
        auto mlp_blocks = [&fn](std::string_view prefix, auto& mlp) {
            fn(std::string(prefix) + ".w1", std::span{mlp.w1});
            fn(std::string(prefix) + ".b1", std::span{mlp.b1});
            fn(std::string(prefix) + ".w2", std::span{mlp.w2});
            fn(std::string(prefix) + ".b2", std::span{mlp.b2});
        };
        if (m.f_edge_.is_trainable()) mlp_blocks("f_edge", m.f_edge_.mlp());
        if (m.f_node_.is_trainable()) mlp_blocks("f_node", m.f_node_.mlp());
        if (m.g_phi_.is_trainable()) mlp_blocks("g_phi", m.g_phi_.mlp());
        for (std::size_t l = 0; l < m.gcn_weights_.size(); ++l)
            fn("gcn.w" + std::to_string(l), std::span{m.gcn_weights_[l].data});
        if (m.pair_mlp_.in_dim() > 0) mlp_blocks("pair", m.pair_mlp_);
        if (!m.embeddings_.data.empty())
            fn(std::string("embeddings"), std::span{m.embeddings_.data});
        fn(std::string("alpha_raw"), std::span{&m.alpha_raw_, 1});
    }
};

}  // namespace neolink
