#include "neolink/model.hpp"

#include <algorithm>
#include <cmath>

namespace neolink {

namespace {

// BCE probability clamp; keeps log() finite and defines a dead zone where
// the gradient is exactly zero.
constexpr double kProbEps = 1e-7;

bool prob_clamped(double p) { return p <= kProbEps || p >= 1.0 - kProbEps; }

double bce(double p, double y) {
    const double q = std::clamp(p, kProbEps, 1.0 - kProbEps);
    return -(y * std::log(q) + (1.0 - y) * std::log1p(-q));
}

// d BCE / d p; zero on the clamped region.
double bce_dp(double p, double y) {
    if (prob_clamped(p)) return 0.0;
    return (p - y) / (p * (1.0 - p));
}

// d BCE(logistic(r), y) / d r given p = logistic(r).
double bce_draw(double p, double y) {
    if (prob_clamped(p)) return 0.0;
    return p - y;
}

double pair_raw_score(const NeoModel& m, const DenseMatrix& h, NodeId u, NodeId v) {
    auto hu = h.row(u);
    auto hv = h.row(v);
    if (m.config().pair_mode == PairScoreMode::inner_product) {
        double dot = 0.0;
        for (std::size_t j = 0; j < hu.size(); ++j) dot += hu[j] * hv[j];
        return dot;
    }
    std::vector<double> prod(hu.size());
    for (std::size_t j = 0; j < hu.size(); ++j) prod[j] = hu[j] * hv[j];
    double out = 0.0;
    m.pair_mlp().forward(prod, {&out, 1});
    return out;
}

}  // namespace

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

const char* pair_score_mode_name(PairScoreMode mode) {
    return mode == PairScoreMode::hadamard_mlp ? "hadamard_mlp" : "inner_product";
}

PairScoreMode pair_score_mode_from_name(const std::string& name) {
    if (name == "hadamard_mlp") return PairScoreMode::hadamard_mlp;
    if (name == "inner_product") return PairScoreMode::inner_product;
    throw DataError("unknown pair score mode: " + name);
}

void ModelConfig::validate() const {
    if (num_nodes < 1) throw DataError("model config: num_nodes must be >= 1");
    if (hops < 1) throw DataError("model config: hops (L) must be >= 1");
    if (beta < 0.0) throw DataError("model config: beta must be >= 0");
    if (tau < 0.0) throw DataError("model config: tau must be >= 0");
    if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
        throw DataError("model config: lambdas must be >= 0");
    const bool any_mlp = f_edge_kind == ScalarKind::mlp ||
                         f_node_kind == ScalarKind::mlp ||
                         g_phi_kind == ScalarKind::mlp;
    if (any_mlp && scalar_hidden < 1)
        throw DataError("model config: scalar_hidden must be >= 1");
    if (use_gcn) {
        if (gcn_layers < 1) throw DataError("model config: gcn_layers must be >= 1");
        if (gcn_width < 1) throw DataError("model config: gcn_width must be >= 1");
        if (feature_dim < 0) throw DataError("model config: feature_dim must be >= 0");
        if (feature_dim == 0 && embedding_dim < 1)
            throw DataError("model config: embedding_dim must be >= 1");
        if (pair_mode == PairScoreMode::hadamard_mlp && pair_hidden < 1)
            throw DataError("model config: pair_hidden must be >= 1");
    }
}

ModelInputs prepare_inputs(const Graph& g, const ModelConfig& cfg,
                           DenseMatrix features) {
    cfg.validate();
    if (g.num_nodes() != cfg.num_nodes)
        throw DataError("prepare_inputs: graph has " + std::to_string(g.num_nodes()) +
                        " nodes but config says " + std::to_string(cfg.num_nodes));
    ModelInputs in;
    in.adjacency = g.adjacency();
    in.series = power_series(in.adjacency, cfg.hops, cfg.beta, cfg.tau);
    if (cfg.use_gcn) {
        in.norm_adj = gcn_normalize(in.adjacency);
        if (cfg.feature_dim > 0) {
            if (features.rows != cfg.num_nodes || features.cols != cfg.feature_dim)
                throw DataError("prepare_inputs: feature block is " +
                                std::to_string(features.rows) + "x" +
                                std::to_string(features.cols) + ", expected " +
                                std::to_string(cfg.num_nodes) + "x" +
                                std::to_string(cfg.feature_dim));
            in.features = std::move(features);
        }
    }
    return in;
}

NeoModel::NeoModel(const ModelConfig& cfg, std::mt19937_64& rng) : config_(cfg) {
    cfg.validate();
    auto make_map = [&](ScalarKind kind, OutputActivation act) {
        if (kind == ScalarKind::mlp)
            return ScalarMap::trainable(cfg.scalar_hidden, rng, act);
        return ScalarMap::analytic(kind);
    };
    f_edge_ = make_map(cfg.f_edge_kind, OutputActivation::identity);
    f_node_ = make_map(cfg.f_node_kind, OutputActivation::identity);
    g_phi_ = make_map(cfg.g_phi_kind, cfg.g_phi_softplus
                                          ? OutputActivation::softplus
                                          : OutputActivation::identity);
    if (cfg.use_gcn) {
        const int d0 = cfg.feature_dim > 0 ? cfg.feature_dim : cfg.embedding_dim;
        int in_dim = d0;
        gcn_weights_.reserve(static_cast<std::size_t>(cfg.gcn_layers));
        for (int l = 0; l < cfg.gcn_layers; ++l) {
            DenseMatrix w(in_dim, cfg.gcn_width);
            const double s = 1.0 / std::sqrt(static_cast<double>(in_dim));
            std::uniform_real_distribution<double> dist(-s, s);
            for (double& x : w.data) x = dist(rng);
            gcn_weights_.push_back(std::move(w));
            in_dim = cfg.gcn_width;
        }
        if (cfg.pair_mode == PairScoreMode::hadamard_mlp) {
            pair_mlp_ = Mlp(cfg.gcn_width, cfg.pair_hidden, 1);
            pair_mlp_.init(rng);
        }
        if (cfg.feature_dim == 0) {
            embeddings_ = DenseMatrix(cfg.num_nodes, cfg.embedding_dim);
            const double s = 1.0 / std::sqrt(static_cast<double>(cfg.embedding_dim));
            std::uniform_real_distribution<double> dist(-s, s);
            for (double& x : embeddings_.data) x = dist(rng);
        }
    }
    alpha_raw_ = cfg.alpha_init;
}

std::vector<double> NeoModel::struct_feature(const SparseMatrix& adjacency) const {
    const NodeId n = adjacency.rows();
    std::vector<double> x(static_cast<std::size_t>(n));
    for (NodeId i = 0; i < n; ++i) {
        double agg = 0.0;
        for (double v : adjacency.row_values(i)) agg += f_edge_.value(v);
        const double xi = f_node_.value(agg);
        if (!std::isfinite(xi))
            throw NumericError("struct_feature: non-finite value at node " +
                               std::to_string(i));
        x[static_cast<std::size_t>(i)] = xi;
    }
    return x;
}

SparseMatrix NeoModel::overlap_embed(std::span<const double> x_struct,
                                     const PowerSeries& series,
                                     std::vector<double>* combined_out) const {
    const SparseMatrix& c = series.combined;
    if (c.cols() != static_cast<NodeId>(x_struct.size()))
        throw DataError("overlap_embed: x_struct length does not match graph size");
    std::vector<std::int64_t> offsets(static_cast<std::size_t>(c.rows()) + 1, 0);
    std::vector<NodeId> cols;
    std::vector<double> vals;
    if (combined_out) combined_out->clear();
    for (NodeId i = 0; i < c.rows(); ++i) {
        auto cc = c.row_cols(i);
        auto cv = c.row_values(i);
        for (std::size_t k = 0; k < cc.size(); ++k) {
            const double pre = cv[k] * x_struct[static_cast<std::size_t>(cc[k])];
            // g_phi acts on nonzero entries only; exact zeros stay zero and
            // are dropped from the pattern.
            if (pre == 0.0) continue;
            cols.push_back(cc[k]);
            vals.push_back(g_phi_.value(pre));
            if (combined_out) combined_out->push_back(cv[k]);
        }
        offsets[static_cast<std::size_t>(i) + 1] =
            static_cast<std::int64_t>(vals.size());
    }
    return SparseMatrix::from_csr(c.rows(), c.cols(), std::move(offsets),
                                  std::move(cols), std::move(vals));
}

StructuralState NeoModel::build_structural_state(const SparseMatrix& adjacency,
                                                 const PowerSeries& series) const {
    const NodeId n = adjacency.rows();
    StructuralState st;
    st.edge_aggregate.resize(static_cast<std::size_t>(n));
    st.x_struct.resize(static_cast<std::size_t>(n));
    for (NodeId i = 0; i < n; ++i) {
        double agg = 0.0;
        for (double v : adjacency.row_values(i)) agg += f_edge_.value(v);
        st.edge_aggregate[static_cast<std::size_t>(i)] = agg;
        const double xi = f_node_.value(agg);
        if (!std::isfinite(xi))
            throw NumericError("struct_feature: non-finite value at node " +
                               std::to_string(i));
        st.x_struct[static_cast<std::size_t>(i)] = xi;
    }
    st.x_diag = SparseMatrix::diagonal(st.x_struct);
    st.z = overlap_embed(st.x_struct, series, &st.z_combined);
    return st;
}

DenseMatrix NeoModel::gcn_forward(const SparseMatrix& norm_adj,
                                  const DenseMatrix& features,
                                  GcnTrace* trace) const {
    if (!config_.use_gcn)
        throw DataError("gcn_forward: model configured without a gcn branch");
    const DenseMatrix& h0 = features.data.empty() ? embeddings_ : features;
    if (h0.rows != norm_adj.rows())
        throw DataError("gcn_forward: feature rows do not match graph size");
    if (trace) {
        trace->inputs.clear();
        trace->propagated.clear();
        trace->pre.clear();
        trace->inputs.push_back(h0);
    }
    DenseMatrix h = h0;
    const int nl = static_cast<int>(gcn_weights_.size());
    for (int l = 0; l < nl; ++l) {
        if (h.cols != gcn_weights_[static_cast<std::size_t>(l)].rows)
            throw DataError("gcn_forward: layer " + std::to_string(l) +
                            " weight shape does not chain");
        DenseMatrix s = spmm_dense(norm_adj, h);
        DenseMatrix p = matmul(s, gcn_weights_[static_cast<std::size_t>(l)]);
        if (trace) {
            trace->propagated.push_back(std::move(s));
            trace->pre.push_back(p);
        }
        if (l + 1 != nl)
            for (double& v : p.data)
                if (v < 0.0) v = 0.0;
        h = std::move(p);
        if (trace) trace->inputs.push_back(h);
    }
    return h;
}

ModelForward NeoModel::forward(const ModelInputs& in) const {
    ModelForward fwd;
    fwd.state = build_structural_state(in.adjacency, in.series);
    if (config_.use_gcn) fwd.h = gcn_forward(in.norm_adj, in.features, &fwd.trace);
    return fwd;
}

PairScore NeoModel::score_pair(const ModelForward& fwd, NodeId u, NodeId v) const {
    const NodeId n = fwd.state.z.rows();
    if (u < 0 || u >= n || v < 0 || v >= n)
        throw DataError("score_pair: node id out of range");
    PairScore s;
    s.raw_struct = row_dot(fwd.state.z, u, v);
    s.p_struct = logistic(s.raw_struct);
    if (!config_.use_gcn) {
        s.raw_feat = s.raw_struct;
        s.p_feat = s.p_struct;
        s.y_hat = s.p_struct;
        return s;
    }
    s.raw_feat = pair_raw_score(*this, fwd.h, u, v);
    s.p_feat = logistic(s.raw_feat);
    const double a = alpha();
    s.y_hat = a * s.p_struct + (1.0 - a) * s.p_feat;
    return s;
}

double NeoModel::loss(const ModelForward& fwd,
                      std::span<const BatchExample> batch) const {
    double total = 0.0;
    for (const BatchExample& ex : batch) {
        const PairScore s = score_pair(fwd, ex.u, ex.v);
        total += config_.lambda1 * bce(s.y_hat, ex.label);
        total += config_.lambda2 * bce(s.p_struct, ex.label);
        if (config_.use_gcn) total += config_.lambda3 * bce(s.p_feat, ex.label);
    }
    return total;
}

void NeoModel::backward(const ModelInputs& in, const ModelForward& fwd,
                        std::span<const BatchExample> batch,
                        NeoModel& grad) const {
    std::vector<PairGrad> dstruct;
    std::vector<PairGrad> dfeat;
    dstruct.reserve(batch.size());
    const double a = alpha();
    for (const BatchExample& ex : batch) {
        const PairScore s = score_pair(fwd, ex.u, ex.v);
        double draw_s;
        if (config_.use_gcn) {
            const double dy = config_.lambda1 * bce_dp(s.y_hat, ex.label);
            draw_s = dy * a * s.p_struct * (1.0 - s.p_struct) +
                     config_.lambda2 * bce_draw(s.p_struct, ex.label);
            const double draw_f =
                dy * (1.0 - a) * s.p_feat * (1.0 - s.p_feat) +
                config_.lambda3 * bce_draw(s.p_feat, ex.label);
            grad.alpha_raw_ += dy * (s.p_struct - s.p_feat) * a * (1.0 - a);
            dfeat.push_back({ex.u, ex.v, draw_f});
        } else {
            // y_hat coincides with p_struct, so the first two loss terms share
            // one derivative path.
            draw_s = (config_.lambda1 + config_.lambda2) *
                     bce_draw(s.p_struct, ex.label);
        }
        dstruct.push_back({ex.u, ex.v, draw_s});
    }
    accumulate_struct_grads(in, fwd, dstruct, grad);
    if (config_.use_gcn) accumulate_feat_grads(in, fwd, dfeat, grad);
}

double NeoModel::fit_loss(const ModelForward& fwd,
                          std::span<const TargetExample> batch) const {
    if (batch.empty()) throw DataError("fit_loss: empty batch");
    double total = 0.0;
    for (const TargetExample& ex : batch) {
        const double r = row_dot(fwd.state.z, ex.u, ex.v);
        const double e = r - ex.target;
        total += e * e;
    }
    return total / static_cast<double>(batch.size());
}

void NeoModel::fit_backward(const ModelInputs& in, const ModelForward& fwd,
                            std::span<const TargetExample> batch,
                            NeoModel& grad) const {
    if (batch.empty()) throw DataError("fit_backward: empty batch");
    std::vector<PairGrad> d;
    d.reserve(batch.size());
    const double scale = 2.0 / static_cast<double>(batch.size());
    for (const TargetExample& ex : batch) {
        const double r = row_dot(fwd.state.z, ex.u, ex.v);
        d.push_back({ex.u, ex.v, scale * (r - ex.target)});
    }
    accumulate_struct_grads(in, fwd, d, grad);
}

void NeoModel::accumulate_struct_grads(const ModelInputs& in,
                                       const ModelForward& fwd,
                                       std::span<const PairGrad> pairs,
                                       NeoModel& grad) const {
    const StructuralState& st = fwd.state;
    const SparseMatrix& z = st.z;
    const NodeId n = z.rows();
    const auto& zoff = z.row_offsets();
    const auto& zcols = z.col_indices();
    const auto& zvals = z.values();

    // d loss / d z entries, via raw_struct = sum over shared columns.
    std::vector<double> dz(static_cast<std::size_t>(z.nnz()), 0.0);
    for (const PairGrad& pg : pairs) {
        if (pg.d == 0.0) continue;
        std::int64_t p = zoff[static_cast<std::size_t>(pg.u)];
        const std::int64_t pe = zoff[static_cast<std::size_t>(pg.u) + 1];
        std::int64_t q = zoff[static_cast<std::size_t>(pg.v)];
        const std::int64_t qe = zoff[static_cast<std::size_t>(pg.v) + 1];
        while (p < pe && q < qe) {
            const NodeId cp = zcols[static_cast<std::size_t>(p)];
            const NodeId cq = zcols[static_cast<std::size_t>(q)];
            if (cp < cq) {
                ++p;
            } else if (cq < cp) {
                ++q;
            } else {
                dz[static_cast<std::size_t>(p)] += pg.d * zvals[static_cast<std::size_t>(q)];
                dz[static_cast<std::size_t>(q)] += pg.d * zvals[static_cast<std::size_t>(p)];
                ++p;
                ++q;
            }
        }
    }

    // Through g_phi into x_struct. The pre-activation is rebuilt from the
    // stored combined coefficient with the same product as the forward pass.
    std::vector<double> dx(static_cast<std::size_t>(n), 0.0);
    for (NodeId i = 0; i < n; ++i) {
        const std::int64_t b = zoff[static_cast<std::size_t>(i)];
        const std::int64_t e = zoff[static_cast<std::size_t>(i) + 1];
        for (std::int64_t k = b; k < e; ++k) {
            const double dzk = dz[static_cast<std::size_t>(k)];
            if (dzk == 0.0) continue;
            const NodeId j = zcols[static_cast<std::size_t>(k)];
            const double comb = st.z_combined[static_cast<std::size_t>(k)];
            const double pre = comb * st.x_struct[static_cast<std::size_t>(j)];
            const double dpre = g_phi_.backward(pre, dzk, &grad.g_phi_);
            dx[static_cast<std::size_t>(j)] += dpre * comb;
        }
    }

    // Through f_node into the per-node aggregate, then f_edge.
    std::vector<double> dagg(static_cast<std::size_t>(n), 0.0);
    for (NodeId i = 0; i < n; ++i) {
        const double dxi = dx[static_cast<std::size_t>(i)];
        if (dxi == 0.0) continue;
        dagg[static_cast<std::size_t>(i)] = f_node_.backward(
            st.edge_aggregate[static_cast<std::size_t>(i)], dxi, &grad.f_node_);
    }
    if (f_edge_.is_trainable()) {
        for (NodeId i = 0; i < n; ++i) {
            const double dai = dagg[static_cast<std::size_t>(i)];
            if (dai == 0.0) continue;
            for (double v : in.adjacency.row_values(i))
                f_edge_.backward(v, dai, &grad.f_edge_);
        }
    }
}

void NeoModel::accumulate_feat_grads(const ModelInputs& in,
                                     const ModelForward& fwd,
                                     std::span<const PairGrad> pairs,
                                     NeoModel& grad) const {
    const DenseMatrix& h = fwd.h;
    DenseMatrix dh(h.rows, h.cols);
    const bool hadamard = config_.pair_mode == PairScoreMode::hadamard_mlp;
    std::vector<double> prod(static_cast<std::size_t>(h.cols));
    std::vector<double> dprod(static_cast<std::size_t>(h.cols));
    for (const PairGrad& pg : pairs) {
        if (pg.d == 0.0) continue;
        auto hu = h.row(pg.u);
        auto hv = h.row(pg.v);
        auto du = dh.row(pg.u);
        auto dv = dh.row(pg.v);
        if (!hadamard) {
            for (std::size_t j = 0; j < hu.size(); ++j) {
                du[j] += pg.d * hv[j];
                dv[j] += pg.d * hu[j];
            }
            continue;
        }
        for (std::size_t j = 0; j < hu.size(); ++j) prod[j] = hu[j] * hv[j];
        Mlp::Trace tr;
        double out = 0.0;
        pair_mlp_.forward(prod, {&out, 1}, &tr);
        std::fill(dprod.begin(), dprod.end(), 0.0);
        const double dy = pg.d;
        pair_mlp_.backward(tr, {&dy, 1}, grad.pair_mlp_, dprod);
        for (std::size_t j = 0; j < hu.size(); ++j) {
            du[j] += dprod[j] * hv[j];
            dv[j] += dprod[j] * hu[j];
        }
    }

    // Walk the layers backwards; norm_adj is symmetric so its transpose is
    // itself.
    const int nl = static_cast<int>(gcn_weights_.size());
    DenseMatrix dout = std::move(dh);
    for (int l = nl - 1; l >= 0; --l) {
        DenseMatrix dpre = std::move(dout);
        if (l != nl - 1) {
            const DenseMatrix& p = fwd.trace.pre[static_cast<std::size_t>(l)];
            for (std::size_t i = 0; i < dpre.data.size(); ++i)
                if (p.data[i] <= 0.0) dpre.data[i] = 0.0;
        }
        DenseMatrix dw =
            matmul_tn(fwd.trace.propagated[static_cast<std::size_t>(l)], dpre);
        auto& gw = grad.gcn_weights_[static_cast<std::size_t>(l)];
        for (std::size_t i = 0; i < dw.data.size(); ++i) gw.data[i] += dw.data[i];
        DenseMatrix ds = matmul_nt(dpre, gcn_weights_[static_cast<std::size_t>(l)]);
        dout = spmm_dense(in.norm_adj, ds);
    }
    if (config_.feature_dim == 0) {
        auto& ge = grad.embeddings_;
        for (std::size_t i = 0; i < dout.data.size(); ++i)
            ge.data[i] += dout.data[i];
    }
}

NeoModel NeoModel::zeros_like() const {
    NeoModel m;
    m.config_ = config_;
    m.f_edge_ = f_edge_.zeros_like();
    m.f_node_ = f_node_.zeros_like();
    m.g_phi_ = g_phi_.zeros_like();
    m.gcn_weights_.reserve(gcn_weights_.size());
    for (const DenseMatrix& w : gcn_weights_)
        m.gcn_weights_.emplace_back(w.rows, w.cols);
    m.pair_mlp_ = pair_mlp_.zeros_like();
    if (!embeddings_.data.empty())
        m.embeddings_ = DenseMatrix(embeddings_.rows, embeddings_.cols);
    m.alpha_raw_ = 0.0;
    return m;
}

void NeoModel::zero() {
    f_edge_.zero();
    f_node_.zero();
    g_phi_.zero();
    for (DenseMatrix& w : gcn_weights_) w.zero();
    pair_mlp_.zero();
    embeddings_.zero();
    alpha_raw_ = 0.0;
}

std::size_t NeoModel::param_count() const {
    std::size_t count = 0;
    for_each_block(
        [&](const std::string&, std::span<const double> v) { count += v.size(); });
    return count;
}

void NeoModel::collect_params(std::vector<double*>& out) {
    for_each_block([&](const std::string&, std::span<double> v) {
        for (double& x : v) out.push_back(&x);
    });
}

void NeoModel::check_finite(const std::string& context) const {
    for_each_block([&](const std::string& name, std::span<const double> v) {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!std::isfinite(v[i]))
                throw NumericError(context + ": non-finite parameter " + name +
                                   "[" + std::to_string(i) + "]");
    });
}

}  // namespace neolink
