#include "neolink/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "neolink/metrics.hpp"

namespace neolink {

void AdamOptimizer::step(const std::vector<double*>& params,
                         const std::vector<double*>& grads) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam: parameter/gradient count mismatch");
    if (m_.empty()) {
        m_.assign(params.size(), 0.0);
        v_.assign(params.size(), 0.0);
    } else if (m_.size() != params.size()) {
        throw std::invalid_argument("adam: parameter count changed between steps");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = *grads[i];
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        *params[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
}

void TrainConfig::validate() const {
    if (epochs < 0) throw DataError("train config: epochs must be >= 0");
    if (batch_size < 1) throw DataError("train config: batch_size must be >= 1");
    if (learning_rate <= 0.0) throw DataError("train config: learning_rate must be > 0");
    if (negatives_per_positive < 0)
        throw DataError("train config: negatives_per_positive must be >= 0");
    if (patience < 1) throw DataError("train config: patience must be >= 1");
    if (hits_k < 1) throw DataError("train config: hits_k must be >= 1");
    fit_params.validate();
}

std::vector<NodePair> sample_negatives(const Graph& g, std::size_t k,
                                       std::mt19937_64& rng) {
    const NodeId n = g.num_nodes();
    const std::size_t total_pairs =
        static_cast<std::size_t>(n) * (static_cast<std::size_t>(n) - 1) / 2;
    const std::size_t non_edges = total_pairs - static_cast<std::size_t>(g.edges().size());
    if (k > non_edges)
        throw DataError("sample_negatives: requested " + std::to_string(k) +
                        " non-edges but the graph has only " +
                        std::to_string(non_edges));
    std::vector<NodePair> out;
    if (k == 0) return out;
    out.reserve(k);

    std::uniform_int_distribution<NodeId> pick(0, n - 1);
    std::vector<std::uint8_t> taken;  // dense marker over canonical pair index
    const bool mark_dense = total_pairs <= (std::size_t{1} << 26);
    if (mark_dense) taken.assign(total_pairs, 0);
    auto pair_index = [n](NodeId u, NodeId v) {
        // u < v; index into the upper triangle, row-major.
        const std::size_t nu = static_cast<std::size_t>(u);
        return nu * static_cast<std::size_t>(n) - nu * (nu + 1) / 2 +
               static_cast<std::size_t>(v - u - 1);
    };
    std::vector<NodePair> seen_sparse;
    const std::size_t cap = std::max<std::size_t>(1000, 50 * k);
    std::size_t attempts = 0;
    while (out.size() < k && attempts < cap) {
        ++attempts;
        NodeId u = pick(rng);
        NodeId v = pick(rng);
        if (u == v) continue;
        if (u > v) std::swap(u, v);
        if (g.has_edge(u, v)) continue;
        if (mark_dense) {
            auto& flag = taken[pair_index(u, v)];
            if (flag) continue;
            flag = 1;
        } else {
            if (std::find(seen_sparse.begin(), seen_sparse.end(),
                          NodePair{u, v}) != seen_sparse.end())
                continue;
            seen_sparse.push_back({u, v});
        }
        out.push_back({u, v});
    }
    if (out.size() == k) return out;

    // Dense or tiny graphs: enumerate the remaining non-edges and draw the
    // shortfall uniformly.
    std::vector<NodePair> pool;
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
            if (g.has_edge(u, v)) continue;
            if (mark_dense && taken[pair_index(u, v)]) continue;
            if (!mark_dense &&
                std::find(out.begin(), out.end(), NodePair{u, v}) != out.end())
                continue;
            pool.push_back({u, v});
        }
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i = 0; out.size() < k; ++i) out.push_back(pool[i]);
    return out;
}

std::vector<NodePair> sample_negatives(const Graph& g, std::size_t k,
                                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_negatives(g, k, rng);
}

std::vector<double> score_pairs_fused(const NeoModel& model,
                                      const ModelForward& fwd,
                                      std::span<const NodePair> pairs) {
    std::vector<double> scores;
    scores.reserve(pairs.size());
    for (const NodePair& p : pairs)
        scores.push_back(model.score_pair(fwd, p.first, p.second).y_hat);
    return scores;
}

double validation_metric(const NeoModel& model, const ModelForward& fwd,
                         const SplitDataset& split, const TrainConfig& cfg) {
    const std::vector<double> pos = score_pairs_fused(model, fwd, split.valid_pos);
    const std::vector<double> neg = score_pairs_fused(model, fwd, split.valid_neg);
    if (cfg.valid_metric == ValidMetricKind::hits)
        return hits_at_k(pos, neg, cfg.hits_k);
    return auc_score(pos, neg);
}

namespace {

// Positives then negatives, shuffled; labels attached.
std::vector<BatchExample> build_epoch_examples(std::span<const NodePair> pos,
                                               std::span<const NodePair> neg,
                                               std::mt19937_64& rng) {
    std::vector<BatchExample> ex;
    ex.reserve(pos.size() + neg.size());
    for (const NodePair& p : pos) ex.push_back({p.first, p.second, 1.0});
    for (const NodePair& p : neg) ex.push_back({p.first, p.second, 0.0});
    std::shuffle(ex.begin(), ex.end(), rng);
    return ex;
}

}  // namespace

TrainResult train(const Graph& g, const ModelInputs& in,
                  const SplitDataset& split, const TrainConfig& cfg,
                  const NeoModel& init) {
    cfg.validate();
    if (split.train_pos.empty()) throw DataError("train: no training edges");
    const bool have_valid = !split.valid_pos.empty() && !split.valid_neg.empty();

    TrainResult result;
    result.model = init;
    NeoModel best = init;
    double best_valid = -std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    if (have_valid) {
        const ModelForward fwd = init.forward(in);
        best_valid = validation_metric(init, fwd, split, cfg);
    }

    NeoModel grad = init.zeros_like();
    std::vector<double*> params, gparams;
    result.model.collect_params(params);
    grad.collect_params(gparams);
    AdamOptimizer adam(cfg.adam());
    std::mt19937_64 rng(cfg.seed);

    int stale = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const std::vector<NodePair> negatives = sample_negatives(
            g, split.train_pos.size() * static_cast<std::size_t>(cfg.negatives_per_positive),
            rng);
        const std::vector<BatchExample> examples =
            build_epoch_examples(split.train_pos, negatives, rng);
        double epoch_loss = 0.0;
        int batch_index = 0;
        for (std::size_t begin = 0; begin < examples.size();
             begin += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
            const std::size_t end = std::min(
                examples.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            const std::span<const BatchExample> batch{examples.data() + begin,
                                                      end - begin};
            const ModelForward fwd = result.model.forward(in);
            const double batch_loss = result.model.loss(fwd, batch);
            if (!std::isfinite(batch_loss))
                throw NumericError("train: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
            epoch_loss += batch_loss;
            grad.zero();
            result.model.backward(in, fwd, batch, grad);
            adam.step(params, gparams);
        }
        result.model.check_finite("train: epoch " + std::to_string(epoch));

        double valid_value = std::numeric_limits<double>::quiet_NaN();
        if (have_valid) {
            const ModelForward fwd = result.model.forward(in);
            valid_value = validation_metric(result.model, fwd, split, cfg);
            if (valid_value > best_valid) {
                best_valid = valid_value;
                best = result.model;
                best_epoch = epoch;
                stale = 0;
            } else {
                ++stale;
            }
        }
        result.log.push_back({epoch, epoch_loss, valid_value});
        if (have_valid && stale >= cfg.patience) break;
    }

    if (have_valid) {
        result.model = std::move(best);
        result.best_epoch = best_epoch;
        result.best_valid = best_valid;
    } else {
        result.best_epoch = result.log.empty() ? 0 : result.log.back().epoch;
        result.best_valid = std::numeric_limits<double>::quiet_NaN();
    }
    return result;
}

FitResult fit_heuristic(const Graph& g, const ModelInputs& in,
                        const TrainConfig& cfg, const NeoModel& init) {
    cfg.validate();
    if (init.config().use_gcn)
        throw DataError("fit_heuristic: requires a model without the gcn branch");
    const auto& edges = g.edges();
    if (edges.empty()) throw DataError("fit_heuristic: graph has no edges");

    std::mt19937_64 rng(cfg.seed);
    const std::vector<NodePair> negatives = sample_negatives(
        g, edges.size() * static_cast<std::size_t>(cfg.negatives_per_positive), rng);

    std::vector<NodePair> pairs;
    pairs.reserve(edges.size() + negatives.size());
    for (const Edge& e : edges) pairs.push_back({e.u, e.v});
    pairs.insert(pairs.end(), negatives.begin(), negatives.end());

    HeuristicScorer scorer(g, cfg.fit_kind, cfg.fit_params);
    const std::vector<double> targets = scorer.score_pairs(pairs);

    FitResult result;
    result.train_set.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        result.train_set.push_back({pairs[i].first, pairs[i].second, targets[i]});

    result.model = init;
    NeoModel grad = init.zeros_like();
    std::vector<double*> params, gparams;
    result.model.collect_params(params);
    grad.collect_params(gparams);
    AdamOptimizer adam(cfg.adam());

    std::vector<TargetExample> shuffled = result.train_set;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        int batch_index = 0;
        for (std::size_t begin = 0; begin < shuffled.size();
             begin += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
            const std::size_t end = std::min(
                shuffled.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            const std::span<const TargetExample> batch{shuffled.data() + begin,
                                                       end - begin};
            const ModelForward fwd = result.model.forward(in);
            const double batch_loss = result.model.fit_loss(fwd, batch);
            if (!std::isfinite(batch_loss))
                throw NumericError("fit_heuristic: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
            grad.zero();
            result.model.fit_backward(in, fwd, batch, grad);
            adam.step(params, gparams);
        }
        const ModelForward fwd = result.model.forward(in);
        const double full_loss = result.model.fit_loss(fwd, result.train_set);
        result.log.push_back({epoch, full_loss, 0.0});
    }
    const ModelForward fwd = result.model.forward(in);
    result.final_loss = result.model.fit_loss(fwd, result.train_set);
    return result;
}

}  // namespace neolink
