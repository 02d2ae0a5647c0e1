#include "neolink/heuristics.hpp"

#include <algorithm>
#include <cmath>

namespace neolink {

namespace {

void check_node(const Graph& g, NodeId id) {
    if (id < 0 || id >= g.num_nodes())
        throw DataError("node id " + std::to_string(id) + " out of range [0, " +
                        std::to_string(g.num_nodes()) + ")");
}

double binary_degree(const Graph& g, NodeId i) {
    return static_cast<double>(g.neighbors(i).size());
}

double selected_degree(const Graph& g, NodeId i, const HeuristicParams& p) {
    return p.weighted ? g.degree(i) : binary_degree(g, i);
}

// Walk over the sorted neighbor lists of u and v and call fn(k) for each
// common neighbor k, in ascending order.
template <typename Fn>
void for_common_neighbors(const Graph& g, NodeId u, NodeId v, Fn&& fn) {
    auto nu = g.neighbors(u);
    auto nv = g.neighbors(v);
    std::size_t i = 0, j = 0;
    while (i < nu.size() && j < nv.size()) {
        if (nu[i] < nv[j]) {
            ++i;
        } else if (nv[j] < nu[i]) {
            ++j;
        } else {
            fn(nu[i]);
            ++i;
            ++j;
        }
    }
}

// One rooted-PageRank vector: restart mass (1 - d) at the seed each step,
// dangling mass also returns to the seed.
std::vector<double> personalized_pagerank(const Graph& g, NodeId seed,
                                          const HeuristicParams& p) {
    const NodeId n = g.num_nodes();
    const SparseMatrix& adj = g.adjacency();
    std::vector<double> inv_deg(static_cast<std::size_t>(n), 0.0);
    std::vector<char> dangling(static_cast<std::size_t>(n), 0);
    for (NodeId i = 0; i < n; ++i) {
        const double d = selected_degree(g, i, p);
        if (d > 0.0)
            inv_deg[static_cast<std::size_t>(i)] = 1.0 / d;
        else
            dangling[static_cast<std::size_t>(i)] = 1;
    }
    std::vector<double> pi(static_cast<std::size_t>(n), 0.0);
    pi[static_cast<std::size_t>(seed)] = 1.0;
    std::vector<double> next(static_cast<std::size_t>(n), 0.0);
    const double d = p.pagerank_damping;
    for (int it = 0; it < p.pagerank_iterations; ++it) {
        double dangling_mass = 0.0;
        for (NodeId j = 0; j < n; ++j)
            if (dangling[static_cast<std::size_t>(j)]) dangling_mass += pi[static_cast<std::size_t>(j)];
        for (NodeId i = 0; i < n; ++i) {
            auto cols = adj.row_cols(i);
            auto vals = adj.row_values(i);
            double acc = 0.0;
            for (std::size_t k = 0; k < cols.size(); ++k) {
                const double w = p.weighted ? vals[k] : 1.0;
                acc += w * inv_deg[static_cast<std::size_t>(cols[k])] *
                       pi[static_cast<std::size_t>(cols[k])];
            }
            next[static_cast<std::size_t>(i)] = d * acc;
        }
        next[static_cast<std::size_t>(seed)] += (1.0 - d) + d * dangling_mass;
        std::swap(pi, next);
    }
    return pi;
}

// Truncated Katz walk sums from `seed`: sum_l beta^l (A^l e_seed).
std::vector<double> katz_from_source(const Graph& g, NodeId seed,
                                     const HeuristicParams& p) {
    const NodeId n = g.num_nodes();
    const SparseMatrix& adj = g.adjacency();
    std::vector<double> walk(static_cast<std::size_t>(n), 0.0);
    walk[static_cast<std::size_t>(seed)] = 1.0;
    std::vector<double> next(static_cast<std::size_t>(n), 0.0);
    std::vector<double> score(static_cast<std::size_t>(n), 0.0);
    double bw = 1.0;
    for (int l = 1; l <= p.katz_max_hops; ++l) {
        for (NodeId i = 0; i < n; ++i) {
            auto cols = adj.row_cols(i);
            auto vals = adj.row_values(i);
            double acc = 0.0;
            for (std::size_t k = 0; k < cols.size(); ++k) {
                const double w = p.weighted ? vals[k] : 1.0;
                acc += w * walk[static_cast<std::size_t>(cols[k])];
            }
            next[static_cast<std::size_t>(i)] = acc;
        }
        std::swap(walk, next);
        bw *= p.katz_beta;
        for (NodeId i = 0; i < n; ++i)
            score[static_cast<std::size_t>(i)] += bw * walk[static_cast<std::size_t>(i)];
    }
    return score;
}

std::int64_t simrank_key(NodeId n, int depth, NodeId a, NodeId b) {
    return (static_cast<std::int64_t>(depth) * n + a) * n + b;
}

// Standard pairwise SimRank recursion; depth doubles as the iteration
// count, which confines the computation to the radius-`depth` ball around
// the query pair. The memo may be shared across queries.
double simrank_rec(const Graph& g, NodeId a, NodeId b, int depth,
                   const HeuristicParams& p,
                   std::unordered_map<std::int64_t, double>& memo) {
    if (a == b) return 1.0;
    if (depth == 0) return 0.0;
    if (a > b) std::swap(a, b);
    const std::int64_t key = simrank_key(g.num_nodes(), depth, a, b);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    auto na = g.neighbors(a);
    auto nb = g.neighbors(b);
    double result = 0.0;
    if (!na.empty() && !nb.empty()) {
        double sum = 0.0;
        for (NodeId i : na)
            for (NodeId j : nb) sum += simrank_rec(g, i, j, depth - 1, p, memo);
        result = p.simrank_decay * sum /
                 (static_cast<double>(na.size()) * static_cast<double>(nb.size()));
    }
    memo.emplace(key, result);
    return result;
}

}  // namespace

void HeuristicParams::validate() const {
    if (katz_beta < 0.0) throw std::invalid_argument("katz_beta must be >= 0");
    if (katz_max_hops < 1) throw std::invalid_argument("katz_max_hops must be >= 1");
    if (!(pagerank_damping > 0.0 && pagerank_damping < 1.0))
        throw std::invalid_argument("pagerank_damping must be in (0, 1)");
    if (pagerank_iterations < 1)
        throw std::invalid_argument("pagerank_iterations must be >= 1");
    if (!(simrank_decay > 0.0 && simrank_decay < 1.0))
        throw std::invalid_argument("simrank_decay must be in (0, 1)");
    if (simrank_iterations < 1)
        throw std::invalid_argument("simrank_iterations must be >= 1");
}

HeuristicKind heuristic_kind_from_name(const std::string& name) {
    std::string k = name;
    std::transform(k.begin(), k.end(), k.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (k == "cn") return HeuristicKind::cn;
    if (k == "jaccard" || k == "jac") return HeuristicKind::jaccard;
    if (k == "aa") return HeuristicKind::aa;
    if (k == "ra") return HeuristicKind::ra;
    if (k == "pa") return HeuristicKind::pa;
    if (k == "katz") return HeuristicKind::katz;
    if (k == "pagerank" || k == "pr") return HeuristicKind::pagerank;
    if (k == "simrank" || k == "sr") return HeuristicKind::simrank;
    throw DataError("unknown heuristic '" + name +
                    "' (expected cn|jaccard|aa|ra|pa|katz|pagerank|simrank)");
}

std::string heuristic_kind_name(HeuristicKind kind) {
    switch (kind) {
        case HeuristicKind::cn: return "cn";
        case HeuristicKind::jaccard: return "jaccard";
        case HeuristicKind::aa: return "aa";
        case HeuristicKind::ra: return "ra";
        case HeuristicKind::pa: return "pa";
        case HeuristicKind::katz: return "katz";
        case HeuristicKind::pagerank: return "pagerank";
        case HeuristicKind::simrank: return "simrank";
    }
    return "?";
}

double score_cn(const Graph& g, NodeId u, NodeId v) {
    check_node(g, u);
    check_node(g, v);
    double count = 0.0;
    for_common_neighbors(g, u, v, [&](NodeId) { count += 1.0; });
    return count;
}

double score_ra(const Graph& g, NodeId u, NodeId v, const HeuristicParams& params) {
    check_node(g, u);
    check_node(g, v);
    double sum = 0.0;
    for_common_neighbors(g, u, v, [&](NodeId k) {
        sum += 1.0 / selected_degree(g, k, params);
    });
    return sum;
}

double score_aa(const Graph& g, NodeId u, NodeId v, const HeuristicParams& params) {
    check_node(g, u);
    check_node(g, v);
    double sum = 0.0;
    for_common_neighbors(g, u, v, [&](NodeId k) {
        const double d = selected_degree(g, k, params);
        // d <= 1 would make 1/log(d) blow up; such neighbors are skipped.
        if (d > 1.0) sum += 1.0 / std::log(d);
    });
    return sum;
}

double score_jaccard(const Graph& g, NodeId u, NodeId v) {
    check_node(g, u);
    check_node(g, v);
    const double inter = score_cn(g, u, v);
    const double uni = binary_degree(g, u) + binary_degree(g, v) - inter;
    if (uni == 0.0) return 0.0;
    return inter / uni;
}

double score_pa(const Graph& g, NodeId u, NodeId v, const HeuristicParams& params) {
    check_node(g, u);
    check_node(g, v);
    return selected_degree(g, u, params) * selected_degree(g, v, params);
}

double score_katz(const Graph& g, NodeId u, NodeId v, const HeuristicParams& params) {
    check_node(g, u);
    check_node(g, v);
    params.validate();
    // Walks start from the canonical endpoint so score(u,v) == score(v,u)
    // bit for bit.
    const NodeId src = std::min(u, v);
    const NodeId dst = std::max(u, v);
    return katz_from_source(g, src, params)[static_cast<std::size_t>(dst)];
}

double score_pagerank(const Graph& g, NodeId u, NodeId v, const HeuristicParams& params) {
    check_node(g, u);
    check_node(g, v);
    params.validate();
    const std::vector<double> pu = personalized_pagerank(g, u, params);
    const std::vector<double> pv = personalized_pagerank(g, v, params);
    return pu[static_cast<std::size_t>(v)] + pv[static_cast<std::size_t>(u)];
}

double score_simrank(const Graph& g, NodeId u, NodeId v, const HeuristicParams& params) {
    check_node(g, u);
    check_node(g, v);
    params.validate();
    std::unordered_map<std::int64_t, double> memo;
    return simrank_rec(g, u, v, params.simrank_iterations, params, memo);
}

HeuristicScorer::HeuristicScorer(const Graph& g, HeuristicKind kind,
                                 HeuristicParams params)
    : g_(g), kind_(kind), params_(params) {
    params_.validate();
}

double HeuristicScorer::score(NodeId u, NodeId v) {
    switch (kind_) {
        case HeuristicKind::cn: return score_cn(g_, u, v);
        case HeuristicKind::jaccard: return score_jaccard(g_, u, v);
        case HeuristicKind::aa: return score_aa(g_, u, v, params_);
        case HeuristicKind::ra: return score_ra(g_, u, v, params_);
        case HeuristicKind::pa: return score_pa(g_, u, v, params_);
        case HeuristicKind::katz: {
            check_node(g_, u);
            check_node(g_, v);
            const NodeId src = std::min(u, v);
            const NodeId dst = std::max(u, v);
            auto it = source_cache_.find(src);
            if (it == source_cache_.end())
                it = source_cache_.emplace(src, katz_from_source(g_, src, params_)).first;
            return it->second[static_cast<std::size_t>(dst)];
        }
        case HeuristicKind::pagerank: {
            check_node(g_, u);
            check_node(g_, v);
            auto get = [&](NodeId seed) -> const std::vector<double>& {
                auto it = source_cache_.find(seed);
                if (it == source_cache_.end())
                    it = source_cache_.emplace(seed, personalized_pagerank(g_, seed, params_)).first;
                return it->second;
            };
            return get(u)[static_cast<std::size_t>(v)] + get(v)[static_cast<std::size_t>(u)];
        }
        case HeuristicKind::simrank:
            check_node(g_, u);
            check_node(g_, v);
            return simrank_rec(g_, u, v, params_.simrank_iterations, params_, simrank_memo_);
    }
    throw std::logic_error("unreachable heuristic kind");
}

std::vector<double> HeuristicScorer::score_pairs(std::span<const NodePair> pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        try {
            out.push_back(score(pairs[i].first, pairs[i].second));
        } catch (const DataError& e) {
            throw DataError("pair #" + std::to_string(i) + " (" +
                            std::to_string(pairs[i].first) + ", " +
                            std::to_string(pairs[i].second) + "): " + e.what());
        }
    }
    return out;
}

std::vector<double> score_all_pairs(const Graph& g, HeuristicKind kind,
                                    std::span<const NodePair> pairs,
                                    const HeuristicParams& params) {
    HeuristicScorer scorer(g, kind, params);
    return scorer.score_pairs(pairs);
}

}  // namespace neolink
