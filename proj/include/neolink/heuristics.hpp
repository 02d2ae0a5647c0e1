#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "neolink/graph.hpp"

namespace neolink {

enum class HeuristicKind { cn, jaccard, aa, ra, pa, katz, pagerank, simrank };

HeuristicKind heuristic_kind_from_name(const std::string& name);
std::string heuristic_kind_name(HeuristicKind kind);

struct HeuristicParams {
    // Heuristics run on the binarized adjacency by default; `weighted`
    // switches degree-based terms to weighted degrees / weighted walks.
    bool weighted = false;
    double katz_beta = 0.05;
    int katz_max_hops = 5;
    double pagerank_damping = 0.85;
    int pagerank_iterations = 100;
    double simrank_decay = 0.8;
    int simrank_iterations = 5;

    void validate() const;
};

using NodePair = std::pair<NodeId, NodeId>;

// Per-pair scorers. Isolated endpoints score 0 (SimRank of a node with
// itself is 1 by definition).
double score_cn(const Graph& g, NodeId u, NodeId v);
double score_ra(const Graph& g, NodeId u, NodeId v,
                const HeuristicParams& params = {});
double score_aa(const Graph& g, NodeId u, NodeId v,
                const HeuristicParams& params = {});
double score_jaccard(const Graph& g, NodeId u, NodeId v);
double score_pa(const Graph& g, NodeId u, NodeId v,
                const HeuristicParams& params = {});
double score_katz(const Graph& g, NodeId u, NodeId v,
                  const HeuristicParams& params = {});
double score_pagerank(const Graph& g, NodeId u, NodeId v,
                      const HeuristicParams& params = {});
double score_simrank(const Graph& g, NodeId u, NodeId v,
                     const HeuristicParams& params = {});

// Batch scorer sharing per-source caches (rooted PageRank vectors, Katz
// walk sums, the SimRank memo table). Values are identical to the per-pair
// functions; only repeated work is avoided.
class HeuristicScorer {
public:
    HeuristicScorer(const Graph& g, HeuristicKind kind,
                    HeuristicParams params = {});

    double score(NodeId u, NodeId v);
    std::vector<double> score_pairs(std::span<const NodePair> pairs);

private:
    const Graph& g_;
    HeuristicKind kind_;
    HeuristicParams params_;
    std::unordered_map<NodeId, std::vector<double>> source_cache_;
    std::unordered_map<std::int64_t, double> simrank_memo_;
};

// Elementwise application of the per-pair scorer; deterministic. Per-pair
// failures are rethrown with the pair index attached.
std::vector<double> score_all_pairs(const Graph& g, HeuristicKind kind,
                                    std::span<const NodePair> pairs,
                                    const HeuristicParams& params = {});

}  // namespace neolink
