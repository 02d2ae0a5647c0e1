#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neolink/common.hpp"
#include "neolink/graph.hpp"

namespace neolink {

// Fraction of positives whose score strictly exceeds the K-th largest
// negative score (ties count as misses). When k > |neg| the threshold is
// -infinity, every positive hits, and *k_exceeds_negatives is set.
double hits_at_k(std::span<const double> pos, std::span<const double> neg, int k,
                 bool* k_exceeds_negatives = nullptr);

// One positive edge ranked against its own negative candidates.
struct RankedSource {
    double pos_score = 0.0;
    std::vector<double> neg_scores;
};

// Mean of 1/rank with rank = 1 + #{negatives scoring >= positive}.
double mean_reciprocal_rank(std::span<const RankedSource> sources);

// P(pos > neg) + 0.5 P(pos = neg), computed from rank statistics.
double auc_score(std::span<const double> pos, std::span<const double> neg);

// 1-based ranks in ascending score order; tied scores share their average
// rank (always an exact integer or half-integer).
std::vector<double> average_ranks(std::span<const double> scores);

// Empty when either input is constant (zero variance).
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

// Pearson correlation of tie-averaged ranks; empty when either rank vector
// is constant.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

// Pearson correlation between the binarized adjacency and the indicator of
// 2..max_hops-step reachability, over off-diagonal pairs. Empty when either
// vector is constant (e.g. complete or empty graphs).
std::optional<double> adjacency_correlation(const Graph& g, int max_hops);

struct MetricValue {
    std::string name;
    double value = 0.0;
    std::optional<double> stddev;  // across seeds, when aggregating
};

struct EvalReport {
    std::vector<MetricValue> metrics;
    std::int64_t num_positives = 0;
    std::int64_t num_negatives = 0;
    std::vector<std::uint64_t> seeds;

    std::string render_table() const;  // aligned, human-readable
    std::string render_kv() const;     // one key=value per line
};

}  // namespace neolink
