#include "neolink/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "neolink/sparse_matrix.hpp"

namespace neolink {

double hits_at_k(std::span<const double> pos, std::span<const double> neg, int k,
                 bool* k_exceeds_negatives) {
    if (k < 1) throw DataError("hits_at_k: k must be >= 1");
    if (pos.empty()) throw DataError("hits_at_k: no positive scores");
    if (k_exceeds_negatives) *k_exceeds_negatives = false;
    if (static_cast<std::size_t>(k) > neg.size()) {
        if (k_exceeds_negatives) *k_exceeds_negatives = true;
        return 1.0;
    }
    std::vector<double> sorted(neg.begin(), neg.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double threshold = sorted[static_cast<std::size_t>(k - 1)];
    std::size_t hits = 0;
    for (double s : pos)
        if (s > threshold) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pos.size());
}

double mean_reciprocal_rank(std::span<const RankedSource> sources) {
    if (sources.empty()) throw DataError("mrr: no sources");
    double total = 0.0;
    for (const RankedSource& src : sources) {
        if (src.neg_scores.empty())
            throw DataError("mrr: source without negative candidates");
        std::size_t worse_or_tied = 0;
        for (double s : src.neg_scores)
            if (s >= src.pos_score) ++worse_or_tied;
        total += 1.0 / static_cast<double>(1 + worse_or_tied);
    }
    return total / static_cast<double>(sources.size());
}

std::vector<double> average_ranks(std::span<const double> scores) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        // Positions i..j (0-based) share the average 1-based rank; the sum of
        // two integers halved is exact.
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

double auc_score(std::span<const double> pos, std::span<const double> neg) {
    if (pos.empty() || neg.empty())
        throw DataError("auc: need at least one positive and one negative score");
    std::vector<double> all(pos.begin(), pos.end());
    all.insert(all.end(), neg.begin(), neg.end());
    const std::vector<double> ranks = average_ranks(all);
    double pos_rank_sum = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) pos_rank_sum += ranks[i];
    const double np = static_cast<double>(pos.size());
    const double nn = static_cast<double>(neg.size());
    // Mann-Whitney U from the positive rank sum; ranks are exact halves so
    // this matches the pairwise definition bit for bit.
    const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * nn);
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DataError("pearson: length mismatch");
    if (a.size() < 2) throw DataError("pearson: need at least two samples");
    const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
    const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
    if (*amin == *amax || *bmin == *bmax) return std::nullopt;
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return sab / (std::sqrt(saa) * std::sqrt(sbb));
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("spearman: length mismatch");
    if (a.size() < 2) throw DataError("spearman: need at least two samples");
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    return pearson(ra, rb);
}

std::optional<double> adjacency_correlation(const Graph& g, int max_hops) {
    if (max_hops < 2) throw DataError("adjacency_correlation: max_hops must be >= 2");
    const Graph bin = g.binarized();
    const SparseMatrix& a = bin.adjacency();
    // Sum of A^2 .. A^max_hops; entries are non-negative walk counts, so the
    // indicator is "entry present and > 0".
    SparseMatrix power = spmm(a, a);
    SparseMatrix acc = power;
    for (int k = 3; k <= max_hops; ++k) {
        power = spmm(power, a);
        acc = sparse_add(acc, power);
    }
    const NodeId n = a.rows();
    std::vector<double> va, vprime;
    va.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    vprime.reserve(va.capacity());
    for (NodeId i = 0; i < n; ++i) {
        for (NodeId j = i + 1; j < n; ++j) {
            va.push_back(a.at(i, j) != 0.0 ? 1.0 : 0.0);
            vprime.push_back(acc.at(i, j) > 0.0 ? 1.0 : 0.0);
        }
    }
    if (va.size() < 2) throw DataError("adjacency_correlation: need at least 3 nodes");
    return pearson(va, vprime);
}

std::string EvalReport::render_table() const {
    std::size_t width = 6;
    for (const MetricValue& m : metrics) width = std::max(width, m.name.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width) + 2) << "metric"
        << "value\n";
    for (const MetricValue& m : metrics) {
        out << std::left << std::setw(static_cast<int>(width) + 2) << m.name
            << std::setprecision(6) << std::fixed << m.value;
        if (m.stddev) out << " +- " << std::setprecision(6) << std::fixed << *m.stddev;
        out << "\n";
    }
    out << std::left << std::setw(static_cast<int>(width) + 2) << "positives"
        << num_positives << "\n";
    out << std::left << std::setw(static_cast<int>(width) + 2) << "negatives"
        << num_negatives << "\n";
    return out.str();
}

std::string EvalReport::render_kv() const {
    std::ostringstream out;
    out << std::setprecision(17);
    for (const MetricValue& m : metrics) {
        out << m.name << " = " << m.value << "\n";
        if (m.stddev) out << m.name << ".std = " << *m.stddev << "\n";
    }
    out << "positives = " << num_positives << "\n";
    out << "negatives = " << num_negatives << "\n";
    if (!seeds.empty()) {
        out << "seeds =";
        for (std::uint64_t s : seeds) out << " " << s;
        out << "\n";
    }
    return out.str();
}

}  // namespace neolink
