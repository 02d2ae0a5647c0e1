#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "neolink/graph.hpp"
#include "neolink/heuristics.hpp"

using namespace neolink;

namespace {

Graph complete_graph(int n) {
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) edges.push_back({u, v});
    return Graph::from_edges(edges);
}

Graph path_graph(int n) {
    std::vector<Edge> edges;
    for (NodeId u = 0; u + 1 < n; ++u) edges.push_back({u, NodeId(u + 1)});
    return Graph::from_edges(edges);
}

Graph star_graph(int leaves) {
    std::vector<Edge> edges;
    for (NodeId leaf = 1; leaf <= leaves; ++leaf) edges.push_back({0, leaf});
    return Graph::from_edges(edges);
}

Graph random_graph(int n, double p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            if (coin(rng) < p) edges.push_back({u, v});
    GraphOptions opt;
    opt.num_nodes = n;
    return Graph::from_edges(edges, opt);
}

// Brute-force set arithmetic over neighbor sets; intentionally ignores the
// library's merge-walk helpers.
std::set<NodeId> neighbor_set(const Graph& g, NodeId u) {
    std::set<NodeId> s;
    for (NodeId k = 0; k < g.num_nodes(); ++k)
        if (k != u && g.adjacency().at(u, k) != 0.0) s.insert(k);
    return s;
}

std::set<NodeId> common(const Graph& g, NodeId u, NodeId v) {
    const std::set<NodeId> nu = neighbor_set(g, u);
    const std::set<NodeId> nv = neighbor_set(g, v);
    std::set<NodeId> both;
    std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(),
                          std::inserter(both, both.begin()));
    return both;
}

// Dense s_k SimRank iteration: s_0 = I, the usual recursion above that.
std::vector<double> dense_simrank(const Graph& g, double c, int iters) {
    const int n = g.num_nodes();
    std::vector<double> s(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i) * n + i] = 1.0;
    for (int it = 0; it < iters; ++it) {
        std::vector<double> next(static_cast<std::size_t>(n) * n, 0.0);
        for (int a = 0; a < n; ++a) next[static_cast<std::size_t>(a) * n + a] = 1.0;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) {
                const auto na = neighbor_set(g, a);
                const auto nb = neighbor_set(g, b);
                if (na.empty() || nb.empty()) continue;
                double sum = 0.0;
                for (NodeId i : na)
                    for (NodeId j : nb) sum += s[static_cast<std::size_t>(i) * n + j];
                const double val =
                    c * sum / (static_cast<double>(na.size()) * static_cast<double>(nb.size()));
                next[static_cast<std::size_t>(a) * n + b] = val;
                next[static_cast<std::size_t>(b) * n + a] = val;
            }
        s = std::move(next);
    }
    return s;
}

// Dense rooted-PageRank oracle with the same restart/dangling conventions.
std::vector<double> dense_ppr(const Graph& g, NodeId seed, double d, int iters) {
    const int n = g.num_nodes();
    std::vector<double> pi(static_cast<std::size_t>(n), 0.0);
    pi[static_cast<std::size_t>(seed)] = 1.0;
    for (int it = 0; it < iters; ++it) {
        std::vector<double> next(static_cast<std::size_t>(n), 0.0);
        double dangling = 0.0;
        for (int j = 0; j < n; ++j)
            if (neighbor_set(g, j).empty()) dangling += pi[static_cast<std::size_t>(j)];
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (NodeId j : neighbor_set(g, i)) {
                const double dj = static_cast<double>(neighbor_set(g, j).size());
                acc += pi[static_cast<std::size_t>(j)] / dj;
            }
            next[static_cast<std::size_t>(i)] = d * acc;
        }
        next[static_cast<std::size_t>(seed)] += (1.0 - d) + d * dangling;
        pi = std::move(next);
    }
    return pi;
}

// Dense adjacency powers for the Katz oracle.
std::vector<double> dense_power(const Graph& g, int l) {
    const int n = g.num_nodes();
    std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a[static_cast<std::size_t>(i) * n + j] = g.adjacency().at(i, j) != 0.0 ? 1.0 : 0.0;
    std::vector<double> p = a;
    for (int step = 1; step < l; ++step) {
        std::vector<double> next(static_cast<std::size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                for (int j = 0; j < n; ++j)
                    next[static_cast<std::size_t>(i) * n + j] +=
                        p[static_cast<std::size_t>(i) * n + k] * a[static_cast<std::size_t>(k) * n + j];
        p = std::move(next);
    }
    return p;
}

}  // namespace

TEST_CASE("common neighbors on fixtures") {
    const Graph k3 = complete_graph(3);
    CHECK(score_cn(k3, 0, 1) == 1.0);
    CHECK(score_cn(k3, 1, 2) == 1.0);

    const Graph p3 = path_graph(3);
    CHECK(score_cn(p3, 0, 2) == 1.0);
    CHECK(score_cn(p3, 0, 1) == 0.0);

    const Graph k5 = complete_graph(5);
    for (NodeId u = 0; u < 5; ++u)
        for (NodeId v = u + 1; v < 5; ++v)
            CHECK(score_cn(k5, u, v) == static_cast<double>(common(k5, u, v).size()));
}

TEST_CASE("resource allocation on fixtures and random graphs") {
    CHECK(score_ra(complete_graph(3), 0, 1) == 0.5);
    CHECK(score_ra(star_graph(4), 1, 2) == 0.25);

    std::mt19937_64 rng(100);
    const Graph g = random_graph(20, 0.25, rng);
    for (NodeId u = 0; u < 20; ++u)
        for (NodeId v = u + 1; v < 20; ++v) {
            double want = 0.0;
            for (NodeId k : common(g, u, v))
                want += 1.0 / static_cast<double>(neighbor_set(g, k).size());
            CHECK(score_ra(g, u, v) == doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("adamic-adar on fixtures") {
    CHECK(score_aa(complete_graph(3), 0, 1) ==
          doctest::Approx(1.0 / std::log(2.0)).epsilon(1e-12));
    const Graph k4 = complete_graph(4);
    for (NodeId u = 0; u < 4; ++u)
        for (NodeId v = u + 1; v < 4; ++v)
            CHECK(score_aa(k4, u, v) ==
                  doctest::Approx(2.0 / std::log(3.0)).epsilon(1e-12));
    CHECK(score_aa(k4, 0, 1) == doctest::Approx(1.820478).epsilon(1e-6));
    CHECK(score_aa(path_graph(3), 0, 1) == 0.0);  // no common neighbors
}

TEST_CASE("adamic-adar skips weighted degrees at or below one") {
    // common neighbor 2 has weighted degree 0.6 <= 1 -> skipped
    const std::vector<Edge> edges{{0, 2, 0.3}, {1, 2, 0.3}};
    const Graph g = Graph::from_edges(edges);
    HeuristicParams p;
    p.weighted = true;
    CHECK(score_aa(g, 0, 1, p) == 0.0);
    // the unweighted view sees degree 2 and counts it
    CHECK(score_aa(g, 0, 1) == doctest::Approx(1.0 / std::log(2.0)));
}

TEST_CASE("jaccard on fixtures and degenerate unions") {
    CHECK(score_jaccard(complete_graph(3), 0, 1) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    GraphOptions opt;
    opt.num_nodes = 4;
    const Graph isolated = Graph::from_edges(std::vector<Edge>{{0, 1}}, opt);
    CHECK(score_jaccard(isolated, 2, 3) == 0.0);

    std::mt19937_64 rng(3);
    const Graph g = random_graph(18, 0.3, rng);
    for (NodeId u = 0; u < 18; ++u)
        for (NodeId v = u + 1; v < 18; ++v) {
            const auto nu = neighbor_set(g, u);
            const auto nv = neighbor_set(g, v);
            std::set<NodeId> uni = nu;
            uni.insert(nv.begin(), nv.end());
            const double want = uni.empty()
                                    ? 0.0
                                    : static_cast<double>(common(g, u, v).size()) /
                                          static_cast<double>(uni.size());
            CHECK(score_jaccard(g, u, v) == doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("preferential attachment") {
    const Graph star = star_graph(4);
    CHECK(score_pa(star, 0, 1) == 4.0);
    CHECK(score_pa(star, 1, 2) == 1.0);
    HeuristicParams weighted;
    weighted.weighted = true;
    const Graph g = Graph::from_edges(std::vector<Edge>{{0, 1, 2.0}, {0, 2, 3.0}});
    CHECK(score_pa(g, 0, 1, weighted) == 10.0);  // 5 * 2
}

TEST_CASE("katz on the path matches the walk enumeration") {
    const Graph p3 = path_graph(3);
    HeuristicParams p;
    p.katz_beta = 0.1;
    p.katz_max_hops = 4;
    // length-2 walk 0-1-2 plus two length-4 walks (0-1-0-1-2 and 0-1-2-1-2)
    CHECK(score_katz(p3, 0, 2, p) == doctest::Approx(0.01 + 2e-4).epsilon(1e-12));
}

TEST_CASE("katz matches the dense power oracle") {
    std::mt19937_64 rng(8);
    const Graph g = random_graph(16, 0.2, rng);
    HeuristicParams p;
    p.katz_beta = 0.05;
    p.katz_max_hops = 5;
    std::vector<std::vector<double>> powers;
    for (int l = 1; l <= p.katz_max_hops; ++l) powers.push_back(dense_power(g, l));
    for (NodeId u = 0; u < 16; ++u)
        for (NodeId v = u + 1; v < 16; ++v) {
            double want = 0.0, bw = 1.0;
            for (int l = 1; l <= p.katz_max_hops; ++l) {
                bw *= p.katz_beta;
                want += bw * powers[static_cast<std::size_t>(l - 1)]
                                   [static_cast<std::size_t>(u) * 16 + v];
            }
            CHECK(score_katz(g, u, v, p) == doctest::Approx(want).epsilon(1e-10));
        }
}

TEST_CASE("katz truncation converges monotonically") {
    std::mt19937_64 rng(21);
    const Graph g = random_graph(24, 0.15, rng);
    HeuristicParams p;
    p.katz_beta = 0.02;
    double prev = -1.0;
    for (int hops = 1; hops <= 8; ++hops) {
        p.katz_max_hops = hops;
        const double s = score_katz(g, 0, 5, p);
        CHECK(s >= prev);  // all walk contributions are nonnegative
        if (hops > 1) {
            const double delta = s - prev;
            const double bound = std::pow(p.katz_beta * 24.0, hops);
            CHECK(delta <= bound + 1e-15);
        }
        prev = s;
    }
}

TEST_CASE("rooted pagerank matches the dense oracle") {
    std::mt19937_64 rng(14);
    const Graph g = random_graph(14, 0.2, rng);
    HeuristicParams p;
    for (NodeId u = 0; u < 14; ++u)
        for (NodeId v = u + 1; v < 14; ++v) {
            const auto pu = dense_ppr(g, u, p.pagerank_damping, p.pagerank_iterations);
            const auto pv = dense_ppr(g, v, p.pagerank_damping, p.pagerank_iterations);
            const double want = pu[static_cast<std::size_t>(v)] + pv[static_cast<std::size_t>(u)];
            CHECK(score_pagerank(g, u, v, p) == doctest::Approx(want).epsilon(1e-10));
        }
}

TEST_CASE("pagerank mass is conserved") {
    std::mt19937_64 rng(15);
    const Graph g = random_graph(20, 0.15, rng);
    HeuristicParams p;
    const auto pi = dense_ppr(g, 0, p.pagerank_damping, p.pagerank_iterations);
    double total = 0.0;
    for (double x : pi) total += x;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("simrank on small fixtures") {
    HeuristicParams p;
    const Graph p3 = path_graph(3);
    // s(0,2) = C * s(1,1) = C after one iteration and stays there
    CHECK(score_simrank(p3, 0, 2, p) == doctest::Approx(0.8).epsilon(1e-12));
    // endpoints of a single edge never meet: s stays 0
    const Graph k2 = complete_graph(2);
    CHECK(score_simrank(k2, 0, 1, p) == 0.0);
}

TEST_CASE("simrank matches the dense iteration oracle") {
    std::mt19937_64 rng(77);
    const Graph g = random_graph(12, 0.25, rng);
    HeuristicParams p;
    const auto s = dense_simrank(g, p.simrank_decay, p.simrank_iterations);
    for (NodeId u = 0; u < 12; ++u)
        for (NodeId v = u + 1; v < 12; ++v)
            CHECK(score_simrank(g, u, v, p) ==
                  doctest::Approx(s[static_cast<std::size_t>(u) * 12 + v]).epsilon(1e-10));
}

TEST_CASE("every heuristic is symmetric in its arguments") {
    std::mt19937_64 rng(55);
    const Graph g = random_graph(15, 0.25, rng);
    HeuristicParams p;
    const std::vector<HeuristicKind> kinds{
        HeuristicKind::cn, HeuristicKind::jaccard, HeuristicKind::aa,
        HeuristicKind::ra, HeuristicKind::pa,      HeuristicKind::katz,
        HeuristicKind::pagerank, HeuristicKind::simrank};
    std::uniform_int_distribution<NodeId> pick(0, 14);
    for (HeuristicKind kind : kinds) {
        HeuristicScorer scorer(g, kind, p);
        for (int t = 0; t < 25; ++t) {
            const NodeId u = pick(rng), v = pick(rng);
            CHECK(scorer.score(u, v) == doctest::Approx(scorer.score(v, u)).epsilon(1e-12));
        }
    }
}

TEST_CASE("local heuristics ignore rewiring outside the joint neighborhood") {
    std::mt19937_64 rng(61);
    GraphOptions opt;
    opt.num_nodes = 20;
    // nodes 0..9 form the neighborhood under test; 10..19 get rewired
    std::vector<Edge> inner;
    for (NodeId u = 0; u < 10; ++u)
        for (NodeId v = u + 1; v < 10; ++v)
            if (rng() % 3 == 0) inner.push_back({u, v});
    std::vector<Edge> outer1{{10, 11}, {12, 13}, {14, 15}};
    std::vector<Edge> outer2{{10, 19}, {11, 18}, {12, 17}, {13, 16}};
    auto with = [&](const std::vector<Edge>& extra) {
        std::vector<Edge> all = inner;
        all.insert(all.end(), extra.begin(), extra.end());
        return Graph::from_edges(all, opt);
    };
    const Graph a = with(outer1);
    const Graph b = with(outer2);
    for (NodeId u = 0; u < 10; ++u)
        for (NodeId v = u + 1; v < 10; ++v) {
            CHECK(score_cn(a, u, v) == score_cn(b, u, v));
            CHECK(score_ra(a, u, v) == score_ra(b, u, v));
            CHECK(score_aa(a, u, v) == score_aa(b, u, v));
            CHECK(score_jaccard(a, u, v) == score_jaccard(b, u, v));
        }
}

TEST_CASE("cn, ra, aa rank identically when all degrees are equal") {
    // 3-regular circulant on 8 nodes: connect i to i+-1 and i+4
    std::vector<Edge> edges;
    for (NodeId i = 0; i < 8; ++i) {
        edges.push_back({i, NodeId((i + 1) % 8)});
        if (i < 4) edges.push_back({i, NodeId(i + 4)});
    }
    const Graph g = Graph::from_edges(edges);
    for (NodeId i = 0; i < 8; ++i) REQUIRE(g.neighbors(i).size() == 3);

    std::vector<NodePair> pairs;
    for (NodeId u = 0; u < 8; ++u)
        for (NodeId v = u + 1; v < 8; ++v) pairs.push_back({u, v});
    const auto cn = score_all_pairs(g, HeuristicKind::cn, pairs);
    const auto ra = score_all_pairs(g, HeuristicKind::ra, pairs);
    const auto aa = score_all_pairs(g, HeuristicKind::aa, pairs);
    auto rank_order = [&](const std::vector<double>& s) {
        std::vector<std::size_t> idx(s.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
        return idx;
    };
    CHECK(rank_order(cn) == rank_order(ra));
    CHECK(rank_order(cn) == rank_order(aa));
}

TEST_CASE("score_all_pairs equals the per-pair loop") {
    std::mt19937_64 rng(91);
    const Graph g = random_graph(25, 0.2, rng);
    std::uniform_int_distribution<NodeId> pick(0, 24);
    std::vector<NodePair> pairs;
    for (int i = 0; i < 1000; ++i) pairs.push_back({pick(rng), pick(rng)});
    const auto batch = score_all_pairs(g, HeuristicKind::ra, pairs);
    HeuristicScorer scorer(g, HeuristicKind::ra);
    for (std::size_t i = 0; i < pairs.size(); ++i)
        CHECK(batch[i] == scorer.score(pairs[i].first, pairs[i].second));
    CHECK(score_all_pairs(g, HeuristicKind::cn, {}).empty());
}

TEST_CASE("kind parsing accepts the documented aliases") {
    CHECK(heuristic_kind_from_name("CN") == HeuristicKind::cn);
    CHECK(heuristic_kind_from_name("jac") == HeuristicKind::jaccard);
    CHECK(heuristic_kind_from_name("pr") == HeuristicKind::pagerank);
    CHECK(heuristic_kind_from_name("sr") == HeuristicKind::simrank);
    CHECK_THROWS_AS(heuristic_kind_from_name("bogus"), DataError);
    for (HeuristicKind kind :
         {HeuristicKind::cn, HeuristicKind::jaccard, HeuristicKind::aa,
          HeuristicKind::ra, HeuristicKind::pa, HeuristicKind::katz,
          HeuristicKind::pagerank, HeuristicKind::simrank})
        CHECK(heuristic_kind_from_name(heuristic_kind_name(kind)) == kind);
}

TEST_CASE("invalid parameters are rejected") {
    HeuristicParams p;
    p.pagerank_damping = 1.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.simrank_decay = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.katz_max_hops = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    const Graph g = complete_graph(3);
    CHECK_THROWS_AS(score_cn(g, 0, 7), DataError);
    CHECK_THROWS_AS(score_cn(g, -1, 1), DataError);
}

TEST_CASE("scorers are deterministic across instances") {
    std::mt19937_64 rng(111);
    const Graph g = random_graph(15, 0.3, rng);
    std::vector<NodePair> pairs;
    for (NodeId u = 0; u < 15; ++u)
        for (NodeId v = u + 1; v < 15; ++v) pairs.push_back({u, v});
    for (HeuristicKind kind : {HeuristicKind::katz, HeuristicKind::pagerank,
                               HeuristicKind::simrank}) {
        const auto a = score_all_pairs(g, kind, pairs);
        const auto b = score_all_pairs(g, kind, pairs);
        CHECK(a == b);
    }
}
