#include "neolink/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace neolink {

Graph Graph::from_edges(std::span<const Edge> edges, const GraphOptions& options) {
    NodeId max_id = -1;
    for (const Edge& e : edges) {
        if (e.u < 0 || e.v < 0)
            throw DataError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                            "): negative node id");
        if (e.u == e.v)
            throw DataError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                            "): self-loops are not allowed");
        if (!(e.weight > 0.0))
            throw DataError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                            "): weight must be > 0, got " + std::to_string(e.weight));
        max_id = std::max({max_id, e.u, e.v});
    }
    const NodeId n = options.num_nodes.value_or(max_id + 1);
    if (max_id >= n)
        throw DataError("node id " + std::to_string(max_id) +
                        " out of range for node count " + std::to_string(n));

    Graph g;
    g.num_nodes_ = n;

    // Merge duplicates on the canonical (min, max) key.
    std::vector<Edge> canonical(edges.begin(), edges.end());
    for (Edge& e : canonical)
        if (e.u > e.v) std::swap(e.u, e.v);
    std::stable_sort(canonical.begin(), canonical.end(), [](const Edge& a, const Edge& b) {
        return a.u != b.u ? a.u < b.u : a.v < b.v;
    });
    std::size_t i = 0;
    while (i < canonical.size()) {
        std::size_t j = i;
        double w = 0.0;
        while (j < canonical.size() && canonical[j].u == canonical[i].u &&
               canonical[j].v == canonical[i].v) {
            w += canonical[j].weight;
            ++j;
        }
        if (options.merge == MergePolicy::binary) w = 1.0;
        g.edges_.push_back({canonical[i].u, canonical[i].v, w});
        i = j;
    }

    std::vector<Triplet> triplets;
    triplets.reserve(g.edges_.size() * 2);
    for (const Edge& e : g.edges_) {
        triplets.push_back({e.u, e.v, e.weight});
        triplets.push_back({e.v, e.u, e.weight});
    }
    g.adjacency_ = SparseMatrix::from_triplets(n, n, triplets);
    g.degrees_ = g.adjacency_.row_sums();
    return g;
}

Graph Graph::binarized() const {
    std::vector<Edge> flat = edges_;
    for (Edge& e : flat) e.weight = 1.0;
    GraphOptions opt;
    opt.num_nodes = num_nodes_;
    return from_edges(flat, opt);
}

std::vector<Edge> parse_edge_lines(const std::string& text, const std::string& origin,
                                   std::optional<NodeId>* header_nodes) {
    std::vector<Edge> edges;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& what) {
        throw DataError(origin + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos) continue;
        if (line[start] == '#') continue;
        std::istringstream fields(line.substr(start));
        if (line[start] == '%') {
            std::string tag;
            fields >> tag;
            if (tag != "%N") fail("unknown header directive '" + tag + "'");
            long long count = -1;
            if (!(fields >> count) || count < 0) fail("bad node count in %N header");
            if (header_nodes) *header_nodes = static_cast<NodeId>(count);
            continue;
        }
        long long u = -1, v = -1;
        double w = 1.0;
        if (!(fields >> u >> v)) fail("expected 'src dst [weight]'");
        if (u < 0 || v < 0) fail("negative node id");
        std::string rest;
        if (fields >> rest) {
            const char* begin = rest.data();
            const char* end = begin + rest.size();
            auto [p, ec] = std::from_chars(begin, end, w);
            if (ec != std::errc{} || p != end) fail("bad weight '" + rest + "'");
            if (!(w > 0.0)) fail("weight must be > 0");
            std::string extra;
            if (fields >> extra) fail("trailing tokens after weight");
        }
        edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v), w});
    }
    return edges;
}

Graph load_edge_list(const std::filesystem::path& path, const GraphOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open edge list: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::optional<NodeId> header_nodes;
    std::vector<Edge> edges = parse_edge_lines(buffer.str(), path.string(), &header_nodes);
    GraphOptions opts = options;
    if (!opts.num_nodes && header_nodes) opts.num_nodes = header_nodes;
    try {
        return Graph::from_edges(edges, opts);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string format_edge_list(std::span<const Edge> edges,
                             std::optional<NodeId> num_nodes_header) {
    std::ostringstream out;
    out.precision(17);
    if (num_nodes_header) out << "%N " << *num_nodes_header << "\n";
    for (const Edge& e : edges) {
        out << e.u << " " << e.v;
        if (e.weight != 1.0) out << " " << e.weight;
        out << "\n";
    }
    return out.str();
}

}  // namespace neolink
