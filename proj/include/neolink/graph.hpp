#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "neolink/common.hpp"
#include "neolink/sparse_matrix.hpp"

namespace neolink {

struct Edge {
    NodeId u = 0;
    NodeId v = 0;
    double weight = 1.0;
};

// How duplicate undirected edges are merged during construction.
enum class MergePolicy {
    sum,     // weights of duplicates add up
    binary,  // any multiplicity clamps to weight 1
};

struct GraphOptions {
    MergePolicy merge = MergePolicy::sum;
    // Node count override; default is max id + 1.
    std::optional<NodeId> num_nodes;
};

// Immutable undirected graph: symmetric CSR adjacency plus weighted degrees.
// degrees[i] is computed as the i-th adjacency row sum, so the two agree
// exactly. No self-loops.
class Graph {
public:
    Graph() = default;

    static Graph from_edges(std::span<const Edge> edges,
                            const GraphOptions& options = {});

    NodeId num_nodes() const { return num_nodes_; }
    std::size_t num_edges() const { return edges_.size(); }
    // Canonical merged edge list, u < v, sorted.
    const std::vector<Edge>& edges() const { return edges_; }
    const SparseMatrix& adjacency() const { return adjacency_; }
    const std::vector<double>& degrees() const { return degrees_; }
    double degree(NodeId i) const { return degrees_[static_cast<std::size_t>(i)]; }

    std::span<const NodeId> neighbors(NodeId i) const { return adjacency_.row_cols(i); }
    bool has_edge(NodeId u, NodeId v) const { return adjacency_.at(u, v) != 0.0; }

    // Copy with every edge weight clamped to 1.
    Graph binarized() const;

private:
    NodeId num_nodes_ = 0;
    std::vector<Edge> edges_;
    SparseMatrix adjacency_;
    std::vector<double> degrees_;
};

// Plain-text edge list: one `src dst [weight]` per line, 0-based ids,
// `#` comments ignored, optional `%N <count>` header overriding the node
// count. Parse errors carry the offending line number.
Graph load_edge_list(const std::filesystem::path& path,
                     const GraphOptions& options = {});

std::vector<Edge> parse_edge_lines(const std::string& text,
                                   const std::string& origin,
                                   std::optional<NodeId>* header_nodes);

std::string format_edge_list(std::span<const Edge> edges,
                             std::optional<NodeId> num_nodes_header = std::nullopt);

// Atomic (temp + rename); creates missing parent directories.
void save_edge_list(const std::filesystem::path& path,
                    std::span<const Edge> edges,
                    std::optional<NodeId> num_nodes_header = std::nullopt);

}  // namespace neolink
