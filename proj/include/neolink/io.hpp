#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neolink/graph.hpp"
#include "neolink/heuristics.hpp"
#include "neolink/model.hpp"

namespace neolink {

// Writes to a sibling temp file and renames into place, so readers never see
// a partial artifact.
void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content);

std::string read_text_file(const std::filesystem::path& path);

// FNV-1a over bytes; hex string helpers for manifests and cache keys.
std::uint64_t fnv1a_hash(std::string_view bytes);
std::string hash_hex(std::uint64_t h);
std::string file_content_hash(const std::filesystem::path& path);
// Hash of the canonical graph serialization (node count plus sorted merged
// edges), independent of comment lines or edge order in the source file.
std::string graph_hash(const Graph& g);

// Pair files: one "u v" per line, '#' comments allowed.
std::vector<NodePair> load_pair_file(const std::filesystem::path& path);
void save_pair_file(const std::filesystem::path& path,
                    std::span<const NodePair> pairs);

struct ScoredPair {
    NodeId u = 0;
    NodeId v = 0;
    double score = 0.0;
};

// Score files: one "u v score" per line.
std::vector<ScoredPair> load_score_file(const std::filesystem::path& path);
void save_score_file(const std::filesystem::path& path,
                     std::span<const ScoredPair> rows);

// Versioned JSON checkpoint: model config plus every parameter block.
void save_checkpoint(const std::filesystem::path& path, const NeoModel& model);
NeoModel load_checkpoint(const std::filesystem::path& path);
// Rejects checkpoints whose architecture (L, beta, layer dims, ...) differs
// from `expected`.
NeoModel load_checkpoint(const std::filesystem::path& path,
                         const ModelConfig& expected);

struct RunManifest {
    std::string command_line;
    std::map<std::string, std::string> config;          // resolved settings
    std::map<std::string, std::string> dataset_hashes;  // input path -> hash
    std::uint64_t seed = 0;
    std::string checkpoint_hash;                  // empty when no checkpoint
    std::map<std::string, double> timings_sec;    // phase -> seconds

    std::string to_json() const;
};

void save_manifest(const std::filesystem::path& path, const RunManifest& m);

// Adjacency powers cached on disk, keyed by (graph hash, hops, beta, tau).
// A lock file keeps concurrent runs from writing the same entry; on
// contention the series is simply recomputed and not persisted.
PowerSeries cached_power_series(const std::filesystem::path& cache_dir,
                                const std::string& graph_hash_hex,
                                const SparseMatrix& adjacency, int hops,
                                double beta, double tau);

}  // namespace neolink
