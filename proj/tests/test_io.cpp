#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "neolink/io.hpp"

using namespace neolink;
namespace fs = std::filesystem;

namespace {

struct temp_dir {
    fs::path path;
    temp_dir() {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() /
               ("neolink-io-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~temp_dir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

// independent FNV-1a reimplementation used as the hashing oracle
std::uint64_t ref_fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
    return h;
}

ModelConfig gcn_config(int n) {
    ModelConfig c;
    c.num_nodes = n;
    c.hops = 2;
    c.beta = 0.5;
    c.scalar_hidden = 3;
    c.use_gcn = true;
    c.gcn_layers = 2;
    c.gcn_width = 4;
    c.embedding_dim = 5;
    c.pair_hidden = 3;
    return c;
}

std::vector<std::pair<std::string, std::vector<double>>> blocks_of(
    const NeoModel& m) {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    m.for_each_block([&](const std::string& name, std::span<const double> v) {
        out.emplace_back(name, std::vector<double>(v.begin(), v.end()));
    });
    return out;
}

void check_same_sparse(const SparseMatrix& a, const SparseMatrix& b) {
    CHECK(a.rows() == b.rows());
    CHECK(a.cols() == b.cols());
    CHECK(a.row_offsets() == b.row_offsets());
    CHECK(a.col_indices() == b.col_indices());
    CHECK(a.values() == b.values());
}

Graph random_graph(int n, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            if (coin(rng) < p) edges.push_back({u, v});
    GraphOptions opt;
    opt.num_nodes = n;
    return Graph::from_edges(edges, opt);
}

}  // namespace

TEST_CASE("atomic_write_text creates parents and leaves no temp files") {
    temp_dir dir;
    const fs::path target = dir.path / "a" / "b" / "out.txt";
    atomic_write_text(target, "hello\nworld\n");
    CHECK(read_text_file(target) == "hello\nworld\n");

    atomic_write_text(target, "second");
    CHECK(read_text_file(target) == "second");

    int entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(target.parent_path()))
        ++entries;
    CHECK(entries == 1);
}

TEST_CASE("read_text_file on a missing path throws DataError") {
    temp_dir dir;
    CHECK_THROWS_AS(read_text_file(dir.path / "nope.txt"), DataError);
}

TEST_CASE("fnv1a matches an independent implementation") {
    CHECK(fnv1a_hash("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a_hash("a") == 0xaf63dc4c8601ec8cull);
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> len(0, 64), byte(0, 255);
    for (int t = 0; t < 200; ++t) {
        std::string s;
        const int k = len(rng);
        for (int i = 0; i < k; ++i) s.push_back(static_cast<char>(byte(rng)));
        CHECK(fnv1a_hash(s) == ref_fnv1a(s));
    }
}

TEST_CASE("hash_hex renders 16 lowercase hex digits") {
    CHECK(hash_hex(0) == "0000000000000000");
    CHECK(hash_hex(0xcbf29ce484222325ull) == "cbf29ce484222325");
    CHECK(hash_hex(255) == "00000000000000ff");
}

TEST_CASE("file_content_hash hashes the exact bytes") {
    temp_dir dir;
    const fs::path p = dir.path / "data.txt";
    const std::string content = "0 1\n2 3 # tail\n";
    atomic_write_text(p, content);
    CHECK(file_content_hash(p) == hash_hex(ref_fnv1a(content)));
}

TEST_CASE("graph_hash ignores edge order but not structure") {
    std::vector<Edge> edges{{0, 1}, {1, 2}, {0, 3, 2.5}};
    GraphOptions opt;
    opt.num_nodes = 5;
    const Graph a = Graph::from_edges(edges, opt);
    std::reverse(edges.begin(), edges.end());
    for (Edge& e : edges) std::swap(e.u, e.v);  // also flip endpoint order
    const Graph b = Graph::from_edges(edges, opt);
    CHECK(graph_hash(a) == graph_hash(b));

    edges.push_back({2, 3});
    const Graph c = Graph::from_edges(edges, opt);
    CHECK(graph_hash(a) != graph_hash(c));

    opt.num_nodes = 6;  // same edges, extra isolated node
    const Graph d = Graph::from_edges(edges, opt);
    CHECK(graph_hash(c) != graph_hash(d));
}

TEST_CASE("pair files round-trip and skip comments") {
    temp_dir dir;
    const fs::path p = dir.path / "pairs.txt";
    const std::vector<NodePair> pairs{{0, 1}, {4, 2}, {7, 7}};
    save_pair_file(p, pairs);
    CHECK(load_pair_file(p) == pairs);

    atomic_write_text(p, "# header\n1 2\n\n3 4 # trailing\n");
    CHECK(load_pair_file(p) == std::vector<NodePair>{{1, 2}, {3, 4}});
}

TEST_CASE("malformed pair files report file and line") {
    temp_dir dir;
    const fs::path p = dir.path / "bad.txt";
    atomic_write_text(p, "0 1\n2\n");
    try {
        load_pair_file(p);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("bad.txt:2") != std::string::npos);
    }
    atomic_write_text(p, "0 x\n");
    CHECK_THROWS_AS(load_pair_file(p), DataError);
}

TEST_CASE("score files round-trip doubles bitwise") {
    temp_dir dir;
    const fs::path p = dir.path / "scores.txt";
    const std::vector<ScoredPair> rows{
        {0, 1, 1.0 / 3.0}, {2, 5, -2.5e300}, {3, 4, 1e-17}, {6, 7, 0.0}};
    save_score_file(p, rows);
    const auto back = load_score_file(p);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].u == rows[i].u);
        CHECK(back[i].v == rows[i].v);
        CHECK(back[i].score == rows[i].score);  // exact: %.17g round-trips
    }
}

TEST_CASE("checkpoints restore configuration and parameters bitwise") {
    temp_dir dir;
    const fs::path p = dir.path / "model.json";
    std::mt19937_64 rng(7);
    const ModelConfig cfg = gcn_config(9);
    NeoModel model(cfg, rng);
    save_checkpoint(p, model);

    NeoModel back = load_checkpoint(p);
    CHECK(blocks_of(back) == blocks_of(model));
    CHECK(back.config().hops == cfg.hops);
    CHECK(back.config().use_gcn == cfg.use_gcn);
    CHECK(back.param_count() == model.param_count());

    // loaded model scores identically
    const Graph g = random_graph(9, 0.4, 3);
    const ModelInputs in = prepare_inputs(g, cfg);
    const ModelForward f1 = model.forward(in);
    const ModelForward f2 = back.forward(in);
    CHECK(model.score_pair(f1, 0, 5).y_hat == back.score_pair(f2, 0, 5).y_hat);
}

TEST_CASE("load_checkpoint with an expected config rejects mismatches") {
    temp_dir dir;
    const fs::path p = dir.path / "model.json";
    std::mt19937_64 rng(7);
    const ModelConfig cfg = gcn_config(9);
    NeoModel model(cfg, rng);
    save_checkpoint(p, model);

    CHECK_NOTHROW(load_checkpoint(p, cfg));
    ModelConfig wrong = cfg;
    wrong.hops = 3;
    CHECK_THROWS_AS(load_checkpoint(p, wrong), DataError);
    wrong = cfg;
    wrong.gcn_width = 8;
    CHECK_THROWS_AS(load_checkpoint(p, wrong), DataError);
    wrong = cfg;
    wrong.use_gcn = false;
    CHECK_THROWS_AS(load_checkpoint(p, wrong), DataError);
}

TEST_CASE("corrupt or tampered checkpoints are rejected") {
    temp_dir dir;
    const fs::path p = dir.path / "model.json";
    std::mt19937_64 rng(7);
    NeoModel model(gcn_config(6), rng);
    save_checkpoint(p, model);

    SUBCASE("not json") {
        atomic_write_text(p, "this is not json{");
        CHECK_THROWS_AS(load_checkpoint(p), DataError);
    }
    SUBCASE("wrong format tag") {
        auto j = nlohmann::json::parse(read_text_file(p));
        j["format"] = "something-else";
        atomic_write_text(p, j.dump());
        CHECK_THROWS_AS(load_checkpoint(p), DataError);
    }
    SUBCASE("unsupported version") {
        auto j = nlohmann::json::parse(read_text_file(p));
        j["version"] = 99;
        atomic_write_text(p, j.dump());
        CHECK_THROWS_AS(load_checkpoint(p), DataError);
    }
    SUBCASE("missing parameter block") {
        auto j = nlohmann::json::parse(read_text_file(p));
        j["params"].erase("alpha_raw");
        atomic_write_text(p, j.dump());
        CHECK_THROWS_AS(load_checkpoint(p), DataError);
    }
    SUBCASE("extra parameter block") {
        auto j = nlohmann::json::parse(read_text_file(p));
        j["params"]["bogus"] = std::vector<double>{1.0};
        atomic_write_text(p, j.dump());
        CHECK_THROWS_AS(load_checkpoint(p), DataError);
    }
    SUBCASE("wrong block length") {
        auto j = nlohmann::json::parse(read_text_file(p));
        j["params"]["alpha_raw"] = std::vector<double>{0.0, 0.0};
        atomic_write_text(p, j.dump());
        CHECK_THROWS_AS(load_checkpoint(p), DataError);
    }
}

TEST_CASE("manifest json carries every field") {
    RunManifest m;
    m.command_line = "neolink train --graph g.txt";
    m.config["hops"] = "2";
    m.config["beta"] = "0.5";
    m.dataset_hashes["g.txt"] = "00aabbccddeeff11";
    m.seed = 1234567890123ull;
    m.checkpoint_hash = "deadbeefdeadbeef";
    m.timings_sec["train"] = 1.5;

    const auto j = nlohmann::json::parse(m.to_json());
    CHECK(j.at("command_line").get<std::string>() == m.command_line);
    CHECK(j.at("config").at("hops").get<std::string>() == "2");
    CHECK(j.at("dataset_hashes").at("g.txt").get<std::string>() ==
          "00aabbccddeeff11");
    CHECK(j.at("seed").get<std::uint64_t>() == m.seed);
    CHECK(j.at("checkpoint_hash").get<std::string>() == "deadbeefdeadbeef");
    CHECK(j.at("timings_sec").at("train").get<double>() == 1.5);

    temp_dir dir;
    save_manifest(dir.path / "manifest.json", m);
    CHECK(read_text_file(dir.path / "manifest.json") == m.to_json());
}

TEST_CASE("power cache hit returns a bit-identical series") {
    temp_dir dir;
    const Graph g = random_graph(20, 0.25, 11);
    const std::string gh = graph_hash(g);
    const PowerSeries direct = power_series(g.adjacency(), 3, 0.5, 0.0);

    const PowerSeries miss =
        cached_power_series(dir.path, gh, g.adjacency(), 3, 0.5, 0.0);
    const fs::path entry = dir.path / (gh + "-L3-b0.5-t0.json");
    CHECK(fs::exists(entry));

    const PowerSeries hit =
        cached_power_series(dir.path, gh, g.adjacency(), 3, 0.5, 0.0);
    REQUIRE(miss.matrices.size() == 3);
    REQUIRE(hit.matrices.size() == 3);
    for (int l = 0; l < 3; ++l) {
        check_same_sparse(miss.matrices[l], direct.matrices[l]);
        check_same_sparse(hit.matrices[l], direct.matrices[l]);
    }
    check_same_sparse(miss.combined, direct.combined);
    check_same_sparse(hit.combined, direct.combined);
}

TEST_CASE("corrupt cache entries are recomputed and repaired") {
    temp_dir dir;
    const Graph g = random_graph(12, 0.3, 13);
    const std::string gh = graph_hash(g);
    const PowerSeries direct = power_series(g.adjacency(), 2, 1.0, 0.0);

    cached_power_series(dir.path, gh, g.adjacency(), 2, 1.0, 0.0);
    const fs::path entry = dir.path / (gh + "-L2-b1-t0.json");
    REQUIRE(fs::exists(entry));
    atomic_write_text(entry, "{broken");

    const PowerSeries repaired =
        cached_power_series(dir.path, gh, g.adjacency(), 2, 1.0, 0.0);
    check_same_sparse(repaired.combined, direct.combined);
    // entry was rewritten and is valid again
    const auto repaired_json = nlohmann::json::parse(read_text_file(entry));
    CHECK(repaired_json.at("format").get<std::string>() == "neolink-powers");

    const PowerSeries hit =
        cached_power_series(dir.path, gh, g.adjacency(), 2, 1.0, 0.0);
    check_same_sparse(hit.combined, direct.combined);
}

TEST_CASE("a held lock skips persisting but still returns the series") {
    temp_dir dir;
    const Graph g = random_graph(10, 0.3, 17);
    const std::string gh = graph_hash(g);
    const fs::path lock = dir.path / (gh + "-L1-b0.5-t0.lock");
    fs::create_directories(dir.path);
    std::ofstream(lock) << "";
    REQUIRE(fs::exists(lock));

    const PowerSeries got =
        cached_power_series(dir.path, gh, g.adjacency(), 1, 0.5, 0.0);
    const PowerSeries direct = power_series(g.adjacency(), 1, 0.5, 0.0);
    check_same_sparse(got.combined, direct.combined);
    CHECK_FALSE(fs::exists(dir.path / (gh + "-L1-b0.5-t0.json")));
}

TEST_CASE("an empty cache dir disables caching") {
    const Graph g = random_graph(8, 0.4, 19);
    const PowerSeries got =
        cached_power_series(fs::path{}, graph_hash(g), g.adjacency(), 2, 0.5, 0.0);
    const PowerSeries direct = power_series(g.adjacency(), 2, 0.5, 0.0);
    check_same_sparse(got.combined, direct.combined);
}
