#include "neolink/io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace neolink {

namespace {

using nlohmann::json;

constexpr int kCheckpointVersion = 1;
constexpr int kPowerCacheVersion = 1;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Shared line scanner: strips '#' comments, reports 1-based line numbers.
template <typename Fn>
void for_each_data_line(const std::string& text,
                        [[maybe_unused]] const std::string& origin, Fn&& fn) {
    std::size_t pos = 0;
    int lineno = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line{text.data() + pos, eol - pos};
        ++lineno;
        pos = eol + 1;
        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        std::size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) {
            if (pos > text.size()) break;
            continue;
        }
        std::size_t e = line.find_last_not_of(" \t\r");
        fn(line.substr(b, e - b + 1), lineno);
        if (pos > text.size()) break;
    }
}

[[noreturn]] void line_error(const std::string& origin, int lineno,
                             const std::string& message) {
    throw DataError(origin + ":" + std::to_string(lineno) + ": " + message);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) fields.push_back(line.substr(i, j - i));
        i = j;
    }
    return fields;
}

NodeId parse_node(std::string_view f, const std::string& origin, int lineno) {
    NodeId v = 0;
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc{} || p != f.data() + f.size() || v < 0)
        line_error(origin, lineno,
                   "expected a non-negative node id, got '" + std::string(f) + "'");
    return v;
}

double parse_real(std::string_view f, const std::string& origin, int lineno) {
    // std::from_chars for doubles is inconsistently available on older
    // libstdc++, so go through strtod on a bounded copy.
    std::string buf(f);
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size())
        line_error(origin, lineno, "expected a real number, got '" + buf + "'");
    return v;
}

json config_to_json(const ModelConfig& c) {
    json j;
    j["num_nodes"] = c.num_nodes;
    j["hops"] = c.hops;
    j["beta"] = c.beta;
    j["tau"] = c.tau;
    j["f_edge_kind"] = scalar_kind_name(c.f_edge_kind);
    j["f_node_kind"] = scalar_kind_name(c.f_node_kind);
    j["g_phi_kind"] = scalar_kind_name(c.g_phi_kind);
    j["scalar_hidden"] = c.scalar_hidden;
    j["g_phi_softplus"] = c.g_phi_softplus;
    j["use_gcn"] = c.use_gcn;
    j["gcn_layers"] = c.gcn_layers;
    j["gcn_width"] = c.gcn_width;
    j["feature_dim"] = c.feature_dim;
    j["embedding_dim"] = c.embedding_dim;
    j["pair_mode"] = pair_score_mode_name(c.pair_mode);
    j["pair_hidden"] = c.pair_hidden;
    j["alpha_init"] = c.alpha_init;
    j["lambda1"] = c.lambda1;
    j["lambda2"] = c.lambda2;
    j["lambda3"] = c.lambda3;
    return j;
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.num_nodes = j.at("num_nodes").get<int>();
    c.hops = j.at("hops").get<int>();
    c.beta = j.at("beta").get<double>();
    c.tau = j.at("tau").get<double>();
    c.f_edge_kind = scalar_kind_from_name(j.at("f_edge_kind").get<std::string>());
    c.f_node_kind = scalar_kind_from_name(j.at("f_node_kind").get<std::string>());
    c.g_phi_kind = scalar_kind_from_name(j.at("g_phi_kind").get<std::string>());
    c.scalar_hidden = j.at("scalar_hidden").get<int>();
    c.g_phi_softplus = j.at("g_phi_softplus").get<bool>();
    c.use_gcn = j.at("use_gcn").get<bool>();
    c.gcn_layers = j.at("gcn_layers").get<int>();
    c.gcn_width = j.at("gcn_width").get<int>();
    c.feature_dim = j.at("feature_dim").get<int>();
    c.embedding_dim = j.at("embedding_dim").get<int>();
    c.pair_mode = pair_score_mode_from_name(j.at("pair_mode").get<std::string>());
    c.pair_hidden = j.at("pair_hidden").get<int>();
    c.alpha_init = j.at("alpha_init").get<double>();
    c.lambda1 = j.at("lambda1").get<double>();
    c.lambda2 = j.at("lambda2").get<double>();
    c.lambda3 = j.at("lambda3").get<double>();
    return c;
}

json sparse_to_json(const SparseMatrix& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["offsets"] = m.row_offsets();
    j["col_indices"] = m.col_indices();
    j["values"] = m.values();
    return j;
}

SparseMatrix sparse_from_json(const json& j) {
    return SparseMatrix::from_csr(
        j.at("rows").get<NodeId>(), j.at("cols").get<NodeId>(),
        j.at("offsets").get<std::vector<std::int64_t>>(),
        j.at("col_indices").get<std::vector<NodeId>>(),
        j.at("values").get<std::vector<double>>());
}

}  // namespace

void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp-" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw DataError("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        std::error_code ec2;
        fs::remove(tmp, ec2);
        throw DataError("failed to move " + tmp.string() + " into place: " +
                        ec.message());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw DataError("failed reading " + path.string());
    return ss.str();
}

std::uint64_t fnv1a_hash(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_content_hash(const std::filesystem::path& path) {
    return hash_hex(fnv1a_hash(read_text_file(path)));
}

std::string graph_hash(const Graph& g) {
    std::ostringstream ss;
    ss << "N " << g.num_nodes() << "\n";
    for (const Edge& e : g.edges())
        ss << e.u << " " << e.v << " " << format_double(e.weight) << "\n";
    return hash_hex(fnv1a_hash(ss.str()));
}

std::vector<NodePair> load_pair_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    const std::string origin = path.string();
    std::vector<NodePair> pairs;
    for_each_data_line(text, origin, [&](std::string_view line, int lineno) {
        const auto fields = split_fields(line);
        if (fields.size() != 2)
            line_error(origin, lineno, "expected 'u v', got " +
                                           std::to_string(fields.size()) +
                                           " fields");
        pairs.push_back({parse_node(fields[0], origin, lineno),
                         parse_node(fields[1], origin, lineno)});
    });
    return pairs;
}

void save_pair_file(const std::filesystem::path& path,
                    std::span<const NodePair> pairs) {
    std::ostringstream ss;
    for (const NodePair& p : pairs) ss << p.first << " " << p.second << "\n";
    atomic_write_text(path, ss.str());
}

void save_edge_list(const std::filesystem::path& path, std::span<const Edge> edges,
                    std::optional<NodeId> num_nodes_header) {
    atomic_write_text(path, format_edge_list(edges, num_nodes_header));
}

std::vector<ScoredPair> load_score_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    const std::string origin = path.string();
    std::vector<ScoredPair> rows;
    for_each_data_line(text, origin, [&](std::string_view line, int lineno) {
        const auto fields = split_fields(line);
        if (fields.size() != 3)
            line_error(origin, lineno, "expected 'u v score', got " +
                                           std::to_string(fields.size()) +
                                           " fields");
        rows.push_back({parse_node(fields[0], origin, lineno),
                        parse_node(fields[1], origin, lineno),
                        parse_real(fields[2], origin, lineno)});
    });
    return rows;
}

void save_score_file(const std::filesystem::path& path,
                     std::span<const ScoredPair> rows) {
    std::ostringstream ss;
    for (const ScoredPair& r : rows)
        ss << r.u << " " << r.v << " " << format_double(r.score) << "\n";
    atomic_write_text(path, ss.str());
}

void save_checkpoint(const std::filesystem::path& path, const NeoModel& model) {
    json j;
    j["format"] = "neolink-checkpoint";
    j["version"] = kCheckpointVersion;
    j["config"] = config_to_json(model.config());
    json params = json::object();
    model.for_each_block([&](const std::string& name, std::span<const double> v) {
        params[name] = std::vector<double>(v.begin(), v.end());
    });
    j["params"] = std::move(params);
    atomic_write_text(path, j.dump(2) + "\n");
}

NeoModel load_checkpoint(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": not a valid checkpoint: " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "neolink-checkpoint")
            throw DataError(path.string() + ": not a checkpoint file");
        if (j.at("version").get<int>() != kCheckpointVersion)
            throw DataError(path.string() + ": unsupported checkpoint version " +
                            j.at("version").dump());
        const ModelConfig cfg = config_from_json(j.at("config"));
        cfg.validate();
        std::mt19937_64 scratch_rng(0);
        NeoModel model(cfg, scratch_rng);
        const json& params = j.at("params");
        std::size_t used = 0;
        model.for_each_block([&](const std::string& name, std::span<double> v) {
            auto it = params.find(name);
            if (it == params.end())
                throw DataError(path.string() + ": missing parameter block '" +
                                name + "'");
            const auto vals = it->get<std::vector<double>>();
            if (vals.size() != v.size())
                throw DataError(path.string() + ": block '" + name + "' has " +
                                std::to_string(vals.size()) + " values, expected " +
                                std::to_string(v.size()));
            std::copy(vals.begin(), vals.end(), v.begin());
            ++used;
        });
        if (used != params.size())
            throw DataError(path.string() +
                            ": checkpoint contains unexpected parameter blocks");
        return model;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": malformed checkpoint: " + e.what());
    }
}

NeoModel load_checkpoint(const std::filesystem::path& path,
                         const ModelConfig& expected) {
    NeoModel model = load_checkpoint(path);
    const ModelConfig& c = model.config();
    auto reject = [&](const std::string& field) {
        throw DataError(path.string() + ": checkpoint " + field +
                        " does not match the requested configuration");
    };
    if (c.num_nodes != expected.num_nodes) reject("num_nodes");
    if (c.hops != expected.hops) reject("hops (L)");
    if (c.beta != expected.beta) reject("beta");
    if (c.tau != expected.tau) reject("tau");
    if (c.f_edge_kind != expected.f_edge_kind) reject("f_edge kind");
    if (c.f_node_kind != expected.f_node_kind) reject("f_node kind");
    if (c.g_phi_kind != expected.g_phi_kind) reject("g_phi kind");
    if (c.scalar_hidden != expected.scalar_hidden) reject("scalar_hidden");
    if (c.g_phi_softplus != expected.g_phi_softplus) reject("g_phi activation");
    if (c.use_gcn != expected.use_gcn) reject("gcn branch");
    if (c.use_gcn) {
        if (c.gcn_layers != expected.gcn_layers) reject("gcn_layers");
        if (c.gcn_width != expected.gcn_width) reject("gcn_width");
        if (c.feature_dim != expected.feature_dim) reject("feature_dim");
        if (c.embedding_dim != expected.embedding_dim) reject("embedding_dim");
        if (c.pair_mode != expected.pair_mode) reject("pair_mode");
        if (c.pair_hidden != expected.pair_hidden) reject("pair_hidden");
    }
    return model;
}

std::string RunManifest::to_json() const {
    json j;
    j["command_line"] = command_line;
    j["config"] = config;
    j["dataset_hashes"] = dataset_hashes;
    j["seed"] = seed;
    j["checkpoint_hash"] = checkpoint_hash;
    j["timings_sec"] = timings_sec;
    return j.dump(2) + "\n";
}

void save_manifest(const std::filesystem::path& path, const RunManifest& m) {
    atomic_write_text(path, m.to_json());
}

PowerSeries cached_power_series(const std::filesystem::path& cache_dir,
                                const std::string& graph_hash_hex,
                                const SparseMatrix& adjacency, int hops,
                                double beta, double tau) {
    namespace fs = std::filesystem;
    if (cache_dir.empty())
        return power_series(adjacency, hops, beta, tau);
    fs::create_directories(cache_dir);
    const std::string key = graph_hash_hex + "-L" + std::to_string(hops) + "-b" +
                            format_double(beta) + "-t" + format_double(tau);
    const fs::path entry = cache_dir / (key + ".json");

    if (fs::exists(entry)) {
        try {
            const json j = json::parse(read_text_file(entry));
            if (j.at("format").get<std::string>() == "neolink-powers" &&
                j.at("version").get<int>() == kPowerCacheVersion &&
                j.at("hops").get<int>() == hops &&
                j.at("beta").get<double>() == beta &&
                j.at("tau").get<double>() == tau) {
                PowerSeries series;
                series.hops = hops;
                series.beta = beta;
                series.tau = tau;
                for (const json& mj : j.at("matrices"))
                    series.matrices.push_back(sparse_from_json(mj));
                if (static_cast<int>(series.matrices.size()) == hops &&
                    !series.matrices.empty() &&
                    series.matrices[0].rows() == adjacency.rows()) {
                    series.combined = combine_powers(series.matrices, beta);
                    return series;
                }
            }
        } catch (const std::exception&) {
            // Corrupt or stale entry: fall through and recompute.
        }
    }

    PowerSeries series = power_series(adjacency, hops, beta, tau);

    const fs::path lock = cache_dir / (key + ".lock");
    const int fd = ::open(lock.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
        ::close(fd);
        json j;
        j["format"] = "neolink-powers";
        j["version"] = kPowerCacheVersion;
        j["hops"] = hops;
        j["beta"] = beta;
        j["tau"] = tau;
        json mats = json::array();
        for (const SparseMatrix& m : series.matrices) mats.push_back(sparse_to_json(m));
        j["matrices"] = std::move(mats);
        atomic_write_text(entry, j.dump() + "\n");
        std::error_code ec;
        fs::remove(lock, ec);
    }
    return series;
}

}  // namespace neolink
