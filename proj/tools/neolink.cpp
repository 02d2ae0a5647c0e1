#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

#include <CLI11.hpp>

#include "neolink/graph.hpp"
#include "neolink/heuristics.hpp"
#include "neolink/io.hpp"
#include "neolink/metrics.hpp"
#include "neolink/model.hpp"
#include "neolink/training.hpp"

namespace fs = std::filesystem;
using namespace neolink;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

std::string join_command_line(int argc, char** argv) {
    std::ostringstream ss;
    for (int i = 0; i < argc; ++i) {
        if (i) ss << ' ';
        const std::string a = argv[i];
        if (a.find(' ') != std::string::npos)
            ss << '"' << a << '"';
        else
            ss << a;
    }
    return ss.str();
}

// Flat `key = value` config files, keys mirroring the long flags. Entries the
// command line already sets are dropped, so explicit flags win. The expanded
// flags are spliced into the arg list ahead of parsing because CLI11 only
// reads config files registered on the top-level app, not on subcommands.
std::vector<std::string> expand_config_args(const CLI::App& app,
                                            std::vector<std::string> args) {
    CLI::App* sub = nullptr;
    std::size_t sub_pos = 0;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (CLI::App* s = app.get_subcommand_no_throw(args[i])) {
            sub = s;
            sub_pos = i;
            break;
        }
    }
    if (sub == nullptr) return args;

    std::vector<std::string> paths;
    std::size_t insert_at = args.size();
    for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            paths.push_back(args[i + 1]);
            insert_at = std::min(insert_at, i);
            ++i;
        } else if (args[i].rfind("--config=", 0) == 0) {
            paths.push_back(args[i].substr(9));
            insert_at = std::min(insert_at, i);
        }
    }
    if (paths.empty()) return args;

    const auto given_explicitly = [&](const std::string& flag) {
        for (std::size_t i = sub_pos + 1; i < args.size(); ++i)
            if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
        return false;
    };
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };

    std::vector<std::string> injected;
    std::map<std::string, bool> seen;
    for (const std::string& path : paths) {
        if (!fs::exists(path)) throw CLI::FileError::Missing(path);
        std::istringstream in(read_text_file(path));
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw CLI::ConfigError(path + ":" + std::to_string(lineno) +
                                       ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw CLI::ConfigError(path + ":" + std::to_string(lineno) +
                                       ": empty key");
            const std::string flag = "--" + key;
            if (sub->get_option_no_throw(flag) == nullptr)
                throw CLI::ConfigError(path + ":" + std::to_string(lineno) +
                                       ": unknown option '" + flag + "'");
            if (given_explicitly(flag) || seen[flag]) continue;
            seen[flag] = true;
            injected.push_back(flag + "=" + value);
        }
    }
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(insert_at),
                injected.begin(), injected.end());
    return args;
}

std::map<std::string, std::string> resolved_options(const CLI::App& sub) {
    std::map<std::string, std::string> out;
    for (const CLI::Option* opt : sub.get_options()) {
        std::string name = opt->get_name();
        if (name.empty() || name == "--help" || name == "--config") continue;
        if (opt->count() > 0) {
            std::string joined;
            for (const std::string& r : opt->results()) {
                if (!joined.empty()) joined += ' ';
                joined += r;
            }
            out[name] = joined.empty() ? "true" : joined;
        } else {
            out[name] = opt->get_default_str();
        }
    }
    return out;
}

void add_dataset_hash(RunManifest& m, const fs::path& p) {
    if (!p.empty()) m.dataset_hashes[p.string()] = file_content_hash(p);
}

// Accepts "u v" or "u v w" lines; validates ids against the graph and
// rejects self-loops. Pairs are canonicalized to u < v.
std::vector<NodePair> load_role_pairs(const fs::path& path, NodeId num_nodes,
                                      const std::string& role) {
    std::optional<NodeId> header;
    const std::vector<Edge> edges =
        parse_edge_lines(read_text_file(path), path.string(), &header);
    std::vector<NodePair> out;
    out.reserve(edges.size());
    for (const Edge& e : edges) {
        if (e.u >= num_nodes || e.v >= num_nodes)
            throw DataError(path.string() + ": " + role + " pair (" +
                            std::to_string(e.u) + ", " + std::to_string(e.v) +
                            ") references a node outside the training graph");
        if (e.u == e.v)
            throw DataError(path.string() + ": " + role + " pair (" +
                            std::to_string(e.u) + ", " + std::to_string(e.v) +
                            ") is a self-loop");
        out.push_back({std::min(e.u, e.v), std::max(e.u, e.v)});
    }
    return out;
}

struct HeuristicCliParams {
    std::string kind = "cn";
    bool weighted = false;
    double katz_beta = 0.05;
    int katz_hops = 5;
    double pr_damping = 0.85;
    int pr_iterations = 100;
    double sr_decay = 0.8;
    int sr_iterations = 5;

    void attach(CLI::App* sub, bool kind_required) {
        auto* k = sub->add_option("--kind", kind,
                                  "heuristic: cn, jaccard, aa, ra, pa, katz, "
                                  "pagerank, simrank")
                      ->check(CLI::IsMember({"cn", "jaccard", "jac", "aa", "ra",
                                             "pa", "katz", "pagerank", "pr",
                                             "simrank", "sr"},
                                            CLI::ignore_case))
                      ->capture_default_str();
        if (kind_required) k->required();
        sub->add_flag("--weighted", weighted,
                      "use edge weights instead of the binarized adjacency");
        sub->add_option("--katz-beta", katz_beta, "Katz decay factor")
            ->capture_default_str();
        sub->add_option("--katz-hops", katz_hops, "Katz truncation length")
            ->capture_default_str();
        sub->add_option("--pr-damping", pr_damping, "PageRank damping factor")
            ->capture_default_str();
        sub->add_option("--pr-iterations", pr_iterations,
                        "PageRank power iterations")
            ->capture_default_str();
        sub->add_option("--sr-decay", sr_decay, "SimRank decay C")
            ->capture_default_str();
        sub->add_option("--sr-iterations", sr_iterations, "SimRank recursion depth")
            ->capture_default_str();
    }

    HeuristicParams to_params() const {
        HeuristicParams p;
        p.weighted = weighted;
        p.katz_beta = katz_beta;
        p.katz_max_hops = katz_hops;
        p.pagerank_damping = pr_damping;
        p.pagerank_iterations = pr_iterations;
        p.simrank_decay = sr_decay;
        p.simrank_iterations = sr_iterations;
        p.validate();
        return p;
    }
};

struct ModelCliParams {
    std::string mode = "full";
    int hops = 1;
    double beta = 0.5;
    double tau = 0.0;
    std::string f_edge = "mlp";
    std::string f_node = "mlp";
    std::string g_phi = "mlp";
    int scalar_hidden = 32;
    bool g_phi_softplus = false;
    int gcn_layers = 3;
    int gcn_width = 256;
    int embedding_dim = 256;
    std::string pair_mode = "hadamard_mlp";
    int pair_hidden = 256;
    double alpha_init = 0.0;
    double lambda1 = 1.0, lambda2 = 1.0, lambda3 = 1.0;

    void attach(CLI::App* sub, bool allow_gcn) {
        if (allow_gcn)
            sub->add_option("--mode", mode, "full (both branches) or no-gcn")
                ->check(CLI::IsMember({"full", "no-gcn"}))
                ->capture_default_str();
        sub->add_option("--hops", hops, "max adjacency power L")
            ->capture_default_str();
        sub->add_option("--beta", beta, "decay over higher powers")
            ->capture_default_str();
        sub->add_option("--tau", tau, "prune threshold for adjacency powers")
            ->capture_default_str();
        const std::vector<std::string> kinds{"mlp",     "identity",     "one",
                                            "inv_log", "inv_sqrt_log", "inv_sqrt"};
        sub->add_option("--f-edge", f_edge, "edge transform kind")
            ->check(CLI::IsMember(kinds))
            ->capture_default_str();
        sub->add_option("--f-node", f_node, "node transform kind")
            ->check(CLI::IsMember(kinds))
            ->capture_default_str();
        sub->add_option("--g-phi", g_phi, "readout transform kind")
            ->check(CLI::IsMember(kinds))
            ->capture_default_str();
        sub->add_option("--scalar-hidden", scalar_hidden,
                        "hidden width of the scalar transforms")
            ->capture_default_str();
        sub->add_flag("--g-phi-softplus", g_phi_softplus,
                      "softplus output on the readout transform");
        if (allow_gcn) {
            sub->add_option("--gcn-layers", gcn_layers, "gcn depth")
                ->capture_default_str();
            sub->add_option("--gcn-width", gcn_width, "gcn layer width")
                ->capture_default_str();
            sub->add_option("--embedding-dim", embedding_dim,
                            "width of learnable node embeddings")
                ->capture_default_str();
            sub->add_option("--pair-mode", pair_mode,
                            "feature-branch pair score: hadamard_mlp or "
                            "inner_product")
                ->check(CLI::IsMember({"hadamard_mlp", "inner_product"}))
                ->capture_default_str();
            sub->add_option("--pair-hidden", pair_hidden,
                            "hidden width of the pair score mlp")
                ->capture_default_str();
            sub->add_option("--alpha-init", alpha_init,
                            "initial raw fusion parameter (alpha = logistic)")
                ->capture_default_str();
            sub->add_option("--lambda1", lambda1, "weight of the fused loss term")
                ->capture_default_str();
            sub->add_option("--lambda2", lambda2,
                            "weight of the structural loss term")
                ->capture_default_str();
            sub->add_option("--lambda3", lambda3, "weight of the feature loss term")
                ->capture_default_str();
        }
    }

    ModelConfig to_config(NodeId num_nodes, bool force_no_gcn) const {
        ModelConfig c;
        c.num_nodes = num_nodes;
        c.hops = hops;
        c.beta = beta;
        c.tau = tau;
        c.f_edge_kind = scalar_kind_from_name(f_edge);
        c.f_node_kind = scalar_kind_from_name(f_node);
        c.g_phi_kind = scalar_kind_from_name(g_phi);
        c.scalar_hidden = scalar_hidden;
        c.g_phi_softplus = g_phi_softplus;
        c.use_gcn = !force_no_gcn && mode == "full";
        c.gcn_layers = gcn_layers;
        c.gcn_width = gcn_width;
        c.feature_dim = 0;  // the cli always uses learnable embeddings
        c.embedding_dim = embedding_dim;
        c.pair_mode = pair_score_mode_from_name(pair_mode);
        c.pair_hidden = pair_hidden;
        c.alpha_init = alpha_init;
        c.lambda1 = lambda1;
        c.lambda2 = lambda2;
        c.lambda3 = lambda3;
        c.validate();
        return c;
    }
};

struct TrainCliParams {
    int epochs = 100;
    int batch_size = 128;
    double lr = 1e-3;
    int neg_per_pos = 1;
    std::uint64_t seed = 0;
    int patience = 20;
    std::string valid_metric = "auc";
    int hits_k = 50;

    void attach(CLI::App* sub, double default_lr) {
        lr = default_lr;
        sub->add_option("--epochs", epochs, "training epochs")->capture_default_str();
        sub->add_option("--batch-size", batch_size, "examples per step")
            ->capture_default_str();
        sub->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
        sub->add_option("--neg-per-pos", neg_per_pos,
                        "negatives sampled per positive edge")
            ->capture_default_str();
        sub->add_option("--seed", seed, "rng seed")->capture_default_str();
        sub->add_option("--patience", patience,
                        "early-stop after this many non-improving epochs")
            ->capture_default_str();
        sub->add_option("--valid-metric", valid_metric, "auc or hits")
            ->check(CLI::IsMember({"auc", "hits"}))
            ->capture_default_str();
        sub->add_option("--hits-k", hits_k, "K for the hits validation metric")
            ->capture_default_str();
    }

    TrainConfig to_config() const {
        TrainConfig c;
        c.epochs = epochs;
        c.batch_size = batch_size;
        c.learning_rate = lr;
        c.negatives_per_positive = neg_per_pos;
        c.seed = seed;
        c.patience = patience;
        c.valid_metric = valid_metric == "hits" ? ValidMetricKind::hits
                                                : ValidMetricKind::auc;
        c.hits_k = hits_k;
        c.validate();
        return c;
    }
};

EvalReport ranking_report(std::span<const double> pos, std::span<const double> neg,
                          std::span<const int> ks) {
    EvalReport report;
    report.num_positives = static_cast<std::int64_t>(pos.size());
    report.num_negatives = static_cast<std::int64_t>(neg.size());
    for (int k : ks) {
        bool warn = false;
        const double h = hits_at_k(pos, neg, k, &warn);
        report.metrics.push_back({"hits@" + std::to_string(k), h, std::nullopt});
        if (warn)
            std::cerr << "warning: hits@" << k << ": only " << neg.size()
                      << " negatives; every positive counts as a hit\n";
    }
    std::vector<RankedSource> sources(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) {
        sources[i].pos_score = pos[i];
        sources[i].neg_scores.assign(neg.begin(), neg.end());
    }
    report.metrics.push_back({"mrr", mean_reciprocal_rank(sources), std::nullopt});
    report.metrics.push_back({"auc", auc_score(pos, neg), std::nullopt});
    return report;
}

// ---------------------------------------------------------------- split ----

struct SplitArgs {
    fs::path graph;
    fs::path out_dir;
    double train_ratio = 0.8;
    double valid_ratio = 0.1;
    double test_ratio = 0.1;
    int neg_per_pos = 1;
    std::uint64_t seed = 0;
};

void run_split(const SplitArgs& a, RunManifest& manifest) {
    const auto t0 = clock_type::now();
    if (std::abs(a.train_ratio + a.valid_ratio + a.test_ratio - 1.0) > 1e-9)
        throw DataError("split: ratios must sum to 1");
    const Graph g = load_edge_list(a.graph);
    add_dataset_hash(manifest, a.graph);

    std::vector<Edge> edges = g.edges();
    std::mt19937_64 rng(a.seed);
    std::shuffle(edges.begin(), edges.end(), rng);

    const std::size_t total = edges.size();
    const std::size_t n_valid =
        static_cast<std::size_t>(a.valid_ratio * static_cast<double>(total));
    const std::size_t n_test =
        static_cast<std::size_t>(a.test_ratio * static_cast<double>(total));
    if (n_valid == 0 || n_test == 0 || n_valid + n_test >= total)
        throw DataError("split: ratios produce an empty split on " +
                        std::to_string(total) + " edges");
    const std::size_t n_train = total - n_valid - n_test;

    std::vector<Edge> train(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<Edge> valid(edges.begin() + static_cast<std::ptrdiff_t>(n_train),
                            edges.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    std::vector<Edge> test(edges.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid),
                           edges.end());

    // Negatives are non-edges of the full graph, sampled in one draw so the
    // validation and test sets cannot collide.
    const std::size_t k_valid = n_valid * static_cast<std::size_t>(a.neg_per_pos);
    const std::size_t k_test = n_test * static_cast<std::size_t>(a.neg_per_pos);
    const std::vector<NodePair> negs = sample_negatives(g, k_valid + k_test, rng);
    const std::vector<NodePair> valid_neg(negs.begin(),
                                          negs.begin() + static_cast<std::ptrdiff_t>(k_valid));
    const std::vector<NodePair> test_neg(negs.begin() + static_cast<std::ptrdiff_t>(k_valid),
                                         negs.end());

    const auto header = std::optional<NodeId>(g.num_nodes());
    save_edge_list(a.out_dir / "train.txt", train, header);
    save_edge_list(a.out_dir / "valid.txt", valid, header);
    save_edge_list(a.out_dir / "test.txt", test, header);
    save_pair_file(a.out_dir / "valid_neg.txt", valid_neg);
    save_pair_file(a.out_dir / "test_neg.txt", test_neg);

    std::cout << "split " << total << " edges -> train " << n_train << ", valid "
              << n_valid << ", test " << n_test << " (negatives: " << k_valid
              << " valid, " << k_test << " test)\n";
    manifest.timings_sec["split"] = seconds_since(t0);
    save_manifest(a.out_dir / "manifest.json", manifest);
}

// ------------------------------------------------------------ heuristic ----

struct HeuristicArgs {
    fs::path graph;
    fs::path pairs;  // empty -> all u < v pairs
    fs::path out_dir;
    HeuristicCliParams params;
};

void run_heuristic(const HeuristicArgs& a, RunManifest& manifest) {
    const auto t0 = clock_type::now();
    const Graph g = load_edge_list(a.graph);
    add_dataset_hash(manifest, a.graph);

    std::vector<NodePair> pairs;
    if (a.pairs.empty()) {
        for (NodeId u = 0; u < g.num_nodes(); ++u)
            for (NodeId v = u + 1; v < g.num_nodes(); ++v) pairs.push_back({u, v});
    } else {
        pairs = load_role_pairs(a.pairs, g.num_nodes(), "score");
        add_dataset_hash(manifest, a.pairs);
    }

    const HeuristicKind kind = heuristic_kind_from_name(a.params.kind);
    const std::vector<double> scores =
        score_all_pairs(g, kind, pairs, a.params.to_params());

    std::vector<ScoredPair> rows(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        rows[i] = {pairs[i].first, pairs[i].second, scores[i]};
    save_score_file(a.out_dir / "scores.txt", rows);

    if (rows.size() <= 50) {
        for (const ScoredPair& r : rows)
            std::cout << r.u << " " << r.v << " " << r.score << "\n";
    } else {
        std::cout << "wrote " << rows.size() << " scores\n";
    }
    manifest.timings_sec["heuristic"] = seconds_since(t0);
    save_manifest(a.out_dir / "manifest.json", manifest);
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
    fs::path graph;
    fs::path valid, valid_neg, test, test_neg;
    fs::path out_dir;
    fs::path cache_dir;
    fs::path pretrained_gcn;
    ModelCliParams model;
    TrainCliParams train;
};

void check_no_leakage(const Graph& train_g, std::span<const NodePair> pairs,
                      const std::string& role) {
    for (const NodePair& p : pairs)
        if (train_g.has_edge(p.first, p.second))
            throw DataError("leakage: " + role + " pair (" +
                            std::to_string(p.first) + ", " +
                            std::to_string(p.second) +
                            ") is present in the training graph");
}

ModelInputs build_inputs_with_cache(const Graph& g, const ModelConfig& cfg,
                                    const fs::path& cache_dir) {
    ModelInputs in;
    in.adjacency = g.adjacency();
    in.series = cached_power_series(cache_dir, graph_hash(g), in.adjacency,
                                    cfg.hops, cfg.beta, cfg.tau);
    if (cfg.use_gcn) in.norm_adj = gcn_normalize(in.adjacency);
    return in;
}

void warm_start_gcn(NeoModel& model, const fs::path& checkpoint) {
    const NeoModel source = load_checkpoint(checkpoint);
    std::map<std::string, std::vector<double>> blocks;
    source.for_each_block([&](const std::string& name, std::span<const double> v) {
        blocks.emplace(name, std::vector<double>(v.begin(), v.end()));
    });
    bool any = false;
    model.for_each_block([&](const std::string& name, std::span<double> v) {
        const bool gcn_block = name.rfind("gcn.", 0) == 0 ||
                               name.rfind("pair.", 0) == 0 ||
                               name == "embeddings";
        if (!gcn_block) return;
        auto it = blocks.find(name);
        if (it == blocks.end() || it->second.size() != v.size())
            throw DataError(checkpoint.string() + ": pretrained gcn block '" +
                            name + "' is missing or has the wrong shape");
        std::copy(it->second.begin(), it->second.end(), v.begin());
        any = true;
    });
    if (!any)
        throw DataError(checkpoint.string() +
                        ": no gcn blocks to warm-start (is the target model "
                        "running without the gcn branch?)");
}

void run_train(const TrainArgs& a, RunManifest& manifest) {
    const auto t_load = clock_type::now();
    const Graph g = load_edge_list(a.graph);
    add_dataset_hash(manifest, a.graph);

    SplitDataset split;
    for (const Edge& e : g.edges()) split.train_pos.push_back({e.u, e.v});
    if (a.valid.empty() != a.valid_neg.empty())
        throw DataError("train: --valid and --valid-neg must be given together");
    if (a.test.empty() != a.test_neg.empty())
        throw DataError("train: --test and --test-neg must be given together");
    if (!a.valid.empty()) {
        split.valid_pos = load_role_pairs(a.valid, g.num_nodes(), "validation");
        split.valid_neg =
            load_role_pairs(a.valid_neg, g.num_nodes(), "validation negative");
        add_dataset_hash(manifest, a.valid);
        add_dataset_hash(manifest, a.valid_neg);
    }
    if (!a.test.empty()) {
        split.test_pos = load_role_pairs(a.test, g.num_nodes(), "test");
        split.test_neg = load_role_pairs(a.test_neg, g.num_nodes(), "test negative");
        add_dataset_hash(manifest, a.test);
        add_dataset_hash(manifest, a.test_neg);
    }

    // The training adjacency must not contain any held-out edge, and the
    // held-out negatives must be true non-edges of it.
    check_no_leakage(g, split.valid_pos, "validation");
    check_no_leakage(g, split.test_pos, "test");
    check_no_leakage(g, split.valid_neg, "validation negative");
    check_no_leakage(g, split.test_neg, "test negative");

    const ModelConfig mcfg = a.model.to_config(g.num_nodes(), false);
    const TrainConfig tcfg = a.train.to_config();

    const auto t_pre = clock_type::now();
    manifest.timings_sec["load"] = seconds_since(t_load);
    ModelInputs in = build_inputs_with_cache(g, mcfg, a.cache_dir);
    manifest.timings_sec["precompute_powers"] = seconds_since(t_pre);

    std::mt19937_64 rng(tcfg.seed);
    NeoModel init(mcfg, rng);
    if (!a.pretrained_gcn.empty()) {
        if (!mcfg.use_gcn)
            throw DataError("train: --pretrained-gcn requires --mode full");
        warm_start_gcn(init, a.pretrained_gcn);
        add_dataset_hash(manifest, a.pretrained_gcn);
    }

    const auto t_train = clock_type::now();
    const TrainResult result = train(g, in, split, tcfg, init);
    manifest.timings_sec["train"] = seconds_since(t_train);

    const fs::path ckpt_path = a.out_dir / "checkpoint.json";
    save_checkpoint(ckpt_path, result.model);
    manifest.checkpoint_hash = file_content_hash(ckpt_path);

    {
        std::ostringstream log;
        log << "# epoch train_loss valid_" << a.train.valid_metric << "\n";
        log << std::setprecision(17);
        for (const EpochLog& e : result.log)
            log << e.epoch << " " << e.train_loss << " " << e.valid_value << "\n";
        log << "# best_epoch " << result.best_epoch << "\n";
        atomic_write_text(a.out_dir / "train_log.txt", log.str());
    }
    std::cout << "trained " << result.log.size() << " epochs; best epoch "
              << result.best_epoch << " (alpha = " << result.model.alpha()
              << ")\n";

    if (!split.test_pos.empty() && !split.test_neg.empty()) {
        const auto t_eval = clock_type::now();
        const ModelForward fwd = result.model.forward(in);
        const std::vector<double> pos =
            score_pairs_fused(result.model, fwd, split.test_pos);
        const std::vector<double> neg =
            score_pairs_fused(result.model, fwd, split.test_neg);
        const std::vector<int> ks{20, 50, 100};
        EvalReport report = ranking_report(pos, neg, ks);
        report.seeds = {tcfg.seed};
        atomic_write_text(a.out_dir / "test_report.txt", report.render_table());
        atomic_write_text(a.out_dir / "test_report.kv", report.render_kv());
        std::cout << report.render_table();
        manifest.timings_sec["eval"] = seconds_since(t_eval);
    }
    save_manifest(a.out_dir / "manifest.json", manifest);
}

// -------------------------------------------------------- fit-heuristic ----

struct FitArgs {
    fs::path graph;
    fs::path holdout;  // optional pair file for a held-out comparison
    fs::path out_dir;
    fs::path cache_dir;
    HeuristicCliParams heuristic;
    ModelCliParams model;
    TrainCliParams train;
};

void run_fit_heuristic(const FitArgs& a, RunManifest& manifest) {
    const Graph g = load_edge_list(a.graph);
    add_dataset_hash(manifest, a.graph);

    const ModelConfig mcfg = a.model.to_config(g.num_nodes(), /*force_no_gcn=*/true);
    TrainConfig tcfg = a.train.to_config();
    tcfg.mode = TrainMode::fit_heuristic;
    tcfg.fit_kind = heuristic_kind_from_name(a.heuristic.kind);
    tcfg.fit_params = a.heuristic.to_params();

    const auto t_pre = clock_type::now();
    ModelInputs in = build_inputs_with_cache(g, mcfg, a.cache_dir);
    manifest.timings_sec["precompute_powers"] = seconds_since(t_pre);

    std::mt19937_64 rng(tcfg.seed);
    const NeoModel init(mcfg, rng);

    const auto t_fit = clock_type::now();
    const FitResult result = fit_heuristic(g, in, tcfg, init);
    manifest.timings_sec["train"] = seconds_since(t_fit);

    const fs::path ckpt_path = a.out_dir / "checkpoint.json";
    save_checkpoint(ckpt_path, result.model);
    manifest.checkpoint_hash = file_content_hash(ckpt_path);

    const ModelForward fwd = result.model.forward(in);
    std::vector<ScoredPair> fitted(result.train_set.size());
    std::vector<ScoredPair> targets(result.train_set.size());
    std::vector<double> fit_scores(result.train_set.size());
    std::vector<double> target_scores(result.train_set.size());
    for (std::size_t i = 0; i < result.train_set.size(); ++i) {
        const TargetExample& ex = result.train_set[i];
        const double r = result.model.score_pair(fwd, ex.u, ex.v).raw_struct;
        fitted[i] = {ex.u, ex.v, r};
        targets[i] = {ex.u, ex.v, ex.target};
        fit_scores[i] = r;
        target_scores[i] = ex.target;
    }
    save_score_file(a.out_dir / "fitted_scores.txt", fitted);
    save_score_file(a.out_dir / "target_scores.txt", targets);

    EvalReport report;
    report.num_positives = static_cast<std::int64_t>(g.num_edges());
    report.num_negatives =
        static_cast<std::int64_t>(result.train_set.size() - g.num_edges());
    report.metrics.push_back({"final_mse", result.final_loss, std::nullopt});
    if (const auto rho = spearman(fit_scores, target_scores))
        report.metrics.push_back({"train_spearman", *rho, std::nullopt});

    if (!a.holdout.empty()) {
        const std::vector<NodePair> pairs =
            load_role_pairs(a.holdout, g.num_nodes(), "holdout");
        add_dataset_hash(manifest, a.holdout);
        HeuristicScorer scorer(g, tcfg.fit_kind, tcfg.fit_params);
        const std::vector<double> want = scorer.score_pairs(pairs);
        std::vector<double> got;
        got.reserve(pairs.size());
        for (const NodePair& p : pairs)
            got.push_back(result.model.score_pair(fwd, p.first, p.second).raw_struct);
        if (const auto rho = spearman(got, want))
            report.metrics.push_back({"holdout_spearman", *rho, std::nullopt});
        else
            std::cerr << "warning: holdout spearman undefined (constant ranks)\n";
    }

    atomic_write_text(a.out_dir / "report.kv", report.render_kv());
    std::cout << report.render_table();
    save_manifest(a.out_dir / "manifest.json", manifest);
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
    fs::path pos_scores, neg_scores;
    fs::path scores_a, scores_b;
    std::vector<int> ks{20, 50, 100};
    fs::path out_dir;
};

void run_eval(const EvalArgs& a, RunManifest& manifest) {
    const auto t0 = clock_type::now();
    const bool ranking = !a.pos_scores.empty() || !a.neg_scores.empty();
    const bool correlate = !a.scores_a.empty() || !a.scores_b.empty();
    if (!ranking && !correlate)
        throw DataError(
            "eval: provide --pos-scores/--neg-scores and/or --scores-a/--scores-b");

    EvalReport report;
    if (ranking) {
        if (a.pos_scores.empty() || a.neg_scores.empty())
            throw DataError("eval: --pos-scores and --neg-scores go together");
        const auto pos_rows = load_score_file(a.pos_scores);
        const auto neg_rows = load_score_file(a.neg_scores);
        add_dataset_hash(manifest, a.pos_scores);
        add_dataset_hash(manifest, a.neg_scores);
        std::vector<double> pos, neg;
        for (const ScoredPair& r : pos_rows) pos.push_back(r.score);
        for (const ScoredPair& r : neg_rows) neg.push_back(r.score);
        report = ranking_report(pos, neg, a.ks);
    }
    if (correlate) {
        if (a.scores_a.empty() || a.scores_b.empty())
            throw DataError("eval: --scores-a and --scores-b go together");
        const auto rows_a = load_score_file(a.scores_a);
        const auto rows_b = load_score_file(a.scores_b);
        add_dataset_hash(manifest, a.scores_a);
        add_dataset_hash(manifest, a.scores_b);
        std::map<NodePair, double> by_pair;
        for (const ScoredPair& r : rows_a) {
            const NodePair key{std::min(r.u, r.v), std::max(r.u, r.v)};
            if (!by_pair.emplace(key, r.score).second)
                throw DataError(a.scores_a.string() + ": duplicate pair (" +
                                std::to_string(key.first) + ", " +
                                std::to_string(key.second) + ")");
        }
        if (rows_b.size() != by_pair.size())
            throw DataError("eval: score files cover different pair sets");
        std::vector<double> va, vb;
        std::map<NodePair, double> matched;
        for (const ScoredPair& r : rows_b) {
            const NodePair key{std::min(r.u, r.v), std::max(r.u, r.v)};
            auto it = by_pair.find(key);
            if (it == by_pair.end())
                throw DataError(a.scores_b.string() + ": pair (" +
                                std::to_string(key.first) + ", " +
                                std::to_string(key.second) +
                                ") missing from --scores-a");
            if (!matched.emplace(key, r.score).second)
                throw DataError(a.scores_b.string() + ": duplicate pair (" +
                                std::to_string(key.first) + ", " +
                                std::to_string(key.second) + ")");
        }
        for (const auto& [key, score_a] : by_pair) {
            va.push_back(score_a);
            vb.push_back(matched.at(key));
        }
        if (const auto rho = spearman(va, vb))
            report.metrics.push_back({"spearman", *rho, std::nullopt});
        else
            std::cout << "spearman undefined (constant ranks)\n";
        if (const auto r = pearson(va, vb))
            report.metrics.push_back({"pearson", *r, std::nullopt});
    }

    atomic_write_text(a.out_dir / "report.txt", report.render_table());
    atomic_write_text(a.out_dir / "report.kv", report.render_kv());
    std::cout << report.render_table();
    manifest.timings_sec["eval"] = seconds_since(t0);
    save_manifest(a.out_dir / "manifest.json", manifest);
}

// --------------------------------------------------------- analyze-corr ----

struct CorrArgs {
    fs::path graph;
    int max_hops = 5;
    fs::path out_dir;
};

void run_analyze_corr(const CorrArgs& a, RunManifest& manifest) {
    const auto t0 = clock_type::now();
    const Graph g = load_edge_list(a.graph);
    add_dataset_hash(manifest, a.graph);
    const auto corr = adjacency_correlation(g, a.max_hops);

    std::ostringstream kv;
    kv << std::setprecision(17);
    kv << "max_hops = " << a.max_hops << "\n";
    kv << "nodes = " << g.num_nodes() << "\n";
    kv << "edges = " << g.num_edges() << "\n";
    if (corr) {
        kv << "adjacency_correlation = " << *corr << "\n";
        std::cout << "corr(A, A') with paths of length 2.." << a.max_hops << ": "
                  << *corr << "\n";
    } else {
        kv << "adjacency_correlation = undefined\n";
        std::cout << "corr(A, A') undefined: one side is constant\n";
    }
    atomic_write_text(a.out_dir / "corr.kv", kv.str());
    manifest.timings_sec["analyze"] = seconds_since(t0);
    save_manifest(a.out_dir / "manifest.json", manifest);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"link prediction with learnable neighborhood-overlap features"};
    app.require_subcommand(1);
    std::string config_path;  // shared target: only one subcommand parses per run

    SplitArgs split_args;
    auto* split_cmd = app.add_subcommand(
        "split", "partition an edge list into train/valid/test plus negatives");
    split_cmd->add_option("--config", config_path,
                        "flat key = value file of flags (command line wins)");
    split_cmd->add_option("--graph", split_args.graph, "input edge list")
        ->required();
    split_cmd->add_option("--train-ratio", split_args.train_ratio, "train fraction")
        ->capture_default_str();
    split_cmd->add_option("--valid-ratio", split_args.valid_ratio, "valid fraction")
        ->capture_default_str();
    split_cmd->add_option("--test-ratio", split_args.test_ratio, "test fraction")
        ->capture_default_str();
    split_cmd
        ->add_option("--neg-per-pos", split_args.neg_per_pos,
                     "negatives per held-out positive")
        ->capture_default_str();
    split_cmd->add_option("--seed", split_args.seed, "rng seed")
        ->capture_default_str();
    split_cmd->add_option("--out-dir,-o", split_args.out_dir, "output directory")
        ->required();

    HeuristicArgs heur_args;
    auto* heur_cmd =
        app.add_subcommand("heuristic", "score node pairs with a classical heuristic");
    heur_cmd->add_option("--config", config_path,
                        "flat key = value file of flags (command line wins)");
    heur_cmd->add_option("--graph", heur_args.graph, "input edge list")->required();
    heur_cmd->add_option("--pairs", heur_args.pairs,
                         "pair file to score (default: every pair)");
    heur_args.params.attach(heur_cmd, /*kind_required=*/true);
    heur_cmd->add_option("--out-dir,-o", heur_args.out_dir, "output directory")
        ->required();

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train the fused model");
    train_cmd->add_option("--config", config_path,
                        "flat key = value file of flags (command line wins)");
    train_cmd->add_option("--graph", train_args.graph, "training edge list")
        ->required();
    train_cmd->add_option("--valid", train_args.valid, "validation positive edges");
    train_cmd->add_option("--valid-neg", train_args.valid_neg,
                          "validation negative pairs");
    train_cmd->add_option("--test", train_args.test, "test positive edges");
    train_cmd->add_option("--test-neg", train_args.test_neg, "test negative pairs");
    train_cmd->add_option("--cache-dir", train_args.cache_dir,
                          "directory for cached adjacency powers");
    train_cmd->add_option("--pretrained-gcn", train_args.pretrained_gcn,
                          "checkpoint whose gcn blocks warm-start this run");
    train_args.model.attach(train_cmd, /*allow_gcn=*/true);
    train_args.train.attach(train_cmd, /*default_lr=*/1e-3);
    train_cmd->add_option("--out-dir,-o", train_args.out_dir, "output directory")
        ->required();

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand(
        "fit-heuristic", "regress the structural branch onto a heuristic");
    fit_cmd->add_option("--config", config_path,
                        "flat key = value file of flags (command line wins)");
    fit_cmd->add_option("--graph", fit_args.graph, "input edge list")->required();
    fit_cmd->add_option("--holdout", fit_args.holdout,
                        "pair file for a held-out rank comparison");
    fit_cmd->add_option("--cache-dir", fit_args.cache_dir,
                        "directory for cached adjacency powers");
    fit_args.heuristic.attach(fit_cmd, /*kind_required=*/true);
    fit_args.model.attach(fit_cmd, /*allow_gcn=*/false);
    fit_args.train.attach(fit_cmd, /*default_lr=*/1e-2);
    fit_cmd->add_option("--out-dir,-o", fit_args.out_dir, "output directory")
        ->required();

    EvalArgs eval_args;
    auto* eval_cmd =
        app.add_subcommand("eval", "ranking metrics and rank correlations");
    eval_cmd->add_option("--config", config_path,
                        "flat key = value file of flags (command line wins)");
    eval_cmd->add_option("--pos-scores", eval_args.pos_scores,
                         "scores of positive pairs (u v score)");
    eval_cmd->add_option("--neg-scores", eval_args.neg_scores,
                         "scores of negative pairs (u v score)");
    eval_cmd->add_option("--scores-a", eval_args.scores_a,
                         "first score file for rank correlation");
    eval_cmd->add_option("--scores-b", eval_args.scores_b,
                         "second score file for rank correlation");
    eval_cmd->add_option("--k", eval_args.ks, "hits@K cutoffs")
        ->capture_default_str();
    eval_cmd->add_option("--out-dir,-o", eval_args.out_dir, "output directory")
        ->required();

    CorrArgs corr_args;
    auto* corr_cmd = app.add_subcommand(
        "analyze-corr", "correlation between the adjacency and multi-hop reachability");
    corr_cmd->add_option("--config", config_path,
                        "flat key = value file of flags (command line wins)");
    corr_cmd->add_option("--graph", corr_args.graph, "input edge list")->required();
    corr_cmd->add_option("--max-hops", corr_args.max_hops, "longest path length K")
        ->capture_default_str();
    corr_cmd->add_option("--out-dir,-o", corr_args.out_dir, "output directory")
        ->required();

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config_args(app, std::move(args));
        std::reverse(args.begin(), args.end());  // CLI11 wants reversed args
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    RunManifest manifest;
    manifest.command_line = join_command_line(argc, argv);

    try {
        if (split_cmd->parsed()) {
            manifest.seed = split_args.seed;
            manifest.config = resolved_options(*split_cmd);
            run_split(split_args, manifest);
        } else if (heur_cmd->parsed()) {
            manifest.config = resolved_options(*heur_cmd);
            run_heuristic(heur_args, manifest);
        } else if (train_cmd->parsed()) {
            manifest.seed = train_args.train.seed;
            manifest.config = resolved_options(*train_cmd);
            run_train(train_args, manifest);
        } else if (fit_cmd->parsed()) {
            manifest.seed = fit_args.train.seed;
            manifest.config = resolved_options(*fit_cmd);
            run_fit_heuristic(fit_args, manifest);
        } else if (eval_cmd->parsed()) {
            manifest.config = resolved_options(*eval_cmd);
            run_eval(eval_args, manifest);
        } else if (corr_cmd->parsed()) {
            manifest.config = resolved_options(*corr_cmd);
            run_analyze_corr(corr_args, manifest);
        }
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
