#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "neolink/graph.hpp"
#include "neolink/heuristics.hpp"
#include "neolink/model.hpp"

namespace neolink {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First/second-moment state over a flat parameter list. A zero gradient
// leaves the corresponding parameter exactly unchanged (both moments stay 0).
class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(const std::vector<double*>& params,
              const std::vector<double*>& grads);

    std::int64_t steps_taken() const { return t_; }

private:
    AdamConfig cfg_;
    std::vector<double> m_, v_;
    std::int64_t t_ = 0;
};

enum class TrainMode { supervised, fit_heuristic };
enum class ValidMetricKind { auc, hits };

struct TrainConfig {
    int epochs = 100;
    int batch_size = 128;
    double learning_rate = 1e-3;  // fit-heuristic runs default to 1e-2
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int negatives_per_positive = 1;
    std::uint64_t seed = 0;
    int patience = 20;  // early stop after this many non-improving epochs
    ValidMetricKind valid_metric = ValidMetricKind::auc;
    int hits_k = 50;
    TrainMode mode = TrainMode::supervised;
    HeuristicKind fit_kind = HeuristicKind::cn;
    HeuristicParams fit_params;

    void validate() const;
    AdamConfig adam() const {
        return {learning_rate, adam_beta1, adam_beta2, adam_epsilon};
    }
};

struct SplitDataset {
    std::vector<NodePair> train_pos;
    std::vector<NodePair> valid_pos;
    std::vector<NodePair> test_pos;
    std::vector<NodePair> valid_neg;  // fixed once per run
    std::vector<NodePair> test_neg;
};

// k distinct uniform non-edges (u < v, A_uv = 0). Rejection sampling with a
// cap, then exhaustive enumeration; throws DataError when the graph has
// fewer than k non-edges.
std::vector<NodePair> sample_negatives(const Graph& g, std::size_t k,
                                       std::mt19937_64& rng);
std::vector<NodePair> sample_negatives(const Graph& g, std::size_t k,
                                       std::uint64_t seed);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double valid_value = 0.0;  // NaN when no validation split
};

struct TrainResult {
    NeoModel model;  // best on validation (last epoch when no validation)
    std::vector<EpochLog> log;
    int best_epoch = 0;  // 0 = initialization
    double best_valid = 0.0;
};

// Validation-style score of every pair under the fused model output.
std::vector<double> score_pairs_fused(const NeoModel& model,
                                      const ModelForward& fwd,
                                      std::span<const NodePair> pairs);

// y_hat-based metric on the validation split; AUC or Hits@K per config.
double validation_metric(const NeoModel& model, const ModelForward& fwd,
                         const SplitDataset& split, const TrainConfig& cfg);

// Supervised training on the split. `g` must be the training graph (train
// edges only) and `in` derived from it. Negatives are resampled every epoch;
// the returned model is the best-on-validation checkpoint.
TrainResult train(const Graph& g, const ModelInputs& in,
                  const SplitDataset& split, const TrainConfig& cfg,
                  const NeoModel& init);

struct FitResult {
    NeoModel model;
    std::vector<EpochLog> log;  // valid_value unused
    double final_loss = 0.0;
    std::vector<TargetExample> train_set;  // pairs with heuristic targets
};

// Regresses z_u . z_v onto the heuristic score over the graph's edges plus
// sampled non-edges. Requires a model without the gcn branch.
FitResult fit_heuristic(const Graph& g, const ModelInputs& in,
                        const TrainConfig& cfg, const NeoModel& init);

}  // namespace neolink
