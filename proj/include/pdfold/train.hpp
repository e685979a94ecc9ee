#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdfold/io.hpp"
#include "pdfold/losses.hpp"
#include "pdfold/ppnet.hpp"
#include "pdfold/scorenet.hpp"

namespace pdfold {

struct TrainConfig {
    int epochs_pretrain = 20;
    int epochs_finetune = 5;
    int batch_size = 8;          // sequences per gradient step
    int accumulation_steps = 1;  // steps per parameter update
    double learning_rate = 1e-3;
    double momentum = 0.9;
    // The BCE pull on logits is unbounded, so score weights drift without
    // some counterweight; plain L2 decay (biases exempt) stands in for the
    // full-scale model's dropout/batch-norm. Gradients are clipped to a
    // global norm before each update.
    double weight_decay = 1e-4;
    double grad_clip = 10.0;
    // Plain SGD treats all parameters with one step size, but the
    // post-processing scalars live on very different scales than network
    // weights (alpha=0.01 vs weights ~0.3), so their learning rate gets its
    // own multiplier.
    double pp_lr_scale = 0.1;
    std::uint64_t seed = 1;
    int max_len = 160;  // sequences longer than this are excluded
    LossConfig loss;
    PpParams pp;
    ScoreNetConfig score;
    bool learn_pp = true;  // false freezes the post-processing parameters
    double frac_train = 0.8, frac_valid = 0.1, frac_test = 0.1;

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

struct SplitResult {
    std::vector<StructureRecord> train, valid, test;
    std::vector<std::string> warnings;
};

// Per-family proportional allocation (floor for valid/test, remainder to
// train); families with fewer records than split parts go entirely to train.
// Deterministic given the seed; no record lands in two splits.
SplitResult stratified_split(const DatasetIndex& index, double frac_train, double frac_valid,
                             double frac_test, std::uint64_t seed);

// Per-record sampling weights proportional to 1/family_count, normalized, so
// every family draws the same expected mass per epoch.
struct SamplingSchedule {
    std::vector<double> weights;
    std::uint64_t seed = 0;
    // Deterministic weighted draw of `count` record indices for one epoch.
    std::vector<int> epoch_indices(int epoch, int count) const;
};

SamplingSchedule upsample_families(const std::vector<StructureRecord>& train,
                                   std::uint64_t seed);

struct EpochLog {
    int epoch = 0;
    std::string phase;  // "pretrain" | "finetune"
    double loss = 0.0;
    double val_f1 = -1.0;  // -1 when not measured
};

class TrainingDiverged : public std::runtime_error {
public:
    explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

// Phase 1: score network alone under weighted BCE, plain SGD with momentum,
// gradients accumulated over batch_size * accumulation_steps sequences.
ScoreNetParams pretrain(const TrainConfig& config, const std::vector<StructureRecord>& data,
                        std::vector<EpochLog>* log = nullptr);

struct FinetuneResult {
    ScoreNetParams score;
    PpParams pp;
    std::vector<EpochLog> log;
};

// Phase 2: trajectory loss through the unroll plus mix * BCE, optimizing the
// score network and (unless frozen) the post-processing parameters jointly.
// Records with no pairs train on BCE alone.
FinetuneResult finetune(const TrainConfig& config, const std::vector<StructureRecord>& train,
                        const std::vector<StructureRecord>& valid, ScoreNetParams theta,
                        PpParams phi);

// Mean exact F1 of full predictions over a record set.
double validation_f1(const ScoreNetParams& score, const PpParams& pp,
                     const std::vector<StructureRecord>& records);

std::string format_training_log(const std::vector<EpochLog>& log);

}  // namespace pdfold
