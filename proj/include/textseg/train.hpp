// Optimization loop, evaluation on the held-out split, checkpointing, and
// the ablation harness.

#pragma once

#include <string>
#include <vector>

#include "textseg/dataset.hpp"
#include "textseg/model.hpp"

namespace textseg {

struct TrainConfig {
    double lr = 1e-4;
    double weight_decay = 0.05;
    double poly_power = 0.9;  // lr * (1 - t/T)^power
    int crop = 128;           // divisible by 32
    int batch = 8;
    int iterations = 1000;
    uint64_t seed = 0;
    bool augment_enabled = true;
    int val_interval = 500;
    ModelConfig model;

    void validate() const;
};

struct TrainResult {
    double final_val_fgiou = 0.0;
    double final_val_fscore = 0.0;
    double best_val_fgiou = 0.0;
    std::string final_checkpoint;
    std::string best_checkpoint;
    std::string log_path;
};

// Runs AdamW under a polynomial decay schedule, logging a structured record
// per iteration and validation metrics every val_interval iterations. Writes
// final and best checkpoints under out_dir. Fully seeded; two runs with the
// same inputs produce identical logs. Throws ValueError naming the offending
// term if the loss turns non-finite.
TrainResult train(const TrainConfig& cfg, const std::string& dataset_dir,
                  const std::string& out_dir);

// Validation metrics of a model over the held-out split of an archive.
struct EvalMetrics {
    double fgiou = 0.0;
    double fscore = 0.0;
    size_t samples = 0;
};
EvalMetrics evaluate_split(SegModel& model, const std::vector<SegSample>& samples,
                           bool validation_split);

struct AblationEntry {
    std::string label;
    TrainConfig config;  // seed field is overwritten per run
};

struct AblationRow {
    std::string label;
    std::vector<double> fgiou;   // one per seed
    std::vector<double> fscore;
    double fgiou_mean = 0.0, fgiou_std = 0.0, fgiou_min = 0.0, fgiou_max = 0.0;
    double fscore_mean = 0.0;
};

// Trains every entry on the same archive once per seed and reports held-out
// metrics as mean +/- spread. Writes <out_dir>/ablation.json.
std::vector<AblationRow> ablation_harness(const std::vector<AblationEntry>& entries,
                                          const std::vector<uint64_t>& seeds,
                                          const std::string& dataset_dir,
                                          const std::string& out_dir);

}  // namespace textseg
