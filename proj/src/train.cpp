#include "textseg/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "textseg/augment.hpp"
#include "textseg/error.hpp"
#include "textseg/heads.hpp"
#include "textseg/metrics.hpp"

namespace textseg {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ValueError("train: lr must be > 0");
    if (crop % 32 != 0 || crop < 32) throw ValueError("train: crop must be divisible by 32");
    if (batch < 1 || iterations < 0) throw ValueError("train: bad batch/iterations");
    model.decoder().validate();
}

namespace {

struct AdamW {
    double lr0, weight_decay, power;
    int total_steps;
    int t = 0;
    static constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    double step_lr() const {
        if (total_steps <= 0) return lr0;
        double frac = 1.0 - static_cast<double>(t) / total_steps;
        return lr0 * std::pow(std::max(frac, 0.0), power);
    }

    void step(ParamStore& params) {
        double lr = step_lr();
        ++t;
        double bc1 = 1.0 - std::pow(beta1, t);
        double bc2 = 1.0 - std::pow(beta2, t);
        for (auto& p : params.all()) {
            if (p.adam_m.empty()) {
                p.adam_m = Tensor(p.value.shape);
                p.adam_v = Tensor(p.value.shape);
            }
            for (int i = 0; i < p.value.numel(); ++i) {
                double g = p.grad.data[i];
                double& m = p.adam_m.data[i];
                double& v = p.adam_v.data[i];
                m = beta1 * m + (1.0 - beta1) * g;
                v = beta2 * v + (1.0 - beta2) * g * g;
                double update = (m / bc1) / (std::sqrt(v / bc2) + eps);
                p.value.data[i] -= lr * (update + weight_decay * p.value.data[i]);
            }
        }
        params.zero_grads();
    }
};

// Center pad-or-crop to the training resolution when augmentation is off and
// the sample size differs from the crop.
SegSample fit_to_crop(const SegSample& s, int cropsz) {
    if (s.image.dim(0) == cropsz && s.image.dim(1) == cropsz) return s;
    AugmentParams identity;  // scale/color/flip neutral, centered crop
    return apply_augment(s, identity, cropsz);
}

void gather_targets(const SegSample& s, std::vector<BinaryMask>& gts,
                    std::vector<BinaryMask>& skels) {
    gts.clear();
    skels.clear();
    if (s.mask.foreground_count() > 0) {
        gts.push_back(s.mask);
        skels.push_back(s.skeleton);
    }
}

}  // namespace

EvalMetrics evaluate_split(SegModel& model, const std::vector<SegSample>& samples,
                           bool validation_split) {
    ConfusionCounts counts;
    EvalMetrics out;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (is_validation_index(i) != validation_split) continue;
        SemanticResult r = model.predict(samples[i].image);
        accumulate(r.mask, samples[i].mask, counts);
        ++out.samples;
    }
    out.fgiou = fg_iou(counts);
    out.fscore = f_score(counts);
    return out;
}

TrainResult train(const TrainConfig& cfg, const std::string& dataset_dir,
                  const std::string& out_dir) {
    cfg.validate();
    std::vector<SegSample> samples = load_archive(dataset_dir);
    std::vector<size_t> train_idx;
    size_t val_count = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (is_validation_index(i))
            ++val_count;
        else
            train_idx.push_back(i);
    }
    if (train_idx.empty()) throw ValueError("train: no training samples after split");

    fs::create_directories(out_dir);
    TrainResult result;
    result.log_path = (fs::path(out_dir) / "train_log.jsonl").string();
    result.final_checkpoint = (fs::path(out_dir) / "final.ckpt").string();
    result.best_checkpoint = (fs::path(out_dir) / "best.ckpt").string();
    std::ofstream log(result.log_path);
    if (!log) throw IoError("cannot write training log: " + result.log_path);

    SegModel model(cfg.model, cfg.seed);
    AdamW opt{cfg.lr, cfg.weight_decay, cfg.poly_power, cfg.iterations};
    LossWeights weights;

    json cfg_echo;
    cfg_echo["lr"] = cfg.lr;
    cfg_echo["weight_decay"] = cfg.weight_decay;
    cfg_echo["crop"] = cfg.crop;
    cfg_echo["batch"] = cfg.batch;
    cfg_echo["iterations"] = cfg.iterations;
    cfg_echo["seed"] = cfg.seed;
    cfg_echo["augment"] = cfg.augment_enabled;
    cfg_echo["model"] = json::parse(cfg.model.to_json());

    double best_fgiou = -1.0;
    auto run_eval = [&](int iter) {
        if (val_count == 0) return;
        EvalMetrics m = evaluate_split(model, samples, /*validation_split=*/true);
        json rec;
        rec["iter"] = iter;
        rec["val_fgiou"] = m.fgiou;
        rec["val_fscore"] = m.fscore;
        log << rec.dump() << "\n" << std::flush;
        result.final_val_fgiou = m.fgiou;
        result.final_val_fscore = m.fscore;
        if (m.fgiou > best_fgiou) {
            best_fgiou = m.fgiou;
            result.best_val_fgiou = m.fgiou;
            save_checkpoint(result.best_checkpoint, model, static_cast<uint64_t>(iter),
                            cfg_echo.dump());
        }
    };

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        std::map<std::string, double> term_sums;
        double total = 0.0;
        Rng batch_rng(mix_seed(cfg.seed, 0xba7c4ULL, static_cast<uint64_t>(iter)));
        for (int slot = 0; slot < cfg.batch; ++slot) {
            size_t idx = train_idx[static_cast<size_t>(
                batch_rng.uniform_int(0, static_cast<int>(train_idx.size()) - 1))];
            SegSample s =
                cfg.augment_enabled
                    ? augment(samples[idx],
                              mix_seed(cfg.seed, static_cast<uint64_t>(iter),
                                       1000 + static_cast<uint64_t>(slot)),
                              cfg.crop)
                    : fit_to_crop(samples[idx], cfg.crop);
            std::vector<BinaryMask> gts, skels;
            gather_targets(s, gts, skels);

            Graph g;
            std::vector<PredictionSet> sets =
                model.forward_upsampled(g, s.image, s.mask.height, s.mask.width);
            TotalLoss tl = total_loss(g, sets, gts, skels, weights);
            for (const auto& term : tl.breakdown) {
                if (!std::isfinite(term.value))
                    throw ValueError("non-finite loss term '" + term.term + "' (layer " +
                                     std::to_string(term.layer) + ") at iteration " +
                                     std::to_string(iter));
                term_sums[term.term] += term.value / cfg.batch;
            }
            double sample_total = tl.total->value.data[0];
            if (!std::isfinite(sample_total))
                throw ValueError("non-finite total loss at iteration " + std::to_string(iter));
            total += sample_total / cfg.batch;

            Value scaled = scale(g, tl.total, 1.0 / cfg.batch);
            g.backward(scaled);
            g.sync_param_grads();
        }

        json rec;
        rec["iter"] = iter;
        rec["lr"] = opt.step_lr();
        rec["total"] = total;
        for (auto& [name, v] : term_sums) rec[name] = v;
        log << rec.dump() << "\n";

        opt.step(model.params);

        if (cfg.val_interval > 0 && (iter + 1) % cfg.val_interval == 0 &&
            iter + 1 != cfg.iterations)
            run_eval(iter + 1);
    }
    run_eval(cfg.iterations);
    save_checkpoint(result.final_checkpoint, model, static_cast<uint64_t>(cfg.iterations),
                    cfg_echo.dump());
    if (best_fgiou < 0.0)  // no validation split: best == final
        save_checkpoint(result.best_checkpoint, model, static_cast<uint64_t>(cfg.iterations),
                        cfg_echo.dump());
    return result;
}

std::vector<AblationRow> ablation_harness(const std::vector<AblationEntry>& entries,
                                          const std::vector<uint64_t>& seeds,
                                          const std::string& dataset_dir,
                                          const std::string& out_dir) {
    if (entries.empty() || seeds.empty()) throw ValueError("ablation: empty configs or seeds");
    fs::create_directories(out_dir);
    std::vector<AblationRow> rows;
    for (const auto& entry : entries) {
        AblationRow row;
        row.label = entry.label;
        for (size_t k = 0; k < seeds.size(); ++k) {
            TrainConfig cfg = entry.config;
            cfg.seed = seeds[k];
            std::string run_dir =
                (fs::path(out_dir) / (entry.label + "_seed" + std::to_string(seeds[k]))).string();
            TrainResult r = train(cfg, dataset_dir, run_dir);
            row.fgiou.push_back(r.final_val_fgiou);
            row.fscore.push_back(r.final_val_fscore);
        }
        double n = static_cast<double>(row.fgiou.size());
        double mean = 0.0, mean_f = 0.0;
        row.fgiou_min = row.fgiou[0];
        row.fgiou_max = row.fgiou[0];
        for (size_t k = 0; k < row.fgiou.size(); ++k) {
            mean += row.fgiou[k];
            mean_f += row.fscore[k];
            row.fgiou_min = std::min(row.fgiou_min, row.fgiou[k]);
            row.fgiou_max = std::max(row.fgiou_max, row.fgiou[k]);
        }
        mean /= n;
        mean_f /= n;
        double var = 0.0;
        for (double v : row.fgiou) var += (v - mean) * (v - mean);
        row.fgiou_mean = mean;
        row.fgiou_std = std::sqrt(var / n);
        row.fscore_mean = mean_f;
        rows.push_back(std::move(row));
    }

    json table = json::array();
    for (const auto& row : rows) {
        json j;
        j["label"] = row.label;
        j["fgiou"] = row.fgiou;
        j["fscore"] = row.fscore;
        j["fgiou_mean"] = row.fgiou_mean;
        j["fgiou_std"] = row.fgiou_std;
        j["fgiou_min"] = row.fgiou_min;
        j["fgiou_max"] = row.fgiou_max;
        j["fscore_mean"] = row.fscore_mean;
        table.push_back(j);
    }
    std::ofstream os(fs::path(out_dir) / "ablation.json");
    os << table.dump(2) << "\n";
    return rows;
}

}  // namespace textseg
