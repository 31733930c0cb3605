#include "textseg/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "textseg/error.hpp"
#include "textseg/image_io.hpp"
#include "textseg/maskrender.hpp"
#include "textseg/metrics.hpp"
#include "textseg/skeleton.hpp"
#include "textseg/train.hpp"

namespace textseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

#ifdef TEXTSEG_SOURCE_DIR
const char* kDefaultAssets = TEXTSEG_SOURCE_DIR "/assets";
#else
const char* kDefaultAssets = "assets";
#endif

// ---- configuration file ----------------------------------------------------
// INI-style key/value file with [model], [train], [data], [ablation] sections.
// Command-line flags override file values.

struct RunConfig {
    // [model]
    ModelConfig model;
    // [train]
    TrainConfig train;
    // [data]
    std::string archive, out, fonts, corpus, backgrounds;
    int canvas = 128;
    // [ablation]
    std::string mode = "modules";
    int num_seeds = 3;
    std::vector<double> alphas = {0.1, 0.2, 0.4, 0.5, 0.6, 0.8, 0.9};
};

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',' || c == ' ') {
            if (!cur.empty()) out.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

bool parse_bool(const std::string& v) {
    return v == "1" || v == "true" || v == "yes" || v == "on";
}

void load_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValueError(path + ":" + std::to_string(lineno) + ": expected key = value");
        auto strip = [](std::string s) {
            auto a = s.find_first_not_of(" \t");
            auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = strip(line.substr(0, eq));
        std::string value = strip(line.substr(eq + 1));
        std::string full = section + "." + key;

        if (full == "model.channel_dim") cfg.model.channel_dim = std::stoi(value);
        else if (full == "model.num_layers") cfg.model.num_layers = std::stoi(value);
        else if (full == "model.num_queries") cfg.model.num_queries = std::stoi(value);
        else if (full == "model.alpha") cfg.model.alpha = std::stod(value);
        else if (full == "model.lmq_enabled") cfg.model.lmq_enabled = parse_bool(value);
        else if (full == "model.skeleton_enabled") cfg.model.skeleton_enabled = parse_bool(value);
        else if (full == "train.lr") cfg.train.lr = std::stod(value);
        else if (full == "train.weight_decay") cfg.train.weight_decay = std::stod(value);
        else if (full == "train.poly_power") cfg.train.poly_power = std::stod(value);
        else if (full == "train.crop") cfg.train.crop = std::stoi(value);
        else if (full == "train.batch") cfg.train.batch = std::stoi(value);
        else if (full == "train.iterations") cfg.train.iterations = std::stoi(value);
        else if (full == "train.seed") cfg.train.seed = std::stoull(value);
        else if (full == "train.augment") cfg.train.augment_enabled = parse_bool(value);
        else if (full == "train.val_interval") cfg.train.val_interval = std::stoi(value);
        else if (full == "data.archive") cfg.archive = value;
        else if (full == "data.out") cfg.out = value;
        else if (full == "data.fonts") cfg.fonts = value;
        else if (full == "data.corpus") cfg.corpus = value;
        else if (full == "data.backgrounds") cfg.backgrounds = value;
        else if (full == "data.canvas") cfg.canvas = std::stoi(value);
        else if (full == "ablation.mode") cfg.mode = value;
        else if (full == "ablation.num_seeds") cfg.num_seeds = std::stoi(value);
        else if (full == "ablation.alphas") cfg.alphas = parse_double_list(value);
        else throw ValueError(path + ": unknown configuration key '" + full + "'");
    }
}

json model_json(const ModelConfig& m) { return json::parse(m.to_json()); }

json train_json(const TrainConfig& t) {
    json j;
    j["lr"] = t.lr;
    j["weight_decay"] = t.weight_decay;
    j["poly_power"] = t.poly_power;
    j["crop"] = t.crop;
    j["batch"] = t.batch;
    j["iterations"] = t.iterations;
    j["seed"] = t.seed;
    j["augment"] = t.augment_enabled;
    j["val_interval"] = t.val_interval;
    j["model"] = model_json(t.model);
    return j;
}

// Written into the output directory before any long-running work begins.
void write_manifest(const std::string& out_dir, const std::string& subcommand, json config,
                    uint64_t master_seed, json artifacts) {
    fs::create_directories(out_dir);
    json m;
    m["subcommand"] = subcommand;
    m["config"] = std::move(config);
    m["master_seed"] = master_seed;
    for (auto& [k, v] : artifacts.items())
        artifacts[k] = fs::absolute(fs::path(v.get<std::string>())).string();
    m["artifacts"] = artifacts;
    m["version"] = kToolVersion;
    std::ofstream os(fs::path(out_dir) / "run_manifest.json");
    os << m.dump(2) << "\n";
}

// Directory of mask PNGs, either flat or an archive with a mask/ subdir.
fs::path mask_dir_of(const std::string& dir) {
    fs::path p(dir);
    if (fs::is_directory(p / "mask")) return p / "mask";
    return p;
}

std::vector<std::string> png_names(const fs::path& dir) {
    std::vector<std::string> names;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

// ---- subcommand bodies -------------------------------------------------------

int cmd_generate(const RunConfig& cfg, int count, uint64_t seed, bool no_skeletons) {
    GenerateConfig g;
    g.out_dir = cfg.out;
    g.count = count;
    g.master_seed = seed;
    g.canvas_h = cfg.canvas;
    g.canvas_w = cfg.canvas;
    g.fonts_dir = cfg.fonts;
    g.corpus_path = cfg.corpus;
    g.backgrounds_dir = cfg.backgrounds;
    g.write_skeletons = !no_skeletons;
    json config;
    config["count"] = count;
    config["canvas"] = cfg.canvas;
    config["fonts"] = g.fonts_dir;
    config["corpus"] = g.corpus_path;
    config["backgrounds"] = g.backgrounds_dir;
    write_manifest(cfg.out, "generate", config, seed, json{{"dataset", cfg.out}});
    generate_dataset(g);
    std::cout << json{{"generated", count}, {"out", cfg.out}}.dump() << "\n";
    return 0;
}

int cmd_skeletonize(const std::string& in, const std::string& out) {
    save_mask_png(out, zhang_suen_thin(load_mask_png(in)));
    return 0;
}

int cmd_train(RunConfig cfg) {
    if (cfg.archive.empty() || cfg.out.empty())
        throw ValueError("train: --data and --out are required");
    cfg.train.model = cfg.model;
    write_manifest(cfg.out, "train", train_json(cfg.train), cfg.train.seed,
                   json{{"dataset", cfg.archive}, {"out", cfg.out}});
    TrainResult r = train(cfg.train, cfg.archive, cfg.out);
    json summary;
    summary["final_val_fgiou"] = r.final_val_fgiou;
    summary["final_val_fscore"] = r.final_val_fscore;
    summary["final_checkpoint"] = r.final_checkpoint;
    summary["best_checkpoint"] = r.best_checkpoint;
    summary["log"] = r.log_path;
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_eval(const std::string& pred, const std::string& gt, bool per_image) {
    fs::path pred_dir = mask_dir_of(pred), gt_dir = mask_dir_of(gt);
    std::vector<std::string> names = png_names(gt_dir);
    if (names.empty()) throw IoError("no ground-truth masks in " + gt_dir.string());
    ConfusionCounts global;
    double iou_sum = 0.0, f_sum = 0.0;
    for (const auto& name : names) {
        BinaryMask p = load_mask_png((pred_dir / name).string());
        BinaryMask t = load_mask_png((gt_dir / name).string());
        ConfusionCounts c;
        accumulate(p, t, c);
        global += c;
        if (per_image) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "{\"name\":\"%s\",\"fgIoU\":\"%.2f\",\"f_score\":\"%.3f\"}",
                          name.c_str(), fg_iou(c), f_score(c));
            std::cout << buf << "\n";
            iou_sum += fg_iou(c);
            f_sum += f_score(c);
        }
    }
    char buf[160];
    if (per_image) {
        std::snprintf(buf, sizeof(buf),
                      "{\"fgIoU\":\"%.2f\",\"f_score\":\"%.3f\",\"per_image_fgIoU\":\"%.2f\","
                      "\"per_image_f_score\":\"%.3f\",\"samples\":%zu}",
                      fg_iou(global), f_score(global), iou_sum / names.size(),
                      f_sum / names.size(), names.size());
    } else {
        std::snprintf(buf, sizeof(buf), "{\"fgIoU\":\"%.2f\",\"f_score\":\"%.3f\",\"samples\":%zu}",
                      fg_iou(global), f_score(global), names.size());
    }
    std::cout << buf << "\n";
    return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& in, const std::string& out) {
    uint64_t iteration = 0;
    std::string echo;
    auto model = load_checkpoint(ckpt, &iteration, &echo);
    std::vector<fs::path> inputs;
    if (fs::is_directory(in)) {
        for (const auto& name : png_names(in)) inputs.push_back(fs::path(in) / name);
    } else {
        inputs.push_back(in);
    }
    json config;
    config["checkpoint"] = ckpt;
    config["iteration"] = iteration;
    config["inputs"] = inputs.size();
    write_manifest(out, "predict", config, 0, json{{"out", out}});
    for (const auto& path : inputs) {
        Tensor img = load_image_rgb(path.string());
        SemanticResult r = model->predict(img);
        save_mask_png((fs::path(out) / path.filename()).string(), r.mask);
    }
    std::cout << json{{"predicted", inputs.size()}, {"out", out}}.dump() << "\n";
    return 0;
}

int cmd_ablate(RunConfig cfg) {
    if (cfg.archive.empty() || cfg.out.empty())
        throw ValueError("ablate: --data and --out are required");
    cfg.train.model = cfg.model;
    std::vector<AblationEntry> entries;
    if (cfg.mode == "modules") {
        auto base = cfg.train;
        base.model.lmq_enabled = false;
        base.model.skeleton_enabled = false;
        auto lmq = cfg.train;
        lmq.model.lmq_enabled = true;
        lmq.model.skeleton_enabled = false;
        auto full = cfg.train;
        full.model.lmq_enabled = true;
        full.model.skeleton_enabled = true;
        entries = {{"baseline", base}, {"lmq", lmq}, {"lmq_skeleton", full}};
    } else if (cfg.mode == "alpha") {
        for (double a : cfg.alphas) {
            auto c = cfg.train;
            c.model.lmq_enabled = true;
            c.model.alpha = a;
            char label[32];
            std::snprintf(label, sizeof(label), "alpha_%.2f", a);
            entries.push_back({label, c});
        }
    } else {
        throw ValueError("ablate: unknown mode '" + cfg.mode + "' (modules|alpha)");
    }
    std::vector<uint64_t> seeds;
    for (int k = 0; k < cfg.num_seeds; ++k)
        seeds.push_back(cfg.train.seed + static_cast<uint64_t>(k));

    json config = train_json(cfg.train);
    config["mode"] = cfg.mode;
    config["num_seeds"] = cfg.num_seeds;
    write_manifest(cfg.out, "ablate", config, cfg.train.seed,
                   json{{"dataset", cfg.archive}, {"out", cfg.out}});

    auto rows = ablation_harness(entries, seeds, cfg.archive, cfg.out);
    for (const auto& row : rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-14s fgIoU %.2f +/- %.2f  [%.2f, %.2f]  F %.3f",
                      row.label.c_str(), row.fgiou_mean, row.fgiou_std, row.fgiou_min,
                      row.fgiou_max, row.fscore_mean);
        std::cout << buf << "\n";
    }
    std::cout << "table: " << (fs::path(cfg.out) / "ablation.json").string() << "\n";
    return 0;
}

int cmd_viz(const std::string& image, const std::string& mask, const std::string& skeleton,
            const std::string& out) {
    Tensor img = load_image_rgb(image);
    BinaryMask m = load_mask_png(mask);
    BinaryMask skel;
    if (!skeleton.empty()) skel = load_mask_png(skeleton);
    Tensor overlay = make_overlay(img, m, skeleton.empty() ? nullptr : &skel);
    save_image_rgb(out, overlay);
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    RunConfig cfg;
    cfg.fonts = std::string(kDefaultAssets) + "/fonts";
    cfg.corpus = std::string(kDefaultAssets) + "/words.txt";

    // The config file must be applied before flag parsing so flags win;
    // find it with a pre-scan.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                load_config_file(argv[i + 1], cfg);
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 1;
            }
        }
    }

    CLI::App app{"artistic text segmentation toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "configuration file ([model]/[train]/[data]/[ablation])")
        ->expected(1);

    int count = 1;
    bool no_skeletons = false, per_image = false;
    std::string in_path, out_path, pred_dir, gt_dir, ckpt, image_path, mask_path, skel_path;
    uint64_t seed_flag = 0;
    bool seed_set = false, no_augment = false;

    auto add_model_flags = [&](CLI::App* sub) {
        sub->add_option("--channels", cfg.model.channel_dim, "model channel dim");
        sub->add_option("--num-layers", cfg.model.num_layers, "decoder layers");
        sub->add_option("--num-queries", cfg.model.num_queries, "object queries");
        sub->add_option("--alpha", cfg.model.alpha, "momentum coefficient in [0,1)");
        sub->add_flag("--lmq,!--no-lmq", cfg.model.lmq_enabled, "momentum queries on/off");
        sub->add_flag("--skeleton-head,!--no-skeleton-head", cfg.model.skeleton_enabled,
                      "skeleton head on/off");
    };

    CLI::App* gen = app.add_subcommand("generate", "generate a synthetic dataset archive");
    gen->add_option("--count", count, "number of samples")->required();
    gen->add_option("--out", cfg.out, "output archive directory")->required();
    gen->add_option("--seed", seed_flag, "master seed");
    gen->add_option("--fonts", cfg.fonts, "font directory (*.json stroke fonts)");
    gen->add_option("--backgrounds", cfg.backgrounds, "optional background PNG directory");
    gen->add_option("--corpus", cfg.corpus, "newline-delimited word corpus");
    gen->add_option("--size", cfg.canvas, "canvas size in pixels");
    gen->add_flag("--no-skeletons", no_skeletons, "skip skeleton/ output");

    CLI::App* skel = app.add_subcommand("skeletonize", "thin a mask PNG to its skeleton");
    skel->add_option("--in", in_path, "input mask PNG")->required();
    skel->add_option("--out", out_path, "output skeleton PNG")->required();

    CLI::App* tr = app.add_subcommand("train", "train a model on an archive");
    tr->add_option("--data", cfg.archive, "dataset archive directory");
    tr->add_option("--out", cfg.out, "run output directory");
    tr->add_option("--iterations", cfg.train.iterations, "optimizer steps");
    tr->add_option("--batch", cfg.train.batch, "batch size");
    tr->add_option("--crop", cfg.train.crop, "training crop (divisible by 32)");
    tr->add_option("--lr", cfg.train.lr, "initial learning rate");
    tr->add_option("--weight-decay", cfg.train.weight_decay, "decoupled weight decay");
    tr->add_option("--seed", seed_flag, "training seed");
    tr->add_option("--val-interval", cfg.train.val_interval, "validation every N iterations");
    tr->add_flag("--no-augment", no_augment, "disable augmentation");
    add_model_flags(tr);

    CLI::App* ev = app.add_subcommand("eval", "fgIoU / F-score between mask directories");
    ev->add_option("--pred", pred_dir, "prediction masks (dir or archive)")->required();
    ev->add_option("--gt", gt_dir, "ground-truth masks (dir or archive)")->required();
    ev->add_flag("--per-image", per_image, "also report per-image means");

    CLI::App* pr = app.add_subcommand("predict", "run a checkpoint over images");
    pr->add_option("--ckpt", ckpt, "checkpoint file")->required();
    pr->add_option("--in", in_path, "input image or directory")->required();
    pr->add_option("--out", out_path, "output mask directory")->required();

    CLI::App* ab = app.add_subcommand("ablate", "train ablation grids and tabulate");
    ab->add_option("--data", cfg.archive, "dataset archive directory");
    ab->add_option("--out", cfg.out, "output directory");
    ab->add_option("--mode", cfg.mode, "modules | alpha");
    ab->add_option("--seeds", cfg.num_seeds, "seeds per configuration");
    ab->add_option("--iterations", cfg.train.iterations, "optimizer steps per run");
    ab->add_option("--batch", cfg.train.batch, "batch size");
    ab->add_option("--seed", seed_flag, "base seed");
    ab->add_flag("--no-augment", no_augment, "disable augmentation");
    add_model_flags(ab);

    CLI::App* vz = app.add_subcommand("viz", "write an image+mask(+skeleton) overlay PNG");
    vz->add_option("--image", image_path, "input image PNG")->required();
    vz->add_option("--mask", mask_path, "mask PNG")->required();
    vz->add_option("--skeleton", skel_path, "optional skeleton PNG");
    vz->add_option("--out", out_path, "output overlay PNG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    seed_set = gen->count("--seed") || tr->count("--seed") || ab->count("--seed");
    if (seed_set) cfg.train.seed = seed_flag;
    if (no_augment) cfg.train.augment_enabled = false;

    try {
        if (gen->parsed())
            return cmd_generate(cfg, count, seed_set ? seed_flag : cfg.train.seed, no_skeletons);
        if (skel->parsed()) return cmd_skeletonize(in_path, out_path);
        if (tr->parsed()) return cmd_train(cfg);
        if (ev->parsed()) return cmd_eval(pred_dir, gt_dir, per_image);
        if (pr->parsed()) return cmd_predict(ckpt, in_path, out_path);
        if (ab->parsed()) return cmd_ablate(cfg);
        if (vz->parsed()) return cmd_viz(image_path, mask_path, skel_path, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace textseg
