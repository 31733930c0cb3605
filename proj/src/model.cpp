#include "textseg/model.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "textseg/error.hpp"

namespace textseg {

using nlohmann::json;

std::string ModelConfig::to_json() const {
    json j;
    j["channel_dim"] = channel_dim;
    j["num_layers"] = num_layers;
    j["num_queries"] = num_queries;
    j["alpha"] = alpha;
    j["lmq_enabled"] = lmq_enabled;
    j["skeleton_enabled"] = skeleton_enabled;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    ModelConfig c;
    c.channel_dim = j.at("channel_dim").get<int>();
    c.num_layers = j.at("num_layers").get<int>();
    c.num_queries = j.at("num_queries").get<int>();
    c.alpha = j.at("alpha").get<double>();
    c.lmq_enabled = j.at("lmq_enabled").get<bool>();
    c.skeleton_enabled = j.at("skeleton_enabled").get<bool>();
    return c;
}

SegModel::SegModel(ModelConfig cfg, uint64_t init_seed) : config(cfg) {
    cfg.decoder().validate();
    Rng rng(mix_seed(init_seed, 0x6d6f64656cULL));
    register_pixel_path_params(params, cfg.pixel(), rng);
    register_decoder_params(params, cfg.decoder(), rng);
    register_head_params(params, cfg.channel_dim, rng);
}

std::vector<LayerOutput> SegModel::forward(Graph& g, const Tensor& image) {
    FeaturePyramid pyr = encode(g, image, params, config.pixel());
    return decoder_forward(g, pyr, config.decoder(), params, config.skeleton_enabled);
}

std::vector<PredictionSet> SegModel::forward_upsampled(Graph& g, const Tensor& image, int out_h,
                                                       int out_w) {
    std::vector<LayerOutput> layers = forward(g, image);
    std::vector<PredictionSet> sets;
    sets.reserve(layers.size());
    for (auto& lo : layers) {
        PredictionSet s;
        s.class_logits = lo.preds.class_logits;
        s.mask_logits = resize_bilinear_stack(g, lo.preds.mask_logits, out_h, out_w);
        if (lo.preds.skeleton_logits)
            s.skeleton_logits = resize_bilinear_stack(g, lo.preds.skeleton_logits, out_h, out_w);
        sets.push_back(s);
    }
    return sets;
}

SemanticResult SegModel::predict(const Tensor& image) {
    check_shape(image.ndim() == 3 && image.dim(2) == 3, "predict: image must be (H, W, 3)");
    int h = image.dim(0), w = image.dim(1);
    int ph = (h + 31) / 32 * 32, pw = (w + 31) / 32 * 32;
    Tensor padded = image;
    if (ph != h || pw != w) {
        padded = Tensor({ph, pw, 3});
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                for (int ch = 0; ch < 3; ++ch) padded.at(r, c, ch) = image.at(r, c, ch);
    }
    Graph g(/*grad_enabled=*/false);
    std::vector<LayerOutput> layers = forward(g, padded);
    const PredictionSet& last = layers.back().preds;
    PredictionSetData data;
    data.class_logits = last.class_logits->value;
    data.mask_logits = resize_bilinear_stack_plain(last.mask_logits->value, ph, pw);
    SemanticResult full = semantic_output(data);
    if (ph == h && pw == w) return full;

    SemanticResult out;
    out.prob = Tensor({h, w});
    out.mask = BinaryMask(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            out.prob.at(r, c) = full.prob.at(r, c);
            out.mask.set(r, c, full.mask.at(r, c) != 0);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// checkpoint
// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'T', 'S', 'E', 'G', 'C', 'K', 'P', '1'};

void write_string(std::ostream& os, const std::string& s) {
    uint64_t len = s.size();
    os.write(reinterpret_cast<const char*>(&len), sizeof(len));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    uint64_t len = 0;
    is.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) throw IoError("truncated checkpoint");
    return s;
}
}  // namespace

void save_checkpoint(const std::string& path, const SegModel& model, uint64_t iteration,
                     const std::string& extra_json) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    os.write(reinterpret_cast<const char*>(&iteration), sizeof(iteration));
    write_string(os, model.config.to_json());
    write_string(os, extra_json);
    model.params.serialize_values(os);
    if (!os) throw IoError("failed writing checkpoint: " + path);
}

std::unique_ptr<SegModel> load_checkpoint(const std::string& path, uint64_t* iteration_out,
                                          std::string* extra_json_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("not a checkpoint file: " + path);
    uint64_t iteration = 0;
    is.read(reinterpret_cast<char*>(&iteration), sizeof(iteration));
    std::string cfg_json = read_string(is);
    std::string extra = read_string(is);
    auto model = std::make_unique<SegModel>(ModelConfig::from_json(cfg_json), /*init_seed=*/0);
    model->params.deserialize_values(is);
    if (iteration_out) *iteration_out = iteration;
    if (extra_json_out) *extra_json_out = extra;
    return model;
}

}  // namespace textseg
