// Full segmentation model: pixel path + query decoder + heads, with
// checkpoint serialization.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "textseg/decoder.hpp"

namespace textseg {

struct ModelConfig {
    int channel_dim = 64;
    int num_layers = 9;
    int num_queries = 20;
    double alpha = 0.8;
    bool lmq_enabled = true;
    bool skeleton_enabled = true;

    DecoderConfig decoder() const {
        return DecoderConfig{num_layers, num_queries, alpha, lmq_enabled, channel_dim};
    }
    PixelPathConfig pixel() const { return PixelPathConfig{channel_dim}; }

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

class SegModel {
public:
    SegModel(ModelConfig cfg, uint64_t init_seed);

    // Encoder + decoder + heads; one entry per prediction layer (initial
    // queries first). Mask/skeleton logits are at stride-4 resolution.
    std::vector<LayerOutput> forward(Graph& g, const Tensor& image_hwc);

    // Same, with mask and skeleton logits bilinearly upsampled to
    // (out_h, out_w) so losses run densely at label resolution.
    std::vector<PredictionSet> forward_upsampled(Graph& g, const Tensor& image_hwc, int out_h,
                                                 int out_w);

    // Inference on an arbitrary image: pads to a multiple of 32, runs the
    // final-layer predictions through semantic post-processing and crops the
    // result back to the input size.
    SemanticResult predict(const Tensor& image_hwc);

    ModelConfig config;
    ParamStore params;
};

// Single binary checkpoint: model config, an arbitrary json echo (training
// configuration), iteration count, and every parameter tensor.
void save_checkpoint(const std::string& path, const SegModel& model, uint64_t iteration,
                     const std::string& extra_json);
std::unique_ptr<SegModel> load_checkpoint(const std::string& path, uint64_t* iteration_out,
                                          std::string* extra_json_out);

}  // namespace textseg
