// Synthetic training-data generation: phrase sampling, glyph rasterization
// into binary masks, and a procedural compositor that paints aligned images.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "textseg/fonts.hpp"
#include "textseg/mask.hpp"
#include "textseg/rng.hpp"
#include "textseg/tensor.hpp"

namespace textseg {

struct PhraseSpec {
    std::string text;          // 1-5 consecutive corpus words
    int font_id = 0;
    double rotation_deg = 0.0;  // |rotation| <= 30
    // Linear part of the affine distortion: [[a, b], [c, d]], det >= 0.2.
    // Translation lives in the anchor.
    double affine[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
    double anchor_x = 0.0;  // canvas coordinates of the phrase centre
    double anchor_y = 0.0;
    double rendered_height = 0.0;  // pixel height of the layout box
};

struct RenderScene {
    std::vector<PhraseSpec> phrases;  // 1-7 entries
    int canvas_h = 0;
    int canvas_w = 0;
    uint64_t seed = 0;
};

// Phrase geometry in local pixel coordinates (used by rendering and sizing).
struct StrokeSegment {
    double x0, y0, x1, y1;
};
struct GlyphRun {
    std::vector<StrokeSegment> segments;
    double bx0, by0, bx1, by1;  // ink bounds, unexpanded
};
struct PhraseLayout {
    std::vector<GlyphRun> glyphs;
    double width = 0.0, height = 0.0;
    double radius = 0.0;  // half stroke width in local pixels
    CapStyle cap = CapStyle::Round;
};

PhraseLayout layout_phrase(const StrokeFont& font, const std::string& text,
                           double rendered_height);

// Draws phrase counts uniformly from [1,7], word runs of 1-5 consecutive
// corpus words, rotations uniform on [-30, 30] degrees, and shear/scale
// distortions with determinant >= 0.2. Phrase size is capped so the
// transformed box fits the canvas; placement rejects overlaps for up to 50
// tries, then permits them. Deterministic given the seed.
RenderScene sample_scene(const std::vector<std::string>& corpus, const FontInventory& fonts,
                         int canvas_h, int canvas_w, uint64_t seed);

// Rasterizes every phrase onto a blank canvas. Deterministic given the scene.
BinaryMask render_mask(const RenderScene& scene, const FontInventory& fonts);

// ---- compositor -------------------------------------------------------------

enum class FillKind { Solid, Gradient, Noise, Image };

struct StylePlan {
    FillKind fg = FillKind::Solid;
    FillKind bg = FillKind::Solid;
    double fg_color[3] = {1, 1, 1}, fg_color2[3] = {1, 1, 1};
    double bg_color[3] = {0, 0, 0}, bg_color2[3] = {0, 0, 0};
    double fg_angle = 0.0, bg_angle = 0.0;
    double noise_amp = 0.25;
    uint64_t noise_seed = 0;
    int bg_image_index = -1;  // into the background path list
    bool shadow = false;
    int shadow_dx = 2, shadow_dy = 2;
    bool blur = false;
};

// Foreground and background drawn from independent style families; styles are
// re-sampled until the mean absolute color difference between the regions is
// at least 0.1 (so a training signal exists). Optional shadow/blur jitter.
// Deterministic given (mask, style_seed).
Tensor composite_image(const BinaryMask& mask, uint64_t style_seed,
                       const std::vector<std::string>* background_paths = nullptr);

// Deterministic compositing of an explicit plan (no contrast re-sampling).
Tensor composite_with_plan(const BinaryMask& mask, const StylePlan& plan,
                           const std::vector<std::string>* background_paths = nullptr);

// ---- dataset ---------------------------------------------------------------

struct GenerateConfig {
    std::string out_dir;
    int count = 1;
    uint64_t master_seed = 0;
    int canvas_h = 128, canvas_w = 128;
    std::string fonts_dir;
    std::string corpus_path;       // newline-delimited words
    std::string backgrounds_dir;   // optional; PNG pool for backgrounds
    bool write_skeletons = true;
};

// Writes <out>/image/NNNNNN.png, <out>/mask/NNNNNN.png, optionally
// <out>/skeleton/NNNNNN.png and <out>/meta.jsonl (one record per sample).
// Byte-reproducible for a fixed config and master seed.
void generate_dataset(const GenerateConfig& cfg);

std::vector<std::string> load_corpus(const std::string& path);

}  // namespace textseg
