#include "textseg/maskrender.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "textseg/autodiff.hpp"
#include "textseg/error.hpp"
#include "textseg/image_io.hpp"
#include "textseg/skeleton.hpp"

namespace textseg {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// layout
// ---------------------------------------------------------------------------

PhraseLayout layout_phrase(const StrokeFont& font, const std::string& text,
                           double rendered_height) {
    PhraseLayout out;
    out.height = rendered_height;
    out.radius = 0.5 * font.stroke_width * rendered_height / font.units_per_em;
    out.cap = font.cap;
    double scale = rendered_height / font.units_per_em;
    double pen_x = 0.0;
    bool first = true;
    for (char ch : text) {
        if (ch == ' ') {
            pen_x += font.space_advance * scale;
            first = false;
            continue;
        }
        const Glyph* glyph = font.find(ch);
        if (!glyph) continue;  // unsupported characters are skipped
        if (!first) pen_x += font.letter_spacing * scale;
        first = false;
        GlyphRun run;
        run.bx0 = run.by0 = 1e30;
        run.bx1 = run.by1 = -1e30;
        for (const auto& poly : glyph->strokes) {
            for (size_t i = 0; i + 1 < poly.size(); ++i) {
                StrokeSegment s{pen_x + poly[i][0] * scale, poly[i][1] * scale,
                                pen_x + poly[i + 1][0] * scale, poly[i + 1][1] * scale};
                run.bx0 = std::min({run.bx0, s.x0, s.x1});
                run.bx1 = std::max({run.bx1, s.x0, s.x1});
                run.by0 = std::min({run.by0, s.y0, s.y1});
                run.by1 = std::max({run.by1, s.y0, s.y1});
                run.segments.push_back(s);
            }
        }
        if (!run.segments.empty()) out.glyphs.push_back(std::move(run));
        pen_x += glyph->advance * scale;
    }
    out.width = pen_x;
    return out;
}

// ---------------------------------------------------------------------------
// geometry helpers
// ---------------------------------------------------------------------------

namespace {

struct Mat2 {
    double a, b, c, d;  // [[a, b], [c, d]]

    static Mat2 rotation(double deg) {
        double rad = deg * 3.141592653589793 / 180.0;
        double co = std::cos(rad), si = std::sin(rad);
        return {co, -si, si, co};
    }
    Mat2 mul(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
    double det() const { return a * d - b * c; }
    Mat2 inverse() const {
        double dt = det();
        return {d / dt, -b / dt, -c / dt, a / dt};
    }
    void apply(double x, double y, double& ox, double& oy) const {
        ox = a * x + b * y;
        oy = c * x + d * y;
    }
    double max_singular() const {
        double e = a * a + b * b + c * c + d * d;
        double f = det() * det();
        double disc = std::max(0.0, e * e - 4.0 * f);
        return std::sqrt(0.5 * (e + std::sqrt(disc)));
    }
};

Mat2 phrase_linear(const PhraseSpec& p) {
    Mat2 affine{p.affine[0][0], p.affine[0][1], p.affine[1][0], p.affine[1][1]};
    return Mat2::rotation(p.rotation_deg).mul(affine);
}

struct Box {
    double x0, y0, x1, y1;
    bool intersects(const Box& o) const {
        return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
    }
};

// Transformed bounding box of the layout, in offsets relative to the anchor
// (the phrase centre), expanded by the stroke radius.
Box transformed_box(const PhraseLayout& layout, const Mat2& lin) {
    double cx = 0.5 * layout.width, cy = 0.5 * layout.height;
    double pad = layout.radius * lin.max_singular();
    Box box{1e30, 1e30, -1e30, -1e30};
    const double corners[4][2] = {
        {0, 0}, {layout.width, 0}, {0, layout.height}, {layout.width, layout.height}};
    for (auto& corner : corners) {
        double ox, oy;
        lin.apply(corner[0] - cx, corner[1] - cy, ox, oy);
        box.x0 = std::min(box.x0, ox);
        box.x1 = std::max(box.x1, ox);
        box.y0 = std::min(box.y0, oy);
        box.y1 = std::max(box.y1, oy);
    }
    box.x0 -= pad;
    box.y0 -= pad;
    box.x1 += pad;
    box.y1 += pad;
    return box;
}

bool segment_covers(const StrokeSegment& s, double px, double py, double radius, CapStyle cap) {
    double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
    double rx = px - s.x0, ry = py - s.y0;
    double len2 = dx * dx + dy * dy;
    double r2 = radius * radius;
    if (len2 <= 1e-12) return rx * rx + ry * ry <= r2;
    double t = (rx * dx + ry * dy) / len2;
    if (cap == CapStyle::Round) {
        double tc = std::clamp(t, 0.0, 1.0);
        double qx = rx - tc * dx, qy = ry - tc * dy;
        return qx * qx + qy * qy <= r2;
    }
    double ext = cap == CapStyle::Square ? radius / std::sqrt(len2) : 0.0;
    if (t < -ext || t > 1.0 + ext) return false;
    double qx = rx - t * dx, qy = ry - t * dy;
    return qx * qx + qy * qy <= r2;
}

bool phrase_drawable(const StrokeFont& font, const std::string& text) {
    for (char ch : text) {
        if (ch == ' ') continue;
        const Glyph* g = font.find(ch);
        if (g && !g->strokes.empty()) return true;
    }
    return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// scene sampling
// ---------------------------------------------------------------------------

RenderScene sample_scene(const std::vector<std::string>& corpus, const FontInventory& fonts,
                         int canvas_h, int canvas_w, uint64_t seed) {
    if (corpus.empty()) throw ValueError("sample_scene: empty corpus");
    if (fonts.size() == 0) throw ValueError("sample_scene: empty font inventory");
    check_shape(canvas_h >= 8 && canvas_w >= 8, "sample_scene: canvas too small");

    Rng rng(seed);
    RenderScene scene;
    scene.canvas_h = canvas_h;
    scene.canvas_w = canvas_w;
    scene.seed = seed;

    int n_corpus = static_cast<int>(corpus.size());
    int n_phrases = rng.uniform_int(1, 7);
    std::vector<Box> placed;

    for (int i = 0; i < n_phrases; ++i) {
        PhraseSpec p;
        // Words + font, with retries until the font can draw the phrase.
        for (int attempt = 0; attempt < 20; ++attempt) {
            int wc = rng.uniform_int(1, std::min(5, n_corpus));
            int start = rng.uniform_int(0, n_corpus - wc);
            std::string text;
            for (int k = 0; k < wc; ++k) {
                if (k) text += ' ';
                text += corpus[static_cast<size_t>(start + k)];
            }
            p.text = text;
            p.font_id = rng.uniform_int(0, fonts.size() - 1);
            if (phrase_drawable(fonts.at(p.font_id), p.text)) break;
            if (attempt == 19) throw ValueError("sample_scene: corpus has no drawable words");
        }
        p.rotation_deg = rng.uniform(-30.0, 30.0);
        double sx = rng.uniform(0.7, 1.3), sy = rng.uniform(0.7, 1.3);
        double shx = rng.uniform(-0.3, 0.3), shy = rng.uniform(-0.3, 0.3);
        while (sx * sy - shx * shy < 0.2) {
            shx = rng.uniform(-0.3, 0.3);
            shy = rng.uniform(-0.3, 0.3);
        }
        p.affine[0][0] = sx;
        p.affine[0][1] = shx;
        p.affine[1][0] = shy;
        p.affine[1][1] = sy;

        // Size: sampled, then capped so the transformed box fits the canvas.
        p.rendered_height = rng.uniform(0.22, 0.50) * std::min(canvas_h, canvas_w);
        const StrokeFont& font = fonts.at(p.font_id);
        Mat2 lin = phrase_linear(p);
        PhraseLayout layout = layout_phrase(font, p.text, p.rendered_height);
        Box box = transformed_box(layout, lin);
        double fit = std::min({1.0, 0.92 * canvas_w / std::max(1e-9, box.x1 - box.x0),
                               0.92 * canvas_h / std::max(1e-9, box.y1 - box.y0)});
        if (fit < 1.0) {
            p.rendered_height = std::max(7.0, p.rendered_height * fit);
            layout = layout_phrase(font, p.text, p.rendered_height);
            box = transformed_box(layout, lin);
        }

        // Placement: uniform over anchors keeping the box on canvas, with
        // overlap rejection for up to 50 tries (overlap allowed afterwards).
        double lo_x = -box.x0, hi_x = canvas_w - box.x1;
        double lo_y = -box.y0, hi_y = canvas_h - box.y1;
        bool fits_x = lo_x <= hi_x, fits_y = lo_y <= hi_y;
        Box chosen{};
        for (int attempt = 0; attempt < 50; ++attempt) {
            p.anchor_x = fits_x ? rng.uniform(lo_x, hi_x) : 0.5 * canvas_w - 0.5 * (box.x0 + box.x1);
            p.anchor_y = fits_y ? rng.uniform(lo_y, hi_y) : 0.5 * canvas_h - 0.5 * (box.y0 + box.y1);
            chosen = Box{box.x0 + p.anchor_x, box.y0 + p.anchor_y, box.x1 + p.anchor_x,
                         box.y1 + p.anchor_y};
            bool overlap = false;
            for (const auto& other : placed)
                if (chosen.intersects(other)) {
                    overlap = true;
                    break;
                }
            if (!overlap || (!fits_x && !fits_y)) break;
        }
        placed.push_back(chosen);
        scene.phrases.push_back(std::move(p));
    }
    return scene;
}

// ---------------------------------------------------------------------------
// rasterization
// ---------------------------------------------------------------------------

BinaryMask render_mask(const RenderScene& scene, const FontInventory& fonts) {
    check_shape(!scene.phrases.empty() && scene.phrases.size() <= 7,
                "render_mask: scene must hold 1-7 phrases");
    BinaryMask mask(scene.canvas_h, scene.canvas_w);
    for (const auto& p : scene.phrases) {
        const StrokeFont& font = fonts.at(p.font_id);
        PhraseLayout layout = layout_phrase(font, p.text, p.rendered_height);
        if (layout.glyphs.empty()) continue;
        Mat2 lin = phrase_linear(p);
        Mat2 inv = lin.inverse();
        double cx = 0.5 * layout.width, cy = 0.5 * layout.height;
        Box box = transformed_box(layout, lin);
        int px0 = std::max(0, static_cast<int>(std::floor(box.x0 + p.anchor_x)));
        int px1 = std::min(scene.canvas_w - 1, static_cast<int>(std::ceil(box.x1 + p.anchor_x)));
        int py0 = std::max(0, static_cast<int>(std::floor(box.y0 + p.anchor_y)));
        int py1 = std::min(scene.canvas_h - 1, static_cast<int>(std::ceil(box.y1 + p.anchor_y)));
        double r = layout.radius;
        for (int py = py0; py <= py1; ++py) {
            for (int px = px0; px <= px1; ++px) {
                if (mask.at(py, px)) continue;
                double lx, ly;
                inv.apply(px + 0.5 - p.anchor_x, py + 0.5 - p.anchor_y, lx, ly);
                lx += cx;
                ly += cy;
                bool hit = false;
                for (const auto& run : layout.glyphs) {
                    if (lx < run.bx0 - r || lx > run.bx1 + r || ly < run.by0 - r ||
                        ly > run.by1 + r)
                        continue;
                    for (const auto& seg : run.segments) {
                        if (segment_covers(seg, lx, ly, r, layout.cap)) {
                            hit = true;
                            break;
                        }
                    }
                    if (hit) break;
                }
                if (hit) mask.set(py, px, true);
            }
        }
    }
    return mask;
}

// ---------------------------------------------------------------------------
// compositor
// ---------------------------------------------------------------------------

namespace {

double hash01(uint64_t seed, uint64_t idx) {
    return static_cast<double>(splitmix64(seed ^ splitmix64(idx)) >> 11) * 0x1.0p-53;
}

struct FillField {
    const StylePlan* plan;
    bool foreground;
    int h, w;
    Tensor bg_image;  // empty unless FillKind::Image

    void color_at(int r, int c, double out[3]) const {
        FillKind kind = foreground ? plan->fg : plan->bg;
        const double* c1 = foreground ? plan->fg_color : plan->bg_color;
        const double* c2 = foreground ? plan->fg_color2 : plan->bg_color2;
        switch (kind) {
            case FillKind::Solid:
                for (int ch = 0; ch < 3; ++ch) out[ch] = c1[ch];
                return;
            case FillKind::Gradient: {
                double angle = foreground ? plan->fg_angle : plan->bg_angle;
                double dx = std::cos(angle), dy = std::sin(angle);
                double proj = (c + 0.5) * dx + (r + 0.5) * dy;
                double span = std::fabs(w * dx) + std::fabs(h * dy);
                double t = span > 0 ? std::clamp((proj - std::min(0.0, w * dx) -
                                                  std::min(0.0, h * dy)) / span, 0.0, 1.0)
                                    : 0.0;
                for (int ch = 0; ch < 3; ++ch) out[ch] = (1 - t) * c1[ch] + t * c2[ch];
                return;
            }
            case FillKind::Noise: {
                uint64_t base = plan->noise_seed + (foreground ? 0x9e3779b9ULL : 0x7f4a7c15ULL);
                size_t idx = (static_cast<size_t>(r) * w + c) * 3;
                for (int ch = 0; ch < 3; ++ch) {
                    double u = hash01(base, idx + static_cast<size_t>(ch));
                    out[ch] = std::clamp(c1[ch] + plan->noise_amp * (2.0 * u - 1.0), 0.0, 1.0);
                }
                return;
            }
            case FillKind::Image:
                for (int ch = 0; ch < 3; ++ch)
                    out[ch] = bg_image.empty() ? c1[ch] : bg_image.at(r, c, ch);
                return;
        }
    }
};

StylePlan sample_style_plan(Rng& rng, bool allow_bg_image, int n_bg_images) {
    StylePlan plan;
    auto pick_color = [&](double* c) {
        for (int ch = 0; ch < 3; ++ch) c[ch] = rng.uniform();
    };
    plan.fg = static_cast<FillKind>(rng.uniform_int(0, 2));
    pick_color(plan.fg_color);
    pick_color(plan.fg_color2);
    plan.fg_angle = rng.uniform(0.0, 6.283185307179586);
    int bg_max = allow_bg_image && n_bg_images > 0 ? 3 : 2;
    plan.bg = static_cast<FillKind>(rng.uniform_int(0, bg_max));
    pick_color(plan.bg_color);
    pick_color(plan.bg_color2);
    plan.bg_angle = rng.uniform(0.0, 6.283185307179586);
    if (plan.bg == FillKind::Image) plan.bg_image_index = rng.uniform_int(0, n_bg_images - 1);
    plan.noise_seed = rng.next_u64();
    plan.shadow = rng.bernoulli(0.4);
    plan.shadow_dx = rng.uniform_int(1, 3);
    plan.shadow_dy = rng.uniform_int(1, 3);
    plan.blur = rng.bernoulli(0.3);
    return plan;
}

double region_contrast(const BinaryMask& mask, const FillField& fg, const FillField& bg) {
    double fg_mean[3] = {0, 0, 0}, bg_mean[3] = {0, 0, 0};
    size_t fg_n = 0, bg_n = 0;
    double color[3];
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            if (mask.at(r, c)) {
                fg.color_at(r, c, color);
                for (int ch = 0; ch < 3; ++ch) fg_mean[ch] += color[ch];
                ++fg_n;
            } else {
                bg.color_at(r, c, color);
                for (int ch = 0; ch < 3; ++ch) bg_mean[ch] += color[ch];
                ++bg_n;
            }
        }
    }
    if (fg_n == 0 || bg_n == 0) return 1.0;  // single-region image: check is vacuous
    double diff = 0.0;
    for (int ch = 0; ch < 3; ++ch)
        diff += std::fabs(fg_mean[ch] / fg_n - bg_mean[ch] / bg_n);
    return diff / 3.0;
}

Tensor load_background(const StylePlan& plan, const std::vector<std::string>* paths, int h, int w) {
    if (plan.bg != FillKind::Image || !paths || plan.bg_image_index < 0 ||
        plan.bg_image_index >= static_cast<int>(paths->size()))
        return Tensor();
    Tensor img = load_image_rgb((*paths)[static_cast<size_t>(plan.bg_image_index)]);
    return resize_bilinear_plain(img, h, w);
}

}  // namespace

Tensor composite_with_plan(const BinaryMask& mask, const StylePlan& plan,
                           const std::vector<std::string>* background_paths) {
    int h = mask.height, w = mask.width;
    FillField fg{&plan, true, h, w, Tensor()};
    FillField bg{&plan, false, h, w, load_background(plan, background_paths, h, w)};
    Tensor img({h, w, 3});
    double color[3];
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            bool is_fg = mask.at(r, c) != 0;
            (is_fg ? fg : bg).color_at(r, c, color);
            if (!is_fg && plan.shadow && mask.fg(r - plan.shadow_dy, c - plan.shadow_dx))
                for (int ch = 0; ch < 3; ++ch) color[ch] *= 0.55;
            for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = color[ch];
        }
    }
    if (plan.blur) {
        Tensor blurred({h, w, 3});
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                for (int ch = 0; ch < 3; ++ch) {
                    double acc = 0.0;
                    int n = 0;
                    for (int dr = -1; dr <= 1; ++dr) {
                        for (int dc = -1; dc <= 1; ++dc) {
                            int rr = r + dr, cc = c + dc;
                            if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                            acc += img.at(rr, cc, ch);
                            ++n;
                        }
                    }
                    blurred.at(r, c, ch) = acc / n;
                }
            }
        }
        img = std::move(blurred);
    }
    return img;
}

Tensor composite_image(const BinaryMask& mask, uint64_t style_seed,
                       const std::vector<std::string>* background_paths) {
    Rng rng(mix_seed(style_seed, 0x7374796cULL));
    int n_bg = background_paths ? static_cast<int>(background_paths->size()) : 0;
    for (int attempt = 0; attempt < 16; ++attempt) {
        StylePlan plan = sample_style_plan(rng, n_bg > 0, n_bg);
        FillField fg{&plan, true, mask.height, mask.width, Tensor()};
        FillField bg{&plan, false, mask.height, mask.width,
                     load_background(plan, background_paths, mask.height, mask.width)};
        if (region_contrast(mask, fg, bg) >= 0.1)
            return composite_with_plan(mask, plan, background_paths);
    }
    // Contrast floor not met after 16 draws: fall back to fixed contrasting solids.
    StylePlan plan;
    plan.fg = plan.bg = FillKind::Solid;
    for (int ch = 0; ch < 3; ++ch) {
        plan.fg_color[ch] = 0.85;
        plan.bg_color[ch] = 0.15;
    }
    return composite_with_plan(mask, plan, background_paths);
}

// ---------------------------------------------------------------------------
// dataset generation
// ---------------------------------------------------------------------------

std::vector<std::string> load_corpus(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open corpus: " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(is, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    if (words.empty()) throw ValueError("corpus is empty: " + path);
    return words;
}

void generate_dataset(const GenerateConfig& cfg) {
    if (cfg.count < 1) throw ValueError("generate_dataset: count must be >= 1");
    FontInventory fonts = FontInventory::load_dir(cfg.fonts_dir);
    std::vector<std::string> corpus = load_corpus(cfg.corpus_path);

    std::vector<std::string> bg_paths;
    if (!cfg.backgrounds_dir.empty()) {
        for (const auto& e : fs::directory_iterator(cfg.backgrounds_dir))
            if (e.is_regular_file() && e.path().extension() == ".png")
                bg_paths.push_back(e.path().string());
        std::sort(bg_paths.begin(), bg_paths.end());
    }

    std::error_code ec;
    fs::create_directories(fs::path(cfg.out_dir) / "image", ec);
    fs::create_directories(fs::path(cfg.out_dir) / "mask", ec);
    if (cfg.write_skeletons) fs::create_directories(fs::path(cfg.out_dir) / "skeleton", ec);
    std::ofstream meta(fs::path(cfg.out_dir) / "meta.jsonl");
    if (!meta) throw IoError("cannot write to " + cfg.out_dir);

    for (int i = 0; i < cfg.count; ++i) {
        RenderScene scene;
        BinaryMask mask;
        uint64_t scene_seed = 0;
        // Regenerate degenerate canvases (empty or nearly solid foreground).
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 8) throw ValueError("generate_dataset: cannot produce a usable mask");
            scene_seed = mix_seed(cfg.master_seed, static_cast<uint64_t>(i), 100 + attempt);
            scene = sample_scene(corpus, fonts, cfg.canvas_h, cfg.canvas_w, scene_seed);
            mask = render_mask(scene, fonts);
            double ratio = static_cast<double>(mask.foreground_count()) / mask.data.size();
            if (ratio > 0.0 && ratio < 0.9) break;
        }
        uint64_t style_seed = mix_seed(cfg.master_seed, static_cast<uint64_t>(i), 200);
        Tensor image = composite_image(mask, style_seed, bg_paths.empty() ? nullptr : &bg_paths);

        char name[16];
        std::snprintf(name, sizeof(name), "%06d.png", i);
        save_image_rgb((fs::path(cfg.out_dir) / "image" / name).string(), image);
        save_mask_png((fs::path(cfg.out_dir) / "mask" / name).string(), mask);
        if (cfg.write_skeletons)
            save_mask_png((fs::path(cfg.out_dir) / "skeleton" / name).string(),
                          zhang_suen_thin(mask));

        json rec;
        rec["index"] = i;
        rec["scene_seed"] = scene_seed;
        rec["style_seed"] = style_seed;
        rec["canvas"] = {cfg.canvas_h, cfg.canvas_w};
        json phrases = json::array();
        for (const auto& p : scene.phrases) {
            json jp;
            jp["text"] = p.text;
            jp["font_id"] = p.font_id;
            jp["font"] = fonts.at(p.font_id).name;
            jp["rotation_deg"] = p.rotation_deg;
            jp["affine"] = {{p.affine[0][0], p.affine[0][1]}, {p.affine[1][0], p.affine[1][1]}};
            jp["anchor"] = {p.anchor_x, p.anchor_y};
            jp["height"] = p.rendered_height;
            phrases.push_back(jp);
        }
        rec["phrases"] = phrases;
        meta << rec.dump() << "\n";
    }
}

}  // namespace textseg
