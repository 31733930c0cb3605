// Stroke-font loading and glyph geometry.
//
// Fonts are standalone JSON files: polyline strokes per glyph on a
// units_per_em grid (y grows downward), plus a stroke width and cap style.
// The repo ships a set of decorative fonts under assets/fonts/; any file in
// the same format can be dropped into a font directory.

#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

namespace textseg {

struct Glyph {
    double advance = 0.0;
    // Each stroke is a polyline of (x, y) points in em units.
    std::vector<std::vector<std::array<double, 2>>> strokes;
};

enum class CapStyle { Round, Square, Butt };

struct StrokeFont {
    std::string name;
    double units_per_em = 100.0;
    double stroke_width = 10.0;  // em units
    double space_advance = 40.0;
    double letter_spacing = 6.0;
    CapStyle cap = CapStyle::Round;
    std::unordered_map<char, Glyph> glyphs;

    static StrokeFont load(const std::string& path);

    // Lookup with lower->upper fallback; nullptr when the font cannot draw c.
    const Glyph* find(char c) const;
};

struct FontInventory {
    std::vector<StrokeFont> fonts;

    // Loads every *.json in the directory, sorted by filename. Throws IoError
    // if the directory has no fonts.
    static FontInventory load_dir(const std::string& dir);

    const StrokeFont& at(int font_id) const;  // ValueError naming the id if unresolvable
    int size() const { return static_cast<int>(fonts.size()); }
};

}  // namespace textseg
