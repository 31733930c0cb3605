#include "textseg/fonts.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "textseg/error.hpp"

namespace textseg {

using nlohmann::json;

StrokeFont StrokeFont::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open font: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed font file " + path + ": " + e.what());
    }
    StrokeFont f;
    f.name = j.value("name", std::filesystem::path(path).stem().string());
    f.units_per_em = j.value("units_per_em", 100.0);
    f.stroke_width = j.value("stroke_width", 10.0);
    f.space_advance = j.value("space_advance", 40.0);
    f.letter_spacing = j.value("letter_spacing", 6.0);
    std::string cap = j.value("cap", "round");
    f.cap = cap == "square" ? CapStyle::Square : cap == "butt" ? CapStyle::Butt : CapStyle::Round;
    for (auto& [key, g] : j.at("glyphs").items()) {
        if (key.size() != 1) throw IoError("font " + path + ": glyph keys must be single chars");
        Glyph glyph;
        glyph.advance = g.at("advance").get<double>();
        for (auto& stroke : g.at("strokes")) {
            std::vector<std::array<double, 2>> poly;
            for (auto& pt : stroke) poly.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
            if (poly.size() >= 2) glyph.strokes.push_back(std::move(poly));
        }
        f.glyphs[key[0]] = std::move(glyph);
    }
    return f;
}

const Glyph* StrokeFont::find(char c) const {
    auto it = glyphs.find(c);
    if (it != glyphs.end()) return &it->second;
    char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    it = glyphs.find(up);
    return it != glyphs.end() ? &it->second : nullptr;
}

FontInventory FontInventory::load_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("font directory not found: " + dir);
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());
    FontInventory inv;
    for (const auto& p : paths) inv.fonts.push_back(StrokeFont::load(p));
    if (inv.fonts.empty()) throw IoError("no fonts (*.json) in " + dir);
    return inv;
}

const StrokeFont& FontInventory::at(int font_id) const {
    if (font_id < 0 || font_id >= size())
        throw ValueError("unresolvable font id " + std::to_string(font_id) + " (inventory has " +
                         std::to_string(size()) + " fonts)");
    return fonts[static_cast<size_t>(font_id)];
}

}  // namespace textseg
