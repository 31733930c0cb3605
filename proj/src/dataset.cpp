#include "textseg/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "textseg/error.hpp"
#include "textseg/image_io.hpp"
#include "textseg/rng.hpp"
#include "textseg/skeleton.hpp"

namespace textseg {

namespace fs = std::filesystem;

std::vector<SegSample> load_archive(const std::string& dir) {
    fs::path root(dir);
    if (!fs::is_directory(root / "image") || !fs::is_directory(root / "mask"))
        throw IoError("not a dataset archive (missing image/ or mask/): " + dir);

    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(root / "image"))
        if (e.is_regular_file() && e.path().extension() == ".png")
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw IoError("archive has no images: " + dir);

    std::vector<std::string> meta_lines;
    {
        std::ifstream meta(root / "meta.jsonl");
        std::string line;
        while (std::getline(meta, line)) meta_lines.push_back(line);
    }

    std::vector<SegSample> samples;
    samples.reserve(names.size());
    for (size_t i = 0; i < names.size(); ++i) {
        SegSample s;
        s.image = load_image_rgb((root / "image" / names[i]).string());
        s.mask = load_mask_png((root / "mask" / names[i]).string());
        if (s.mask.height != s.image.dim(0) || s.mask.width != s.image.dim(1))
            throw ShapeError("archive image/mask size mismatch at " + names[i]);
        fs::path skel = root / "skeleton" / names[i];
        s.skeleton = fs::exists(skel) ? load_mask_png(skel.string()) : zhang_suen_thin(s.mask);
        if (i < meta_lines.size()) s.meta = meta_lines[i];
        samples.push_back(std::move(s));
    }
    return samples;
}

bool is_validation_index(size_t index) { return splitmix64(index) % 10 == 0; }

}  // namespace textseg
