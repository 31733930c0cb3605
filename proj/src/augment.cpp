#include "textseg/augment.hpp"

#include <algorithm>
#include <cmath>

#include "textseg/autodiff.hpp"
#include "textseg/error.hpp"
#include "textseg/skeleton.hpp"

namespace textseg {

AugmentParams sample_augment_params(Rng& rng) {
    AugmentParams p;
    p.scale = rng.uniform(0.5, 2.0);
    p.brightness = rng.uniform(0.75, 1.25);
    p.contrast = rng.uniform(0.75, 1.25);
    p.saturation = rng.uniform(0.75, 1.25);
    p.hflip = rng.bernoulli(0.5);
    p.crop_rx = rng.uniform();
    p.crop_ry = rng.uniform();
    return p;
}

namespace {

void color_jitter(Tensor& img, const AugmentParams& p) {
    if (p.brightness == 1.0 && p.contrast == 1.0 && p.saturation == 1.0) return;
    int h = img.dim(0), w = img.dim(1);
    double mean_gray = 0.0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            mean_gray += 0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
    mean_gray /= h * w;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double gray =
                0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
            for (int ch = 0; ch < 3; ++ch) {
                double v = img.at(r, c, ch) * p.brightness;
                v = (v - mean_gray) * p.contrast + mean_gray;
                v = v * p.saturation + gray * (1.0 - p.saturation);
                img.at(r, c, ch) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
}

Tensor pad_image(const Tensor& img, int h, int w) {
    Tensor out({h, w, 3});
    for (int r = 0; r < img.dim(0); ++r)
        for (int c = 0; c < img.dim(1); ++c)
            for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = img.at(r, c, ch);
    return out;
}

BinaryMask pad_mask(const BinaryMask& m, int h, int w) {
    BinaryMask out(h, w);
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) out.set(r, c, m.at(r, c) != 0);
    return out;
}

}  // namespace

SegSample apply_augment(const SegSample& sample, const AugmentParams& p, int crop) {
    check_shape(crop >= 1, "augment: bad crop size");
    SegSample out;

    // Scale jitter.
    Tensor img = sample.image;
    BinaryMask mask = sample.mask;
    if (p.scale != 1.0) {
        int nh = std::max(1, static_cast<int>(std::lround(img.dim(0) * p.scale)));
        int nw = std::max(1, static_cast<int>(std::lround(img.dim(1) * p.scale)));
        img = resize_bilinear_plain(img, nh, nw);
        mask = nearest_resize(mask, nh, nw);
    }

    color_jitter(img, p);

    // Pad then crop.
    int ph = std::max(img.dim(0), crop), pw = std::max(img.dim(1), crop);
    if (ph != img.dim(0) || pw != img.dim(1)) {
        img = pad_image(img, ph, pw);
        mask = pad_mask(mask, ph, pw);
    }
    int r0 = static_cast<int>(std::lround(p.crop_ry * (ph - crop)));
    int c0 = static_cast<int>(std::lround(p.crop_rx * (pw - crop)));
    if (ph != crop || pw != crop) {
        Tensor cropped({crop, crop, 3});
        for (int r = 0; r < crop; ++r)
            for (int c = 0; c < crop; ++c)
                for (int ch = 0; ch < 3; ++ch) cropped.at(r, c, ch) = img.at(r0 + r, c0 + c, ch);
        img = std::move(cropped);
        mask = textseg::crop(mask, r0, c0, crop, crop);
    }

    if (p.hflip) {
        Tensor flipped(img.shape);
        for (int r = 0; r < crop; ++r)
            for (int c = 0; c < crop; ++c)
                for (int ch = 0; ch < 3; ++ch) flipped.at(r, c, ch) = img.at(r, crop - 1 - c, ch);
        img = std::move(flipped);
        mask = flip_horizontal(mask);
    }

    out.image = std::move(img);
    out.mask = std::move(mask);
    out.skeleton = zhang_suen_thin(out.mask);
    out.meta = sample.meta;
    return out;
}

SegSample augment(const SegSample& sample, uint64_t seed, int crop) {
    Rng rng(seed);
    return apply_augment(sample, sample_augment_params(rng), crop);
}

}  // namespace textseg
