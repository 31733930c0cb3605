#include "textseg/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "textseg/error.hpp"

namespace textseg {

Tensor load_image_rgb(const std::string& path) {
    cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);  // BGR
    if (img.empty()) throw IoError("cannot read image: " + path);
    Tensor t({img.rows, img.cols, 3});
    for (int r = 0; r < img.rows; ++r) {
        const cv::Vec3b* row = img.ptr<cv::Vec3b>(r);
        for (int c = 0; c < img.cols; ++c) {
            t.at(r, c, 0) = row[c][2] / 255.0;
            t.at(r, c, 1) = row[c][1] / 255.0;
            t.at(r, c, 2) = row[c][0] / 255.0;
        }
    }
    return t;
}

void save_image_rgb(const std::string& path, const Tensor& hwc) {
    check_shape(hwc.ndim() == 3 && hwc.dim(2) == 3, "save_image_rgb: (H,W,3) expected");
    cv::Mat img(hwc.dim(0), hwc.dim(1), CV_8UC3);
    for (int r = 0; r < img.rows; ++r) {
        cv::Vec3b* row = img.ptr<cv::Vec3b>(r);
        for (int c = 0; c < img.cols; ++c) {
            auto to8 = [&](int ch) {
                double v = hwc.at(r, c, ch);
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                return static_cast<uint8_t>(v * 255.0 + 0.5);
            };
            row[c] = cv::Vec3b(to8(2), to8(1), to8(0));
        }
    }
    if (!cv::imwrite(path, img)) throw IoError("cannot write image: " + path);
}

BinaryMask load_mask_png(const std::string& path) {
    cv::Mat img = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (img.empty()) throw IoError("cannot read mask: " + path);
    BinaryMask m(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r) {
        const uint8_t* row = img.ptr<uint8_t>(r);
        for (int c = 0; c < img.cols; ++c) m.set(r, c, row[c] > 127);
    }
    return m;
}

void save_mask_png(const std::string& path, const BinaryMask& mask) {
    cv::Mat img(mask.height, mask.width, CV_8UC1);
    for (int r = 0; r < mask.height; ++r) {
        uint8_t* row = img.ptr<uint8_t>(r);
        for (int c = 0; c < mask.width; ++c) row[c] = mask.at(r, c) ? 255 : 0;
    }
    if (!cv::imwrite(path, img)) throw IoError("cannot write mask: " + path);
}

void save_gray_png(const std::string& path, const Tensor& hw) {
    check_shape(hw.ndim() == 2, "save_gray_png: (H,W) expected");
    cv::Mat img(hw.dim(0), hw.dim(1), CV_8UC1);
    for (int r = 0; r < img.rows; ++r) {
        uint8_t* row = img.ptr<uint8_t>(r);
        for (int c = 0; c < img.cols; ++c) {
            double v = hw.at(r, c);
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            row[c] = static_cast<uint8_t>(v * 255.0 + 0.5);
        }
    }
    if (!cv::imwrite(path, img)) throw IoError("cannot write image: " + path);
}

Tensor make_overlay(const Tensor& image_hwc, const BinaryMask& mask, const BinaryMask* skeleton) {
    check_shape(image_hwc.ndim() == 3 && image_hwc.dim(2) == 3, "make_overlay: (H,W,3) expected");
    check_shape(image_hwc.dim(0) == mask.height && image_hwc.dim(1) == mask.width,
                "make_overlay: image/mask size mismatch");
    Tensor out = image_hwc;
    const double tint[3] = {1.0, 0.15, 0.15};
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            if (mask.at(r, c)) {
                for (int ch = 0; ch < 3; ++ch)
                    out.at(r, c, ch) = 0.5 * out.at(r, c, ch) + 0.5 * tint[ch];
            }
            if (skeleton && skeleton->fg(r, c)) {
                out.at(r, c, 0) = 0.1;
                out.at(r, c, 1) = 1.0;
                out.at(r, c, 2) = 0.1;
            }
        }
    }
    return out;
}

}  // namespace textseg
