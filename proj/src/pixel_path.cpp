#include "textseg/pixel_path.hpp"

#include "textseg/error.hpp"

namespace textseg {

namespace {

void add_conv(ParamStore& s, const std::string& name, int kh, int kw, int cin, int cout, Rng& rng,
              bool bias = true) {
    init_xavier_uniform(s.add(name + ".w", {kh, kw, cin, cout}), kh * kw * cin, kh * kw * cout, rng);
    if (bias) init_constant(s.add(name + ".b", {cout}), 0.0);
}

Value conv(Graph& g, Value x, ParamStore& s, const std::string& name, int stride, int pad) {
    Value b = s.has(name + ".b") ? g.param(s.get(name + ".b")) : nullptr;
    return conv2d(g, x, g.param(s.get(name + ".w")), b, stride, pad);
}

}  // namespace

void register_pixel_path_params(ParamStore& s, const PixelPathConfig& cfg, Rng& rng) {
    int c = cfg.channel_dim;
    if (c < 2 || c % 2 != 0) throw ValueError("pixel path: channel_dim must be even and >= 2");
    int cs = c / 2;  // stem width
    add_conv(s, "pixel.stem", 3, 3, 3, cs, rng);
    add_conv(s, "pixel.enc2", 3, 3, cs, c, rng);
    add_conv(s, "pixel.enc3", 3, 3, c, c, rng);
    add_conv(s, "pixel.enc4", 3, 3, c, c, rng);
    add_conv(s, "pixel.enc5", 3, 3, c, c, rng);
    add_conv(s, "pixel.lat32", 1, 1, c, c, rng);
    add_conv(s, "pixel.lat16", 1, 1, c, c, rng);
    add_conv(s, "pixel.lat8", 1, 1, c, c, rng);
    add_conv(s, "pixel.lat4", 1, 1, c, c, rng);
    add_conv(s, "pixel.embed", 1, 1, c, c, rng);
}

FeaturePyramid encode(Graph& g, const Tensor& image, ParamStore& s, const PixelPathConfig& cfg) {
    check_shape(image.ndim() == 3 && image.dim(2) == 3, "encode: image must be (H, W, 3)");
    int h = image.dim(0), w = image.dim(1);
    if (h % 32 != 0 || w % 32 != 0)
        throw ShapeError("encode: image dimensions must be divisible by 32, got " +
                         image.shape_str());
    if (!image.all_finite()) throw ValueError("encode: non-finite image values");

    Value x = g.constant(image);
    Value f2 = relu(g, conv(g, x, s, "pixel.stem", 2, 1));    // stride 2
    Value f4 = relu(g, conv(g, f2, s, "pixel.enc2", 2, 1));   // stride 4
    Value f8 = relu(g, conv(g, f4, s, "pixel.enc3", 2, 1));   // stride 8
    Value f16 = relu(g, conv(g, f8, s, "pixel.enc4", 2, 1));  // stride 16
    Value f32 = relu(g, conv(g, f16, s, "pixel.enc5", 2, 1)); // stride 32

    Value p32 = conv(g, f32, s, "pixel.lat32", 1, 0);
    Value p16 = add(g, conv(g, f16, s, "pixel.lat16", 1, 0),
                    resize_bilinear(g, p32, h / 16, w / 16));
    Value p8 = add(g, conv(g, f8, s, "pixel.lat8", 1, 0), resize_bilinear(g, p16, h / 8, w / 8));
    Value p4 = add(g, conv(g, f4, s, "pixel.lat4", 1, 0), resize_bilinear(g, p8, h / 4, w / 4));

    FeaturePyramid out;
    out.levels = {p32, p16, p8};
    out.pixel_embedding = conv(g, p4, s, "pixel.embed", 1, 0);
    out.channel_dim = cfg.channel_dim;
    return out;
}

}  // namespace textseg
