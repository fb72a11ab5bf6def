#include "salient/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>

#include <jpeglib.h>
#include <png.h>

#include "salient/error.hpp"

namespace salient {

CanvasImage::CanvasImage(int width, int height, int channels, std::optional<double> density,
                         std::string source_id)
    : CanvasImage(width, height, channels, density, std::move(source_id),
                  std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                            std::max(height, 0) * std::max(channels, 0))) {}

CanvasImage::CanvasImage(int width, int height, int channels, std::optional<double> density,
                         std::string source_id, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), channels_(channels), density_(density),
      source_id_(std::move(source_id)), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1)
        throw data_error("image dimensions must be at least 1x1");
    if (channels != 1 && channels != 3)
        throw data_error("image must have 1 or 3 channels, got " + std::to_string(channels));
    if (density && !(*density > 0.0))
        throw data_error("density must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height * channels)
        throw data_error("pixel buffer length does not match dimensions");
}

void CanvasImage::set_density(double px_per_cm) {
    if (!(px_per_cm > 0.0) || !std::isfinite(px_per_cm))
        throw data_error("density must be positive");
    density_ = px_per_cm;
}

GrayMap CanvasImage::gray() const {
    if (channels_ != 1)
        throw data_error("gray view requires a single-channel image");
    return GrayMap(pixels_.data(), height_, width_);
}

CanvasImage CanvasImage::crop(int x, int y, int w, int h) const {
    if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > width_ || y + h > height_)
        throw data_error("crop window outside image");
    CanvasImage out(w, h, channels_, density_, source_id_);
    const std::size_t row_bytes = static_cast<std::size_t>(w) * channels_;
    for (int r = 0; r < h; ++r) {
        const auto* src = pixels_.data() + index(x, y + r, 0);
        std::copy(src, src + row_bytes, out.pixels_.data() + r * row_bytes);
    }
    return out;
}

int scaled_dimension(int dim, double ratio) {
    return std::max(1, static_cast<int>(std::lround(dim * ratio)));
}

namespace {

struct Tap {
    int src;
    double weight;
};

// Per-output-sample source taps along one axis.
std::vector<std::vector<Tap>> axis_taps(int src_len, int dst_len) {
    std::vector<std::vector<Tap>> taps(dst_len);
    const double scale = static_cast<double>(src_len) / dst_len;
    if (dst_len <= src_len) {
        // Box filter: integrate the source over the footprint [i*scale, (i+1)*scale).
        for (int i = 0; i < dst_len; ++i) {
            const double lo = i * scale;
            const double hi = (i + 1) * scale;
            const int first = static_cast<int>(std::floor(lo));
            const int last = std::min(src_len - 1, static_cast<int>(std::ceil(hi)) - 1);
            for (int s = first; s <= last; ++s) {
                const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
                if (overlap > 0.0)
                    taps[i].push_back({s, overlap / scale});
            }
        }
    } else {
        // Bilinear with pixel-centre alignment, clamped at the borders.
        for (int i = 0; i < dst_len; ++i) {
            const double pos = std::clamp((i + 0.5) * scale - 0.5, 0.0, src_len - 1.0);
            const int s0 = static_cast<int>(std::floor(pos));
            const int s1 = std::min(s0 + 1, src_len - 1);
            const double t = pos - s0;
            taps[i].push_back({s0, 1.0 - t});
            if (s1 != s0 && t > 0.0)
                taps[i].push_back({s1, t});
        }
    }
    return taps;
}

}  // namespace

CanvasImage resize(const CanvasImage& img, int width, int height) {
    if (width < 1 || height < 1)
        throw data_error("resize target must be at least 1x1");
    std::optional<double> density;
    if (img.density())
        density = *img.density() * static_cast<double>(width) / img.width();
    if (width == img.width() && height == img.height()) {
        CanvasImage copy = img;
        return copy;
    }

    const int ch = img.channels();
    const auto xtaps = axis_taps(img.width(), width);
    const auto ytaps = axis_taps(img.height(), height);

    // Horizontal pass into a double buffer of size (src height) x width x ch.
    std::vector<double> rows(static_cast<std::size_t>(img.height()) * width * ch, 0.0);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (const Tap& t : xtaps[x])
                    acc += t.weight * img.at(t.src, y, c);
                rows[(static_cast<std::size_t>(y) * width + x) * ch + c] = acc;
            }

    CanvasImage out(width, height, ch, density, img.source_id());
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (const Tap& t : ytaps[y])
                    acc += t.weight * rows[(static_cast<std::size_t>(t.src) * width + x) * ch + c];
                out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
            }
    return out;
}

CanvasImage resample_to_density(const CanvasImage& img, double target_density) {
    if (!img.density())
        throw data_error("density required: image '" + img.source_id() +
                         "' has no known pixels-per-cm");
    if (!(target_density > 0.0) || !std::isfinite(target_density))
        throw data_error("target density must be positive");
    const double source = *img.density();
    if (source == target_density)
        return img;
    const double ratio = target_density / source;
    CanvasImage out = resize(img, scaled_dimension(img.width(), ratio),
                             scaled_dimension(img.height(), ratio));
    out.set_density(target_density);
    return out;
}

CanvasImage to_luminance(const CanvasImage& img) {
    if (img.channels() == 1)
        return img;
    CanvasImage out(img.width(), img.height(), 1, img.density(), img.source_id());
    const auto& px = img.pixels();
    auto& dst = out.pixels();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const double y = 0.299 * px[3 * i] + 0.587 * px[3 * i + 1] + 0.114 * px[3 * i + 2];
        dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
    }
    return out;
}

// ---------------------------------------------------------------------------
// File I/O

namespace {

bool has_jpeg_magic(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    unsigned char magic[3] = {0, 0, 0};
    in.read(reinterpret_cast<char*>(magic), 3);
    return in.gcount() == 3 && magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF;
}

CanvasImage read_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw data_error("cannot read PNG '" + path.string() + "': " + image.message);
    const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
    image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    const int channels = gray ? 1 : 3;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw data_error("cannot decode PNG '" + path.string() + "': " + msg);
    }
    return CanvasImage(static_cast<int>(image.width), static_cast<int>(image.height), channels,
                       std::nullopt, path.stem().string(), std::move(pixels));
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf escape;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_escape(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->escape, 1);
}

CanvasImage read_jpeg(const std::filesystem::path& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!file)
        throw data_error("cannot open '" + path.string() + "'");

    jpeg_decompress_struct cinfo{};
    JpegErrorManager jerr{};
    cinfo.err = jpeg_std_error(&jerr.base);
    jerr.base.error_exit = &jpeg_escape;
    std::vector<std::uint8_t> pixels;
    int w = 0, h = 0, ch = 0;
    if (setjmp(jerr.escape)) {
        jpeg_destroy_decompress(&cinfo);
        throw data_error("cannot decode JPEG '" + path.string() + "': " + jerr.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    w = static_cast<int>(cinfo.output_width);
    h = static_cast<int>(cinfo.output_height);
    ch = cinfo.output_components;
    pixels.resize(static_cast<std::size_t>(w) * h * ch);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * ch;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return CanvasImage(w, h, ch, std::nullopt, path.stem().string(), std::move(pixels));
}

}  // namespace

CanvasImage read_image(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path))
        throw data_error("image not found: '" + path.string() + "'");
    return has_jpeg_magic(path) ? read_jpeg(path) : read_png(path);
}

namespace {

void write_png_raw(const std::uint8_t* data, int width, int height, png_uint_32 format,
                   const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr))
        throw data_error("cannot write PNG '" + path.string() + "': " + image.message);
}

}  // namespace

void write_png(const CanvasImage& img, const std::filesystem::path& path) {
    write_png_raw(img.pixels().data(), img.width(), img.height(),
                  img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB, path);
}

void write_png_rgba(const std::vector<std::uint8_t>& rgba, int width, int height,
                    const std::filesystem::path& path) {
    if (rgba.size() != static_cast<std::size_t>(width) * height * 4)
        throw data_error("RGBA buffer length does not match dimensions");
    write_png_raw(rgba.data(), width, height, PNG_FORMAT_RGBA, path);
}

}  // namespace salient
