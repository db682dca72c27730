// PNG (libpng) and PNM codecs.

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "depthvote/imgio.hpp"

namespace depthvote::io {

namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string lower_ext(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

// Decoded PNG samples, interleaved, one or two bytes per sample.
struct RawRaster {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<std::uint16_t> samples;
};

struct MemoryReader {
    std::string_view bytes;
    std::size_t pos = 0;
};

void png_error_handler(png_structp png, png_const_charp msg) {
    auto* message = static_cast<std::string*>(png_get_error_ptr(png));
    if (message) *message = msg;
    png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

void read_callback(png_structp png, png_bytep out, png_size_t count) {
    auto* r = static_cast<MemoryReader*>(png_get_io_ptr(png));
    if (r->pos + count > r->bytes.size()) png_error(png, "unexpected end of PNG data");
    std::memcpy(out, r->bytes.data() + r->pos, count);
    r->pos += count;
}

void write_callback(png_structp png, png_bytep data, png_size_t count) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), count);
}

void flush_callback(png_structp) {}

// raw_gray16: refuse anything but 16-bit grayscale instead of normalising.
RawRaster decode_png(std::string_view bytes, bool raw_gray16) {
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
        throw FormatError("not a PNG file");
    }
    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
    if (!png) throw FormatError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw FormatError("libpng initialisation failed");
    }
    MemoryReader reader{bytes, 0};
    RawRaster raster;
    std::vector<png_bytep> rows;
    std::vector<unsigned char> buffer;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("PNG decode failed: " + message);
    }
    png_set_read_fn(png, &reader, read_callback);
    png_read_info(png, info);

    png_uint_32 w = 0, h = 0;
    int depth = 0, color = 0;
    png_get_IHDR(png, info, &w, &h, &depth, &color, nullptr, nullptr, nullptr);
    if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20)) {
        png_error(png, "invalid dimensions");
    }
    if (raw_gray16) {
        if (color != PNG_COLOR_TYPE_GRAY) {
            png_error(png, "expected a grayscale PNG for a disparity map");
        }
        if (depth != 16) {
            char why[96];
            std::snprintf(why, sizeof(why), "unexpected bit depth %d (disparity PNGs are 16-bit)", depth);
            png_error(png, why);
        }
    } else {
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        png_set_strip_alpha(png);
    }
    if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
    png_read_update_info(png, info);

    raster.width = static_cast<int>(w);
    raster.height = static_cast<int>(h);
    raster.channels = png_get_channels(png, info);
    raster.bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t count = static_cast<std::size_t>(w) * h * static_cast<std::size_t>(raster.channels);
    raster.samples.resize(count);
    if (raster.bit_depth == 16) {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint16_t v;
            std::memcpy(&v, buffer.data() + 2 * i, 2);
            raster.samples[i] = v;
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) raster.samples[i] = buffer[i];
    }
    return raster;
}

std::string encode_png(int width, int height, int channels, int bit_depth, const std::vector<std::uint16_t>& samples) {
    std::string message;
    std::string out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
    if (!png) throw FormatError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw FormatError("libpng initialisation failed");
    }
    const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
    const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * bytes_per_sample;
    std::vector<unsigned char> buffer(rowbytes * height);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (bit_depth == 16) {
            buffer[2 * i] = static_cast<unsigned char>(samples[i] >> 8);
            buffer[2 * i + 1] = static_cast<unsigned char>(samples[i] & 0xFF);
        } else {
            buffer[i] = static_cast<unsigned char>(samples[i]);
        }
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = buffer.data() + y * rowbytes;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("PNG encode failed: " + message);
    }
    png_set_write_fn(png, &out, write_callback, flush_callback);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

ImageBuffer decode_pnm(std::string_view bytes) {
    // Header grammar is shared with PFM: whitespace-separated tokens, '#' comments.
    std::size_t pos = 0;
    const auto skip = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    const auto token = [&] {
        skip();
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (start == pos) throw FormatError("truncated PNM header");
        return std::string(bytes.substr(start, pos - start));
    };
    const auto number = [&](const char* what) {
        const std::string t = token();
        if (t.empty() || !std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); }) ||
            t.size() > 9) {
            throw FormatError(std::string("malformed PNM ") + what + " '" + t + "'");
        }
        return std::stoll(t);
    };
    const std::string magic = token();
    int channels = 0;
    if (magic == "P5") channels = 1;
    else if (magic == "P6") channels = 3;
    else throw FormatError("unsupported PNM magic '" + magic + "' (expected P5 or P6)");
    const long long w = number("width");
    const long long h = number("height");
    const long long maxval = number("maxval");
    if (w <= 0 || h <= 0 || w > (1 << 20) || h > (1 << 20)) throw FormatError("invalid PNM dimensions");
    if (maxval <= 0 || maxval > 65535) throw FormatError("unexpected PNM maxval " + std::to_string(maxval));
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw FormatError("missing separator before PNM payload");
    }
    ++pos;
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t count = static_cast<std::size_t>(w * h) * channels;
    if (bytes.size() < pos + count * bps) throw FormatError("PNM payload truncated");
    std::vector<double> data(count);
    const auto* src = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned v = bps == 2 ? (static_cast<unsigned>(src[2 * i]) << 8) | src[2 * i + 1] : src[i];
        data[i] = std::min(1.0, static_cast<double>(v) / static_cast<double>(maxval));
    }
    return ImageBuffer(static_cast<int>(w), static_cast<int>(h), channels, std::move(data));
}

std::string encode_pnm(const ImageBuffer& image) {
    std::string out = std::string(image.channels() == 1 ? "P5" : "P6") + "\n" + std::to_string(image.width()) + " " +
                      std::to_string(image.height()) + "\n255\n";
    for (double v : image.data()) out.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    return out;
}

}  // namespace

std::string encode_png16(const ScalarMap& map) {
    std::vector<std::uint16_t> raw(map.size(), 0);
    const auto v = map.values();
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (!map.valid(i)) continue;
        const double scaled = v[i] * 256.0;
        if (!std::isfinite(scaled) || scaled < 0.5 || std::round(scaled) > 65535.0) {
            throw InvalidInput("disparity " + std::to_string(v[i]) + " at pixel " + std::to_string(i) +
                               " is outside the 16-bit PNG range [1/256, 255.996]");
        }
        raw[i] = static_cast<std::uint16_t>(std::lround(scaled));
    }
    return encode_png(map.width(), map.height(), 1, 16, raw);
}

ScalarMap decode_png16(std::string_view bytes) {
    const RawRaster r = decode_png(bytes, true);
    ScalarMap map(r.width, r.height, 0.0);
    auto values = map.values();
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        if (r.samples[i] == 0) {
            map.set_valid(i, false);
        } else {
            values[i] = static_cast<double>(r.samples[i]) / 256.0;
        }
    }
    return map;
}

ImageBuffer read_image(const fs::path& path) {
    const std::string bytes = read_bytes(path);
    const std::string ext = lower_ext(path);
    try {
        if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return decode_pnm(bytes);
        if (ext == ".pfm") return decode_pfm_image(bytes);
        const RawRaster r = decode_png(bytes, false);
        if (r.channels != 1 && r.channels != 3) throw FormatError("unsupported PNG channel count");
        const double maxval = r.bit_depth == 16 ? 65535.0 : 255.0;
        std::vector<double> data(r.samples.size());
        for (std::size_t i = 0; i < data.size(); ++i) data[i] = r.samples[i] / maxval;
        return ImageBuffer(r.width, r.height, r.channels, std::move(data));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_image(const ImageBuffer& image, const fs::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
        if ((ext == ".pgm") != (image.channels() == 1) && ext != ".pnm") {
            throw FormatError("'" + path.string() + "' extension does not match the channel count");
        }
        atomic_write(path, encode_pnm(image));
        return;
    }
    if (ext == ".pfm") {
        atomic_write(path, encode_pfm_image(image));
        return;
    }
    if (ext != ".png") throw FormatError("cannot infer image format from '" + path.string() + "'");
    std::vector<std::uint16_t> samples(image.data().size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i] = static_cast<std::uint16_t>(std::lround(std::clamp(image.data()[i], 0.0, 1.0) * 255.0));
    }
    atomic_write(path, encode_png(image.width(), image.height(), image.channels(), 8, samples));
}

void write_colorized_png(const ScalarMap& confidence, const fs::path& path) {
    // Dark blue -> cyan -> yellow -> red.
    constexpr std::array<std::array<double, 3>, 4> stops{{{0.10, 0.10, 0.55}, {0.0, 0.75, 0.85}, {0.95, 0.90, 0.15},
                                                          {0.85, 0.10, 0.05}}};
    std::vector<std::uint16_t> samples(confidence.size() * 3, 0);
    const auto v = confidence.values();
    for (std::size_t i = 0; i < confidence.size(); ++i) {
        if (!confidence.valid(i) || !std::isfinite(v[i])) continue;
        const double s = std::clamp(v[i], 0.0, 1.0) * (stops.size() - 1);
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(s), stops.size() - 2);
        const double t = s - static_cast<double>(k);
        for (int c = 0; c < 3; ++c) {
            const double mixed = stops[k][c] + t * (stops[k + 1][c] - stops[k][c]);
            samples[i * 3 + c] = static_cast<std::uint16_t>(std::lround(mixed * 255.0));
        }
    }
    atomic_write(path, encode_png(confidence.width(), confidence.height(), 3, 8, samples));
}

}  // namespace depthvote::io
