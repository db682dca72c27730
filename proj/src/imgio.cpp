#include "depthvote/imgio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

namespace depthvote::io {

namespace fs = std::filesystem;

namespace {

std::string lower_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Cursor over a byte buffer for the ASCII headers of PFM/PNM files.
class HeaderReader {
public:
    explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

    std::string token() {
        skip_space_and_comments();
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
        if (start == pos_) throw FormatError("truncated header");
        return std::string(bytes_.substr(start, pos_ - start));
    }

    long long integer(const char* what) {
        const std::string tok = token();
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) {
            throw FormatError(std::string("malformed ") + what + " '" + tok + "'");
        }
        return v;
    }

    double real(const char* what) {
        const std::string tok = token();
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size() || !std::isfinite(v)) {
            throw FormatError(std::string("malformed ") + what + " '" + tok + "'");
        }
        return v;
    }

    // Exactly one whitespace byte separates the header from the payload.
    std::size_t payload_offset() {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
            throw FormatError("missing separator before payload");
        }
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

constexpr long long kMaxExtent = 1 << 20;

void check_dimensions(long long w, long long h) {
    if (w <= 0 || h <= 0 || w > kMaxExtent || h > kMaxExtent || w * h > (1LL << 31)) {
        throw FormatError("invalid dimensions " + std::to_string(w) + "x" + std::to_string(h));
    }
}

std::uint32_t byteswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0x0000FF00u) | ((v << 8) & 0x00FF0000u) | (v << 24);
}

}  // namespace

MapFormat map_format_from_path(const fs::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".pfm") return MapFormat::pfm;
    if (ext == ".png") return MapFormat::png16;
    throw FormatError("cannot infer map format from '" + path.string() + "' (expected .pfm or .png)");
}

// PFM ------------------------------------------------------------------------

namespace {

// Header plus top-down, interleaved float samples.
struct PfmPayload {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<float> samples;
};

PfmPayload parse_pfm(std::string_view bytes) {
    HeaderReader hdr(bytes);
    const std::string magic = hdr.token();
    if (magic != "Pf" && magic != "PF") throw FormatError("not a PFM file (magic '" + magic + "')");
    const long long w = hdr.integer("width");
    const long long h = hdr.integer("height");
    check_dimensions(w, h);
    const double scale = hdr.real("scale");
    if (scale == 0.0) throw FormatError("PFM scale must be nonzero");
    const std::size_t offset = hdr.payload_offset();

    PfmPayload out;
    out.width = static_cast<int>(w);
    out.height = static_cast<int>(h);
    out.channels = magic == "PF" ? 3 : 1;
    const std::size_t row = static_cast<std::size_t>(w) * static_cast<std::size_t>(out.channels);
    const std::size_t count = row * static_cast<std::size_t>(h);
    if (bytes.size() < offset + count * 4) throw FormatError("PFM payload truncated");

    const bool file_little = scale < 0.0;
    const bool swap = file_little != (std::endian::native == std::endian::little);
    out.samples.resize(count);
    const char* src = bytes.data() + offset;
    // Stored rows run bottom-up.
    for (long long y = h - 1; y >= 0; --y) {
        float* dst = out.samples.data() + static_cast<std::size_t>(y) * row;
        for (std::size_t i = 0; i < row; ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, src, 4);
            src += 4;
            if (swap) bits = byteswap32(bits);
            dst[i] = std::bit_cast<float>(bits);
        }
    }
    return out;
}

template <typename Sample>
std::string build_pfm(int w, int h, int channels, Sample sample) {
    std::string out = std::string(channels == 3 ? "PF" : "Pf") + "\n" + std::to_string(w) + " " +
                      std::to_string(h) + "\n-1\n";
    const std::size_t header = out.size();
    const std::size_t row = static_cast<std::size_t>(w) * static_cast<std::size_t>(channels);
    out.resize(header + row * static_cast<std::size_t>(h) * 4);
    char* dst = out.data() + header;
    for (int y = h - 1; y >= 0; --y) {
        for (std::size_t i = 0; i < row; ++i) {
            std::uint32_t bits = std::bit_cast<std::uint32_t>(sample(static_cast<std::size_t>(y) * row + i));
            if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
            std::memcpy(dst, &bits, 4);
            dst += 4;
        }
    }
    return out;
}

}  // namespace

std::string encode_pfm(const ScalarMap& map) {
    const auto values = map.values();
    return build_pfm(map.width(), map.height(), 1, [&](std::size_t i) {
        return map.valid(i) ? static_cast<float>(values[i]) : std::numeric_limits<float>::infinity();
    });
}

ScalarMap decode_pfm(std::string_view bytes) {
    PfmPayload p = parse_pfm(bytes);
    if (p.channels != 1) throw FormatError("expected a single-channel PFM (Pf), found colour PF");
    ScalarMap map(p.width, p.height, 0.0);
    auto values = map.values();
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
        if (std::isfinite(p.samples[i])) {
            values[i] = p.samples[i];
        } else {
            map.set_valid(i, false);
        }
    }
    return map;
}

std::string encode_pfm_image(const ImageBuffer& image) {
    const auto data = image.data();
    return build_pfm(image.width(), image.height(), image.channels(),
                     [&](std::size_t i) { return static_cast<float>(data[i]); });
}

ImageBuffer decode_pfm_image(std::string_view bytes) {
    const PfmPayload p = parse_pfm(bytes);
    std::vector<double> data(p.samples.begin(), p.samples.end());
    for (double v : data) {
        if (!(v >= 0.0 && v <= 1.0)) throw FormatError("PFM image intensities must lie in [0,1]");
    }
    return ImageBuffer(p.width, p.height, p.channels, std::move(data));
}

ScalarMap read_map(const fs::path& path, MapFormat format) {
    const std::string bytes = read_file(path);
    try {
        return format == MapFormat::pfm ? decode_pfm(bytes) : decode_png16(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

ScalarMap read_map(const fs::path& path) { return read_map(path, map_format_from_path(path)); }

void write_map(const ScalarMap& map, const fs::path& path, MapFormat format) {
    atomic_write(path, format == MapFormat::pfm ? encode_pfm(map) : encode_png16(map));
}

void write_map(const ScalarMap& map, const fs::path& path) { write_map(map, path, map_format_from_path(path)); }

// CSV ------------------------------------------------------------------------

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    // Shortest round-trip representation.
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw std::runtime_error("number formatting failed");
    return std::string(buf, ptr);
}

std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    if (header.empty()) throw std::invalid_argument("CSV header is mandatory");
    std::string out;
    const auto line = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += ',';
            out += fields[i];
        }
        out += '\n';
    };
    line(header);
    for (const auto& r : rows) {
        if (r.size() != header.size()) throw std::invalid_argument("CSV row width does not match header");
        line(r);
    }
    return out;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    atomic_write(path, to_csv(header, rows));
}

void atomic_write(const fs::path& path, std::string_view bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open '" + tmp.string() + "' for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw FormatError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw FormatError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
    }
}

}  // namespace depthvote::io
