#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "depthvote/core.hpp"

namespace depthvote::io {

/// Scalar map encodings.
///  - pfm:   single-channel PFM ("Pf"), rows stored bottom-up, scale sign
///           selects endianness (negative = little). Non-finite values mark
///           invalid pixels; invalid pixels are written as +inf.
///  - png16: 16-bit grayscale PNG, disparity = raw / 256, raw 0 = invalid.
enum class MapFormat { pfm, png16 };

MapFormat map_format_from_path(const std::filesystem::path& path);

ScalarMap read_map(const std::filesystem::path& path, MapFormat format);
ScalarMap read_map(const std::filesystem::path& path);

/// Throws InvalidInput when a valid value cannot be stored (png16 accepts
/// values whose raw code round(v·256) lies in [1, 65535]).
void write_map(const ScalarMap& map, const std::filesystem::path& path, MapFormat format);
void write_map(const ScalarMap& map, const std::filesystem::path& path);

/// Reads PNG (8/16-bit, gray/RGB, alpha dropped), PGM or PPM and normalises
/// intensities to [0,1] by the format's maximum value. PFM images (Pf gray or
/// PF colour) are read verbatim and must already lie in [0,1].
ImageBuffer read_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG, PGM or PPM, or a lossless float PFM, depending on the
/// extension.
void write_image(const ImageBuffer& image, const std::filesystem::path& path);

/// 8-bit RGB rendering of a [0,1] map for inspection (invalid pixels black).
void write_colorized_png(const ScalarMap& confidence, const std::filesystem::path& path);

/// Formats a double so that it parses back to the same value.
std::string format_number(double value);

/// Comma-separated file with a mandatory header row, '.' decimals and LF
/// line endings.
std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Writes bytes to a temporary sibling and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

// In-memory codecs, used by the file functions above.
std::string encode_pfm(const ScalarMap& map);
ScalarMap decode_pfm(std::string_view bytes);
std::string encode_pfm_image(const ImageBuffer& image);
ImageBuffer decode_pfm_image(std::string_view bytes);
std::string encode_png16(const ScalarMap& map);
ScalarMap decode_png16(std::string_view bytes);

}  // namespace depthvote::io
