#pragma once
// Array container files ("PADM") and PNG interop.
//
// PADM layout, little-endian:
//   magic "PADM" | version u16 | dtype u8 | ndim u8 | dims u64[ndim] | payload
// The payload is row-major; float payloads are IEEE-754 binary64.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "padapt/core/arrays.hpp"

namespace padapt {

namespace fs = std::filesystem;

enum class Dtype : std::uint8_t { f64 = 1, u8 = 2 };

inline constexpr std::uint16_t kPadmVersion = 1;

struct RawArray {
    Dtype dtype = Dtype::f64;
    std::vector<std::uint64_t> dims;
    std::vector<std::uint8_t> payload;  // little-endian element bytes
};

std::vector<std::uint8_t> encode_array(const RawArray& a);
/// Throws FormatError on bad magic, unknown dtype or truncated payload.
RawArray decode_array(std::span<const std::uint8_t> bytes);

void write_array(const fs::path& path, const RawArray& a);
RawArray read_array(const fs::path& path);

void save_map(const fs::path& path, const Grid3<double>& g);
void save_map(const fs::path& path, const ProbMap& p);
void save_map(const fs::path& path, const EntropyMap& e);
void save_map(const fs::path& path, const LabelMap& l);
void save_map(const fs::path& path, const WeakLabelMap& w);
void save_map(const fs::path& path, std::span<const double> flat);

template <typename T>
T load_map(const fs::path& path);

template <> Grid3<double> load_map<Grid3<double>>(const fs::path& path);
template <> ProbMap load_map<ProbMap>(const fs::path& path);
template <> EntropyMap load_map<EntropyMap>(const fs::path& path);
template <> LabelMap load_map<LabelMap>(const fs::path& path);
template <> WeakLabelMap load_map<WeakLabelMap>(const fs::path& path);
template <> std::vector<double> load_map<std::vector<double>>(const fs::path& path);

// PNG (8-bit). RGB values are quantized with round(v * 255).
void write_png_gray(const fs::path& path, const LabelMap& labels);
LabelMap read_png_gray(const fs::path& path);
void write_png_rgb(const fs::path& path, const Grid3<double>& rgb);
Grid3<double> read_png_rgb(const fs::path& path);
std::vector<std::uint8_t> encode_png_rgb(const Grid3<double>& rgb);
std::vector<std::uint8_t> encode_png_rgb8(std::size_t height, std::size_t width, std::span<const std::uint8_t> rgb);
std::vector<std::uint8_t> encode_png_rgba8(std::size_t height, std::size_t width, std::span<const std::uint8_t> rgba);

std::vector<std::uint8_t> read_file_bytes(const fs::path& path);
/// Writes through a temporary file and renames, so readers never see a partial file.
void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const fs::path& path, const std::string& text);

}  // namespace padapt
