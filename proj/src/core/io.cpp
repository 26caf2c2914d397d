#include "padapt/core/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "padapt/core/errors.hpp"

namespace padapt {

namespace {

constexpr char kMagic[4] = {'P', 'A', 'D', 'M'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
}

std::size_t element_size(Dtype d) { return d == Dtype::f64 ? 8 : 1; }

std::vector<std::uint8_t> doubles_to_le(std::span<const double> v) {
    std::vector<std::uint8_t> out(v.size() * 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(v[i]);
        for (int b = 0; b < 8; ++b) out[i * 8 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
    return out;
}

std::vector<double> le_to_doubles(std::span<const std::uint8_t> bytes) {
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<double>(get_u64(bytes.data() + i * 8));
    return out;
}

void expect(const RawArray& a, Dtype dtype, std::size_t ndim, const fs::path& path) {
    if (a.dtype != dtype || a.dims.size() != ndim) {
        throw FormatError("load " + path.string() + ": expected dtype " + std::to_string(int(dtype)) +
                          " with " + std::to_string(ndim) + " dims, got dtype " +
                          std::to_string(int(a.dtype)) + " with " + std::to_string(a.dims.size()));
    }
}

Grid3<double> grid_from(const RawArray& a, const fs::path& path) {
    expect(a, Dtype::f64, 3, path);
    return Grid3<double>(a.dims[0], a.dims[1], a.dims[2], le_to_doubles(a.payload));
}

RawArray raw_from(const Grid3<double>& g) {
    return {Dtype::f64, {g.height(), g.width(), g.channels()}, doubles_to_le(g.data())};
}

}  // namespace

std::vector<std::uint8_t> encode_array(const RawArray& a) {
    std::size_t count = 1;
    for (auto d : a.dims) count *= d;
    if (count * element_size(a.dtype) != a.payload.size()) throw ShapeError("encode_array: payload/dims mismatch");
    if (a.dims.size() > 255) throw InvalidArgument("encode_array: too many dims");
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    out.push_back(kPadmVersion & 0xff);
    out.push_back(kPadmVersion >> 8);
    out.push_back(static_cast<std::uint8_t>(a.dtype));
    out.push_back(static_cast<std::uint8_t>(a.dims.size()));
    for (auto d : a.dims) put_u64(out, d);
    out.insert(out.end(), a.payload.begin(), a.payload.end());
    return out;
}

RawArray decode_array(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("PADM: bad magic");
    const std::uint16_t version = bytes[4] | (std::uint16_t(bytes[5]) << 8);
    if (version != kPadmVersion) throw FormatError("PADM: unsupported version " + std::to_string(version));
    RawArray a;
    const auto dt = bytes[6];
    if (dt != 1 && dt != 2) throw FormatError("PADM: unknown dtype code " + std::to_string(dt));
    a.dtype = static_cast<Dtype>(dt);
    const std::size_t ndim = bytes[7];
    std::size_t off = 8;
    if (bytes.size() < off + 8 * ndim) throw FormatError("PADM: truncated header");
    std::size_t count = 1;
    for (std::size_t i = 0; i < ndim; ++i, off += 8) {
        a.dims.push_back(get_u64(bytes.data() + off));
        count *= a.dims.back();
    }
    const std::size_t need = count * element_size(a.dtype);
    if (bytes.size() - off != need) {
        throw FormatError("PADM: payload is " + std::to_string(bytes.size() - off) + " bytes, expected " +
                          std::to_string(need));
    }
    a.payload.assign(bytes.begin() + off, bytes.end());
    return a;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

void write_array(const fs::path& path, const RawArray& a) { write_file_atomic(path, encode_array(a)); }

RawArray read_array(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_array(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_map(const fs::path& path, const Grid3<double>& g) { write_array(path, raw_from(g)); }
void save_map(const fs::path& path, const ProbMap& p) { save_map(path, p.grid()); }
void save_map(const fs::path& path, const EntropyMap& e) { save_map(path, e.grid()); }

void save_map(const fs::path& path, const LabelMap& l) {
    write_array(path, {Dtype::u8, {l.height(), l.width()}, {l.data().begin(), l.data().end()}});
}

void save_map(const fs::path& path, const WeakLabelMap& w) {
    RawArray a{Dtype::u8, {w.height(), w.width(), 2}, {}};
    a.payload.resize(w.height() * w.width() * 2);
    auto cls = w.classes().data();
    auto prov = w.provenance();
    for (std::size_t i = 0; i < cls.size(); ++i) {
        a.payload[2 * i] = cls[i];
        a.payload[2 * i + 1] = static_cast<std::uint8_t>(prov[i]);
    }
    write_array(path, a);
}

void save_map(const fs::path& path, std::span<const double> flat) {
    write_array(path, {Dtype::f64, {flat.size()}, doubles_to_le(flat)});
}

template <>
Grid3<double> load_map<Grid3<double>>(const fs::path& path) {
    return grid_from(read_array(path), path);
}

template <>
ProbMap load_map<ProbMap>(const fs::path& path) {
    return ProbMap(load_map<Grid3<double>>(path));
}

template <>
EntropyMap load_map<EntropyMap>(const fs::path& path) {
    return EntropyMap(load_map<Grid3<double>>(path));
}

template <>
LabelMap load_map<LabelMap>(const fs::path& path) {
    auto a = read_array(path);
    expect(a, Dtype::u8, 2, path);
    return LabelMap(a.dims[0], a.dims[1], std::move(a.payload));
}

template <>
WeakLabelMap load_map<WeakLabelMap>(const fs::path& path) {
    auto a = read_array(path);
    expect(a, Dtype::u8, 3, path);
    if (a.dims[2] != 2) throw FormatError(path.string() + ": weak label map needs 2 channels");
    const std::size_t n = a.dims[0] * a.dims[1];
    std::vector<std::uint8_t> cls(n);
    std::vector<Provenance> prov(n);
    for (std::size_t i = 0; i < n; ++i) {
        cls[i] = a.payload[2 * i];
        const auto p = a.payload[2 * i + 1];
        if (p > 2) throw FormatError(path.string() + ": bad provenance code");
        prov[i] = static_cast<Provenance>(p);
    }
    return WeakLabelMap(LabelMap(a.dims[0], a.dims[1], std::move(cls)), std::move(prov));
}

template <>
std::vector<double> load_map<std::vector<double>>(const fs::path& path) {
    auto a = read_array(path);
    expect(a, Dtype::f64, 1, path);
    return le_to_doubles(a.payload);
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct PngImage {
    png_image img;
    PngImage() {
        std::memset(&img, 0, sizeof img);
        img.version = PNG_IMAGE_VERSION;
    }
    ~PngImage() { png_image_free(&img); }
};

std::vector<std::uint8_t> read_png(const fs::path& path, png_uint_32 format, std::size_t& h, std::size_t& w) {
    PngImage p;
    if (!png_image_begin_read_from_file(&p.img, path.c_str())) {
        throw IoError("png read " + path.string() + ": " + p.img.message);
    }
    p.img.format = format;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(p.img));
    if (!png_image_finish_read(&p.img, nullptr, buf.data(), 0, nullptr)) {
        throw IoError("png decode " + path.string() + ": " + p.img.message);
    }
    h = p.img.height;
    w = p.img.width;
    return buf;
}

std::vector<std::uint8_t> encode_png(std::size_t h, std::size_t w, png_uint_32 format,
                                     std::span<const std::uint8_t> pixels) {
    PngImage p;
    p.img.width = static_cast<png_uint_32>(w);
    p.img.height = static_cast<png_uint_32>(h);
    p.img.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&p.img, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        throw IoError(std::string("png encode: ") + p.img.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&p.img, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw IoError(std::string("png encode: ") + p.img.message);
    }
    out.resize(size);
    return out;
}

std::vector<std::uint8_t> quantize(const Grid3<double>& rgb) {
    if (rgb.channels() != 3) throw ShapeError("png: expected 3 channels");
    std::vector<std::uint8_t> px(rgb.size());
    auto d = rgb.data();
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(d[i], 0.0, 1.0) * 255.0));
    }
    return px;
}

}  // namespace

void write_png_gray(const fs::path& path, const LabelMap& labels) {
    write_file_atomic(path, encode_png(labels.height(), labels.width(), PNG_FORMAT_GRAY, labels.data()));
}

LabelMap read_png_gray(const fs::path& path) {
    std::size_t h = 0, w = 0;
    auto buf = read_png(path, PNG_FORMAT_GRAY, h, w);
    return LabelMap(h, w, std::move(buf));
}

std::vector<std::uint8_t> encode_png_rgb8(std::size_t height, std::size_t width,
                                          std::span<const std::uint8_t> rgb) {
    return encode_png(height, width, PNG_FORMAT_RGB, rgb);
}

std::vector<std::uint8_t> encode_png_rgba8(std::size_t height, std::size_t width,
                                           std::span<const std::uint8_t> rgba) {
    return encode_png(height, width, PNG_FORMAT_RGBA, rgba);
}

std::vector<std::uint8_t> encode_png_rgb(const Grid3<double>& rgb) {
    return encode_png_rgb8(rgb.height(), rgb.width(), quantize(rgb));
}

void write_png_rgb(const fs::path& path, const Grid3<double>& rgb) { write_file_atomic(path, encode_png_rgb(rgb)); }

Grid3<double> read_png_rgb(const fs::path& path) {
    std::size_t h = 0, w = 0;
    auto buf = read_png(path, PNG_FORMAT_RGB, h, w);
    std::vector<double> v(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) v[i] = buf[i] / 255.0;
    return Grid3<double>(h, w, 3, std::move(v));
}

}  // namespace padapt
