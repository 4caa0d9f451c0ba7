#include "vizgrad/image.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vizgrad/error.hpp"

namespace vizgrad {

namespace {

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32_le(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[at + static_cast<std::size_t>(i)];
    return v;
}

void png_chunk(std::vector<std::uint8_t>& out, const char* type, std::span<const std::uint8_t> payload) {
    put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
    const auto type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const auto crc = crc32(0L, out.data() + type_at, static_cast<uInt>(payload.size() + 4));
    put_u32_be(out, static_cast<std::uint32_t>(crc));
}

constexpr char vgimg_magic[8] = {'V', 'G', 'I', 'M', 'G', '1', '\0', '\0'};

}  // namespace

void check_image(const Image& img) {
    const auto d = img.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!std::isfinite(d[i]) || d[i] < 0.0 || d[i] > 1.0) {
            throw NumericError("image value " + std::to_string(d[i]) + " at index " + std::to_string(i) +
                               " outside [0,1]");
        }
    }
}

Image solid_image(std::size_t width, std::size_t height, std::array<double, 4> rgba) {
    Image img(width, height);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        for (std::size_t c = 0; c < 4; ++c) img.px(i, c) = rgba[c];
    }
    return img;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
    const auto w = img.width();
    const auto h = img.height();
    std::vector<std::uint8_t> scan;
    scan.reserve(h * (w * 4 + 1));
    for (std::size_t y = 0; y < h; ++y) {
        scan.push_back(0);  // filter: none
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 4; ++c) {
                const double v = std::clamp(img.at(x, y, c), 0.0, 1.0);
                scan.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
            }
        }
    }
    uLongf packed_size = compressBound(static_cast<uLong>(scan.size()));
    std::vector<std::uint8_t> packed(packed_size);
    if (compress2(packed.data(), &packed_size, scan.data(), static_cast<uLong>(scan.size()), 6) != Z_OK) {
        throw NumericError("png: deflate failed");
    }
    packed.resize(packed_size);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<std::uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(w));
    put_u32_be(ihdr, static_cast<std::uint32_t>(h));
    ihdr.insert(ihdr.end(), {8, 6, 0, 0, 0});  // 8-bit RGBA, deflate, no interlace
    png_chunk(out, "IHDR", ihdr);
    png_chunk(out, "IDAT", packed);
    png_chunk(out, "IEND", {});
    return out;
}

void write_png(const Image& img, const std::string& path) { write_file(path, encode_png(img)); }

std::vector<std::uint8_t> encode_vgimg(const Image& img) {
    std::vector<std::uint8_t> out(std::begin(vgimg_magic), std::end(vgimg_magic));
    put_u32_le(out, static_cast<std::uint32_t>(img.width()));
    put_u32_le(out, static_cast<std::uint32_t>(img.height()));
    for (double v : img.data()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
    return out;
}

Image decode_vgimg(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), vgimg_magic, 8) != 0) {
        throw ValidationError("vgimg: bad header");
    }
    const std::size_t w = get_u32_le(bytes, 8);
    const std::size_t h = get_u32_le(bytes, 12);
    if (bytes.size() != 16 + w * h * 4 * 8) throw ValidationError("vgimg: payload size mismatch");
    Image img(w, h);
    auto d = img.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        std::uint64_t bits = 0;
        for (int k = 7; k >= 0; --k) bits = (bits << 8) | bytes[16 + i * 8 + static_cast<std::size_t>(k)];
        std::memcpy(&d[i], &bits, sizeof bits);
    }
    return img;
}

void write_vgimg(const Image& img, const std::string& path) { write_file(path, encode_vgimg(img)); }

Image read_vgimg(const std::string& path) { return decode_vgimg(read_file(path)); }

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += {table[(v >> 18) & 63], table[(v >> 12) & 63], table[(v >> 6) & 63], table[v & 63]};
    }
    if (const auto rest = bytes.size() - i; rest == 1) {
        const std::uint32_t v = bytes[i] << 16;
        out += {table[(v >> 18) & 63], table[(v >> 12) & 63], '=', '='};
    } else if (rest == 2) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += {table[(v >> 18) & 63], table[(v >> 12) & 63], table[(v >> 6) & 63], '='};
    }
    return out;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_file(const std::string& path, std::string_view text) {
    write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace vizgrad
