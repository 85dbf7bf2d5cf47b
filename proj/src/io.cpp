// SPDX-License-Identifier: Apache-2.0
#include "pscal/io.hpp"

#include <png.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "pscal/error.hpp"

namespace pscal::io {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError(std::string("cannot open ") + path.string());
    return f;
}

struct RawPng {
    int width = 0, height = 0, channels = 0, bit_depth = 0;
    std::vector<unsigned char> bytes;
};

// Plain-data decode; nothing with a destructor lives across setjmp.
bool decode_png(std::FILE* fp, RawPng& out, std::string& error) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        error = "png_create_read_struct failed";
        return false;
    }
    png_infop info = png_create_info_struct(png);
    std::vector<png_bytep> rows;
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        error = "corrupt PNG";
        return false;
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    out.bytes.resize(rowbytes * out.height);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    (void)depth;
    return true;
}

bool encode_png(std::FILE* fp, int width, int height, int channels, int bit_depth,
                const std::vector<unsigned char>& bytes, std::string& error) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        error = "png_create_write_struct failed";
        return false;
    }
    png_infop info = png_create_info_struct(png);
    std::vector<png_bytep> rows(height);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, info ? &info : nullptr);
        error = "PNG encoding failed";
        return false;
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, width, height, bit_depth, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    for (int y = 0; y < height; ++y) rows[y] = const_cast<unsigned char*>(bytes.data()) + rowbytes * y;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

float srgb_to_linear(float v) {
    return v <= 0.04045f ? v / 12.92f : std::pow((v + 0.055f) / 1.055f, 2.4f);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        out.push_back(line.substr(b, e - b + 1));
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ImageFormat parse_image_format(const std::string& s) {
    if (s == "png16" || s == "png") return ImageFormat::png16;
    if (s == "pfm") return ImageFormat::pfm;
    throw ConfigError("unknown image format '" + s + "' (expected png16 or pfm)");
}

std::string to_string(ImageFormat f) { return f == ImageFormat::png16 ? "png16" : "pfm"; }

float quantize16(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    const auto k = static_cast<std::uint16_t>(std::lround(c * 65535.0f));
    return static_cast<float>(k) / 65535.0f;
}

Image read_png(const fs::path& path, bool srgb) {
    auto fp = open_file(path, "rb");
    RawPng raw;
    std::string err;
    if (!decode_png(fp.get(), raw, err)) throw FormatError(path.string() + ": " + err);
    if (raw.channels == 2 || raw.channels == 4) throw FormatError(path.string() + ": unexpected alpha channel");
    Image img(raw.height, raw.width, raw.channels);
    auto data = img.data();
    const std::size_t n = data.size();
    if (raw.bit_depth == 16) {
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned k = (static_cast<unsigned>(raw.bytes[2 * i]) << 8) | raw.bytes[2 * i + 1];
            data[i] = static_cast<float>(k) / 65535.0f;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<float>(raw.bytes[i]) / 255.0f;
    }
    if (srgb)
        for (float& v : data) v = srgb_to_linear(v);
    return img;
}

void write_png16(const fs::path& path, const Image& img) {
    if (img.channels() != 1 && img.channels() != 3) throw DomainError("PNG output needs 1 or 3 channels");
    std::vector<unsigned char> bytes(img.data().size() * 2);
    std::size_t i = 0;
    for (float v : img.data()) {
        const auto k = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0f));
        bytes[i++] = static_cast<unsigned char>(k >> 8);
        bytes[i++] = static_cast<unsigned char>(k & 0xff);
    }
    auto fp = open_file(path, "wb");
    std::string err;
    if (!encode_png(fp.get(), img.width(), img.height(), img.channels(), 16, bytes, err))
        throw IoError(path.string() + ": " + err);
}

Image read_pfm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    if (!in || (magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || scale == 0.0)
        throw FormatError(path.string() + ": bad PFM header");
    in.get();  // single whitespace before the raster
    const int nc = magic == "PF" ? 3 : 1;
    Image img(h, w, nc);
    const bool little = scale < 0.0;
    std::vector<std::uint32_t> row(static_cast<std::size_t>(w) * nc);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
        if (!in) throw FormatError(path.string() + ": truncated PFM raster");
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::uint32_t bits = row[i];
            if (little != (std::endian::native == std::endian::little)) bits = __builtin_bswap32(bits);
            float v;
            std::memcpy(&v, &bits, 4);
            img.at(y, static_cast<int>(i) / nc, static_cast<int>(i) % nc) = v;
        }
    }
    return img;
}

void write_pfm(const fs::path& path, const Image& img) {
    if (img.channels() != 1 && img.channels() != 3) throw DomainError("PFM output needs 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const bool little = std::endian::native == std::endian::little;
    out << (img.channels() == 3 ? "PF" : "Pf") << "\n"
        << img.width() << " " << img.height() << "\n"
        << (little ? "-1.0" : "1.0") << "\n";
    const std::size_t rowlen = static_cast<std::size_t>(img.width()) * img.channels();
    for (int y = img.height() - 1; y >= 0; --y) {
        const float* row = img.data().data() + static_cast<std::size_t>(y) * rowlen;
        out.write(reinterpret_cast<const char*>(row), static_cast<std::streamsize>(rowlen * 4));
    }
    if (!out) throw IoError("failed writing " + path.string());
}

Image read_image(const fs::path& path, bool srgb) {
    const std::string ext = path.extension().string();
    if (ext == ".pfm") return read_pfm(path);
    if (ext == ".png") return read_png(path, srgb);
    throw FormatError(path.string() + ": unsupported image type '" + ext + "'");
}

Mask read_mask(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("missing mask file " + path.string());
    const Image img = read_image(path);
    Mask m(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            bool on = false;
            for (int c = 0; c < img.channels(); ++c) on = on || img.at(y, x, c) > 0.0f;
            m.set(y, x, on);
        }
    return m;
}

void write_mask(const fs::path& path, const Mask& mask) {
    std::vector<unsigned char> bytes(mask.bits().size());
    std::transform(mask.bits().begin(), mask.bits().end(), bytes.begin(), [](auto b) { return b ? 255 : 0; });
    auto fp = open_file(path, "wb");
    std::string err;
    if (!encode_png(fp.get(), mask.width(), mask.height(), 1, 8, bytes, err)) throw IoError(path.string() + ": " + err);
}

std::vector<std::vector<double>> read_table(const fs::path& path) {
    std::vector<std::vector<double>> rows;
    int lineno = 0;
    for (const std::string& line : read_lines(path)) {
        ++lineno;
        std::istringstream in(line);
        std::vector<double> vals;
        std::string tok;
        while (in >> tok) {
            try {
                std::size_t pos = 0;
                vals.push_back(std::stod(tok, &pos));
                if (pos != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw FormatError(path.string() + ": line " + std::to_string(lineno) + " is not numeric");
            }
        }
        rows.push_back(std::move(vals));
    }
    return rows;
}

LoadedScene read_diligent_layout(const fs::path& dir, const ReadOptions& options) {
    using lightspace::LightDirection;
    using lightspace::LightSample;
    if (!fs::is_directory(dir)) throw IoError("scene directory " + dir.string() + " does not exist");

    const fs::path names_file = dir / "filenames.txt";
    const fs::path dirs_file = dir / "light_directions.txt";
    const fs::path ints_file = dir / "light_intensities.txt";
    for (const fs::path& p : {names_file, dirs_file})
        if (!fs::exists(p)) throw IoError("missing " + p.string());

    std::vector<std::string> names = read_lines(names_file);
    const auto dir_rows = read_table(dirs_file);
    if (dir_rows.size() != names.size())
        throw FormatError(dirs_file.string() + ": " + std::to_string(dir_rows.size()) + " directions for " +
                          std::to_string(names.size()) + " images");
    std::vector<std::vector<double>> int_rows;
    if (fs::exists(ints_file)) {
        int_rows = read_table(ints_file);
        if (int_rows.size() != names.size())
            throw FormatError(ints_file.string() + ": " + std::to_string(int_rows.size()) + " intensities for " +
                              std::to_string(names.size()) + " images");
    } else {
        spdlog::warn("{}: no light_intensities.txt, assuming unit intensities", dir.string());
        int_rows.assign(names.size(), {1.0});
    }

    std::vector<std::size_t> selection(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) selection[i] = i;
    if (options.index_list) {
        selection.clear();
        for (const auto& row : read_table(*options.index_list)) {
            if (row.size() != 1 || row[0] < 0 || row[0] >= static_cast<double>(names.size()))
                throw FormatError(options.index_list->string() + ": invalid image index");
            selection.push_back(static_cast<std::size_t>(row[0]));
        }
    }

    LoadedScene scene;
    scene.name = dir.filename().string();
    std::vector<LightSample> lights;
    for (std::size_t i : selection) {
        const auto& d = dir_rows[i];
        if (d.size() != 3) throw FormatError(dirs_file.string() + ": line " + std::to_string(i + 1) + " needs 3 values");
        Eigen::Vector3d v(d[0], d[1], d[2]);
        if (std::abs(v.norm() - 1.0) > 1e-3)
            spdlog::warn("{}: direction on line {} has norm {}, re-normalized", dirs_file.string(), i + 1, v.norm());
        const auto& e = int_rows[i];
        Eigen::Vector3d rgb;
        if (e.size() == 1) rgb.setConstant(e[0]);
        else if (e.size() == 3) rgb = Eigen::Vector3d(e[0], e[1], e[2]);
        else throw FormatError(ints_file.string() + ": line " + std::to_string(i + 1) + " needs 1 or 3 values");
        lights.emplace_back(LightDirection::normalized(v), e.size() == 1 ? e[0] : rgb.mean());
        scene.intensities_rgb.push_back(rgb);
        scene.stack.images.push_back(read_image(dir / names[i], options.srgb));
    }
    scene.stack.lights = std::move(lights);
    scene.stack.mask = read_mask(dir / "mask.png");
    if (fs::exists(dir / "normal.pfm")) {
        NormalMap n;
        n.normals = read_pfm(dir / "normal.pfm");
        if (n.normals.channels() != 3) throw FormatError((dir / "normal.pfm").string() + ": expected 3 channels");
        scene.stack.normals = std::move(n);
    }
    if (fs::exists(dir / "scene.txt")) scene.meta = KeyValueConfig::load(dir / "scene.txt");
    try {
        scene.stack.validate();
    } catch (const DomainError& e) {
        throw FormatError(dir.string() + ": " + e.what());
    }
    return scene;
}

void write_scene(const fs::path& dir, const ImageStack& stack, ImageFormat format,
                 const std::optional<KeyValueConfig>& meta) {
    stack.validate();
    if (!stack.lights) throw DomainError("write_scene needs ground-truth lights");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());

    std::ofstream names(dir / "filenames.txt"), dirs(dir / "light_directions.txt"), ints(dir / "light_intensities.txt");
    if (!names || !dirs || !ints) throw IoError("cannot write scene files in " + dir.string());
    const std::string ext = format == ImageFormat::png16 ? ".png" : ".pfm";
    for (int i = 0; i < stack.count(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%03d%s", i + 1, ext.c_str());
        names << name << "\n";
        const auto& l = (*stack.lights)[i];
        dirs << format_double(l.direction.x()) << " " << format_double(l.direction.y()) << " "
             << format_double(l.direction.z()) << "\n";
        ints << format_double(l.intensity) << "\n";
        if (format == ImageFormat::png16) write_png16(dir / name, stack.images[i]);
        else write_pfm(dir / name, stack.images[i]);
    }
    write_mask(dir / "mask.png", stack.mask);
    if (stack.normals) write_pfm(dir / "normal.pfm", stack.normals->normals);
    if (meta) meta->save(dir / "scene.txt");
}

std::string hash_scene(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    Fnv1a h;
    for (const auto& f : files) {
        h.update(f.filename().string());
        h.update(hash_file(f));
    }
    return h.hex();
}

DatasetManifest DatasetManifest::load(const fs::path& root) {
    const fs::path file = root / "manifest.txt";
    if (!fs::exists(file)) throw IoError("missing dataset manifest " + file.string());
    const auto lines = read_lines(file);
    if (lines.empty() || lines.front() != kManifestHeader)
        throw FormatError(file.string() + ": missing '" + std::string(kManifestHeader) + "' header");
    DatasetManifest m;
    m.root = root;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto eq = lines[i].find('=');
        if (eq == std::string::npos) throw FormatError(file.string() + ": malformed line " + std::to_string(i + 1));
        std::string key = lines[i].substr(0, eq), value = lines[i].substr(eq + 1);
        auto strip = [](std::string& s) {
            s.erase(0, s.find_first_not_of(' '));
            s.erase(s.find_last_not_of(' ') + 1);
        };
        strip(key);
        strip(value);
        if (key == "hash") m.hash = value;
        else if (key == "scene") m.scenes.push_back(value);
        else throw FormatError(file.string() + ": unknown key '" + key + "'");
    }
    for (const auto& s : m.scenes)
        if (!fs::is_directory(root / s)) throw FormatError(file.string() + ": scene '" + s + "' does not exist");
    return m;
}

void DatasetManifest::save() const {
    std::ofstream out(root / "manifest.txt");
    if (!out) throw IoError("cannot write " + (root / "manifest.txt").string());
    out << kManifestHeader << "\n";
    out << "hash = " << hash << "\n";
    for (const auto& s : scenes) out << "scene = " << s << "\n";
}

std::string DatasetManifest::compute_hash() const {
    Fnv1a h;
    for (const auto& s : scenes) {
        h.update(s);
        h.update(hash_scene(root / s));
    }
    return h.hex();
}

void DatasetManifest::validate() const {
    for (const auto& s : scenes) {
        const fs::path dir = root / s;
        for (const char* f : {"filenames.txt", "light_directions.txt", "light_intensities.txt", "mask.png"})
            if (!fs::exists(dir / f)) throw FormatError((dir / f).string() + " is missing");
        const auto names = read_lines(dir / "filenames.txt");
        for (const auto& n : names)
            if (!fs::exists(dir / n)) throw FormatError((dir / n).string() + " is referenced but missing");
        const auto d = read_table(dir / "light_directions.txt");
        const auto e = read_table(dir / "light_intensities.txt");
        if (d.size() != names.size() || e.size() != names.size())
            throw FormatError(dir.string() + ": image/direction/intensity counts differ");
    }
}

}  // namespace pscal::io
