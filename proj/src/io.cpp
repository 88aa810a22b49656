#include "texmesh/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace texmesh {

namespace fs = std::filesystem;
using nlohmann::json;

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset)
{
}

namespace {

std::ofstream open_out(const fs::path& path, bool binary = false)
{
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

void finish(std::ofstream& out, const fs::path& path)
{
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string read_bytes(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt9(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void put_u64(std::string& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& s, std::size_t at)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
    return v;
}

void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t at)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
    return v;
}

} // namespace

std::string read_text_file(const fs::path& path) { return read_bytes(path); }

// ---------------------------------------------------------------- OBJ

void write_obj(const fs::path& path, const SurfaceMesh& mesh, const std::vector<Rgb>* colors)
{
    if (colors && colors->size() != mesh.vertices.size())
        throw std::invalid_argument("write_obj: colour count does not match vertex count");
    auto out = open_out(path);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        out << "v " << fmt9(v.x) << ' ' << fmt9(v.y) << ' ' << fmt9(v.z);
        if (colors) {
            const Rgb& c = (*colors)[i];
            out << ' ' << fmt9(c.x) << ' ' << fmt9(c.y) << ' ' << fmt9(c.z);
        }
        out << '\n';
    }
    for (const Face& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    finish(out, path);
}

AtlasLayout make_atlas_layout(std::size_t faces, int chart_size)
{
    if (chart_size < 2) throw std::invalid_argument("atlas chart size must be >= 2");
    AtlasLayout l;
    l.chart_size = chart_size;
    l.charts_per_row = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(faces)))));
    l.texture_size = l.charts_per_row * chart_size;
    return l;
}

void AtlasLayout::chart_origin(std::size_t face, int& x0, int& y0) const
{
    x0 = static_cast<int>(face % charts_per_row) * chart_size;
    y0 = static_cast<int>(face / charts_per_row) * chart_size;
}

AtlasLayout write_obj_atlas(const fs::path& path, const SurfaceMesh& mesh, const TextureQuery& texture,
                            int chart_size)
{
    const AtlasLayout layout = make_atlas_layout(mesh.faces.size(), chart_size);
    const int ts = layout.texture_size;
    const double span = chart_size - 1.0;
    Image tex(ts, ts, 3);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        int x0, y0;
        layout.chart_origin(f, x0, y0);
        const Face& t = mesh.faces[f];
        for (int y = 0; y < chart_size; ++y)
            for (int x = 0; x < chart_size; ++x) {
                double u = x / span, v = y / span;
                // Texels past the hypotenuse repeat its colour so filtering stays clean.
                if (u + v > 1.0) {
                    const double s = u + v;
                    u /= s;
                    v /= s;
                }
                const Vec3 p = mesh.vertices[t[0]] * (1.0 - u - v) + mesh.vertices[t[1]] * u + mesh.vertices[t[2]] * v;
                const Rgb c = texture(p);
                for (int k = 0; k < 3; ++k) tex.at(x0 + x, y0 + y, k) = c[k];
            }
    }

    fs::path png = path, mtl = path;
    png.replace_extension(".png");
    mtl.replace_extension(".mtl");
    write_png(png, to_srgb8(tex));
    {
        auto out = open_out(mtl);
        out << "newmtl atlas\nKd 1 1 1\nmap_Kd " << png.filename().string() << '\n';
        finish(out, mtl);
    }

    auto out = open_out(path);
    out << "mtllib " << mtl.filename().string() << '\n';
    for (const Vec3& v : mesh.vertices) out << "v " << fmt9(v.x) << ' ' << fmt9(v.y) << ' ' << fmt9(v.z) << '\n';
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        int x0, y0;
        layout.chart_origin(f, x0, y0);
        const double corners[3][2] = {{0, 0}, {span, 0}, {0, span}};
        for (const auto& c : corners) {
            const double px = x0 + c[0] + 0.5, py = y0 + c[1] + 0.5;
            out << "vt " << fmt9(px / ts) << ' ' << fmt9(1.0 - py / ts) << '\n';
        }
    }
    out << "usemtl atlas\n";
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        out << "f";
        for (int k = 0; k < 3; ++k) out << ' ' << t[k] + 1 << '/' << 3 * f + k + 1;
        out << '\n';
    }
    finish(out, path);
    return layout;
}

ObjData read_obj(const fs::path& path)
{
    const std::string text = read_bytes(path);
    ObjData obj;
    bool all_colored = true;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        const std::size_t line_start = pos;
        pos = end + 1;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        auto fail = [&](const std::string& msg) { throw ParseError("OBJ: " + msg, line_start); };
        if (tag == "v") {
            std::vector<double> vals;
            double x;
            while (ls >> x) vals.push_back(x);
            if (vals.size() != 3 && vals.size() != 6) fail("vertex needs 3 or 6 numbers");
            obj.vertices.emplace_back(vals[0], vals[1], vals[2]);
            if (vals.size() == 6)
                obj.colors.emplace_back(vals[3], vals[4], vals[5]);
            else
                all_colored = false;
        } else if (tag == "vt") {
            double u, v;
            if (!(ls >> u >> v)) fail("texture coordinate needs 2 numbers");
            obj.uvs.push_back({u, v});
        } else if (tag == "f") {
            Face f{}, fu{};
            bool has_uv = false;
            std::string tok;
            int k = 0;
            while (ls >> tok) {
                if (k == 3) fail("only triangles are supported");
                const auto slash = tok.find('/');
                try {
                    const long vi = std::stol(tok.substr(0, slash));
                    if (vi < 1 || static_cast<std::size_t>(vi) > obj.vertices.size()) fail("vertex index out of range");
                    f[k] = static_cast<std::uint32_t>(vi - 1);
                    if (slash != std::string::npos && slash + 1 < tok.size() && tok[slash + 1] != '/') {
                        const long ti = std::stol(tok.substr(slash + 1));
                        if (ti < 1 || static_cast<std::size_t>(ti) > obj.uvs.size()) fail("uv index out of range");
                        fu[k] = static_cast<std::uint32_t>(ti - 1);
                        has_uv = true;
                    }
                } catch (const std::logic_error&) {
                    fail("bad face index '" + tok + "'");
                }
                ++k;
            }
            if (k != 3) fail("only triangles are supported");
            obj.faces.push_back(f);
            if (has_uv) obj.face_uvs.push_back(fu);
        } else if (tag == "mtllib") {
            ls >> obj.material_library;
        }
    }
    if (!all_colored) obj.colors.clear();
    if (!obj.face_uvs.empty() && obj.face_uvs.size() != obj.faces.size())
        throw ParseError("OBJ: some faces lack texture coordinates", text.size());
    return obj;
}

SurfaceMesh to_mesh(const ObjData& obj)
{
    SurfaceMesh m;
    m.vertices = obj.vertices;
    m.faces = obj.faces;
    return m;
}

// ---------------------------------------------------------------- PNG

void write_png(const fs::path& path, const Image8& img)
{
    if (img.channels < 1 || img.channels > 4 || img.width < 1 || img.height < 1 ||
        img.data.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
        throw std::invalid_argument("write_png: inconsistent image");
    png_image pi;
    std::memset(&pi, 0, sizeof pi);
    pi.version = PNG_IMAGE_VERSION;
    pi.width = img.width;
    pi.height = img.height;
    static constexpr png_uint_32 formats[] = {PNG_FORMAT_GRAY, PNG_FORMAT_GA, PNG_FORMAT_RGB, PNG_FORMAT_RGBA};
    pi.format = formats[img.channels - 1];
    if (!png_image_write_to_file(&pi, path.string().c_str(), 0, img.data.data(), 0, nullptr))
        throw IoError("cannot write PNG '" + path.string() + "': " + pi.message);
}

Image8 read_png(const fs::path& path)
{
    const std::string bytes = read_bytes(path);
    static constexpr unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    for (std::size_t i = 0; i < 8; ++i)
        if (i >= bytes.size() || static_cast<unsigned char>(bytes[i]) != sig[i])
            throw ParseError("PNG: bad signature", i);

    png_image pi;
    std::memset(&pi, 0, sizeof pi);
    pi.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&pi, bytes.data(), bytes.size()))
        throw ParseError(std::string("PNG: ") + pi.message, 8);
    Image8 img;
    const bool color = pi.format & PNG_FORMAT_FLAG_COLOR;
    const bool alpha = pi.format & PNG_FORMAT_FLAG_ALPHA;
    img.channels = (color ? 3 : 1) + (alpha ? 1 : 0);
    static constexpr png_uint_32 formats[] = {PNG_FORMAT_GRAY, PNG_FORMAT_GA, PNG_FORMAT_RGB, PNG_FORMAT_RGBA};
    pi.format = formats[img.channels - 1];
    img.width = pi.width;
    img.height = pi.height;
    img.data.resize(PNG_IMAGE_SIZE(pi));
    if (!png_image_finish_read(&pi, nullptr, img.data.data(), 0, nullptr)) {
        png_image_free(&pi);
        throw ParseError(std::string("PNG: ") + pi.message, 8);
    }
    return img;
}

double srgb_encode(double l)
{
    l = std::clamp(l, 0.0, 1.0);
    return l <= 0.0031308 ? 12.92 * l : 1.055 * std::pow(l, 1.0 / 2.4) - 0.055;
}

double srgb_decode(double e)
{
    e = std::clamp(e, 0.0, 1.0);
    return e <= 0.04045 ? e / 12.92 : std::pow((e + 0.055) / 1.055, 2.4);
}

std::uint8_t srgb_to_byte(double linear) { return static_cast<std::uint8_t>(std::lround(srgb_encode(linear) * 255.0)); }

Image8 to_srgb8(const Image& img)
{
    Image8 out{img.width, img.height, img.channels, std::vector<std::uint8_t>(img.data.size())};
    const bool mask = img.channels == 1;
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = mask ? static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0))
                           : srgb_to_byte(img.data[i]);
    return out;
}

Image from_srgb8(const Image8& img)
{
    Image out(img.width, img.height, img.channels);
    const bool mask = img.channels == 1;
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = mask ? img.data[i] / 255.0 : srgb_decode(img.data[i] / 255.0);
    return out;
}

// ---------------------------------------------------------------- PFM

void write_pfm(const fs::path& path, const Image& img)
{
    if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("write_pfm: 1 or 3 channels required");
    std::string out = img.channels == 3 ? "PF\n" : "Pf\n";
    out += std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(img.at(x, y, c))));
    auto f = open_out(path, true);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    finish(f, path);
}

Image read_pfm(const fs::path& path)
{
    const std::string s = read_bytes(path);
    std::size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    };
    auto token = [&] {
        skip_ws();
        const std::size_t start = pos;
        while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        return std::pair<std::string, std::size_t>{s.substr(start, pos - start), start};
    };

    const auto [magic, m_at] = token();
    int channels;
    if (magic == "PF")
        channels = 3;
    else if (magic == "Pf")
        channels = 1;
    else
        throw ParseError("PFM: bad magic '" + magic + "'", m_at);
    auto number = [&](const char* what) {
        const auto [tok, at] = token();
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            return std::pair<double, std::size_t>{v, at};
        } catch (const std::logic_error&) {
            throw ParseError(std::string("PFM: bad ") + what + " '" + tok + "'", at);
        }
    };
    const auto [w, w_at] = number("width");
    const auto [h, h_at] = number("height");
    const auto [scale, s_at] = number("scale");
    if (w < 1 || w != std::floor(w) || w > 1 << 20) throw ParseError("PFM: invalid width", w_at);
    if (h < 1 || h != std::floor(h) || h > 1 << 20) throw ParseError("PFM: invalid height", h_at);
    if (scale == 0.0) throw ParseError("PFM: zero scale", s_at);
    if (pos >= s.size() || !std::isspace(static_cast<unsigned char>(s[pos])))
        throw ParseError("PFM: missing separator after header", pos);
    ++pos;
    const bool little = scale < 0.0;

    Image img(static_cast<int>(w), static_cast<int>(h), channels);
    const std::size_t need = img.data.size() * 4;
    if (s.size() - pos != need)
        throw ParseError("PFM: expected " + std::to_string(need) + " data bytes, found " +
                             std::to_string(s.size() - pos),
                         pos);
    for (int y = img.height - 1; y >= 0; --y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < channels; ++c) {
                std::uint32_t bits = get_u32(s, pos);
                if (!little) bits = __builtin_bswap32(bits);
                img.at(x, y, c) = std::bit_cast<float>(bits);
                pos += 4;
            }
    return img;
}

// ---------------------------------------------------------------- blobs

namespace {
constexpr char kBlobMagic[] = "MGBLOB1\n";
constexpr std::size_t kMagicLen = 8;
} // namespace

void write_blob(const fs::path& path, const Blob& blob)
{
    json header = blob.header;
    header["count"] = blob.data.size();
    const std::string h = header.dump();
    std::string out(kBlobMagic, kMagicLen);
    put_u64(out, h.size());
    out += h;
    out.reserve(out.size() + blob.data.size() * 8);
    for (double v : blob.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
    auto f = open_out(path, true);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    finish(f, path);
}

Blob read_blob(const fs::path& path)
{
    const std::string s = read_bytes(path);
    for (std::size_t i = 0; i < kMagicLen; ++i)
        if (i >= s.size() || s[i] != kBlobMagic[i]) throw ParseError("blob: bad magic", i);
    if (s.size() < kMagicLen + 8) throw ParseError("blob: truncated header length", kMagicLen);
    const std::uint64_t hlen = get_u64(s, kMagicLen);
    const std::size_t hstart = kMagicLen + 8;
    if (hlen > s.size() - hstart) throw ParseError("blob: header length exceeds file size", kMagicLen);
    Blob blob;
    try {
        blob.header = json::parse(s.substr(hstart, hlen));
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("blob: header is not valid JSON: ") + e.what(), hstart + e.byte);
    }
    if (!blob.header.is_object() || !blob.header.contains("count") || !blob.header["count"].is_number_unsigned())
        throw ParseError("blob: header lacks an unsigned 'count'", hstart);
    const std::size_t count = blob.header["count"].get<std::size_t>();
    const std::size_t dstart = hstart + hlen;
    if ((s.size() - dstart) != count * 8)
        throw ParseError("blob: payload size does not match count " + std::to_string(count), dstart);
    blob.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) blob.data[i] = std::bit_cast<double>(get_u64(s, dstart + 8 * i));
    return blob;
}

void TensorBundle::put(const std::string& name, std::vector<std::size_t> shape, std::vector<double> values)
{
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    if (n != values.size()) throw std::invalid_argument("tensor '" + name + "': shape does not match value count");
    tensors[name] = Tensor{std::move(shape), std::move(values)};
}

const TensorBundle::Tensor& TensorBundle::get(const std::string& name) const
{
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw std::invalid_argument("checkpoint has no tensor '" + name + "'");
    return it->second;
}

void write_checkpoint(const fs::path& path, const TensorBundle& bundle)
{
    Blob blob;
    blob.header["kind"] = "checkpoint";
    blob.header["meta"] = bundle.meta;
    json list = json::array();
    for (const auto& [name, t] : bundle.tensors) {
        list.push_back({{"name", name}, {"shape", t.shape}, {"offset", blob.data.size()}});
        blob.data.insert(blob.data.end(), t.values.begin(), t.values.end());
    }
    blob.header["tensors"] = list;
    write_blob(path, blob);
}

TensorBundle read_checkpoint(const fs::path& path)
{
    const Blob blob = read_blob(path);
    if (blob.header.value("kind", "") != "checkpoint") throw ParseError("blob is not a checkpoint", kMagicLen + 8);
    TensorBundle b;
    b.meta = blob.header.value("meta", json::object());
    try {
        for (const auto& t : blob.header.at("tensors")) {
            const auto shape = t.at("shape").get<std::vector<std::size_t>>();
            const auto offset = t.at("offset").get<std::size_t>();
            std::size_t n = 1;
            for (auto d : shape) n *= d;
            if (offset > blob.data.size() || n > blob.data.size() - offset)
                throw ParseError("checkpoint tensor '" + t.at("name").get<std::string>() + "' exceeds payload",
                                 kMagicLen + 8);
            b.put(t.at("name").get<std::string>(), shape,
                  std::vector<double>(blob.data.begin() + offset, blob.data.begin() + offset + n));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint header: ") + e.what(), kMagicLen + 8);
    }
    return b;
}

void write_embeddings(const fs::path& path, const Embeddings& e)
{
    if (e.values.size() != e.rows * e.cols) throw std::invalid_argument("embeddings: rows * cols != value count");
    Blob blob;
    blob.header["kind"] = "embeddings";
    blob.header["rows"] = e.rows;
    blob.header["cols"] = e.cols;
    blob.data = e.values;
    write_blob(path, blob);
}

Embeddings read_embeddings(const fs::path& path)
{
    Blob blob = read_blob(path);
    if (blob.header.value("kind", "") != "embeddings") throw ParseError("blob is not an embedding file", kMagicLen + 8);
    Embeddings e;
    try {
        e.rows = blob.header.at("rows").get<std::size_t>();
        e.cols = blob.header.at("cols").get<std::size_t>();
    } catch (const json::exception& ex) {
        throw ParseError(std::string("embedding header: ") + ex.what(), kMagicLen + 8);
    }
    if (e.rows * e.cols != blob.data.size())
        throw ParseError("embedding header rows * cols does not match payload", kMagicLen + 8);
    e.values = std::move(blob.data);
    return e;
}

void write_trace_csv(const fs::path& path, const std::vector<TraceRow>& rows)
{
    auto out = open_out(path);
    out << "step,term,value\n";
    char buf[40];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.value);
        out << r.step << ',' << r.term << ',' << buf << '\n';
    }
    finish(out, path);
}

} // namespace texmesh
