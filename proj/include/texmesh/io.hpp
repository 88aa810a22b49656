#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "texmesh/render.hpp"

namespace texmesh {

/// File cannot be opened, written or read.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file contents. `offset` is the byte position of the problem.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset);
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

// ---------------------------------------------------------------- OBJ

/// Vertex colours are appended to `v` lines.
void write_obj(const std::filesystem::path& path, const SurfaceMesh& mesh, const std::vector<Rgb>* colors = nullptr);

struct AtlasLayout {
    int texture_size = 0; ///< square, pixels
    int chart_size = 0;   ///< square chart per triangle, pixels
    int charts_per_row = 0;

    /// Pixel rectangle [x0, x0 + chart_size) x [y0, y0 + chart_size) of face f.
    void chart_origin(std::size_t face, int& x0, int& y0) const;
};

AtlasLayout make_atlas_layout(std::size_t faces, int chart_size);

/// OBJ + MTL + PNG with one right-triangle chart per face. The texture is
/// baked by querying `texture` at the surface point under each texel.
/// Returns the layout used.
AtlasLayout write_obj_atlas(const std::filesystem::path& path, const SurfaceMesh& mesh, const TextureQuery& texture,
                            int chart_size = 8);

struct ObjData {
    std::vector<Vec3> vertices;
    std::vector<Rgb> colors; ///< empty unless every v line had colour
    std::vector<std::array<double, 2>> uvs;
    std::vector<Face> faces;
    std::vector<Face> face_uvs; ///< empty unless faces carry vt indices
    std::string material_library;
};

ObjData read_obj(const std::filesystem::path& path);
SurfaceMesh to_mesh(const ObjData& obj);

// ---------------------------------------------------------------- images

/// 8-bit interleaved image, row 0 at the top.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;
};

void write_png(const std::filesystem::path& path, const Image8& img);
Image8 read_png(const std::filesystem::path& path);

double srgb_encode(double linear);
double srgb_decode(double encoded);
std::uint8_t srgb_to_byte(double linear);

/// Linear float image to 8-bit sRGB (channels kept; 1 channel is written
/// without the transfer curve, as a mask).
Image8 to_srgb8(const Image& img);
Image from_srgb8(const Image8& img);

/// PFM: "PF" (3 channels) or "Pf" (1 channel), negative scale for little
/// endian, rows stored bottom to top. Values are float32.
void write_pfm(const std::filesystem::path& path, const Image& img);
Image read_pfm(const std::filesystem::path& path);

// ---------------------------------------------------------------- blobs

/// "MGBLOB1\n", u64 little-endian header length, UTF-8 JSON header, then
/// float64 little-endian payload. The header's "count" field is the
/// number of payload values.
struct Blob {
    nlohmann::json header = nlohmann::json::object();
    std::vector<double> data;
};

void write_blob(const std::filesystem::path& path, const Blob& blob);
Blob read_blob(const std::filesystem::path& path);

/// Named tensors stored in one blob; header lists name, shape and offset.
struct TensorBundle {
    struct Tensor {
        std::vector<std::size_t> shape;
        std::vector<double> values;
    };
    std::map<std::string, Tensor> tensors;
    nlohmann::json meta = nlohmann::json::object();

    void put(const std::string& name, std::vector<std::size_t> shape, std::vector<double> values);
    const Tensor& get(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const TensorBundle& bundle);
TensorBundle read_checkpoint(const std::filesystem::path& path);

/// M x d row-major matrix of float64.
struct Embeddings {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
};

void write_embeddings(const std::filesystem::path& path, const Embeddings& e);
Embeddings read_embeddings(const std::filesystem::path& path);

// ---------------------------------------------------------------- misc

/// Rows of (step, term, value).
struct TraceRow {
    int step;
    std::string term;
    double value;
};

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& rows);

std::string read_text_file(const std::filesystem::path& path);

} // namespace texmesh
