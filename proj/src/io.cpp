#include "slmetro/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace slmetro {

namespace {

using nlohmann::json;

// Skips whitespace and '#' comments in a PGM header.
std::string next_token(std::istream &in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n')
                ;
            continue;
        }
        if (std::isspace(c))
            continue;
        tok.push_back(static_cast<char>(c));
        while ((c = in.peek()) != EOF && !std::isspace(c)) {
            tok.push_back(static_cast<char>(in.get()));
        }
        return tok;
    }
    return tok;
}

const char *role_name(FrameRole role) {
    switch (role) {
    case FrameRole::GrayBit:
        return "gray_bit";
    case FrameRole::GrayComplement:
        return "gray_complement";
    case FrameRole::StripeShift:
        return "stripe_shift";
    }
    return "unknown";
}

FrameRole role_from_name(const std::string &name) {
    if (name == "gray_bit")
        return FrameRole::GrayBit;
    if (name == "gray_complement")
        return FrameRole::GrayComplement;
    if (name == "stripe_shift")
        return FrameRole::StripeShift;
    throw IoError("unknown frame role: " + name);
}

} // namespace

Image8 read_pgm(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open PGM: " + path);
    if (next_token(in) != "P5")
        throw IoError("not a binary PGM (P5): " + path);
    int w = std::stoi(next_token(in));
    int h = std::stoi(next_token(in));
    int maxval = std::stoi(next_token(in));
    if (w <= 0 || h <= 0 || maxval != 255)
        throw IoError("unsupported PGM header in " + path);
    in.get(); // single whitespace after maxval
    Image8 img(w, h);
    in.read(reinterpret_cast<char *>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw IoError("truncated PGM payload: " + path);
    return img;
}

void write_pgm(const Image8 &img, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write PGM: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char *>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
}

namespace {

void write_ply_vertices(std::ofstream &out, const std::vector<Vec3> &points,
                        const std::vector<uint8_t> *valid) {
    for (size_t i = 0; i < points.size(); ++i) {
        double xyz[3] = {points[i].x(), points[i].y(), points[i].z()};
        out.write(reinterpret_cast<const char *>(xyz), sizeof(xyz));
        uint8_t v = valid ? (*valid)[i] : 1;
        out.write(reinterpret_cast<const char *>(&v), 1);
    }
}

struct PlyHeader {
    size_t count = 0;
    int width = -1;
    int height = -1;
    bool has_valid = false;
    bool doubles = true;
};

PlyHeader read_ply_header(std::ifstream &in, const std::string &path) {
    std::string line;
    std::getline(in, line);
    if (line != "ply")
        throw IoError("not a PLY file: " + path);
    PlyHeader hdr;
    int prop_index = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "end_header")
            return hdr;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian")
                throw IoError("unsupported PLY format in " + path);
        } else if (word == "comment") {
            std::string key;
            ls >> key;
            if (key == "width")
                ls >> hdr.width;
            else if (key == "height")
                ls >> hdr.height;
        } else if (word == "element") {
            std::string name;
            ls >> name >> hdr.count;
            if (name != "vertex")
                throw IoError("unexpected PLY element in " + path);
        } else if (word == "property") {
            std::string type, name;
            ls >> type >> name;
            if (name == "x")
                hdr.doubles = (type == "double");
            if (name == "valid")
                hdr.has_valid = true;
            if ((name == "x" && prop_index != 0) || (name == "y" && prop_index != 1) ||
                (name == "z" && prop_index != 2))
                throw IoError("unexpected PLY property order in " + path);
            ++prop_index;
        }
    }
    throw IoError("PLY header missing end_header: " + path);
}

void read_ply_vertices(std::ifstream &in, const PlyHeader &hdr, const std::string &path,
                       std::vector<Vec3> &points, std::vector<uint8_t> &valid) {
    points.resize(hdr.count);
    valid.assign(hdr.count, 1);
    for (size_t i = 0; i < hdr.count; ++i) {
        if (hdr.doubles) {
            double xyz[3];
            in.read(reinterpret_cast<char *>(xyz), sizeof(xyz));
            points[i] = Vec3(xyz[0], xyz[1], xyz[2]);
        } else {
            float xyz[3];
            in.read(reinterpret_cast<char *>(xyz), sizeof(xyz));
            points[i] = Vec3(xyz[0], xyz[1], xyz[2]);
        }
        if (hdr.has_valid) {
            char v;
            in.read(&v, 1);
            valid[i] = static_cast<uint8_t>(v);
        }
        if (!in)
            throw IoError("truncated PLY payload: " + path);
    }
}

} // namespace

void write_grid_ply(const PointGrid &grid, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write PLY: " + path);
    out << "ply\nformat binary_little_endian 1.0\n"
        << "comment width " << grid.width << "\ncomment height " << grid.height << "\n"
        << "element vertex " << grid.points.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "property uchar valid\nend_header\n";
    write_ply_vertices(out, grid.points, &grid.valid);
}

PointGrid read_grid_ply(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open PLY: " + path);
    PlyHeader hdr = read_ply_header(in, path);
    if (hdr.width <= 0 || hdr.height <= 0 ||
        hdr.count != static_cast<size_t>(hdr.width) * hdr.height)
        throw IoError("PLY is not an organized grid: " + path);
    PointGrid grid(hdr.width, hdr.height);
    read_ply_vertices(in, hdr, path, grid.points, grid.valid);
    return grid;
}

void write_points_ply(const std::vector<Vec3> &points, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write PLY: " + path);
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << points.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "property uchar valid\nend_header\n";
    write_ply_vertices(out, points, nullptr);
}

std::vector<Vec3> read_points_ply(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open PLY: " + path);
    PlyHeader hdr = read_ply_header(in, path);
    std::vector<Vec3> points;
    std::vector<uint8_t> valid;
    read_ply_vertices(in, hdr, path, points, valid);
    std::vector<Vec3> out;
    out.reserve(points.size());
    for (size_t i = 0; i < points.size(); ++i)
        if (valid[i])
            out.push_back(points[i]);
    return out;
}

bool ply_is_grid(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open PLY: " + path);
    PlyHeader hdr = read_ply_header(in, path);
    return hdr.width > 0 && hdr.height > 0;
}

void write_stack_manifest(const std::string &dir, const CodecConfig &cfg,
                          const std::vector<FrameMeta> &meta,
                          const std::vector<std::string> &files) {
    if (meta.size() != files.size())
        throw InvalidConfig("manifest: meta/file count mismatch");
    json j;
    j["codec"] = {{"proj_width", cfg.proj_width},
                  {"proj_height", cfg.proj_height},
                  {"stripe_period", cfg.stripe_period},
                  {"n_shifts", cfg.n_shifts},
                  {"contrast_threshold", cfg.contrast_threshold},
                  {"min_amplitude", cfg.min_amplitude}};
    json frames = json::array();
    for (size_t i = 0; i < meta.size(); ++i)
        frames.push_back(
            {{"file", files[i]}, {"role", role_name(meta[i].role)}, {"index", meta[i].index}});
    j["frames"] = frames;
    std::ofstream out(dir + "/manifest.json");
    if (!out)
        throw IoError("cannot write manifest in " + dir);
    out << j.dump(2) << "\n";
}

StackManifest read_stack_manifest(const std::string &dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in)
        throw IoError("missing manifest.json in " + dir);
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw IoError("manifest parse error in " + dir + ": " + e.what());
    }
    StackManifest m;
    const json &c = j.at("codec");
    m.codec.proj_width = c.at("proj_width").get<int>();
    m.codec.proj_height = c.at("proj_height").get<int>();
    m.codec.stripe_period = c.at("stripe_period").get<int>();
    m.codec.n_shifts = c.at("n_shifts").get<int>();
    m.codec.contrast_threshold = c.value("contrast_threshold", 5.0);
    m.codec.min_amplitude = c.value("min_amplitude", 8.0);
    for (const json &f : j.at("frames")) {
        m.files.push_back(f.at("file").get<std::string>());
        m.meta.push_back({role_from_name(f.at("role").get<std::string>()),
                          f.at("index").get<int>()});
    }
    return m;
}

CaptureStack load_capture_stack(const std::string &dir, CodecConfig *cfg_out) {
    StackManifest m = read_stack_manifest(dir);
    CaptureStack stack;
    stack.meta = m.meta;
    for (const std::string &f : m.files)
        stack.frames.push_back(read_pgm(dir + "/" + f));
    if (cfg_out)
        *cfg_out = m.codec;
    return stack;
}

} // namespace slmetro
