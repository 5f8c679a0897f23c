// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/ply.hpp"

#include "fgs/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fgs {

namespace {

enum class PlyFormat { Ascii, BinaryLE, BinaryBE };

struct PlyProperty {
    std::string name;
    std::string type;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    std::int64_t count = 0;
    std::vector<PlyProperty> properties;
};

int type_size(const std::string &t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    throw DataError("unsupported PLY property type '" + t + "'");
}

bool is_unsigned_byte(const std::string &t) { return t == "uchar" || t == "uint8"; }

template <typename V>
V load(const unsigned char *p, bool swap) {
    unsigned char buf[sizeof(V)];
    std::memcpy(buf, p, sizeof(V));
    if (swap) {
        std::reverse(buf, buf + sizeof(V));
    }
    V v;
    std::memcpy(&v, buf, sizeof(V));
    return v;
}

double decode_binary(const std::string &t, const unsigned char *p, bool swap) {
    if (t == "char" || t == "int8") return load<std::int8_t>(p, swap);
    if (t == "uchar" || t == "uint8") return load<std::uint8_t>(p, swap);
    if (t == "short" || t == "int16") return load<std::int16_t>(p, swap);
    if (t == "ushort" || t == "uint16") return load<std::uint16_t>(p, swap);
    if (t == "int" || t == "int32") return load<std::int32_t>(p, swap);
    if (t == "uint" || t == "uint32") return load<std::uint32_t>(p, swap);
    if (t == "float" || t == "float32") return load<float>(p, swap);
    return load<double>(p, swap);
}

} // namespace

PointCloud read_ply(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open PLY file " + path.string());
    }
    std::string line;
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0) {
        throw DataError(path.string() + " is not a PLY file");
    }
    PlyFormat format = PlyFormat::Ascii;
    std::vector<PlyElement> elements;
    bool header_done = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "format") {
            std::string f;
            ls >> f;
            if (f == "ascii") format = PlyFormat::Ascii;
            else if (f == "binary_little_endian") format = PlyFormat::BinaryLE;
            else if (f == "binary_big_endian") format = PlyFormat::BinaryBE;
            else throw DataError("unknown PLY format '" + f + "'");
        } else if (key == "element") {
            PlyElement e;
            ls >> e.name >> e.count;
            if (!ls || e.count < 0) {
                throw DataError("malformed PLY element line: " + line);
            }
            elements.push_back(std::move(e));
        } else if (key == "property") {
            if (elements.empty()) {
                throw DataError("PLY property before any element");
            }
            PlyProperty p;
            std::string t;
            ls >> t;
            if (t == "list") {
                p.is_list = true;
                ls >> p.count_type >> p.type >> p.name;
                type_size(p.count_type);
            } else {
                p.type = t;
                ls >> p.name;
            }
            type_size(p.type);
            elements.back().properties.push_back(std::move(p));
        } else if (key == "end_header") {
            header_done = true;
            break;
        }
    }
    if (!header_done) {
        throw DataError("PLY header has no end_header");
    }

    const bool swap = (format == PlyFormat::BinaryLE && std::endian::native == std::endian::big) ||
                      (format == PlyFormat::BinaryBE && std::endian::native == std::endian::little);
    PointCloud cloud;
    for (const auto &e : elements) {
        const bool vertex = e.name == "vertex";
        int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
        for (int p = 0; p < static_cast<int>(e.properties.size()); ++p) {
            const auto &n = e.properties[p].name;
            if (n == "x") ix = p;
            if (n == "y") iy = p;
            if (n == "z") iz = p;
            if (n == "red" || n == "r") ir = p;
            if (n == "green" || n == "g") ig = p;
            if (n == "blue" || n == "b") ib = p;
        }
        if (vertex && (ix < 0 || iy < 0 || iz < 0)) {
            throw DataError("PLY vertex element lacks x/y/z");
        }
        const bool has_color = vertex && ir >= 0 && ig >= 0 && ib >= 0;
        if (vertex) {
            cloud.positions.resize(e.count, 3);
            if (has_color) {
                cloud.colors = RowMatrix<double>(e.count, 3);
            }
        }
        std::vector<double> values(e.properties.size());
        for (std::int64_t r = 0; r < e.count; ++r) {
            if (format == PlyFormat::Ascii) {
                if (!std::getline(in, line)) {
                    throw DataError("PLY file ends early in element '" + e.name + "'");
                }
                std::istringstream ls(line);
                for (std::size_t p = 0; p < e.properties.size(); ++p) {
                    if (e.properties[p].is_list) {
                        std::int64_t count = 0;
                        ls >> count;
                        for (std::int64_t c = 0; c < count; ++c) {
                            double skip;
                            ls >> skip;
                        }
                        values[p] = 0.0;
                    } else if (!(ls >> values[p])) {
                        throw DataError("malformed PLY row: " + line);
                    }
                }
            } else {
                for (std::size_t p = 0; p < e.properties.size(); ++p) {
                    const auto &prop = e.properties[p];
                    unsigned char buf[8];
                    if (prop.is_list) {
                        const int cs = type_size(prop.count_type);
                        if (!in.read(reinterpret_cast<char *>(buf), cs)) {
                            throw DataError("PLY file ends early");
                        }
                        const auto count = static_cast<std::int64_t>(decode_binary(prop.count_type, buf, swap));
                        in.seekg(count * type_size(prop.type), std::ios::cur);
                        values[p] = 0.0;
                        continue;
                    }
                    const int sz = type_size(prop.type);
                    if (!in.read(reinterpret_cast<char *>(buf), sz)) {
                        throw DataError("PLY file ends early in element '" + e.name + "'");
                    }
                    values[p] = decode_binary(prop.type, buf, swap);
                }
            }
            if (vertex) {
                cloud.positions.row(r) << values[ix], values[iy], values[iz];
                if (has_color) {
                    const double scale = is_unsigned_byte(e.properties[ir].type) ? 1.0 / 255.0 : 1.0;
                    cloud.colors->row(r) << values[ir] * scale, values[ig] * scale, values[ib] * scale;
                }
            }
        }
        if (vertex) {
            break;
        }
    }
    if (cloud.positions.rows() == 0) {
        throw DataError("PLY file " + path.string() + " has no vertices");
    }
    if (!cloud.positions.allFinite()) {
        throw DataError("PLY file " + path.string() + " has non-finite vertex positions");
    }
    return cloud;
}

void write_ply(const std::filesystem::path &path, const PointCloud &cloud) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write PLY file " + path.string());
    }
    const bool color = cloud.colors.has_value();
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.positions.rows() << "\n"
        << "property float x\nproperty float y\nproperty float z\n";
    if (color) {
        out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    }
    out << "end_header\n";
    for (Eigen::Index r = 0; r < cloud.positions.rows(); ++r) {
        for (int a = 0; a < 3; ++a) {
            const float v = static_cast<float>(cloud.positions(r, a));
            out.write(reinterpret_cast<const char *>(&v), sizeof v);
        }
        if (color) {
            for (int a = 0; a < 3; ++a) {
                const auto c = static_cast<std::uint8_t>(
                    std::lround(std::clamp((*cloud.colors)(r, a), 0.0, 1.0) * 255.0));
                out.write(reinterpret_cast<const char *>(&c), 1);
            }
        }
    }
}

} // namespace fgs
