#include "mlsq/cloud_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mlsq/error.hpp"
#include "mlsq/log.hpp"

namespace mlsq {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::optional<double> parse_double(std::string_view token) {
  double v = 0.0;
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  return v;
}

std::string line_error(const std::filesystem::path& path, std::size_t line, std::string_view what) {
  return path.string() + ":" + std::to_string(line) + ": " + std::string(what);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path.string());
  return in;
}

// ---------------------------------------------------------------- XYZ

PointCloud read_xyz(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    const auto tokens = split_ws(view);
    if (tokens.empty()) continue;
    if (tokens.size() != 3) {
      invalid_input(line_error(path, line_no, "expected 3 values, found " + std::to_string(tokens.size())));
    }
    Point3 p;
    double* dst[3] = {&p.x, &p.y, &p.z};
    for (int k = 0; k < 3; ++k) {
      const auto v = parse_double(tokens[static_cast<std::size_t>(k)]);
      if (!v) invalid_input(line_error(path, line_no, "malformed number '" + std::string(tokens[static_cast<std::size_t>(k)]) + "'"));
      *dst[k] = *v;
    }
    if (!p.is_finite()) invalid_input(line_error(path, line_no, "non-finite coordinate"));
    cloud.points.push_back(p);
  }
  return cloud;
}

// ---------------------------------------------------------------- PLY

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<PlyType> parse_ply_type(std::string_view name) {
  if (name == "char" || name == "int8") return PlyType::Int8;
  if (name == "uchar" || name == "uint8") return PlyType::UInt8;
  if (name == "short" || name == "int16") return PlyType::Int16;
  if (name == "ushort" || name == "uint16") return PlyType::UInt16;
  if (name == "int" || name == "int32") return PlyType::Int32;
  if (name == "uint" || name == "uint32") return PlyType::UInt32;
  if (name == "float" || name == "float32") return PlyType::Float32;
  if (name == "double" || name == "float64") return PlyType::Float64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

template <class T>
double load_as(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

double load_binary(PlyType t, const char* p) {
  switch (t) {
    case PlyType::Int8: return load_as<std::int8_t>(p);
    case PlyType::UInt8: return load_as<std::uint8_t>(p);
    case PlyType::Int16: return load_as<std::int16_t>(p);
    case PlyType::UInt16: return load_as<std::uint16_t>(p);
    case PlyType::Int32: return load_as<std::int32_t>(p);
    case PlyType::UInt32: return load_as<std::uint32_t>(p);
    case PlyType::Float32: return load_as<float>(p);
    case PlyType::Float64: return load_as<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float64;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  CloudFileFormat format = CloudFileFormat::PlyAscii;
  std::vector<PlyElement> elements;
  std::size_t header_lines = 0;
};

PlyHeader read_ply_header(std::istream& in, const std::filesystem::path& path) {
  PlyHeader header;
  std::string line;
  std::size_t line_no = 0;
  bool saw_format = false;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next() || line != "ply") invalid_input(line_error(path, 1, "missing 'ply' magic"));
  for (;;) {
    if (!next()) invalid_input(line_error(path, line_no, "header has no end_header"));
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string_view key = tokens[0];
    if (key == "end_header") break;
    if (key == "comment" || key == "obj_info") continue;
    if (key == "format") {
      if (tokens.size() != 3) invalid_input(line_error(path, line_no, "malformed format line"));
      if (tokens[1] == "ascii") {
        header.format = CloudFileFormat::PlyAscii;
      } else if (tokens[1] == "binary_little_endian") {
        header.format = CloudFileFormat::PlyBinaryLe;
      } else {
        invalid_input(line_error(path, line_no, "unsupported PLY format '" + std::string(tokens[1]) + "'"));
      }
      if (tokens[2] != "1.0") invalid_input(line_error(path, line_no, "unsupported PLY version"));
      saw_format = true;
    } else if (key == "element") {
      if (tokens.size() != 3) invalid_input(line_error(path, line_no, "malformed element line"));
      PlyElement el;
      el.name = tokens[1];
      std::uint64_t count = 0;
      const auto [ptr, ec] = std::from_chars(tokens[2].data(), tokens[2].data() + tokens[2].size(), count);
      if (ec != std::errc() || ptr != tokens[2].data() + tokens[2].size()) {
        invalid_input(line_error(path, line_no, "malformed element count"));
      }
      el.count = count;
      header.elements.push_back(std::move(el));
    } else if (key == "property") {
      if (header.elements.empty()) invalid_input(line_error(path, line_no, "property before element"));
      PlyProperty prop;
      if (tokens.size() == 5 && tokens[1] == "list") {
        prop.is_list = true;
        prop.name = tokens[4];
        const auto ct = parse_ply_type(tokens[2]);
        const auto it = parse_ply_type(tokens[3]);
        if (!ct || !it) {
          invalid_input(line_error(path, line_no, "unsupported PLY property type for '" + prop.name + "'"));
        }
        prop.count_type = *ct;
        prop.type = *it;
      } else if (tokens.size() == 3) {
        prop.name = tokens[2];
        const auto t = parse_ply_type(tokens[1]);
        if (!t) {
          invalid_input(line_error(path, line_no, "unsupported PLY property type '" + std::string(tokens[1]) +
                                                      "' for property '" + prop.name + "'"));
        }
        prop.type = *t;
      } else {
        invalid_input(line_error(path, line_no, "malformed property line"));
      }
      header.elements.back().properties.push_back(std::move(prop));
    } else {
      invalid_input(line_error(path, line_no, "unknown header keyword '" + std::string(key) + "'"));
    }
  }
  if (!saw_format) invalid_input(line_error(path, line_no, "header has no format line"));
  header.header_lines = line_no;
  return header;
}

struct VertexLayout {
  std::size_t element = 0;
  int x = -1, y = -1, z = -1;
};

VertexLayout vertex_layout(const PlyHeader& header, const std::filesystem::path& path) {
  VertexLayout layout;
  bool found = false;
  for (std::size_t e = 0; e < header.elements.size(); ++e) {
    if (header.elements[e].name == "vertex") {
      layout.element = e;
      found = true;
      break;
    }
  }
  if (!found) invalid_input(path.string() + ": no vertex element");
  const auto& props = header.elements[layout.element].properties;
  std::vector<std::string> skipped;
  for (std::size_t i = 0; i < props.size(); ++i) {
    const auto& p = props[i];
    if (p.is_list) {
      invalid_input(path.string() + ": unsupported PLY property type 'list' for vertex property '" + p.name + "'");
    }
    if (p.name == "x") {
      layout.x = static_cast<int>(i);
    } else if (p.name == "y") {
      layout.y = static_cast<int>(i);
    } else if (p.name == "z") {
      layout.z = static_cast<int>(i);
    } else {
      skipped.push_back(p.name);
    }
  }
  if (layout.x < 0 || layout.y < 0 || layout.z < 0) {
    invalid_input(path.string() + ": vertex element lacks x, y or z");
  }
  if (!skipped.empty()) {
    std::string names;
    for (const auto& s : skipped) names += (names.empty() ? "" : ", ") + s;
    log_warning(path.string() + ": ignoring vertex properties " + names);
  }
  return layout;
}

PointCloud read_ply_ascii(std::istream& in, const PlyHeader& header, const VertexLayout& layout,
                          const std::filesystem::path& path) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = header.header_lines;
  auto next_data_line = [&]() -> std::vector<std::string_view> {
    for (;;) {
      if (!std::getline(in, line)) invalid_input(line_error(path, line_no + 1, "unexpected end of file"));
      ++line_no;
      auto tokens = split_ws(line);
      if (!tokens.empty()) return tokens;
    }
  };
  for (std::size_t e = 0; e < header.elements.size(); ++e) {
    const PlyElement& el = header.elements[e];
    if (e != layout.element) {
      if (e > layout.element) break;
      for (std::size_t r = 0; r < el.count; ++r) next_data_line();
      continue;
    }
    cloud.points.reserve(el.count);
    for (std::size_t r = 0; r < el.count; ++r) {
      const auto tokens = next_data_line();
      if (tokens.size() != el.properties.size()) {
        invalid_input(line_error(path, line_no, "expected " + std::to_string(el.properties.size()) +
                                                    " values, found " + std::to_string(tokens.size())));
      }
      Point3 p;
      const int idx[3] = {layout.x, layout.y, layout.z};
      double* dst[3] = {&p.x, &p.y, &p.z};
      for (int k = 0; k < 3; ++k) {
        const auto token = tokens[static_cast<std::size_t>(idx[k])];
        const auto v = parse_double(token);
        if (!v) invalid_input(line_error(path, line_no, "malformed number '" + std::string(token) + "'"));
        *dst[k] = *v;
      }
      if (!p.is_finite()) invalid_input(line_error(path, line_no, "non-finite coordinate"));
      cloud.points.push_back(p);
    }
  }
  return cloud;
}

PointCloud read_ply_binary(std::istream& in, const PlyHeader& header, const VertexLayout& layout,
                           const std::filesystem::path& path) {
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto need = [&](std::size_t bytes, const std::string& where) {
    if (pos + bytes > data.size()) invalid_input(path.string() + ": unexpected end of file in " + where);
  };
  PointCloud cloud;
  for (std::size_t e = 0; e <= layout.element; ++e) {
    const PlyElement& el = header.elements[e];
    if (e != layout.element) {
      for (std::size_t r = 0; r < el.count; ++r) {
        for (const auto& prop : el.properties) {
          if (prop.is_list) {
            need(ply_size(prop.count_type), el.name);
            const double n = load_binary(prop.count_type, data.data() + pos);
            pos += ply_size(prop.count_type);
            const auto bytes = static_cast<std::size_t>(n) * ply_size(prop.type);
            need(bytes, el.name);
            pos += bytes;
          } else {
            need(ply_size(prop.type), el.name);
            pos += ply_size(prop.type);
          }
        }
      }
      continue;
    }
    std::vector<std::size_t> offsets;
    std::size_t stride = 0;
    for (const auto& prop : el.properties) {
      offsets.push_back(stride);
      stride += ply_size(prop.type);
    }
    const auto& props = el.properties;
    const auto ux = static_cast<std::size_t>(layout.x);
    const auto uy = static_cast<std::size_t>(layout.y);
    const auto uz = static_cast<std::size_t>(layout.z);
    cloud.points.reserve(el.count);
    for (std::size_t r = 0; r < el.count; ++r) {
      need(stride, "vertex " + std::to_string(r));
      const char* base = data.data() + pos;
      Point3 p{load_binary(props[ux].type, base + offsets[ux]), load_binary(props[uy].type, base + offsets[uy]),
               load_binary(props[uz].type, base + offsets[uz])};
      if (!p.is_finite()) invalid_input(path.string() + ": non-finite coordinate at vertex " + std::to_string(r));
      cloud.points.push_back(p);
      pos += stride;
    }
  }
  return cloud;
}

PointCloud read_ply(const std::filesystem::path& path, CloudFileFormat expected) {
  std::ifstream in = open_input(path);
  const PlyHeader header = read_ply_header(in, path);
  if (header.format != expected) {
    invalid_input(path.string() + ": PLY encoding does not match the requested format");
  }
  const VertexLayout layout = vertex_layout(header, path);
  if (header.format == CloudFileFormat::PlyAscii) return read_ply_ascii(in, header, layout, path);
  return read_ply_binary(in, header, layout, path);
}

std::string ply_header(std::size_t n, CloudFileFormat format) {
  std::ostringstream h;
  h << "ply\n"
    << "format " << (format == CloudFileFormat::PlyAscii ? "ascii" : "binary_little_endian") << " 1.0\n"
    << "element vertex " << n << "\n"
    << "property double x\n"
    << "property double y\n"
    << "property double z\n"
    << "end_header\n";
  return h.str();
}

}  // namespace

CloudFileFormat detect_format(const std::filesystem::path& path) {
  {
    std::ifstream in(path, std::ios::binary);
    if (in) {
      std::string first;
      std::getline(in, first);
      if (!first.empty() && first.back() == '\r') first.pop_back();
      if (first == "ply") {
        std::string line;
        while (std::getline(in, line)) {
          const auto tokens = split_ws(line);
          if (tokens.size() >= 2 && tokens[0] == "format") {
            return tokens[1] == "ascii" ? CloudFileFormat::PlyAscii : CloudFileFormat::PlyBinaryLe;
          }
          if (!tokens.empty() && tokens[0] == "end_header") break;
        }
        invalid_input(path.string() + ": PLY header has no format line");
      }
    }
  }
  const std::string ext = lower(path.extension().string());
  if (ext == ".xyz" || ext == ".txt" || ext == ".asc") return CloudFileFormat::XyzAscii;
  if (ext == ".ply") invalid_input(path.string() + ": missing 'ply' magic");
  invalid_input("cannot determine point cloud format of " + path.string());
}

PointCloud read_cloud(const std::filesystem::path& path, CloudFileFormat format) {
  if (!std::filesystem::exists(path)) io_error("no such file: " + path.string());
  if (format == CloudFileFormat::XyzAscii) return read_xyz(path);
  return read_ply(path, format);
}

PointCloud read_cloud(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) io_error("no such file: " + path.string());
  return read_cloud(path, detect_format(path));
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFileFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot write " + path.string());
  if (format == CloudFileFormat::PlyBinaryLe) {
    out << ply_header(cloud.size(), format);
    static_assert(sizeof(Point3) == 3 * sizeof(double));
    out.write(reinterpret_cast<const char*>(cloud.points.data()),
              static_cast<std::streamsize>(cloud.size() * sizeof(Point3)));
  } else {
    if (format == CloudFileFormat::PlyAscii) out << ply_header(cloud.size(), format);
    char buf[96];
    for (const Point3& p : cloud.points) {
      const int len = std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x, p.y, p.z);
      out.write(buf, len);
    }
  }
  if (!out) io_error("write failed for " + path.string());
}

}  // namespace mlsq
