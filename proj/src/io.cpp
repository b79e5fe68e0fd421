#include "wpd/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unistd.h>
#include <vector>

#include "wpd/error.hpp"

namespace wpd {
namespace {

[[noreturn]] void parse_error(const std::string& origin, const std::string& where,
                              const std::string& what) {
  throw Error(ErrorKind::Parse, origin + ": " + where + ": " + what);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string data;
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  if (size < 0) throw Error(ErrorKind::Io, "cannot read " + path.string());
  data.resize(static_cast<std::size_t>(size));
  in.seekg(0, std::ios::beg);
  in.read(data.data(), static_cast<std::streamsize>(data.size()));
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  return data;
}

std::string lower_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// ---------------------------------------------------------------- PLY ----

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

bool scalar_type_from(std::string_view name, ScalarType& out) {
  struct Entry {
    std::string_view name;
    ScalarType type;
  };
  static constexpr Entry table[] = {
      {"char", ScalarType::Int8},      {"int8", ScalarType::Int8},
      {"uchar", ScalarType::UInt8},    {"uint8", ScalarType::UInt8},
      {"short", ScalarType::Int16},    {"int16", ScalarType::Int16},
      {"ushort", ScalarType::UInt16},  {"uint16", ScalarType::UInt16},
      {"int", ScalarType::Int32},      {"int32", ScalarType::Int32},
      {"uint", ScalarType::UInt32},    {"uint32", ScalarType::UInt32},
      {"float", ScalarType::Float32},  {"float32", ScalarType::Float32},
      {"double", ScalarType::Float64}, {"float64", ScalarType::Float64},
  };
  for (const auto& e : table) {
    if (e.name == name) {
      out = e.type;
      return true;
    }
  }
  return false;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
  }
  return 0;
}

template <class T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

double load_scalar(ScalarType t, const char* p) {
  switch (t) {
    case ScalarType::Int8: return load_le<std::int8_t>(p);
    case ScalarType::UInt8: return load_le<std::uint8_t>(p);
    case ScalarType::Int16: return load_le<std::int16_t>(p);
    case ScalarType::UInt16: return load_le<std::uint16_t>(p);
    case ScalarType::Int32: return load_le<std::int32_t>(p);
    case ScalarType::UInt32: return load_le<std::uint32_t>(p);
    case ScalarType::Float32: return load_le<float>(p);
    case ScalarType::Float64: return load_le<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

// Indices of the vertex properties we keep; -1 when absent.
struct VertexLayout {
  int x = -1, y = -1, z = -1;
  int nx = -1, ny = -1, nz = -1;
  int red = -1, green = -1, blue = -1;
  int cls = -1;
};

VertexLayout vertex_layout(const PlyElement& el, const std::string& origin) {
  VertexLayout l;
  for (int i = 0; i < static_cast<int>(el.properties.size()); ++i) {
    const auto& p = el.properties[static_cast<std::size_t>(i)];
    int* slot = nullptr;
    if (p.name == "x") slot = &l.x;
    else if (p.name == "y") slot = &l.y;
    else if (p.name == "z") slot = &l.z;
    else if (p.name == "nx") slot = &l.nx;
    else if (p.name == "ny") slot = &l.ny;
    else if (p.name == "nz") slot = &l.nz;
    else if (p.name == "red") slot = &l.red;
    else if (p.name == "green") slot = &l.green;
    else if (p.name == "blue") slot = &l.blue;
    else if (p.name == "class") slot = &l.cls;
    if (slot == nullptr) continue;
    if (p.is_list) parse_error(origin, "header", "vertex property '" + p.name + "' is a list");
    *slot = i;
  }
  if (l.x < 0 || l.y < 0 || l.z < 0) {
    parse_error(origin, "header", "vertex element lacks x/y/z properties");
  }
  return l;
}

bool all_present(int a, int b, int c) { return a >= 0 && b >= 0 && c >= 0; }

void store_vertex(PointCloud& cloud, const VertexLayout& l, const std::vector<double>& v,
                  const std::string& origin, const std::string& where) {
  const auto at = [&](int i) { return v[static_cast<std::size_t>(i)]; };
  cloud.points.emplace_back(at(l.x), at(l.y), at(l.z));
  if (!cloud.points.back().allFinite()) parse_error(origin, where, "non-finite coordinate");
  if (all_present(l.nx, l.ny, l.nz)) cloud.normals.emplace_back(at(l.nx), at(l.ny), at(l.nz));
  if (all_present(l.red, l.green, l.blue)) {
    auto channel = [](double c) {
      return static_cast<std::uint8_t>(std::clamp(c, 0.0, 255.0));
    };
    cloud.colors.push_back({channel(at(l.red)), channel(at(l.green)), channel(at(l.blue))});
  }
  if (l.cls >= 0) {
    const double c = at(l.cls);
    if (c != 0.0 && c != 1.0) parse_error(origin, where, "class must be 0 or 1");
    cloud.classes.push_back(c == 0.0 ? PointClass::Normal : PointClass::Edge);
  }
}

// Splits the header into lines; returns the byte offset of the body.
std::size_t split_header(std::string_view data, std::vector<std::string_view>& lines,
                         const std::string& origin) {
  if (data.substr(0, 4) != "ply\n" && data.substr(0, 5) != "ply\r\n") {
    parse_error(origin, "line 1", "not a PLY file");
  }
  std::size_t pos = 0;
  while (true) {
    const auto eol = data.find('\n', pos);
    if (eol == std::string_view::npos) parse_error(origin, "header", "missing end_header");
    auto line = data.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = eol + 1;
    if (line == "end_header") return pos;
  }
}

std::vector<std::string_view> tokens_of(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const auto start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_number(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

PointCloud parse_ply(std::string_view data, const std::string& origin) {
  std::vector<std::string_view> lines;
  const std::size_t body = split_header(data, lines, origin);
  if (lines.empty() || lines.front() != "ply") parse_error(origin, "line 1", "not a PLY file");

  bool ascii = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto where = "line " + std::to_string(ln + 1);
    const auto tok = tokens_of(lines[ln]);
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info" || tok[0] == "end_header") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) parse_error(origin, where, "malformed format line");
      if (tok[1] == "ascii") {
        ascii = true;
      } else if (tok[1] == "binary_little_endian") {
        ascii = false;
      } else {
        parse_error(origin, where,
                    "unsupported PLY encoding '" + std::string(tok[1]) +
                        "' (supported: ascii, binary_little_endian)");
      }
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_error(origin, where, "malformed element line");
      PlyElement el;
      el.name = std::string(tok[1]);
      double count = 0;
      if (!parse_number(tok[2], count) || count < 0 || count != static_cast<double>(
                                                                 static_cast<std::size_t>(count))) {
        parse_error(origin, where, "bad element count");
      }
      el.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(el));
    } else if (tok[0] == "property") {
      if (elements.empty()) parse_error(origin, where, "property before any element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        prop.is_list = true;
        if (!scalar_type_from(tok[2], prop.count_type) || !scalar_type_from(tok[3], prop.type)) {
          parse_error(origin, where, "unknown property type");
        }
        prop.name = std::string(tok[4]);
      } else if (tok.size() == 3) {
        if (!scalar_type_from(tok[1], prop.type)) {
          parse_error(origin, where, "unknown property type '" + std::string(tok[1]) + "'");
        }
        prop.name = std::string(tok[2]);
      } else {
        parse_error(origin, where, "malformed property line");
      }
      elements.back().properties.push_back(std::move(prop));
    } else {
      parse_error(origin, where, "unexpected header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!have_format) parse_error(origin, "header", "missing format line");
  const auto vertex_it = std::find_if(elements.begin(), elements.end(),
                                      [](const PlyElement& e) { return e.name == "vertex"; });
  if (vertex_it == elements.end()) parse_error(origin, "header", "no vertex element");
  const auto layout = vertex_layout(*vertex_it, origin);

  PointCloud cloud;
  cloud.points.reserve(vertex_it->count);
  std::vector<double> values;

  if (ascii) {
    std::size_t pos = body;
    std::size_t line_no = lines.size();
    auto next_line = [&](std::string_view& line) {
      while (pos < data.size()) {
        auto eol = data.find('\n', pos);
        if (eol == std::string_view::npos) eol = data.size();
        line = data.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") != std::string_view::npos) return true;
      }
      return false;
    };
    for (const auto& el : elements) {
      const bool is_vertex = &el == &*vertex_it;
      for (std::size_t r = 0; r < el.count; ++r) {
        std::string_view line;
        if (!next_line(line)) {
          parse_error(origin, "line " + std::to_string(line_no + 1),
                      "PLY declares " + std::to_string(el.count) + " " + el.name +
                          " entries but data ends after " + std::to_string(r));
        }
        const auto where = "line " + std::to_string(line_no);
        const auto tok = tokens_of(line);
        std::size_t t = 0;
        values.clear();
        for (const auto& prop : el.properties) {
          double v = 0;
          if (t >= tok.size()) parse_error(origin, where, "too few values in row");
          if (!parse_number(tok[t++], v)) parse_error(origin, where, "malformed number");
          if (prop.is_list) {
            if (v < 0) parse_error(origin, where, "negative list length");
            const auto n = static_cast<std::size_t>(v);
            if (t + n > tok.size()) parse_error(origin, where, "too few values in row");
            t += n;
          }
          values.push_back(v);
        }
        if (t != tok.size()) parse_error(origin, where, "too many values in row");
        if (is_vertex) store_vertex(cloud, layout, values, origin, where);
      }
    }
  } else {
    std::size_t pos = body;
    for (const auto& el : elements) {
      const bool is_vertex = &el == &*vertex_it;
      for (std::size_t r = 0; r < el.count; ++r) {
        const auto row_start = pos;
        values.clear();
        for (const auto& prop : el.properties) {
          const auto where = "byte " + std::to_string(pos);
          auto need = [&](std::size_t bytes) {
            if (pos + bytes > data.size()) {
              parse_error(origin, "byte " + std::to_string(row_start),
                          "PLY declares " + std::to_string(el.count) + " " + el.name +
                              " entries but data ends after " + std::to_string(r));
            }
          };
          if (prop.is_list) {
            need(scalar_size(prop.count_type));
            const double n = load_scalar(prop.count_type, data.data() + pos);
            if (n < 0) parse_error(origin, where, "negative list length");
            pos += scalar_size(prop.count_type);
            const auto bytes = static_cast<std::size_t>(n) * scalar_size(prop.type);
            need(bytes);
            pos += bytes;
            values.push_back(n);
          } else {
            need(scalar_size(prop.type));
            values.push_back(load_scalar(prop.type, data.data() + pos));
            pos += scalar_size(prop.type);
          }
        }
        if (is_vertex) store_vertex(cloud, layout, values, origin, "byte " + std::to_string(row_start));
      }
    }
  }
  return cloud;
}

PointCloud parse_xyz(std::string_view data, const std::string& origin) {
  PointCloud cloud;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  int columns = 0;
  while (pos < data.size()) {
    auto eol = data.find('\n', pos);
    if (eol == std::string_view::npos) eol = data.size();
    auto line = data.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto tok = tokens_of(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    const auto where = "line " + std::to_string(line_no);
    if (tok.size() != 3 && tok.size() != 6) {
      parse_error(origin, where, "expected 3 or 6 columns, got " + std::to_string(tok.size()));
    }
    if (columns == 0) columns = static_cast<int>(tok.size());
    if (static_cast<int>(tok.size()) != columns) parse_error(origin, where, "inconsistent column count");
    double v[6];
    for (std::size_t i = 0; i < tok.size(); ++i) {
      if (!parse_number(tok[i], v[i])) parse_error(origin, where, "malformed number");
    }
    cloud.points.emplace_back(v[0], v[1], v[2]);
    if (!cloud.points.back().allFinite()) parse_error(origin, where, "non-finite coordinate");
    if (columns == 6) cloud.normals.emplace_back(v[3], v[4], v[5]);
  }
  return cloud;
}

PointCloud read_cloud(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  if (ext != ".ply" && ext != ".xyz") {
    throw Error(ErrorKind::InvalidArgument,
                "unsupported cloud format '" + ext + "' for " + path.string() +
                    " (supported: .ply, .xyz)");
  }
  const auto data = read_file(path);
  PointCloud cloud = ext == ".ply" ? parse_ply(data, path.string()) : parse_xyz(data, path.string());
  if (cloud.empty()) throw Error(ErrorKind::Parse, path.string() + ": no points");
  return cloud;
}

CloudFormat format_for(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  if (ext == ".ply") return CloudFormat::PlyBinary;
  if (ext == ".xyz") return CloudFormat::Xyz;
  throw Error(ErrorKind::InvalidArgument,
              "unsupported cloud format '" + ext + "' for " + path.string() +
                  " (supported: .ply, .xyz)");
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

template <class T>
void append_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

std::string encode_ply(const PointCloud& cloud, bool ascii) {
  std::ostringstream header;
  header << "ply\n"
         << "format " << (ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
         << "element vertex " << cloud.size() << "\n"
         << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals()) header << "property double nx\nproperty double ny\nproperty double nz\n";
  if (cloud.has_colors()) header << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (cloud.has_classes()) header << "property int class\n";
  header << "end_header\n";

  std::string out = header.str();
  out.reserve(out.size() + cloud.size() * (ascii ? 80 : 60));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    std::vector<double> row(cloud.points[i].data(), cloud.points[i].data() + 3);
    if (cloud.has_normals()) row.insert(row.end(), cloud.normals[i].data(), cloud.normals[i].data() + 3);
    if (ascii) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out.push_back(' ');
        append_double(out, row[c]);
      }
      if (cloud.has_colors()) {
        for (auto ch : cloud.colors[i]) out += " " + std::to_string(ch);
      }
      if (cloud.has_classes()) out += cloud.classes[i] == PointClass::Edge ? " 1" : " 0";
      out.push_back('\n');
    } else {
      for (double v : row) append_le(out, v);
      if (cloud.has_colors()) {
        for (auto ch : cloud.colors[i]) out.push_back(static_cast<char>(ch));
      }
      if (cloud.has_classes()) {
        append_le<std::int32_t>(out, cloud.classes[i] == PointClass::Edge ? 1 : 0);
      }
    }
  }
  return out;
}

std::string encode_xyz(const PointCloud& cloud) {
  std::string out;
  out.reserve(cloud.size() * 64);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      if (c) out.push_back(' ');
      append_double(out, cloud.points[i][c]);
    }
    if (cloud.has_normals()) {
      for (int c = 0; c < 3; ++c) {
        out.push_back(' ');
        append_double(out, cloud.normals[i][c]);
      }
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  if (cloud.empty()) throw Error(ErrorKind::InvalidArgument, "refusing to write empty cloud");
  cloud.validate();
  std::string bytes;
  switch (format) {
    case CloudFormat::PlyBinary: bytes = encode_ply(cloud, false); break;
    case CloudFormat::PlyAscii: bytes = encode_ply(cloud, true); break;
    case CloudFormat::Xyz: bytes = encode_xyz(cloud); break;
  }

  auto tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorKind::Io, "failed writing " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::Io, "cannot move output into place at " + path.string());
  }
}

}  // namespace wpd
