#pragma once

#include "pcalign/geometry.hpp"
#include "pcalign/sampler.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace pcalign {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline ParseError parse_error_at(std::istream& in, const std::string& what) {
  std::ostringstream os;
  auto pos = in.tellg();
  os << what << " (byte offset " << (pos < 0 ? -1 : static_cast<long long>(pos)) << ")";
  return ParseError(os.str());
}

inline std::uint8_t quantize_u8(double v) {
  double c = std::min(std::max(v, 0.0), 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PLY (ASCII and binary little-endian; x,y,z float/double, red,green,blue
// uint8; extra scalar properties are skipped)

namespace detail {

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64, Unknown };

inline PlyType ply_type(const std::string& t) {
  if (t == "char" || t == "int8") return PlyType::I8;
  if (t == "uchar" || t == "uint8") return PlyType::U8;
  if (t == "short" || t == "int16") return PlyType::I16;
  if (t == "ushort" || t == "uint16") return PlyType::U16;
  if (t == "int" || t == "int32") return PlyType::I32;
  if (t == "uint" || t == "uint32") return PlyType::U32;
  if (t == "float" || t == "float32") return PlyType::F32;
  if (t == "double" || t == "float64") return PlyType::F64;
  return PlyType::Unknown;
}

inline std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::I8: case PlyType::U8: return 1;
    case PlyType::I16: case PlyType::U16: return 2;
    case PlyType::I32: case PlyType::U32: case PlyType::F32: return 4;
    case PlyType::F64: return 8;
    default: return 0;
  }
}

inline double ply_read_binary(std::istream& in, PlyType t) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(ply_type_size(t)));
  if (!in) throw parse_error_at(in, "ply: truncated body");
  // Little-endian host assumed (x86/arm64); widths are explicit.
  switch (t) {
    case PlyType::I8: return static_cast<double>(static_cast<int8_t>(buf[0]));
    case PlyType::U8: return static_cast<double>(buf[0]);
    case PlyType::I16: { int16_t v; std::memcpy(&v, buf, 2); return v; }
    case PlyType::U16: { uint16_t v; std::memcpy(&v, buf, 2); return v; }
    case PlyType::I32: { int32_t v; std::memcpy(&v, buf, 4); return v; }
    case PlyType::U32: { uint32_t v; std::memcpy(&v, buf, 4); return v; }
    case PlyType::F32: { float v; std::memcpy(&v, buf, 4); return v; }
    case PlyType::F64: { double v; std::memcpy(&v, buf, 8); return v; }
    default: throw parse_error_at(in, "ply: unsupported property type");
  }
}

}  // namespace detail

inline PointCloud load_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw detail::parse_error_at(in, "ply: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ply") throw detail::parse_error_at(in, "ply: bad magic");

  bool binary = false;
  bool have_format = false;
  long long n_vertices = -1;
  struct Prop { std::string name; detail::PlyType type; };
  std::vector<Prop> props;
  bool in_vertex_element = false;
  bool vertex_seen = false;
  bool trailing_elements = false;

  for (;;) {
    if (!std::getline(in, line))
      throw detail::parse_error_at(in, "ply: unterminated header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
    if (kw == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw detail::parse_error_at(in, "ply: unsupported format '" + fmt + "'");
      have_format = true;
    } else if (kw == "element") {
      std::string name;
      long long count = -1;
      ls >> name >> count;
      if (count < 0) throw detail::parse_error_at(in, "ply: bad element count");
      if (name == "vertex") {
        n_vertices = count;
        in_vertex_element = true;
        vertex_seen = true;
      } else {
        if (!vertex_seen)
          throw detail::parse_error_at(in, "ply: element '" + name + "' precedes vertices");
        in_vertex_element = false;
        trailing_elements = true;
      }
    } else if (kw == "property") {
      std::string t;
      ls >> t;
      if (t == "list") {
        if (in_vertex_element)
          throw detail::parse_error_at(in, "ply: list property in vertex element");
        continue;
      }
      std::string name;
      ls >> name;
      if (in_vertex_element) {
        detail::PlyType pt = detail::ply_type(t);
        if (pt == detail::PlyType::Unknown)
          throw detail::parse_error_at(in, "ply: unknown property type '" + t + "'");
        props.push_back({name, pt});
      }
    } else if (kw == "end_header") {
      break;
    } else {
      throw detail::parse_error_at(in, "ply: unexpected header keyword '" + kw + "'");
    }
  }
  if (!have_format) throw detail::parse_error_at(in, "ply: missing format line");
  if (n_vertices < 0) throw detail::parse_error_at(in, "ply: missing vertex element");

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
  for (std::size_t i = 0; i < props.size(); ++i) {
    const auto& p = props[i];
    int idx = static_cast<int>(i);
    if (p.name == "x") ix = idx;
    else if (p.name == "y") iy = idx;
    else if (p.name == "z") iz = idx;
    else if (p.name == "red") ir = idx;
    else if (p.name == "green") ig = idx;
    else if (p.name == "blue") ib = idx;
  }
  auto require = [&](int idx, const char* name, bool color) {
    if (idx < 0)
      throw detail::parse_error_at(in, std::string("ply: missing property '") + name + "'");
    detail::PlyType t = props[static_cast<std::size_t>(idx)].type;
    if (color && t != detail::PlyType::U8)
      throw detail::parse_error_at(in, std::string("ply: property '") + name + "' must be uchar");
    if (!color && t != detail::PlyType::F32 && t != detail::PlyType::F64)
      throw detail::parse_error_at(in, std::string("ply: property '") + name + "' must be float or double");
  };
  require(ix, "x", false);
  require(iy, "y", false);
  require(iz, "z", false);
  require(ir, "red", true);
  require(ig, "green", true);
  require(ib, "blue", true);
  if (n_vertices == 0) throw detail::parse_error_at(in, "ply: empty point cloud");

  PointCloud pc;
  pc.positions.resize(n_vertices, 3);
  pc.colors.resize(n_vertices, 3);
  std::vector<double> row(props.size());
  for (long long j = 0; j < n_vertices; ++j) {
    if (binary) {
      for (std::size_t i = 0; i < props.size(); ++i)
        row[i] = detail::ply_read_binary(in, props[i].type);
    } else {
      for (std::size_t i = 0; i < props.size(); ++i) {
        if (!(in >> row[i]))
          throw detail::parse_error_at(in, "ply: truncated or malformed vertex data");
      }
    }
    pc.positions.row(j) << row[static_cast<std::size_t>(ix)],
        row[static_cast<std::size_t>(iy)], row[static_cast<std::size_t>(iz)];
    pc.colors.row(j) << row[static_cast<std::size_t>(ir)] / 255.0,
        row[static_cast<std::size_t>(ig)] / 255.0,
        row[static_cast<std::size_t>(ib)] / 255.0;
  }
  if (!pc.positions.allFinite())
    throw detail::parse_error_at(in, "ply: non-finite coordinates");
  if (trailing_elements) in.ignore(std::numeric_limits<std::streamsize>::max());
  return pc;
}

inline PointCloud load_ply(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  return load_ply(f);
}

inline void save_ply(std::ostream& out, const PointCloud& pc) {
  out << "ply\nformat ascii 1.0\nelement vertex " << pc.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\n"
         "end_header\n";
  char buf[128];
  for (Eigen::Index j = 0; j < pc.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %d %d %d\n",
                  pc.positions(j, 0), pc.positions(j, 1), pc.positions(j, 2),
                  detail::quantize_u8(pc.colors(j, 0)),
                  detail::quantize_u8(pc.colors(j, 1)),
                  detail::quantize_u8(pc.colors(j, 2)));
    out << buf;
  }
  if (!out) throw std::runtime_error("save_ply: write failure");
}

inline void save_ply(const std::string& path, const PointCloud& pc) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  save_ply(f, pc);
}

// ---------------------------------------------------------------------------
// PPM (P6, maxval 255)

inline Image load_ppm(std::istream& in) {
  auto next_token = [&]() -> std::string {
    // Whitespace-delimited tokens, '#' comments to end of line.
    for (;;) {
      int c = in.peek();
      if (c == EOF) throw detail::parse_error_at(in, "ppm: truncated header");
      if (std::isspace(c)) { in.get(); continue; }
      if (c == '#') {
        std::string junk;
        std::getline(in, junk);
        continue;
      }
      break;
    }
    std::string tok;
    while (in.peek() != EOF && !std::isspace(in.peek()))
      tok.push_back(static_cast<char>(in.get()));
    return tok;
  };
  std::string magic = next_token();
  if (magic != "P6") throw detail::parse_error_at(in, "ppm: unsupported magic '" + magic + "'");
  auto parse_int = [&](const std::string& what) {
    std::string tok = next_token();
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(tok, &used);
    } catch (...) {
      throw detail::parse_error_at(in, "ppm: bad " + what + " '" + tok + "'");
    }
    if (used != tok.size() || v <= 0 || v > 1 << 20)
      throw detail::parse_error_at(in, "ppm: bad " + what + " '" + tok + "'");
    return static_cast<int>(v);
  };
  int w = parse_int("width");
  int h = parse_int("height");
  int maxval = parse_int("maxval");
  if (maxval != 255) throw detail::parse_error_at(in, "ppm: maxval must be 255");
  in.get();  // single whitespace byte after maxval
  if (!in) throw detail::parse_error_at(in, "ppm: truncated header");
  if (static_cast<std::size_t>(w) * static_cast<std::size_t>(h) > (std::size_t{1} << 28))
    throw detail::parse_error_at(in, "ppm: oversized dimensions");

  Image img(w, h);
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw detail::parse_error_at(in, "ppm: short pixel data");
  for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
  return img;
}

inline void save_ppm(std::ostream& out, const Image& img) {
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = detail::quantize_u8(img.data[i]);
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("save_ppm: write failure");
}

// ---------------------------------------------------------------------------
// Image codecs: PPM is native; other formats plug in by extension.

struct ImageCodec {
  virtual ~ImageCodec() = default;
  virtual std::string extension() const = 0;
  virtual Image load(const std::string& path) const = 0;
  virtual void save(const std::string& path, const Image& img) const = 0;
};

inline std::vector<std::shared_ptr<ImageCodec>>& codec_registry() {
  static std::vector<std::shared_ptr<ImageCodec>> codecs;
  return codecs;
}

inline void register_codec(std::shared_ptr<ImageCodec> codec) {
  codec_registry().push_back(std::move(codec));
}

inline std::string path_extension(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

inline Image load_image(const std::string& path) {
  std::string ext = path_extension(path);
  if (ext == "ppm") {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + path);
    return load_ppm(f);
  }
  for (const auto& c : codec_registry())
    if (c->extension() == ext) return c->load(path);
  throw ParseError("load_image: no codec for ." + ext + " (" + path + ")");
}

inline void save_image(const std::string& path, const Image& img) {
  std::string ext = path_extension(path);
  if (ext == "ppm") {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    save_ppm(f, img);
    return;
  }
  for (const auto& c : codec_registry())
    if (c->extension() == ext) return c->save(path, img);
  throw std::runtime_error("save_image: no codec for ." + ext);
}

// ---------------------------------------------------------------------------
// Flat key=value files (intrinsics, run configs)

inline std::vector<std::pair<std::string, std::string>> parse_key_values(
    std::istream& in) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config: missing '=' in line '" + line + "'");
    auto trim = [](std::string s) {
      std::size_t b = s.find_first_not_of(" \t");
      std::size_t e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("config: empty key in line '" + line + "'");
    kv.emplace_back(key, val);
  }
  return kv;
}

inline CameraIntrinsics load_intrinsics(std::istream& in,
                                        std::vector<std::string>* warnings = nullptr) {
  auto kv = parse_key_values(in);
  std::map<std::string, std::string> values;
  for (const auto& [k, v] : kv) {
    if (values.count(k) && warnings)
      warnings->push_back("intrinsics: duplicate key '" + k + "', last value wins");
    values[k] = v;  // last value wins
  }
  auto get = [&](const char* key) -> double {
    auto it = values.find(key);
    if (it == values.end())
      throw ParseError(std::string("intrinsics: missing key '") + key + "'");
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(it->second, &used);
    } catch (...) {
      throw ParseError(std::string("intrinsics: non-numeric value for '") + key + "'");
    }
    if (used != it->second.size())
      throw ParseError(std::string("intrinsics: non-numeric value for '") + key + "'");
    return v;
  };
  CameraIntrinsics K;
  K.fx = get("fx");
  K.fy = get("fy");
  K.cx = get("cx");
  K.cy = get("cy");
  K.width = static_cast<int>(get("width"));
  K.height = static_cast<int>(get("height"));
  K.validate();
  return K;
}

inline CameraIntrinsics load_intrinsics(const std::string& path,
                                        std::vector<std::string>* warnings = nullptr) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  return load_intrinsics(f, warnings);
}

// ---------------------------------------------------------------------------
// Pose files: 6 parameters (omega tau) on the first line, then the 4x4 matrix.

inline void save_pose(std::ostream& out, const PoseParams& theta) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g\n",
                theta.omega.x(), theta.omega.y(), theta.omega.z(),
                theta.tau.x(), theta.tau.y(), theta.tau.z());
  out << buf;
  Mat4 T = pose_matrix(theta);
  for (int r = 0; r < 4; ++r) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g\n", T(r, 0),
                  T(r, 1), T(r, 2), T(r, 3));
    out << buf;
  }
}

inline void save_pose(const std::string& path, const PoseParams& theta) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  save_pose(f, theta);
}

inline PoseParams load_pose(std::istream& in) {
  PoseParams theta;
  for (int i = 0; i < 3; ++i)
    if (!(in >> theta.omega(i))) throw ParseError("pose: expected 6 numbers");
  for (int i = 0; i < 3; ++i)
    if (!(in >> theta.tau(i))) throw ParseError("pose: expected 6 numbers");
  return theta;
}

inline PoseParams load_pose(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  return load_pose(f);
}

// ---------------------------------------------------------------------------
// Color-difference heatmap (blue = 0 .. yellow = sqrt(3))

inline Image heatmap(const Image& a, const Image& b,
                     const std::vector<uint8_t>* coverage = nullptr) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("heatmap: dimension mismatch");
  Image out(a.width, a.height);
  const double scale = 1.0 / std::sqrt(3.0);
  for (int v = 0; v < a.height; ++v)
    for (int u = 0; u < a.width; ++u) {
      std::size_t idx = static_cast<std::size_t>(v) * a.width + u;
      if (coverage && !(*coverage)[idx]) continue;  // stays black
      double t = std::min((a.pixel(u, v) - b.pixel(u, v)).norm() * scale, 1.0);
      out.set_pixel(u, v, (1 - t) * Vec3(0, 0, 1) + t * Vec3(1, 1, 0));
    }
  return out;
}

}  // namespace pcalign
