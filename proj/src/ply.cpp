#include "mireg/ply.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace mireg {

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

namespace {

enum class PropType { f32, f64, i8, u8, i16, u16, i32, u32 };

std::size_t prop_size(PropType t) {
  switch (t) {
    case PropType::i8:
    case PropType::u8:
      return 1;
    case PropType::i16:
    case PropType::u16:
      return 2;
    case PropType::f32:
    case PropType::i32:
    case PropType::u32:
      return 4;
    case PropType::f64:
      return 8;
  }
  return 0;
}

PropType parse_type(const std::string& s) {
  if (s == "float" || s == "float32") return PropType::f32;
  if (s == "double" || s == "float64") return PropType::f64;
  if (s == "char" || s == "int8") return PropType::i8;
  if (s == "uchar" || s == "uint8") return PropType::u8;
  if (s == "short" || s == "int16") return PropType::i16;
  if (s == "ushort" || s == "uint16") return PropType::u16;
  if (s == "int" || s == "int32") return PropType::i32;
  if (s == "uint" || s == "uint32") return PropType::u32;
  throw std::runtime_error("unsupported PLY property type: " + s);
}

double read_binary_value(std::istream& in, PropType t) {
  char buf[8];
  in.read(buf, static_cast<std::streamsize>(prop_size(t)));
  if (!in) throw std::runtime_error("truncated PLY payload");
  switch (t) {
    case PropType::f32: {
      float v;
      std::memcpy(&v, buf, 4);
      return v;
    }
    case PropType::f64: {
      double v;
      std::memcpy(&v, buf, 8);
      return v;
    }
    case PropType::i8:
      return static_cast<double>(static_cast<std::int8_t>(buf[0]));
    case PropType::u8:
      return static_cast<double>(static_cast<std::uint8_t>(buf[0]));
    case PropType::i16: {
      std::int16_t v;
      std::memcpy(&v, buf, 2);
      return v;
    }
    case PropType::u16: {
      std::uint16_t v;
      std::memcpy(&v, buf, 2);
      return v;
    }
    case PropType::i32: {
      std::int32_t v;
      std::memcpy(&v, buf, 4);
      return v;
    }
    case PropType::u32: {
      std::uint32_t v;
      std::memcpy(&v, buf, 4);
      return v;
    }
  }
  return 0.0;
}

}  // namespace

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply")
    throw std::runtime_error("not a PLY file: " + path);

  bool binary = false;
  long vertex_count = -1;
  std::vector<std::pair<std::string, PropType>> props;
  bool in_vertex_element = false;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii")
        binary = false;
      else if (fmt == "binary_little_endian")
        binary = true;
      else
        throw std::runtime_error("unsupported PLY format: " + fmt);
    } else if (tok == "element") {
      std::string name;
      long count;
      ls >> name >> count;
      if (name == "vertex") {
        vertex_count = count;
        in_vertex_element = true;
      } else if (count > 0) {
        throw std::runtime_error("unsupported PLY element: " + name);
      } else {
        in_vertex_element = false;
      }
    } else if (tok == "property") {
      if (!in_vertex_element) continue;
      std::string type, name;
      ls >> type;
      if (type == "list") throw std::runtime_error("list properties are not supported");
      ls >> name;
      props.push_back({name, parse_type(type)});
    } else if (tok == "end_header") {
      break;
    }
  }
  if (vertex_count < 0) throw std::runtime_error("PLY header has no vertex element");

  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1, icurv = -1, ilabel = -1;
  for (int i = 0; i < static_cast<int>(props.size()); ++i) {
    const auto& name = props[i].first;
    if (name == "x") ix = i;
    else if (name == "y") iy = i;
    else if (name == "z") iz = i;
    else if (name == "nx") inx = i;
    else if (name == "ny") iny = i;
    else if (name == "nz") inz = i;
    else if (name == "curvature") icurv = i;
    else if (name == "label") ilabel = i;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw std::runtime_error("PLY vertex lacks x/y/z");
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointCloud cloud;
  cloud.points.resize(vertex_count);
  if (has_normals) cloud.normals.resize(vertex_count);
  if (icurv >= 0) cloud.curvature.resize(vertex_count);
  if (ilabel >= 0) cloud.labels.resize(vertex_count);

  std::vector<double> row(props.size());
  for (long v = 0; v < vertex_count; ++v) {
    if (binary) {
      for (std::size_t p = 0; p < props.size(); ++p)
        row[p] = read_binary_value(in, props[p].second);
    } else {
      if (!std::getline(in, line)) throw std::runtime_error("truncated PLY payload");
      std::istringstream ls(line);
      for (std::size_t p = 0; p < props.size(); ++p)
        if (!(ls >> row[p])) throw std::runtime_error("malformed PLY vertex line");
    }
    cloud.points[v] = {row[ix], row[iy], row[iz]};
    if (has_normals) cloud.normals[v] = {row[inx], row[iny], row[inz]};
    if (icurv >= 0) cloud.curvature[v] = row[icurv];
    if (ilabel >= 0) cloud.labels[v] = static_cast<int>(row[ilabel]);
  }
  cloud.validate();
  return cloud;
}

void write_ply(const PointCloud& cloud, const std::string& path, bool binary) {
  cloud.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);

  out << "ply\n"
      << "format " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals()) out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (cloud.has_curvature()) out << "property double curvature\n";
  if (cloud.has_labels()) out << "property int label\n";
  out << "end_header\n";

  if (binary) {
    auto put_d = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      put_d(cloud.points[i].x());
      put_d(cloud.points[i].y());
      put_d(cloud.points[i].z());
      if (cloud.has_normals()) {
        put_d(cloud.normals[i].x());
        put_d(cloud.normals[i].y());
        put_d(cloud.normals[i].z());
      }
      if (cloud.has_curvature()) put_d(cloud.curvature[i]);
      if (cloud.has_labels()) {
        const std::int32_t l = cloud.labels[i];
        out.write(reinterpret_cast<const char*>(&l), 4);
      }
    }
  } else {
    out << std::setprecision(17);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      out << cloud.points[i].x() << ' ' << cloud.points[i].y() << ' ' << cloud.points[i].z();
      if (cloud.has_normals())
        out << ' ' << cloud.normals[i].x() << ' ' << cloud.normals[i].y() << ' '
            << cloud.normals[i].z();
      if (cloud.has_curvature()) out << ' ' << cloud.curvature[i];
      if (cloud.has_labels()) out << ' ' << cloud.labels[i];
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failure on " + path);
}

}  // namespace mireg
