#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "yamabe/error.hpp"
#include "yamabe/io.hpp"
#include "yamabe/mesh.hpp"

namespace yamabe {

namespace {

using nlohmann::json;

[[noreturn]] void format_error(const std::string& field, const std::string& msg) {
  throw Error(ErrorCode::FormatError, field + ": " + msg);
}

const json& require(const json& j, const char* key) {
  if (!j.contains(key)) format_error(key, "missing field");
  return j.at(key);
}

double as_number(const json& j, const std::string& field) {
  if (!j.is_number()) format_error(field, "expected a number");
  return j.get<double>();
}

template <std::size_t N>
std::vector<std::array<int, N>> index_tuples(const json& arr, const std::string& name, int num_vertices) {
  if (!arr.is_array()) format_error(name, "expected an array");
  std::vector<std::array<int, N>> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string field = name + "[" + std::to_string(i) + "]";
    const json& t = arr[i];
    if (!t.is_array() || t.size() != N) format_error(field, "expected " + std::to_string(N) + " indices");
    std::array<int, N> tuple{};
    for (std::size_t k = 0; k < N; ++k) {
      if (!t[k].is_number_integer()) format_error(field, "index is not an integer");
      const auto idx = t[k].get<long long>();
      if (idx < 0 || idx >= num_vertices) {
        format_error(field, "vertex index " + std::to_string(idx) + " out of range [0, " +
                                std::to_string(num_vertices) + ")");
      }
      tuple[k] = static_cast<int>(idx);
    }
    out.push_back(tuple);
  }
  return out;
}

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

}  // namespace

std::string mesh_to_json(const SimplicialMesh& mesh) {
  std::ostringstream os;
  os << "{\n  \"dimension\": " << mesh.dimension() << ",\n  \"vertices\": [";
  const auto& v = mesh.vertices();
  for (std::size_t i = 0; i < v.size(); ++i) {
    os << (i ? ",\n    [" : "\n    [") << format_double(v[i].x()) << ", " << format_double(v[i].y()) << ", "
       << format_double(v[i].z()) << "]";
  }
  os << "\n  ],\n  \"cells\": [";
  const auto& c = mesh.cells();
  for (std::size_t i = 0; i < c.size(); ++i) {
    os << (i ? ",\n    [" : "\n    [") << c[i][0] << ", " << c[i][1] << ", " << c[i][2] << ", " << c[i][3] << "]";
  }
  os << "\n  ],\n  \"boundary_faces\": [";
  const auto& f = mesh.boundary_faces();
  for (std::size_t i = 0; i < f.size(); ++i) {
    os << (i ? ",\n    [" : "\n    [") << f[i][0] << ", " << f[i][1] << ", " << f[i][2] << "]";
  }
  os << "\n  ],\n  \"face_tags\": [";
  const auto& tags = mesh.face_tags();
  for (std::size_t i = 0; i < tags.size(); ++i) {
    os << (i ? ", " : "") << (tags[i] == FaceTag::Boundary ? "\"boundary\"" : "\"farfield\"");
  }
  os << "],\n  \"metric\": ";
  if (mesh.metric().is_euclidean()) {
    os << "{\"type\": \"euclidean\"}";
  } else {
    os << "{\"type\": \"conformal\", \"factor\": [";
    const auto& phi = *mesh.metric().conformal_factor;
    for (Eigen::Index i = 0; i < phi.size(); ++i) os << (i ? ", " : "") << format_double(phi[i]);
    os << "]}";
  }
  os << "\n}\n";
  return os.str();
}

SimplicialMesh mesh_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::FormatError,
                "line " + std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
  }
  if (!j.is_object()) format_error("<root>", "expected an object");

  const json& dim = require(j, "dimension");
  if (!dim.is_number_integer()) format_error("dimension", "expected an integer");
  const int n = dim.get<int>();
  if (n != 3) {
    throw Error(ErrorCode::UnsupportedDimension, "mesh files with n = " + std::to_string(n) + " are not supported");
  }

  const json& jv = require(j, "vertices");
  if (!jv.is_array()) format_error("vertices", "expected an array");
  std::vector<Point> vertices;
  vertices.reserve(jv.size());
  for (std::size_t i = 0; i < jv.size(); ++i) {
    const std::string field = "vertices[" + std::to_string(i) + "]";
    if (!jv[i].is_array() || jv[i].size() != 3) format_error(field, "expected 3 coordinates");
    vertices.emplace_back(as_number(jv[i][0], field), as_number(jv[i][1], field), as_number(jv[i][2], field));
  }
  const int nv = static_cast<int>(vertices.size());
  auto cells = index_tuples<4>(require(j, "cells"), "cells", nv);
  auto faces = index_tuples<3>(require(j, "boundary_faces"), "boundary_faces", nv);

  std::vector<FaceTag> tags;
  if (j.contains("face_tags")) {
    const json& jt = j.at("face_tags");
    if (!jt.is_array() || jt.size() != faces.size()) {
      format_error("face_tags", "expected one tag per boundary face");
    }
    for (std::size_t i = 0; i < jt.size(); ++i) {
      const std::string t = jt[i].is_string() ? jt[i].get<std::string>() : "";
      if (t == "boundary") {
        tags.push_back(FaceTag::Boundary);
      } else if (t == "farfield") {
        tags.push_back(FaceTag::FarField);
      } else {
        format_error("face_tags[" + std::to_string(i) + "]", "expected \"boundary\" or \"farfield\"");
      }
    }
  } else {
    tags.assign(faces.size(), FaceTag::Boundary);
  }

  BackgroundMetric metric;
  if (j.contains("metric")) {
    const json& jm = j.at("metric");
    const json& type = require(jm, "type");
    if (type == "conformal") {
      const json& jf = require(jm, "factor");
      if (!jf.is_array() || static_cast<int>(jf.size()) != nv) {
        format_error("metric.factor", "expected one value per vertex");
      }
      Eigen::VectorXd phi(nv);
      for (int i = 0; i < nv; ++i) phi[i] = as_number(jf[i], "metric.factor[" + std::to_string(i) + "]");
      metric.conformal_factor = std::move(phi);
    } else if (type != "euclidean") {
      format_error("metric.type", "expected \"euclidean\" or \"conformal\"");
    }
  }
  try {
    return SimplicialMesh::create(n, std::move(vertices), std::move(cells), std::move(faces), std::move(tags),
                                  std::move(metric));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidMesh) throw Error(ErrorCode::FormatError, e.what());
    throw;
  }
}

void save_mesh(const SimplicialMesh& mesh, const std::filesystem::path& path) {
  write_file_atomic(path, mesh_to_json(mesh));
}

SimplicialMesh load_mesh(const std::filesystem::path& path) { return mesh_from_json(read_file(path)); }

}  // namespace yamabe
