#include "json_util.hpp"

#include <fstream>
#include <sstream>

namespace gridclear::detail {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return buffer.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw SchemaError(std::string(what) + ": " + e.what());
  }
}

void expect_schema(const Json& doc, std::string_view schema) {
  if (!doc.is_object()) throw SchemaError("document root must be an object");
  auto it = doc.find("schema");
  if (it == doc.end() || !it->is_string())
    throw SchemaError("document has no schema tag (expected " + std::string(schema) + ")");
  if (it->get<std::string>() != schema)
    throw SchemaError("unsupported schema " + it->get<std::string>() + ", expected " +
                      std::string(schema));
}

const Json& require(const Json& obj, std::string_view key, std::string_view where) {
  if (!obj.is_object()) throw SchemaError(std::string(where) + " must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(std::string(where) + ": missing field " + std::string(key));
  return *it;
}

double require_number(const Json& obj, std::string_view key, std::string_view where) {
  const Json& v = require(obj, key, where);
  if (!v.is_number()) throw SchemaError(std::string(where) + "." + std::string(key) + " must be a number");
  return v.get<double>();
}

double number_or(const Json& obj, std::string_view key, double fallback, std::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) throw SchemaError(std::string(where) + "." + std::string(key) + " must be a number");
  return it->get<double>();
}

std::string require_string(const Json& obj, std::string_view key, std::string_view where) {
  const Json& v = require(obj, key, where);
  if (!v.is_string()) throw SchemaError(std::string(where) + "." + std::string(key) + " must be a string");
  return v.get<std::string>();
}

Vec3 read_vec3(const Json& value, std::string_view where) {
  if (value.is_number()) return Vec3::Constant(value.get<double>());
  if (!value.is_array() || value.size() != 3)
    throw SchemaError(std::string(where) + " must be a number or a 3-element array");
  Vec3 out;
  for (int k = 0; k < 3; ++k) {
    const Json& e = value[static_cast<std::size_t>(k)];
    if (!e.is_number()) throw SchemaError(std::string(where) + " has a non-numeric entry");
    out[k] = e.get<double>();
  }
  return out;
}

Mat3 read_mat3(const Json& value, std::string_view where) {
  if (!value.is_array() || value.size() != 3) throw SchemaError(std::string(where) + " must be a 3x3 array");
  Mat3 out;
  for (int r = 0; r < 3; ++r) out.row(r) = read_vec3(value[static_cast<std::size_t>(r)], where).transpose();
  return out;
}

std::string dump(const OrderedJson& doc) { return doc.dump(2) + "\n"; }

}  // namespace gridclear::detail
