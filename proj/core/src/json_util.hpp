#pragma once

// Private JSON helpers shared by the document readers and writers.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "gridclear/errors.hpp"
#include "gridclear/phase.hpp"

namespace gridclear::detail {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Parses text, mapping syntax errors to SchemaError.
Json parse_json(std::string_view text, std::string_view what);

/// Checks the `schema` tag of a document.
void expect_schema(const Json& doc, std::string_view schema);

const Json& require(const Json& obj, std::string_view key, std::string_view where);
double require_number(const Json& obj, std::string_view key, std::string_view where);
double number_or(const Json& obj, std::string_view key, double fallback, std::string_view where);
std::string require_string(const Json& obj, std::string_view key, std::string_view where);

/// Accepts a scalar (broadcast to all phases) or a three-element array.
Vec3 read_vec3(const Json& value, std::string_view where);
/// Accepts a 3x3 nested array.
Mat3 read_mat3(const Json& value, std::string_view where);

/// Dumps with a fixed layout so that repeated exports are byte-identical.
std::string dump(const OrderedJson& doc);

}  // namespace gridclear::detail
