#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "narrownet/linalg.hpp"
#include "narrownet/network.hpp"

namespace narrownet {

using Json = nlohmann::json;

// Network fixture document:
//   {"activation": "relu"|"leaky_relu"|"tanh", "leaky_beta": b (leaky only),
//    "d_in": N, "d_out": M,
//    "hidden": [{"weights": [[...], ...], "bias": [...]}, ...],
//    "output": {"weights": [[...], ...], "bias": [...]}}
// Numbers are written in shortest round-trip form, so reading back
// reproduces every entry bit-exactly.
Json network_to_json(const Network& net);
Network network_from_json(const Json& doc);  // throws SchemaError naming the field

std::string serialize(const Network& net);
Network deserialize(const std::string& text);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const std::string& field);
Vector vector_from_json(const Json& j, const std::string& field);

Json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
// Writes via a sibling temporary file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

Network load_network(const std::filesystem::path& path);
void save_network(const std::filesystem::path& path, const Network& net);

}  // namespace narrownet
