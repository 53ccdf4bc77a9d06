#include "narrownet/fixture_io.hpp"

#include <fstream>
#include <sstream>
#include <unistd.h>

#include "narrownet/error.hpp"

namespace narrownet {

namespace {

double number_at(const Json& j, const std::string& field) {
  if (!j.is_number()) throw SchemaError(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(field, "non-finite number");
  return v;
}

std::size_t positive_int_at(const Json& doc, const std::string& field) {
  if (!doc.contains(field)) throw SchemaError(field, "missing");
  const Json& j = doc.at(field);
  if (!j.is_number_integer() || j.get<long long>() <= 0) throw SchemaError(field, "expected a positive integer");
  return static_cast<std::size_t>(j.get<long long>());
}

Layer layer_from_json(const Json& j, const std::string& field) {
  if (!j.is_object()) throw SchemaError(field, "expected an object with weights and bias");
  if (!j.contains("weights")) throw SchemaError(field + ".weights", "missing");
  if (!j.contains("bias")) throw SchemaError(field + ".bias", "missing");
  Layer l{matrix_from_json(j.at("weights"), field + ".weights"), vector_from_json(j.at("bias"), field + ".bias")};
  if (l.bias.size() != l.weights.rows())
    throw SchemaError(field + ".bias", "has " + std::to_string(l.bias.size()) + " entries but the layer has " +
                                           std::to_string(l.weights.rows()) + " rows");
  return l;
}

Json layer_to_json(const Layer& l) { return {{"weights", matrix_to_json(l.weights)}, {"bias", l.bias}}; }

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    rows.push_back(Vector(r.begin(), r.end()));
  }
  return rows;
}

Vector vector_from_json(const Json& j, const std::string& field) {
  if (!j.is_array()) throw SchemaError(field, "expected an array of numbers");
  Vector v;
  v.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number_at(j[i], field + "[" + std::to_string(i) + "]"));
  return v;
}

Matrix matrix_from_json(const Json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw SchemaError(field, "expected a non-empty list of rows");
  std::vector<Vector> rows;
  for (std::size_t i = 0; i < j.size(); ++i) {
    rows.push_back(vector_from_json(j[i], field + "[" + std::to_string(i) + "]"));
    if (rows.back().size() != rows.front().size() || rows.back().empty())
      throw SchemaError(field + "[" + std::to_string(i) + "]", "row length differs from row 0 or is empty");
  }
  return Matrix::from_rows(rows, rows.front().size());
}

Json network_to_json(const Network& net) {
  Json doc;
  doc["activation"] = to_string(net.activation().kind);
  if (net.activation().kind == ActivationKind::leaky_relu) doc["leaky_beta"] = net.activation().beta;
  doc["d_in"] = net.d_in();
  doc["d_out"] = net.d_out();
  doc["hidden"] = Json::array();
  for (const auto& l : net.hidden()) doc["hidden"].push_back(layer_to_json(l));
  doc["output"] = layer_to_json(net.output());
  return doc;
}

Network network_from_json(const Json& doc) {
  if (!doc.is_object()) throw SchemaError("<root>", "expected an object");
  if (!doc.contains("activation") || !doc["activation"].is_string())
    throw SchemaError("activation", "missing or not a string");
  Activation act;
  const std::string name = doc["activation"].get<std::string>();
  try {
    act.kind = activation_kind_from_string(name);
  } catch (const InputError&) {
    throw SchemaError("activation", "unknown activation '" + name + "'");
  }
  if (act.kind == ActivationKind::leaky_relu) {
    if (!doc.contains("leaky_beta")) throw SchemaError("leaky_beta", "required for leaky_relu");
    act.beta = number_at(doc["leaky_beta"], "leaky_beta");
    if (!(act.beta > 0.0 && act.beta < 1.0)) throw SchemaError("leaky_beta", "must lie in (0,1)");
  }
  const std::size_t d_in = positive_int_at(doc, "d_in");
  const std::size_t d_out = positive_int_at(doc, "d_out");

  std::vector<Layer> hidden;
  if (doc.contains("hidden")) {
    if (!doc["hidden"].is_array()) throw SchemaError("hidden", "expected an array of layers");
    for (std::size_t i = 0; i < doc["hidden"].size(); ++i)
      hidden.push_back(layer_from_json(doc["hidden"][i], "hidden[" + std::to_string(i) + "]"));
  }
  if (!doc.contains("output")) throw SchemaError("output", "missing");
  Layer output = layer_from_json(doc["output"], "output");

  std::size_t prev = d_in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (hidden[i].in_dim() != prev)
      throw SchemaError("hidden[" + std::to_string(i) + "].weights",
                        "expects " + std::to_string(hidden[i].in_dim()) + " inputs, previous layer has " +
                            std::to_string(prev));
    prev = hidden[i].out_dim();
  }
  if (output.in_dim() != prev)
    throw SchemaError("output.weights", "expects " + std::to_string(output.in_dim()) + " inputs, previous layer has " +
                                            std::to_string(prev));
  if (output.out_dim() != d_out)
    throw SchemaError("d_out", "declares " + std::to_string(d_out) + " but output layer has " +
                                   std::to_string(output.out_dim()) + " rows");
  return Network(act, std::move(hidden), std::move(output));
}

std::string serialize(const Network& net) { return network_to_json(net).dump(2) + "\n"; }

Network deserialize(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError("<document>", e.what());
  }
  return network_from_json(doc);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw SchemaError("<document>", path.string() + ": " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError("cannot move output into place at '" + path.string() + "': " + ec.message());
  }
}

Network load_network(const std::filesystem::path& path) { return deserialize(read_text_file(path)); }

void save_network(const std::filesystem::path& path, const Network& net) { write_file_atomic(path, serialize(net)); }

}  // namespace narrownet
