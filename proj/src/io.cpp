#include "stoshield/io.hpp"

#include "stoshield/errors.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace stoshield {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw SchemaError("unknown field '" + key + "'", where + "/" + key);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(std::string("missing required field '") + key + "'", where + "/" + key);
  return *it;
}

std::size_t as_index(const json& v, const std::string& where) {
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0))
    throw SchemaError("expected a non-negative integer", where);
  return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError("expected a number", where);
  return v.get<double>();
}

std::vector<double> as_real_array(const json& v, const std::string& where) {
  if (!v.is_array()) throw SchemaError("expected an array of numbers", where);
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_real(v[i], where + "/" + std::to_string(i)));
  return out;
}

NoiseSpec parse_noise(const json& v) {
  if (!v.is_object()) throw SchemaError("expected an object", "/noise");
  reject_unknown(v, {"mode", "sigmas", "population"}, "/noise");
  const auto& mode = require(v, "mode", "/noise");
  if (!mode.is_string()) throw SchemaError("expected a string", "/noise/mode");
  const auto name = mode.get<std::string>();
  if (name == "unit") return NoiseSpec::unit();
  if (name == "explicit") return NoiseSpec::explicit_sigmas(as_real_array(require(v, "sigmas", "/noise"), "/noise/sigmas"));
  if (name == "stationary-flux") {
    const auto& pop = require(v, "population", "/noise");
    const double n = as_real(pop, "/noise/population");
    if (!(n > 0.0) || std::floor(n) != n) throw SchemaError("population must be a positive integer", "/noise/population");
    return NoiseSpec::stationary_flux(n);
  }
  throw SchemaError("mode must be one of unit, stationary-flux, explicit", "/noise/mode");
}

}  // namespace

NetworkFile parse_network(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(source + ": JSON syntax error at " + line_col(text, e.byte) + ": " + e.what());
  }
  if (!root.is_object()) throw SchemaError("top level must be an object", "");
  reject_unknown(root, {"nodes", "edges", "measurement", "noise"}, "");
  const std::size_t n = as_index(require(root, "nodes", ""), "/nodes");
  const auto& edges = require(root, "edges", "");
  if (!edges.is_array()) throw SchemaError("expected an array", "/edges");
  std::vector<EdgeSpec> specs;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const std::string where = "/edges/" + std::to_string(k);
    const auto& e = edges[k];
    if (!e.is_object()) throw SchemaError("expected an object", where);
    reject_unknown(e, {"from", "to", "rate"}, where);
    specs.push_back({as_index(require(e, "from", where), where + "/from"),
                     as_index(require(e, "to", where), where + "/to"),
                     as_real(require(e, "rate", where), where + "/rate")});
  }
  NetworkFile file{ReactionNetwork(n, specs), std::nullopt, NoiseSpec::unit()};
  if (const auto it = root.find("measurement"); it != root.end()) {
    const auto m = as_real_array(*it, "/measurement");
    if (m.size() != n) throw SchemaError("measurement length must equal node count", "/measurement");
    file.measurement = MeasurementVector(Eigen::Map<const Vector>(m.data(), static_cast<Eigen::Index>(m.size())));
  }
  if (const auto it = root.find("noise"); it != root.end()) file.noise = parse_noise(*it);
  // Surface explicit/flux problems at load time rather than mid-run.
  noise_sigmas(file.network, file.noise);
  return file;
}

NetworkFile load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open network file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str(), path.string());
}

ordered_json to_json(const NetworkFile& file) {
  ordered_json j;
  j["nodes"] = file.network.node_count();
  j["edges"] = ordered_json::array();
  for (const auto& e : file.network.edges())
    j["edges"].push_back(ordered_json{{"from", e.from}, {"to", e.to}, {"rate", e.rate}});
  if (file.measurement) {
    const auto& v = file.measurement->values();
    j["measurement"] = std::vector<double>(v.data(), v.data() + v.size());
  }
  ordered_json noise{{"mode", to_string(file.noise.mode)}};
  if (file.noise.mode == NoiseMode::Explicit) noise["sigmas"] = file.noise.sigmas;
  if (file.noise.mode == NoiseMode::StationaryFlux) noise["population"] = file.noise.population;
  j["noise"] = noise;
  return j;
}

NetworkFile three_state_chain() {
  ReactionNetwork net(3, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}});
  Vector m = Vector::Zero(3);
  m[2] = 1.0;
  return {std::move(net), MeasurementVector(m), NoiseSpec::unit()};
}

NetworkFile two_state_pair() {
  ReactionNetwork net(2, {{0, 1, 1.0}, {1, 0, 1.0}});
  Vector m = Vector::Zero(2);
  m[1] = 1.0;
  return {std::move(net), MeasurementVector(m), NoiseSpec::unit()};
}

ordered_json RunManifest::to_json() const {
  return ordered_json{{"command", command}, {"config", config},        {"seed", seed},
                      {"version", version}, {"wall_time_s", wall_time_s}, {"outputs", outputs}};
}

void write_output(const std::filesystem::path& dir, const std::string& name, const std::string& text,
                  RunManifest& manifest) {
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  manifest.outputs.push_back(path.string());
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
  std::filesystem::create_directories(dir);
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << manifest.to_json().dump(2) << '\n';
}

std::vector<std::size_t> parse_index_list(const std::string& text, const std::string& field) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw SchemaError("'" + item + "' is not a non-negative integer", field);
    }
  }
  return out;
}

std::vector<double> parse_real_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw SchemaError("'" + item + "' is not a number", field);
    }
  }
  return out;
}

}  // namespace stoshield
