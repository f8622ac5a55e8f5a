#pragma once

#include "stoshield/reaction_graph.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stoshield {

inline constexpr const char* kToolVersion = "0.1.0";

/// Contents of a network JSON file.
///
///   {"nodes": n,
///    "edges": [{"from": i, "to": j, "rate": a}, ...],
///    "measurement": [m_0, ...],                      (optional)
///    "noise": {"mode": "unit" | "stationary-flux" | "explicit",
///              "sigmas": [...], "population": N}}     (optional, default unit)
///
/// Unknown fields are rejected at every level.
struct NetworkFile {
  ReactionNetwork network;
  std::optional<MeasurementVector> measurement;
  NoiseSpec noise;
};

/// Parse errors report "line L, column C"; schema errors carry a JSON pointer.
NetworkFile parse_network(const std::string& text, const std::string& source = "<string>");
NetworkFile load_network(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const NetworkFile& file);

/// Built-in fixtures, also shipped as fixtures/*.json.
NetworkFile three_state_chain();  ///< 0↔1↔2, unit rates, M = (0,0,1), unit noise
NetworkFile two_state_pair();     ///< 0↔1, unit rates, M = (0,1), unit noise

struct RunManifest {
  std::string command;
  nlohmann::ordered_json config;
  std::uint64_t seed = 0;
  std::string version = kToolVersion;
  double wall_time_s = 0.0;
  std::vector<std::string> outputs;

  nlohmann::ordered_json to_json() const;
};

/// Writes `text` to dir/name (creating dir) and records it in the manifest.
void write_output(const std::filesystem::path& dir, const std::string& name, const std::string& text,
                  RunManifest& manifest);

/// Writes dir/manifest.json.
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

/// Comma-separated lists, e.g. "0,2,3" or "0.5,1e-3".
std::vector<std::size_t> parse_index_list(const std::string& text, const std::string& field);
std::vector<double> parse_real_list(const std::string& text, const std::string& field);

}  // namespace stoshield
