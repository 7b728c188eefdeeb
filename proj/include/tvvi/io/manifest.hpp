#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvvi/io/problem_io.hpp"
#include "tvvi/version.hpp"

namespace tvvi {

namespace detail {

// FNV-1a over the file bytes; cheap, stable, good enough for change detection.
inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::uint64_t h = 1469598103934665603ull;
  char buf[8192];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  char hex[20];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return std::string(hex);
}

}  // namespace detail

struct RunManifest {
  std::string command;
  json config = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double wall_time_seconds = 0.0;
};

// Every output directory gets exactly one manifest describing the run.
inline void write_manifest(const std::string& dir, const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config"] = m.config;
  json in = json::object();
  for (const auto& p : m.inputs) in[p] = detail::file_hash(p);
  j["input_hashes"] = in;
  j["outputs"] = m.outputs;
  j["wall_time_seconds"] = m.wall_time_seconds;
  j["versions"] = {{"library", TVVI_VERSION},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  write_json_file((std::filesystem::path(dir) / "manifest.json").string(), j);
}

}  // namespace tvvi
