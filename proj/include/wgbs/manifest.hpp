#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wgbs/config.hpp"
#include "wgbs/error.hpp"
#include "wgbs/version.hpp"

namespace wgbs {

/// Record of one tool invocation, written next to its outputs. Deliberately
/// contains no timestamps or host identifiers: repeated runs with the same
/// inputs must produce byte-identical manifests.
struct RunManifest {
  std::string command;
  std::string config_origin;
  std::string config_hash;  // fnv1a64 of config text, hex
  std::vector<std::string> inputs;  // data files consumed, as given
  std::string output_directory;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::pair<std::string, std::string>> outputs;  // name -> relative path
  std::vector<std::pair<std::string, double>> scalars;       // headline numbers
  std::string failed_stage;  // set when a run aborts partway
  std::string error;

  void add_input(const std::string& path) { inputs.push_back(path); }
  void add_output(const std::string& name, const std::string& path) {
    outputs.emplace_back(name, path);
  }
  void add_scalar(const std::string& name, double value) { scalars.emplace_back(name, value); }

  std::string to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = std::string("wgbs ") + kVersion;
    j["command"] = command;
    j["config"] = {{"origin", config_origin}, {"fnv1a64", config_hash}};
    j["inputs"] = inputs;
    j["output_directory"] = output_directory;
    j["seed"] = seed;
    j["threads"] = threads;
    nlohmann::ordered_json outs = nlohmann::ordered_json::object();
    for (const auto& [k, v] : outputs) outs[k] = v;
    j["outputs"] = outs;
    nlohmann::ordered_json sc = nlohmann::ordered_json::object();
    for (const auto& [k, v] : scalars) sc[k] = v;
    j["results"] = sc;
    if (!failed_stage.empty()) {
      j["failed_stage"] = failed_stage;
      j["error"] = error;
    }
    return j.dump(2) + "\n";
  }
};

/// Write a file atomically: stage to `<path>.tmp`, then rename over the target.
inline void atomic_write(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw config_error("cannot open for writing: " + tmp);
    out << bytes;
    out.flush();
    if (!out) throw config_error("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw config_error("rename failed: " + tmp + " -> " + path + ": " + ec.message());
}

inline void write_manifest(const std::string& path, const RunManifest& m) {
  atomic_write(path, m.to_json());
}

}  // namespace wgbs
