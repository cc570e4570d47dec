#pragma once

// Shared helpers for building grids in tests and talking to the CLI binary.

#include <array>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "selros/gridmap.hpp"

#ifndef SELROS_SOURCE_DIR
#define SELROS_SOURCE_DIR "."
#endif
#ifndef SELROS_CLI_PATH
#define SELROS_CLI_PATH "selros"
#endif

namespace testsupport {

inline std::string source_dir() { return SELROS_SOURCE_DIR; }
inline std::string fixture_dir() { return source_dir() + "/data/fixtures"; }
inline std::string golden_dir() { return source_dir() + "/tests/golden"; }
inline std::string template_dir() { return source_dir() + "/templates"; }
inline std::string cli_path() { return SELROS_CLI_PATH; }

// '.' free, '#' occupied, '?' unknown
inline selros::OccupancyGrid grid_from_ascii(const std::vector<std::string>& rows,
                                             double resolution = 0.5) {
  selros::OccupancyGrid grid(static_cast<int>(rows.at(0).size()),
                             static_cast<int>(rows.size()), resolution);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      switch (rows[static_cast<std::size_t>(y)].at(static_cast<std::size_t>(x))) {
        case '.': grid.at(x, y) = selros::CellState::Free; break;
        case '#': grid.at(x, y) = selros::CellState::Occupied; break;
        default: grid.at(x, y) = selros::CellState::Unknown; break;
      }
    }
  }
  return grid;
}

// '.' or '0' background; any other character is a room, numbered by first
// appearance in row-major order.
inline selros::LabelMap labels_from_ascii(const std::vector<std::string>& rows) {
  selros::LabelMap map(static_cast<int>(rows.at(0).size()), static_cast<int>(rows.size()));
  std::vector<std::pair<char, int>> ids;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      char c = rows[static_cast<std::size_t>(y)].at(static_cast<std::size_t>(x));
      if (c == '.' || c == '0') continue;
      int id = 0;
      for (const auto& [known, known_id] : ids)
        if (known == c) id = known_id;
      if (id == 0) {
        id = static_cast<int>(ids.size()) + 1;
        ids.emplace_back(c, id);
      }
      map.at(x, y) = id;
    }
  }
  return map;
}

inline std::string fresh_dir(const std::string& hint) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("selros_" + hint + "_" + std::to_string(::getpid()) + "_" +
              std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

// Runs the built CLI; `env_prefix` can carry VAR=value assignments.
inline CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  std::string command = env_prefix + " \"" + cli_path() + "\" " + args + " 2>&1";
  CliResult result;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) return result;
  std::array<char, 4096> chunk{};
  std::size_t n = 0;
  while ((n = std::fread(chunk.data(), 1, chunk.size(), pipe)) > 0)
    result.output.append(chunk.data(), n);
  int status = ::pclose(pipe);
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  return result;
}

}  // namespace testsupport
