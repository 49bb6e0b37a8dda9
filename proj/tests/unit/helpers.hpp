#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hjm3/marketdata.hpp"
#include "hjm3/volarch.hpp"

namespace testutil {

inline std::string data(const std::string& name) { return std::string(HJM3_TEST_DATA) + "/" + name; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hjm3_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline hjm3::BlockVolSpec model_a() { return hjm3::load_spec(data("model_a_spec.json")); }
inline hjm3::InitialCurves model_a_init() { return hjm3::load_initial_curves(data("model_a_init.csv")); }

}  // namespace testutil
