#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adaptfeat/data_io.hpp"

namespace adaptfeat::tools {

/// Parsed --data value: "synthetic:<n>,<d>,<sep>" or "idx:<images>,<labels>".
struct DataSource {
  enum class Kind { kSynthetic, kIdx };
  Kind kind = Kind::kSynthetic;
  Index n = 200;
  Index d = 20;
  double separation = 4.0;
  std::filesystem::path images;
  std::filesystem::path labels;

  static DataSource parse(const std::string& text);
  std::string to_string() const;
};

/// Relative IDX paths that do not exist are looked up in cache_dir().
std::filesystem::path resolve_data_path(const std::filesystem::path& path);

/// Entry point shared by the executable and the tests. Returns the exit code:
/// 0 success, 1 failed check or experiment assertion, 2 usage or runtime error.
int run_cli(const std::vector<std::string>& argv);

}  // namespace adaptfeat::tools
