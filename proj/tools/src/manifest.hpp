#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adaptfeat/numerics.hpp"

namespace adaptfeat::tools {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Collects emitted files and writes <out>/manifest.json on finish().
class RunRecorder {
 public:
  RunRecorder(std::string command, std::vector<std::string> args, std::uint64_t seed,
              std::filesystem::path out_dir);

  const std::filesystem::path& out_dir() const { return out_dir_; }
  void set_config(nlohmann::ordered_json config) { config_ = std::move(config); }
  /// Folds an input file's bytes into the input hash.
  void add_input_file(const std::filesystem::path& path);

  std::filesystem::path write_text(const std::filesystem::path& relative, std::string_view content);
  std::filesystem::path write_matrix(const std::filesystem::path& relative, const Matrix& m);
  /// Records a file that was written by other code.
  void record(const std::filesystem::path& relative);

  void set_error(std::string message) { error_ = std::move(message); }
  void set_exit_code(int code) { exit_code_ = code; }
  /// Writes the manifest; safe to call once.
  void finish();

 private:
  std::string command_;
  std::vector<std::string> args_;
  std::uint64_t seed_;
  std::filesystem::path out_dir_;
  nlohmann::ordered_json config_ = nlohmann::ordered_json::object();
  std::vector<std::string> input_digests_;
  std::vector<std::filesystem::path> outputs_;
  std::string error_;
  int exit_code_ = 0;
  bool finished_ = false;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace adaptfeat::tools
