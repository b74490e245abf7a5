#include "manifest.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "adaptfeat/csv.hpp"

namespace adaptfeat::tools {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return sha256_hex(bytes);
}

RunRecorder::RunRecorder(std::string command, std::vector<std::string> args, std::uint64_t seed,
                         std::filesystem::path out_dir)
    : command_(std::move(command)),
      args_(std::move(args)),
      seed_(seed),
      out_dir_(std::move(out_dir)),
      start_(std::chrono::steady_clock::now()) {
  std::filesystem::create_directories(out_dir_);
}

void RunRecorder::add_input_file(const std::filesystem::path& path) {
  input_digests_.push_back(sha256_file(path));
}

std::filesystem::path RunRecorder::write_text(const std::filesystem::path& relative, std::string_view content) {
  const std::filesystem::path full = out_dir_ / relative;
  std::filesystem::create_directories(full.parent_path());
  std::ofstream out(full, std::ios::binary);
  if (!out) throw Error("cannot write " + full.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  record(relative);
  return full;
}

std::filesystem::path RunRecorder::write_matrix(const std::filesystem::path& relative, const Matrix& m) {
  return write_text(relative, csv::to_string(m));
}

void RunRecorder::record(const std::filesystem::path& relative) { outputs_.push_back(relative); }

void RunRecorder::finish() {
  if (finished_) return;
  finished_ = true;
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["args"] = args_;
  j["seed"] = seed_;
  j["config"] = config_;
  std::string hash_input = command_ + '\n' + config_.dump() + '\n';
  for (const std::string& a : args_) hash_input += a + '\n';
  for (const std::string& d : input_digests_) hash_input += d + '\n';
  j["input_hash"] = sha256_hex(hash_input);
  j["outputs"] = nlohmann::ordered_json::array();
  for (const std::filesystem::path& p : outputs_) {
    const std::filesystem::path full = out_dir_ / p;
    j["outputs"].push_back({{"path", p.generic_string()},
                            {"sha256", std::filesystem::exists(full) ? sha256_file(full) : std::string()}});
  }
  j["duration_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  j["exit_code"] = exit_code_;
  if (!error_.empty()) j["error"] = error_;
  std::ofstream out(out_dir_ / "manifest.json", std::ios::binary);
  out << j.dump(2) << '\n';
}

}  // namespace adaptfeat::tools
