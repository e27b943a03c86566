#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <declab/record.hpp>

namespace testutil {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(DECLAB_DATA_DIR) / name;
}

/** Fresh directory under the system temp root, unique per call. */
inline std::filesystem::path fresh_dir(const std::string& stem) {
  static std::atomic<unsigned> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("declab_" + stem + "_" + std::to_string(counter.fetch_add(1)) + "_" +
              std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write_file(const std::filesystem::path& path,
                                        const std::string& content) {
  std::ofstream out(path);
  out << content;
  return path;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/** Generation record with uniform per-token telemetry, for metric tests. */
inline declab::decode::GenerationRecord make_record(
    std::vector<declab::lm::TokenId> tokens, std::vector<double> log_probs,
    std::vector<double> gaps, std::string text, std::string tag = "test") {
  declab::decode::GenerationRecord rec;
  rec.tokens = std::move(tokens);
  rec.token_log_probs = std::move(log_probs);
  rec.token_top_gap = std::move(gaps);
  rec.stop_reason = declab::decode::StopReason::MaxLength;
  rec.decoder_tag = std::move(tag);
  rec.text = std::move(text);
  return rec;
}

}  // namespace testutil
