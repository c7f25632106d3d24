#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "spectgnn/model.hpp"
#include "spectgnn/synth.hpp"
#include "spectgnn/training.hpp"

namespace spectgnn::cli {

enum class SplitPart { train, val, test, all };

/// Every tunable of a run as one flat key=value namespace: model keys,
/// training, synthetic data, evaluation, the shared seed and paths.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DatasetSpec data;
  std::array<double, 3> split{0.6, 0.2, 0.2};
  SplitPart eval_split = SplitPart::test;
  std::vector<std::size_t> k_list{1, 5, 20};
  std::size_t ksweep_max = 20;
  /// Seeds data generation, initialization, shuffling, the split and sampling.
  std::uint64_t seed = 0;
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
  std::filesystem::path out;

  /// ConfigError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  /// `key = value` lines; blank lines and '#' comments are skipped.
  /// ConfigError names the file and line.
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin = "<config>");

  /// ConfigError on inconsistent values.
  void validate() const;

  /// Fully resolved configuration, sorted by key.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string resolved_text() const;

  static bool has_key(const std::string& key);
};

std::vector<std::size_t> parse_k_list(const std::string& text);
std::string to_string(SplitPart part);

}  // namespace spectgnn::cli
