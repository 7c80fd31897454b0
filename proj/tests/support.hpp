#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "harmony/data.hpp"
#include "harmony/numerics.hpp"

namespace testing {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("harmony_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Exit status of the CLI run with `args`; stdout/stderr go to `log`.
inline int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string("\"") + HARMONY_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

/// Small well-separated synthetic problem, quick to train.
inline harmony::Dataset blobs(int classes, int dims, int per_class, harmony::Seed seed, double separation = 6.0) {
  harmony::SyntheticSpec spec;
  spec.num_classes = classes;
  spec.n_dims = dims;
  spec.samples_per_class = per_class;
  spec.separation = separation;
  spec.seed = seed;
  return harmony::generate_synthetic(spec);
}

inline harmony::RealMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, harmony::Prng& rng) {
  harmony::RealMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace testing
