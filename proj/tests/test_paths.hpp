#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

namespace fanet {

/// Fresh scratch directory under the system temp dir, unique per process.
inline std::filesystem::path testing_tmp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("fanet_test_" + std::to_string(::getpid())) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fanet
