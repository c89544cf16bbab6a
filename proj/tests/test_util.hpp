#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <system_error>

// Unique scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    auto name = "longtail-test-" + std::to_string(counter.fetch_add(1)) + "-" +
                std::to_string(std::random_device{}());
    path = std::filesystem::temp_directory_path() / name;
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path / name).string(); }
};
