#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sea {

/// Exclusive advisory lock on runs/<id>/lock, held for the object's lifetime.
class RunLock {
 public:
  /// Throws RuntimeFailure if another process holds the lock.
  explicit RunLock(const std::filesystem::path& path);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

/// A run directory: append-only line files plus atomically replaced JSON
/// documents. One writer per directory.
class RunStore {
 public:
  /// Creates the directory (parents included). Fails if it already holds a
  /// manifest.
  static std::unique_ptr<RunStore> create(const std::filesystem::path& dir);
  /// Opens an existing run for writing (resume).
  static std::unique_ptr<RunStore> open(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(std::string_view name) const { return dir_ / name; }

  void append_line(std::string_view file, std::string_view line);
  /// Flushes every open append stream.
  void flush();
  std::uint64_t size(std::string_view file);
  /// Cuts `file` back to `size` bytes (partial step discarded on resume).
  void truncate(std::string_view file, std::uint64_t size);

  void write_json(std::string_view file, const nlohmann::json& j);
  nlohmann::json read_json(std::string_view file) const;
  bool exists(std::string_view file) const;

 private:
  explicit RunStore(std::filesystem::path dir);
  std::ofstream& stream(std::string_view file);

  std::filesystem::path dir_;
  std::unique_ptr<RunLock> lock_;
  std::map<std::string, std::ofstream, std::less<>> streams_;
};

/// Reads a JSON-lines file; blank lines are skipped.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

}  // namespace sea
