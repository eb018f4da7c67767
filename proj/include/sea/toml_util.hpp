#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#define TOML_EXCEPTIONS 1
#define TOML_ENABLE_FORMATTERS 0
#include <toml.hpp>

namespace sea {

/// Parse TOML text; syntax errors become ConfigError("source:line:col: ...").
toml::table parse_toml(std::string_view text, const std::string& source);

/// "source:line:col" of a node, or just "source" when the position is unknown.
std::string where(const toml::node& node, const std::string& source);

/// Typed access to one table with line-precise errors. finish() rejects keys
/// that were never read, which catches typos in config files.
class TableReader {
 public:
  TableReader(const toml::table& table, std::string source, std::string path);

  bool has(std::string_view key) const;
  double number(std::string_view key, double def, double min = -1e300, double max = 1e300);
  std::int64_t integer(std::string_view key, std::int64_t def, std::int64_t min = INT64_MIN,
                       std::int64_t max = INT64_MAX);
  bool boolean(std::string_view key, bool def);
  std::string string(std::string_view key, std::string def);
  /// String restricted to `allowed`.
  std::string choice(std::string_view key, std::string def,
                     std::initializer_list<std::string_view> allowed);
  std::vector<std::string> strings(std::string_view key, std::vector<std::string> def);
  /// Nested table, or nullptr when absent.
  const toml::table* table(std::string_view key);

  void finish() const;
  [[noreturn]] void fail(std::string_view key, const std::string& msg) const;
  std::string path_of(std::string_view key) const;

 private:
  const toml::node* get(std::string_view key);

  const toml::table& table_;
  std::string source_;
  std::string path_;
  std::set<std::string, std::less<>> used_;
};

}  // namespace sea
