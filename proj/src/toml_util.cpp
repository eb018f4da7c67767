#include "sea/toml_util.hpp"

#include <cmath>
#include <sstream>

#include "sea/common.hpp"

namespace sea {

toml::table parse_toml(std::string_view text, const std::string& source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ':' << e.source().begin.line << ':' << e.source().begin.column << ": "
       << e.description();
    throw ConfigError(os.str());
  }
}

std::string where(const toml::node& node, const std::string& source) {
  const auto& s = node.source();
  if (!s.begin) return source;
  return source + ':' + std::to_string(s.begin.line) + ':' + std::to_string(s.begin.column);
}

TableReader::TableReader(const toml::table& table, std::string source, std::string path)
    : table_(table), source_(std::move(source)), path_(std::move(path)) {}

std::string TableReader::path_of(std::string_view key) const {
  return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
}

void TableReader::fail(std::string_view key, const std::string& msg) const {
  const toml::node* n = table_.get(key);
  const std::string loc = n ? where(*n, source_) : where(table_, source_);
  throw ConfigError(loc + ": " + path_of(key) + ": " + msg);
}

bool TableReader::has(std::string_view key) const { return table_.contains(key); }

const toml::node* TableReader::get(std::string_view key) {
  used_.emplace(key);
  return table_.get(key);
}

double TableReader::number(std::string_view key, double def, double min, double max) {
  const toml::node* n = get(key);
  if (!n) return def;
  double v;
  if (auto f = n->value_exact<double>()) {
    v = *f;
  } else if (auto i = n->value_exact<std::int64_t>()) {
    v = static_cast<double>(*i);
  } else {
    fail(key, "expected a number");
  }
  if (!std::isfinite(v) || v < min || v > max) {
    std::ostringstream os;
    os << "value " << v << " outside [" << min << ", " << max << "]";
    fail(key, os.str());
  }
  return v;
}

std::int64_t TableReader::integer(std::string_view key, std::int64_t def, std::int64_t min,
                                  std::int64_t max) {
  const toml::node* n = get(key);
  if (!n) return def;
  auto i = n->value_exact<std::int64_t>();
  if (!i) fail(key, "expected an integer");
  if (*i < min || *i > max) {
    fail(key, "value " + std::to_string(*i) + " outside [" + std::to_string(min) + ", " +
                  std::to_string(max) + "]");
  }
  return *i;
}

bool TableReader::boolean(std::string_view key, bool def) {
  const toml::node* n = get(key);
  if (!n) return def;
  auto b = n->value_exact<bool>();
  if (!b) fail(key, "expected true or false");
  return *b;
}

std::string TableReader::string(std::string_view key, std::string def) {
  const toml::node* n = get(key);
  if (!n) return def;
  auto s = n->value_exact<std::string>();
  if (!s) fail(key, "expected a string");
  return *s;
}

std::string TableReader::choice(std::string_view key, std::string def,
                                std::initializer_list<std::string_view> allowed) {
  std::string v = string(key, std::move(def));
  for (auto a : allowed) {
    if (v == a) return v;
  }
  std::string list;
  for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
  fail(key, "\"" + v + "\" is not one of: " + list);
}

std::vector<std::string> TableReader::strings(std::string_view key,
                                              std::vector<std::string> def) {
  const toml::node* n = get(key);
  if (!n) return def;
  const auto* arr = n->as_array();
  if (!arr) fail(key, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : *arr) {
    auto s = e.value_exact<std::string>();
    if (!s) fail(key, "expected an array of strings");
    out.push_back(*s);
  }
  return out;
}

const toml::table* TableReader::table(std::string_view key) {
  const toml::node* n = get(key);
  if (!n) return nullptr;
  const auto* t = n->as_table();
  if (!t) fail(key, "expected a table");
  return t;
}

void TableReader::finish() const {
  for (const auto& [k, v] : table_) {
    if (!used_.contains(k.str())) {
      throw ConfigError(where(v, source_) + ": unknown key " + path_of(k.str()));
    }
  }
}

}  // namespace sea
