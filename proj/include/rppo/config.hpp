#pragma once

#include <string>
#include <utility>
#include <vector>

namespace rppo {

// Flat "key = value" document with '#' comments and blank lines. Order is
// preserved; later duplicates of a key win.
class KvDocument {
 public:
  static KvDocument parse_file(const std::string& path);
  static KvDocument parse_text(const std::string& text);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  void set(const std::string& key, const std::string& value);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Shortest representation that round-trips an IEEE double exactly.
std::string format_double(double v);

double parse_double(const std::string& text, const std::string& what);
long parse_long(const std::string& text, const std::string& what);
std::vector<double> parse_double_list(const std::string& text, const std::string& what);

}  // namespace rppo
