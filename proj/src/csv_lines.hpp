#pragma once

// Line-oriented record reader shared by the fixture loaders.

#include <bpsim/topology.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

namespace bpsim {

class Record {
 public:
  Record(const std::string& file, std::size_t line, std::vector<std::string_view> fields)
      : file_(file), line_(line), fields_(std::move(fields)) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t size() const noexcept { return fields_.size(); }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(file_, line_, what); }

  void expect_fields(std::size_t min, std::size_t max) const {
    if (fields_.size() < min || fields_.size() > max) {
      fail(min == max ? fmt::format("expected {} fields, found {}", min, fields_.size())
                      : fmt::format("expected {}-{} fields, found {}", min, max, fields_.size()));
    }
  }

  std::string text(std::size_t i) const {
    if (fields_[i].empty()) fail(fmt::format("field {} is empty", i + 1));
    return std::string(fields_[i]);
  }

  double number(std::size_t i) const {
    auto s = fields_[i];
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) fail(fmt::format("field {} is not a number: '{}'", i + 1, s));
    return v;
  }

  long long integer(std::size_t i) const {
    auto s = fields_[i];
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) fail(fmt::format("field {} is not an integer: '{}'", i + 1, s));
    return v;
  }

 private:
  const std::string& file_;
  std::size_t line_;
  std::vector<std::string_view> fields_;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Calls `fn(Record)` for every non-blank line not starting with '#'.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, char delim, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw TopologyError(fmt::format("cannot open {}", path.string()));
  const std::string name = path.string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = trim(line);
    if (lineno == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    if (view.empty() || view.front() == '#') continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      auto pos = view.find(delim, start);
      fields.push_back(trim(view.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    fn(Record(name, lineno, std::move(fields)));
  }
}

}  // namespace bpsim
