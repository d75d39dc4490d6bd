#pragma once

#include <bornsim/error.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

namespace bornsim::cli {

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw IoError("number formatting failed");
  return std::string(buf, ptr);
}

// Comma-separated rows with a mandatory header; LF line endings.
class CsvTable {
 public:
  explicit CsvTable(std::initializer_list<std::string_view> header) {
    bool first = true;
    for (auto h : header) {
      if (!first) text_ += ',';
      text_ += h;
      first = false;
    }
    text_ += '\n';
    columns_ = header.size();
  }

  template <typename... Cells>
  void row(const Cells&... cells) {
    static_assert(sizeof...(Cells) > 0);
    if (sizeof...(Cells) != columns_) throw IoError("CSV row width does not match header");
    bool first = true;
    ((append_cell(cells, first)), ...);
    text_ += '\n';
  }

  const std::string& text() const { return text_; }

 private:
  template <typename T>
  void append_cell(const T& v, bool& first) {
    if (!first) text_ += ',';
    first = false;
    if constexpr (std::is_floating_point_v<T>) {
      text_ += format_double(static_cast<double>(v));
    } else if constexpr (std::is_integral_v<T>) {
      text_ += std::to_string(v);
    } else {
      text_ += std::string_view(v);
    }
  }

  std::string text_;
  std::size_t columns_ = 0;
};

inline std::filesystem::path prepare_output_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir + "'");
  }
  return std::filesystem::path(dir);
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace bornsim::cli
