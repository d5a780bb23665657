#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace dynae {

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Append-only CSV log. The header is written on open; every row is flushed so an
/// aborted run keeps what it logged.
class CsvLog {
public:
    CsvLog() = default;
    CsvLog(const std::filesystem::path& path, std::vector<std::string> columns, bool append = false);

    bool is_open() const noexcept { return out_.is_open(); }
    std::size_t columns() const noexcept { return columns_.size(); }
    void row(const std::vector<double>& values);

private:
    std::ofstream out_;
    std::vector<std::string> columns_;
};

/// Shortest round-trippable text for a double; "nan" for NaN.
std::string format_number(double v);

}  // namespace dynae
