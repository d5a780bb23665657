#include "dynae/fileio.hpp"

#include <charconv>
#include <cmath>

#include "dynae/errors.hpp"

namespace dynae {

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

CsvLog::CsvLog(const std::filesystem::path& path, std::vector<std::string> columns, bool append)
    : columns_(std::move(columns)) {
    const bool had_contents = append && std::filesystem::exists(path) && std::filesystem::file_size(path) > 0;
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw IoError("cannot open log " + path.string());
    if (!had_contents) {
        for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << columns_[i];
        out_ << '\n';
        out_.flush();
    }
}

void CsvLog::row(const std::vector<double>& values) {
    if (values.size() != columns_.size()) throw ArgumentError("CsvLog::row: wrong number of values");
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
    out_ << '\n';
    out_.flush();
    if (!out_) throw IoError("log write failed");
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace dynae
