#pragma once

// Minimal CSV reading/writing and the shortest round-trip float format used
// by every file this project writes.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace affpipe {

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

double parse_double(std::string_view text, std::size_t line, std::string_view column);
std::int64_t parse_int(std::string_view text, std::size_t line, std::string_view column);

// Empty field parses to nullopt.
std::optional<double> parse_optional_double(std::string_view text, std::size_t line,
                                            std::string_view column);

std::vector<std::string_view> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view text);

class CsvReader {
public:
    explicit CsvReader(const std::filesystem::path& path);

    const std::vector<std::string>& header() const { return header_; }
    const std::filesystem::path& path() const { return path_; }

    // Next non-empty data row; false at end of file. Fields view into an
    // internal buffer that is valid until the next call.
    bool next(std::vector<std::string_view>& fields);
    std::size_t line() const { return line_; }

    // Throws Schema unless the header equals `expected` exactly.
    void expect_header(std::span<const std::string> expected) const;

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::vector<std::string> header_;
    std::string buffer_;
    std::size_t line_ = 0;
};

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::span<const std::string> header);

    CsvWriter& field(std::string_view text);
    CsvWriter& field(double value) { return field(format_double(value)); }
    CsvWriter& field(std::int64_t value) { return field(std::to_string(value)); }
    CsvWriter& empty() { return field(std::string_view{}); }
    void end_row();
    void close();

private:
    std::filesystem::path path_;
    std::ofstream out_;
    bool first_ = true;
};

// Opens a file for text output, creating parent directories; throws Io.
std::ofstream open_output(const std::filesystem::path& path);
std::ifstream open_input(const std::filesystem::path& path);

}  // namespace affpipe
