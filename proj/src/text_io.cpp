#include "affpipe/text_io.hpp"

#include <charconv>
#include <cmath>

#include "affpipe/error.hpp"

namespace affpipe {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Io: return "io";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Schema: return "schema";
        case ErrorKind::Contract: return "contract";
        case ErrorKind::Numerical: return "numerical";
    }
    return "unknown";
}

std::string format_double(double value) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) fail(ErrorKind::Numerical, "cannot format double");
    return std::string(buf, end);
}

namespace {

std::string where(std::size_t line, std::string_view column) {
    return "line " + std::to_string(line) + ", column '" + std::string(column) + "'";
}

}  // namespace

double parse_double(std::string_view text, std::size_t line, std::string_view column) {
    text = trim(text);
    double value = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || end != text.data() + text.size())
        fail(ErrorKind::Parse, "non-numeric value '" + std::string(text) + "' at " + where(line, column));
    if (!std::isfinite(value))
        fail(ErrorKind::Parse, "non-finite value at " + where(line, column));
    return value;
}

std::int64_t parse_int(std::string_view text, std::size_t line, std::string_view column) {
    text = trim(text);
    std::int64_t value = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || end != text.data() + text.size())
        fail(ErrorKind::Parse, "non-integer value '" + std::string(text) + "' at " + where(line, column));
    return value;
}

std::optional<double> parse_optional_double(std::string_view text, std::size_t line,
                                            std::string_view column) {
    if (trim(text).empty()) return std::nullopt;
    return parse_double(text, line, column);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view text) {
    constexpr std::string_view ws = " \t\r\n";
    auto b = text.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = text.find_last_not_of(ws);
    return text.substr(b, e - b + 1);
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    return out;
}

CsvReader::CsvReader(const std::filesystem::path& path) : path_(path), in_(open_input(path)) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        auto t = trim(line);
        if (t.empty()) continue;
        if (line_ == 1 && t.starts_with("\xEF\xBB\xBF")) t.remove_prefix(3);
        for (auto f : split(t)) header_.emplace_back(trim(f));
        return;
    }
    fail(ErrorKind::Parse, "'" + path.string() + "' has no header line");
}

bool CsvReader::next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, buffer_)) {
        ++line_;
        auto t = trim(buffer_);
        if (t.empty()) continue;
        fields = split(t);
        if (fields.size() != header_.size())
            fail(ErrorKind::Parse, path_.string() + ": line " + std::to_string(line_) + " has " +
                                       std::to_string(fields.size()) + " columns, expected " +
                                       std::to_string(header_.size()));
        for (auto& f : fields) f = trim(f);
        return true;
    }
    return false;
}

void CsvReader::expect_header(std::span<const std::string> expected) const {
    bool ok = expected.size() == header_.size();
    for (std::size_t i = 0; ok && i < expected.size(); ++i) ok = expected[i] == header_[i];
    if (!ok) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        fail(ErrorKind::Schema, path_.string() + ": unexpected header, expected '" + want + "'");
    }
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::span<const std::string> header)
    : path_(path), out_(open_output(path)) {
    for (const auto& h : header) field(h);
    end_row();
}

CsvWriter& CsvWriter::field(std::string_view text) {
    if (!first_) out_.put(',');
    out_ << text;
    first_ = false;
    return *this;
}

void CsvWriter::end_row() {
    out_.put('\n');
    first_ = true;
}

void CsvWriter::close() {
    out_.close();
    if (!out_) fail(ErrorKind::Io, "failed writing '" + path_.string() + "'");
}

}  // namespace affpipe
