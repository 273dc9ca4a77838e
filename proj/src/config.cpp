#include "affpipe/config.hpp"

#include <sstream>

#include "affpipe/error.hpp"
#include "affpipe/text_io.hpp"

namespace affpipe {

Config Config::from_string(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos)
            fail(ErrorKind::Parse, origin + ": line " + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = trim(t.substr(0, eq));
        if (key.empty()) fail(ErrorKind::Parse, origin + ": line " + std::to_string(line_no) + ": empty key");
        cfg.set(std::string(key), std::string(trim(t.substr(eq + 1))));
    }
    return cfg;
}

Config Config::from_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::ostringstream text;
    text << in.rdbuf();
    return from_string(text.str(), path.string());
}

void Config::set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorKind::Parse, "expected key=value, got '" + assignment + "'");
    set(std::string(trim(std::string_view(assignment).substr(0, eq))),
        std::string(trim(std::string_view(assignment).substr(eq + 1))));
}

std::optional<std::string> Config::find(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
}

std::string Config::require_string(const std::string& key) const {
    auto v = find(key);
    if (!v || v->empty()) fail(ErrorKind::Contract, "missing required setting '" + key + "'");
    return *v;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto v = find(key);
    return v ? parse_double(*v, 0, key) : fallback;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    auto v = find(key);
    return v ? parse_int(*v, 0, key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    fail(ErrorKind::Parse, "setting '" + key + "' is not a boolean: '" + *v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (auto part : split(*v)) out.push_back(parse_double(part, 0, key));
    return out;
}

}  // namespace affpipe
