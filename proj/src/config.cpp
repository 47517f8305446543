#include "qdet/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace qdet {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& text, double& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

} // namespace

Config Config::parse(std::istream& in, const std::string& origin) {
    Config c;
    c.origin_ = origin;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw DomainError(where + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DomainError(where + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw DomainError(where + ": empty key");
        if (!section.empty())
            key = section + "." + key;
        if (c.values_.count(key))
            throw DomainError(where + ": duplicate key '" + key + "'");
        c.values_[key] = value;
    }
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DomainError("cannot open config file '" + path + "'");
    return parse(in, path);
}

const std::string* Config::lookup(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
        return nullptr;
    read_.insert(key);
    return &it->second;
}

void Config::bad(const std::string& key, const std::string& why) const {
    throw DomainError(origin_ + ": key '" + key + "': " + why);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const std::string* v = lookup(key);
    return v ? *v : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
    const std::string* v = lookup(key);
    if (!v)
        return fallback;
    double out = 0.0;
    if (!parse_number(*v, out))
        bad(key, "'" + *v + "' is not a number");
    return out;
}

int Config::get_int(const std::string& key, int fallback) const {
    const std::string* v = lookup(key);
    if (!v)
        return fallback;
    int out = 0;
    const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
    if (res.ec != std::errc() || res.ptr != v->data() + v->size())
        bad(key, "'" + *v + "' is not an integer");
    return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const std::string* v = lookup(key);
    if (!v)
        return fallback;
    std::string s = *v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (s == "true" || s == "yes" || s == "1" || s == "on")
        return true;
    if (s == "false" || s == "no" || s == "0" || s == "off")
        return false;
    bad(key, "'" + *v + "' is not a boolean");
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& fallback) const {
    const std::string* v = lookup(key);
    if (!v)
        return fallback;
    std::vector<double> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        double d = 0.0;
        if (!parse_number(item, d))
            bad(key, "list item '" + item + "' is not a number");
        out.push_back(d);
    }
    return out;
}

std::vector<std::string> Config::unused() const {
    std::vector<std::string> out;
    for (const auto& kv : values_)
        if (!read_.count(kv.first))
            out.push_back(kv.first);
    return out;
}

} // namespace qdet
