#pragma once

#include "qdet/errors.hpp"

#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace qdet {

/// Line-oriented key = value configuration. Keys are dotted paths; a line
/// "[section]" prefixes the following keys with "section.". Text after '#' is
/// a comment.
class Config {
public:
    static Config parse(std::istream& in, const std::string& origin = "<config>");
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

    const std::map<std::string, std::string>& entries() const { return values_; }
    /// Keys present in the file but never read.
    std::vector<std::string> unused() const;
    const std::string& origin() const { return origin_; }

private:
    const std::string* lookup(const std::string& key) const;
    [[noreturn]] void bad(const std::string& key, const std::string& why) const;

    std::string origin_;
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> read_;
};

} // namespace qdet
