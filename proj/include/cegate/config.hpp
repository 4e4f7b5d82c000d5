#ifndef CEGATE_CONFIG_HPP
#define CEGATE_CONFIG_HPP

#include <cstddef>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "cegate/check.hpp"

namespace cegate {

// Flat `key = value` text. '#' starts a comment; blank lines ignored.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& is) {
        KeyValueConfig cfg;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            std::string stripped = line.substr(0, line.find('#'));
            if (stripped.find_first_not_of(" \t") == std::string::npos) continue;
            auto eq = stripped.find('=');
            check_io(eq != std::string::npos,
                     "config line " + std::to_string(line_no) + ": missing '='");
            std::string key = trim(stripped.substr(0, eq));
            std::string value = trim(stripped.substr(eq + 1));
            check_io(!key.empty(), "config line " + std::to_string(line_no) + ": empty key");
            check_io(!cfg.values_.contains(key),
                     "config: duplicate key '" + key + "'");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static KeyValueConfig parse_string(const std::string& text) {
        std::istringstream is(text);
        return parse(is);
    }

    bool has(const std::string& key) const { return values_.contains(key); }

    std::string get_string(const std::string& key) const {
        auto it = values_.find(key);
        check_io(it != values_.end(), "config: missing key '" + key + "'");
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        return to_double(key, get_string(key));
    }

    double get_double(const std::string& key) const {
        return to_double(key, get_string(key));
    }

    std::size_t get_size(const std::string& key, std::size_t fallback) const {
        if (!has(key)) return fallback;
        return to_size(key, get_string(key));
    }

    std::size_t get_size(const std::string& key) const {
        return to_size(key, get_string(key));
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    void set(const std::string& key, std::size_t value) {
        values_[key] = std::to_string(value);
    }

    void set(const std::string& key, double value) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", value);
        values_[key] = buf;
    }

    // Keys emit in sorted order so identical configs serialize identically.
    void write(std::ostream& os) const {
        for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
    }

    std::string to_string() const {
        std::ostringstream os;
        write(os);
        return os.str();
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        auto b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return "";
        auto e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
    }

    static double to_double(const std::string& key, const std::string& v) {
        std::size_t pos = 0;
        double out = 0.0;
        try {
            out = std::stod(v, &pos);
        } catch (const std::exception&) {
            check_io(false, "config: key '" + key + "' is not a number: '" + v + "'");
        }
        check_io(pos == v.size(), "config: key '" + key + "' has trailing junk: '" + v + "'");
        return out;
    }

    static std::size_t to_size(const std::string& key, const std::string& v) {
        check_io(!v.empty() && v[0] != '-',
                 "config: key '" + key + "' must be a non-negative integer: '" + v + "'");
        std::size_t pos = 0;
        unsigned long long out = 0;
        try {
            out = std::stoull(v, &pos);
        } catch (const std::exception&) {
            check_io(false, "config: key '" + key + "' is not an integer: '" + v + "'");
        }
        check_io(pos == v.size(), "config: key '" + key + "' has trailing junk: '" + v + "'");
        return static_cast<std::size_t>(out);
    }

    std::map<std::string, std::string> values_;
};

}  // namespace cegate

#endif
