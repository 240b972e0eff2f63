#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spincant {

// Flat key = value file format. '#' starts a comment, blank lines are
// ignored, keys may appear once. Lookups record which keys were consumed so
// callers can reject typos.
class KeyValueConfig {
  public:
    static KeyValueConfig from_file(const std::string& path);
    static KeyValueConfig from_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    long get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value);

    // Keys present in the file but never consumed by any getter.
    std::vector<std::string> unconsumed() const;
    const std::string& origin() const { return origin_; }

  private:
    std::string origin_;
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, bool> consumed_;

    const std::string& raw(const std::string& key) const;
};

}
