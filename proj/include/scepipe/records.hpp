#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scepipe {

/// One line-delimited record: flat string fields keyed by name.
///
/// Serialized form (see docs/formats.md): fields joined by a single tab,
/// each field `key=value`, keys in canonical (lexicographic) order, values
/// escaped for backslash/tab/newline/carriage-return. Every file format in
/// the pipeline (manifests, semantic metadata, sync outputs, annotations,
/// dataset rows, reports) is a stream of these.
class Record {
  public:
    Record() = default;

    void set(std::string_view key, std::string_view value);
    void set(std::string_view key, const char* value) { set(key, std::string_view(value)); }
    void set(std::string_view key, double value);       // shortest round-trip form
    void set(std::string_view key, std::int64_t value);
    void set(std::string_view key, bool value);         // "true" / "false"

    bool has(std::string_view key) const;
    /// Throws Errc::MalformedRecord when the key is absent.
    const std::string& get(std::string_view key) const;
    std::optional<std::string> find(std::string_view key) const;

    double getDouble(std::string_view key) const;
    std::int64_t getInt(std::string_view key) const;
    bool getBool(std::string_view key) const;

    const std::map<std::string, std::string>& fields() const { return fields_; }
    bool empty() const { return fields_.empty(); }

    /// Single line, no trailing newline.
    std::string serialize() const;
    /// Throws Errc::MalformedRecord on bad keys, bad escapes or duplicates.
    static Record parse(std::string_view line);

  private:
    std::map<std::string, std::string> fields_;
};

std::string escapeValue(std::string_view raw);
std::string unescapeValue(std::string_view escaped);

/// Reads every non-empty line of a records file. Throws Errc::MissingFile /
/// Errc::MalformedRecord (message carries the 1-based line number).
std::vector<Record> readRecordsFile(const std::string& path);

/// Writes records one per line. Throws Errc::IoError.
void writeRecordsFile(const std::string& path, const std::vector<Record>& records);

} // namespace scepipe
