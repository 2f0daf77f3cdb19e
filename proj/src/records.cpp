#include "scepipe/records.hpp"

#include "scepipe/error.hpp"
#include "scepipe/hash.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <system_error>

namespace scepipe {

const char* errcName(Errc code) {
    switch (code) {
        case Errc::MissingFile: return "MissingFile";
        case Errc::MalformedRow: return "MalformedRow";
        case Errc::NonFiniteSample: return "NonFiniteSample";
        case Errc::RateMismatch: return "RateMismatch";
        case Errc::TooFewSamples: return "TooFewSamples";
        case Errc::InvalidValue: return "InvalidValue";
        case Errc::EmptySeries: return "EmptySeries";
        case Errc::ClipTooShort: return "ClipTooShort";
        case Errc::WindowTooShort: return "WindowTooShort";
        case Errc::MalformedRecord: return "MalformedRecord";
        case Errc::OutOfRangeBBox: return "OutOfRangeBBox";
        case Errc::OutOfRangeSeverity: return "OutOfRangeSeverity";
        case Errc::UnknownProfile: return "UnknownProfile";
        case Errc::FrameCountMismatch: return "FrameCountMismatch";
        case Errc::MissingBlock: return "MissingBlock";
        case Errc::BadField: return "BadField";
        case Errc::EmptyCaption: return "EmptyCaption";
        case Errc::UnknownSceLabel: return "UnknownSceLabel";
        case Errc::Timeout: return "Timeout";
        case Errc::RateLimited: return "RateLimited";
        case Errc::TransportError: return "TransportError";
        case Errc::BadRatios: return "BadRatios";
        case Errc::IoError: return "IoError";
        case Errc::DuplicateExampleId: return "DuplicateExampleId";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::InvalidProfile: return "InvalidProfile";
    }
    return "UnknownError";
}

std::string hexPrefix8(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf, 8);
}

std::string hex16(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf, 16);
}

namespace {

bool validKey(std::string_view key) {
    if (key.empty()) return false;
    for (char c : key) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
        if (!ok) return false;
    }
    return true;
}

std::string formatDouble(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw Error(Errc::InvalidValue, "unrepresentable double");
    return std::string(buf, end);
}

} // namespace

std::string escapeValue(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out;
}

std::string unescapeValue(std::string_view escaped) {
    std::string out;
    out.reserve(escaped.size());
    for (std::size_t i = 0; i < escaped.size(); ++i) {
        char c = escaped[i];
        if (c != '\\') {
            out += c;
            continue;
        }
        if (i + 1 >= escaped.size())
            throw Error(Errc::MalformedRecord, "dangling escape at end of value");
        char next = escaped[++i];
        switch (next) {
            case '\\': out += '\\'; break;
            case 't': out += '\t'; break;
            case 'n': out += '\n'; break;
            case 'r': out += '\r'; break;
            default:
                throw Error(Errc::MalformedRecord,
                            std::string("unknown escape \"\\") + next + "\"");
        }
    }
    return out;
}

void Record::set(std::string_view key, std::string_view value) {
    if (!validKey(key))
        throw Error(Errc::MalformedRecord, "invalid key \"" + std::string(key) + "\"");
    fields_[std::string(key)] = std::string(value);
}

void Record::set(std::string_view key, double value) { set(key, formatDouble(value)); }

void Record::set(std::string_view key, std::int64_t value) { set(key, std::to_string(value)); }

void Record::set(std::string_view key, bool value) {
    set(key, value ? std::string_view("true") : std::string_view("false"));
}

bool Record::has(std::string_view key) const { return fields_.count(std::string(key)) != 0; }

const std::string& Record::get(std::string_view key) const {
    auto it = fields_.find(std::string(key));
    if (it == fields_.end())
        throw Error(Errc::MalformedRecord, "missing field \"" + std::string(key) + "\"");
    return it->second;
}

std::optional<std::string> Record::find(std::string_view key) const {
    auto it = fields_.find(std::string(key));
    if (it == fields_.end()) return std::nullopt;
    return it->second;
}

double Record::getDouble(std::string_view key) const {
    const std::string& raw = get(key);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (ec != std::errc{} || ptr != raw.data() + raw.size())
        throw Error(Errc::MalformedRecord,
                    "field \"" + std::string(key) + "\" is not a number: \"" + raw + "\"");
    return value;
}

std::int64_t Record::getInt(std::string_view key) const {
    const std::string& raw = get(key);
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (ec != std::errc{} || ptr != raw.data() + raw.size())
        throw Error(Errc::MalformedRecord,
                    "field \"" + std::string(key) + "\" is not an integer: \"" + raw + "\"");
    return value;
}

bool Record::getBool(std::string_view key) const {
    const std::string& raw = get(key);
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw Error(Errc::MalformedRecord,
                "field \"" + std::string(key) + "\" is not a boolean: \"" + raw + "\"");
}

std::string Record::serialize() const {
    std::string out;
    bool first = true;
    for (const auto& [key, value] : fields_) { // std::map iterates keys in sorted order
        if (!first) out += '\t';
        first = false;
        out += key;
        out += '=';
        out += escapeValue(value);
    }
    return out;
}

Record Record::parse(std::string_view line) {
    Record record;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t tab = line.find('\t', pos);
        std::string_view field =
            line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos);
        std::size_t eq = field.find('=');
        if (eq == std::string_view::npos)
            throw Error(Errc::MalformedRecord, "field without '=': \"" + std::string(field) + "\"");
        std::string_view key = field.substr(0, eq);
        if (!validKey(key))
            throw Error(Errc::MalformedRecord, "invalid key \"" + std::string(key) + "\"");
        if (record.has(key))
            throw Error(Errc::MalformedRecord, "duplicate key \"" + std::string(key) + "\"");
        record.fields_[std::string(key)] = unescapeValue(field.substr(eq + 1));
        if (tab == std::string_view::npos) break;
        pos = tab + 1;
    }
    return record;
}

std::vector<Record> readRecordsFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::MissingFile, path);
    std::vector<Record> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            records.push_back(Record::parse(line));
        } catch (const Error& err) {
            throw Error(Errc::MalformedRecord,
                        path + ":" + std::to_string(lineno) + ": " + err.what());
        }
    }
    return records;
}

void writeRecordsFile(const std::string& path, const std::vector<Record>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path + " for writing");
    for (const Record& record : records) {
        out << record.serialize() << '\n';
    }
    if (!out) throw Error(Errc::IoError, "write failed for " + path);
}

} // namespace scepipe
