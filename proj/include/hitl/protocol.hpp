#ifndef HITL_PROTOCOL_HPP
#define HITL_PROTOCOL_HPP

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "design_space.hpp"
#include "errors.hpp"
#include "objectives.hpp"

namespace hitl {

// -- CSV lines ---------------------------------------------------------------
//
// Design line: 16 fields p1..p16 in raw units, fixed 6 fractional digits.
// Ratings line: 14 raw items in the order cognitive_load, predictability x4,
// trust x2, safety x4, acceptance x2, aesthetics. Both LF-terminated.

namespace detail {

inline std::string format_fixed6(double v) {
    char buf[64];
    const int n = std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string s(buf, static_cast<std::size_t>(n));
    if (s == "-0.000000") s = "0.000000";
    return s;
}

inline std::vector<double> parse_fields(std::string_view line, std::size_t expected) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
    std::vector<double> out;
    std::size_t field = 0;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t comma = line.find(',', pos);
        std::string_view tok = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        if (field >= expected)
            throw ParseError(static_cast<int>(field), "too many fields: expected " + std::to_string(expected));
        double v = 0.0;
        if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
        const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (tok.empty() || ec != std::errc() || end != tok.data() + tok.size() || !std::isfinite(v))
            throw ParseError(static_cast<int>(field), "field " + std::to_string(field) + " is not a number: '" +
                                                          std::string(tok) + "'");
        out.push_back(v);
        ++field;
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    if (out.size() != expected)
        throw ParseError(static_cast<int>(out.size()), "expected " + std::to_string(expected) + " fields, got " +
                                                           std::to_string(out.size()));
    return out;
}

} // namespace detail

inline std::string csv_emit_design(const DesignPoint& design) {
    const DesignPoint x = from_unit(design);
    std::string line;
    for (std::size_t i = 0; i < kNumParams; ++i) {
        if (i) line.push_back(',');
        line += detail::format_fixed6(x.values[i]);
    }
    line.push_back('\n');
    return line;
}

inline DesignPoint csv_parse_design(std::string_view line) {
    const auto v = detail::parse_fields(line, kNumParams);
    DesignPoint x{Encoding::raw, {}};
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const auto& p = catalog().params[i];
        if (!(v[i] >= p.lower && v[i] <= p.upper))
            throw ParseError(static_cast<int>(i), "field " + std::to_string(i) + " (" + std::string(p.id) +
                                                      ") out of range");
        x.values[i] = v[i];
    }
    return x;
}

inline std::string csv_emit_ratings(const RatingVector& r) {
    validate(r);
    std::string line;
    const auto flat = r.flatten();
    for (std::size_t i = 0; i < flat.size(); ++i) {
        if (i) line.push_back(',');
        line += detail::format_fixed6(flat[i]);
    }
    line.push_back('\n');
    return line;
}

inline RatingVector csv_parse_ratings(std::string_view line) {
    const auto v = detail::parse_fields(line, kNumItems);
    std::size_t k = 0;
    for (const auto& s : kObjectives) {
        for (int i = 0; i < s.item_count; ++i, ++k) {
            if (!(v[k] >= s.item_lower && v[k] <= s.item_upper))
                throw ParseError(static_cast<int>(k), "field " + std::to_string(k) + " (" + std::string(s.name) +
                                                          " item " + std::to_string(i) + ") out of range");
        }
    }
    return RatingVector::from_flat(v);
}

// -- JSONL event logs ------------------------------------------------------------

/// Append-only JSON-lines writer; each append is flushed before returning.
class JsonlWriter {
public:
    explicit JsonlWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::app) {
        if (!out_) throw Error("cannot open log file " + path.string());
    }

    void append(const nlohmann::json& event) {
        std::lock_guard lock(mu_);
        out_ << event.dump() << '\n';
        out_.flush();
        if (!out_) throw Error("write failed for log file " + path_.string());
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::mutex mu_;
};

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open log file " + path.string());
    std::vector<nlohmann::json> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            events.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
        }
    }
    return events;
}

} // namespace hitl

#endif // HITL_PROTOCOL_HPP
