#include "crowdmark/io.hpp"

#include "crowdmark/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace crowdmark::io {

CsvTable parse_csv(std::string_view text) {
    CsvTable table;
    std::size_t line = 1;
    std::size_t pos = 0;
    bool have_header = false;

    while (pos < text.size()) {
        const std::size_t row_line = line;
        std::vector<std::string> fields;
        std::string field;
        bool in_quotes = false;
        bool row_done = false;
        while (pos < text.size() && !row_done) {
            const char ch = text[pos++];
            if (in_quotes) {
                if (ch == '"') {
                    if (pos < text.size() && text[pos] == '"') {
                        field.push_back('"');
                        ++pos;
                    } else {
                        in_quotes = false;
                    }
                } else {
                    if (ch == '\n') {
                        ++line;
                    }
                    field.push_back(ch);
                }
                continue;
            }
            switch (ch) {
            case '"': in_quotes = true; break;
            case ',':
                fields.push_back(std::move(field));
                field.clear();
                break;
            case '\r': break;
            case '\n':
                ++line;
                row_done = true;
                break;
            default: field.push_back(ch);
            }
        }
        if (in_quotes) {
            throw ValidationError("unterminated quoted field", row_line);
        }
        fields.push_back(std::move(field));
        if (fields.size() == 1 && fields.front().empty()) {
            continue;
        }
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
        } else {
            table.rows.push_back({row_line, std::move(fields)});
        }
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

void require_header(const CsvTable& table, const std::vector<std::string>& expected, std::string_view what) {
    if (table.header != expected) {
        std::string want;
        for (const auto& h : expected) {
            want += (want.empty() ? "" : ",") + h;
        }
        throw ValidationError(std::string(what) + ": expected header '" + want + "'", 1);
    }
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') {
            out += '"';
        }
        out += ch;
    }
    out += '"';
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::size_t line, std::string_view field) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') {
        ++first;
    }
    const auto res = std::from_chars(first, last, v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != last || !std::isfinite(v)) {
        throw ValidationError("field '" + std::string(field) + "' is not a finite number: '" + std::string(s) + "'",
                              line);
    }
    return v;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open '" + tmp.string() + "' for writing");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw IoError("write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot move output into place at '" + path.string() + "': " + ec.message());
    }
}

} // namespace crowdmark::io
