#include "shallownet/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace snet {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw FormatError("not a number: '" + std::string(s) + "'");
    }
    return v;
}

namespace {

bool needs_quoting(const std::string& cell) {
    return cell.find_first_of(",\"\n\r") != std::string::npos;
}

void append_cell(std::string& out, const std::string& cell) {
    if (!needs_quoting(cell)) {
        out += cell;
        return;
    }
    out += '"';
    for (char ch : cell) {
        if (ch == '"') {
            out += '"';
        }
        out += ch;
    }
    out += '"';
}

void append_row(std::string& out, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i != 0) {
            out += ',';
        }
        append_cell(out, row[i]);
    }
    out += '\n';
}

}  // namespace

std::string emit_table(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
    if (header.empty()) {
        throw FormatError("emit_table: empty header");
    }
    std::string out;
    append_row(out, header);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != header.size()) {
            throw FormatError("emit_table: row " + std::to_string(r) + " has " +
                              std::to_string(rows[r].size()) + " cells, header has " +
                              std::to_string(header.size()));
        }
        append_row(out, rows[r]);
    }
    return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool in_quotes = false;
    bool cell_started = false;

    auto end_cell = [&] {
        row.push_back(std::move(cell));
        cell.clear();
        cell_started = false;
    };
    auto end_row = [&] {
        end_cell();
        rows.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell += ch;
            }
        } else if (ch == '"' && !cell_started) {
            in_quotes = true;
            cell_started = true;
        } else if (ch == ',') {
            end_cell();
            cell_started = false;
        } else if (ch == '\n') {
            end_row();
        } else if (ch == '\r') {
            // swallowed; the following \n (if any) ends the row
            if (i + 1 >= text.size() || text[i + 1] != '\n') {
                end_row();
            }
        } else {
            cell += ch;
            cell_started = true;
        }
    }
    if (in_quotes) {
        throw FormatError("parse_csv: unterminated quote");
    }
    if (cell_started || !cell.empty() || !row.empty()) {
        end_row();
    }
    return rows;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot write " + path.string());
    }
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) {
        throw IoError("write failed for " + path.string());
    }
}

}  // namespace snet
