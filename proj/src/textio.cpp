#include "mesolb/textio.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace mesolb {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string csv_row(const std::vector<std::string>& fields) {
    std::string row;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) row += ',';
        row += fields[i];
    }
    row += '\n';
    return row;
}

std::string render_warning(const Warning& warning) {
    std::string line = "WARN: kind=" + warning.kind;
    for (const auto& [key, value] : warning.fields) {
        line += ' ';
        line += key;
        line += '=';
        line += value;
    }
    return line;
}

void print_warnings(std::ostream& os, const WarningLog& log) {
    for (const auto& w : log) os << render_warning(w) << '\n';
}

}  // namespace mesolb
