#pragma once

#include <iosfwd>
#include <string>

#include "mesolb/common.hpp"

namespace mesolb {

// Locale-independent %.17g-style rendering (17 significant digits, '.'
// decimal point); the CSV determinism contract hangs on this.
std::string format_double(double value);

// Appends fields joined by ',' and a trailing '\n'.
std::string csv_row(const std::vector<std::string>& fields);

// "WARN: kind=... key=value ..." on one line.
std::string render_warning(const Warning& warning);
void print_warnings(std::ostream& os, const WarningLog& log);

}  // namespace mesolb
