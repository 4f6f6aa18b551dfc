#pragma once

#include <string>
#include <vector>

namespace flowgnn::csv {

// splits one CSV line; supports double-quoted fields with embedded commas and
// doubled quotes; fields are trimmed of surrounding whitespace
std::vector<std::string> split_line(const std::string& line);

std::string trim(const std::string& s);

}  // namespace flowgnn::csv
