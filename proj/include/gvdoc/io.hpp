#pragma once

#include <string>

namespace gvdoc {

// Whole-file binary read/write; failures raise DataError naming the path.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace gvdoc
