#pragma once

#include <filesystem>
#include <string>

#include "uniconn/tensor.hpp"

namespace uniconn {

/// Comma-separated, headerless, row-major. Values use the shortest decimal
/// form that round-trips to the identical double.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

std::string format_double(double v);
double parse_double(std::string_view text, const std::string& where);

/// Writes `text` to a sibling temp file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace uniconn
