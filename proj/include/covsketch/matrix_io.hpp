#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "covsketch/linalg.hpp"

namespace covsketch {

// Matrices travel as CSV, one row per line, printed with round-trip precision.
void write_matrix_csv(std::ostream& out, const Matrix& m);
Matrix read_matrix_csv(std::istream& in);
void save_matrix_csv(const std::string& path, const Matrix& m);
Matrix load_matrix_csv(const std::string& path);

// Vectors are a single column.
void save_vector_csv(const std::string& path, const Vector& v);
Vector load_vector_csv(const std::string& path);

// Lossless decimal form of a double.
std::string format_double(double v);

}  // namespace covsketch
