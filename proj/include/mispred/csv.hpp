#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mispred/datamodel.hpp"

namespace mispred {

/// Shortest text that reads back as the same double (17 significant digits).
std::string format_real(double v);

/// Header `x0,...,x{d-1}`; missing cells are written as the token NA.
void write_masked_csv(std::ostream& out, const MaskedMatrix& data);
MaskedMatrix read_masked_csv(std::istream& in);

void write_matrix_csv(std::ostream& out, const Matrix& m, const std::string& prefix = "x");
Matrix read_matrix_csv(std::istream& in);

void write_vector_csv(std::ostream& out, const Vector& v, const std::string& name);
Vector read_vector_csv(std::istream& in);

void write_masked_csv_file(const std::string& path, const MaskedMatrix& data);
MaskedMatrix read_masked_csv_file(const std::string& path);
void write_vector_csv_file(const std::string& path, const Vector& v, const std::string& name);
Vector read_vector_csv_file(const std::string& path);
void write_matrix_csv_file(const std::string& path, const Matrix& m);

}  // namespace mispred
