#pragma once

#include <string>

#include "orim/types.hpp"

namespace orim {

/// %.17g — round-trips doubles exactly through text.
std::string format_double(double v);

void write_matrix_csv(const std::string& path, const Matrix& a);
Matrix read_matrix_csv(const std::string& path);
void write_vector_csv(const std::string& path, const Vector& v);
Vector read_vector_csv(const std::string& path);

/// 8-bit PGM; values clipped to [0,1] on write, scaled back to [0,1] on read.
void write_pgm(const std::string& path, const Matrix& image, bool binary = true);
Matrix read_pgm(const std::string& path);

/// MatrixMarket coordinate real general.
void write_matrix_market(const std::string& path, const SparseMatrix& a);
SparseMatrix read_matrix_market(const std::string& path);

/// Dispatch by extension: .csv, .mtx, .pgm.
Matrix read_matrix_any(const std::string& path);

}  // namespace orim
