#include "orim/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace orim {

namespace {

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot open file for reading: " + path);
  return in;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  return out;
}

std::string lower_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

double parse_double(const std::string& tok, const std::string& path) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("malformed number '" + tok + "' in " + path);
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_csv(const std::string& path, const Matrix& a) {
  auto out = open_out(path);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (j) out << ',';
      out << format_double(a(i, j));
    }
    out << '\n';
  }
}

Matrix read_matrix_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) row.push_back(parse_double(tok, path));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty matrix file: " + path);
  Matrix a(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) a(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return a;
}

void write_vector_csv(const std::string& path, const Vector& v) {
  write_matrix_csv(path, Matrix(v));
}

Vector read_vector_csv(const std::string& path) {
  Matrix a = read_matrix_csv(path);
  if (a.cols() == 1) return a.col(0);
  if (a.rows() == 1) return a.row(0).transpose();
  throw std::runtime_error("expected a vector in " + path);
}

void write_pgm(const std::string& path, const Matrix& image, bool binary) {
  auto out = open_out(path, binary ? std::ios::out | std::ios::binary : std::ios::out);
  out << (binary ? "P5" : "P2") << '\n' << image.cols() << ' ' << image.rows() << '\n' << 255 << '\n';
  for (Index i = 0; i < image.rows(); ++i)
    for (Index j = 0; j < image.cols(); ++j) {
      const int v = static_cast<int>(std::lround(std::clamp(image(i, j), 0.0, 1.0) * 255.0));
      if (binary)
        out.put(static_cast<char>(v));
      else
        out << v << ((j + 1 == image.cols()) ? '\n' : ' ');
    }
}

Matrix read_pgm(const std::string& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") throw std::runtime_error("not a PGM file: " + path);

  auto next_token = [&in, &path]() -> long {
    // skips whitespace and # comments
    while (true) {
      int c = in.peek();
      if (c == '#') {
        std::string comment;
        std::getline(in, comment);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
      if (!in) throw std::runtime_error("truncated PGM header: " + path);
    }
    long v = 0;
    in >> v;
    if (!in) throw std::runtime_error("truncated PGM header: " + path);
    return v;
  };

  const long cols = next_token();
  const long rows = next_token();
  const long maxval = next_token();
  if (cols < 1 || rows < 1 || maxval < 1 || maxval > 65535)
    throw std::runtime_error("invalid PGM header: " + path);

  Matrix img(rows, cols);
  if (magic == "P2") {
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) {
        long v;
        in >> v;
        if (!in) throw std::runtime_error("truncated PGM data: " + path);
        img(i, j) = static_cast<double>(v) / static_cast<double>(maxval);
      }
  } else {
    in.get();  // single whitespace after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) {
        long v = 0;
        for (int b = 0; b < bytes; ++b) {
          const int c = in.get();
          if (c == EOF) throw std::runtime_error("truncated PGM data: " + path);
          v = (v << 8) | c;
        }
        img(i, j) = static_cast<double>(v) / static_cast<double>(maxval);
      }
  }
  return img;
}

void write_matrix_market(const std::string& path, const SparseMatrix& a) {
  auto out = open_out(path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  for (Index outer = 0; outer < a.outerSize(); ++outer)
    for (SparseMatrix::InnerIterator it(a, outer); it; ++it)
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << format_double(it.value()) << '\n';
}

SparseMatrix read_matrix_market(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw std::runtime_error("missing MatrixMarket banner in " + path);
  if (line.find("coordinate") == std::string::npos || line.find("real") == std::string::npos)
    throw std::runtime_error("unsupported MatrixMarket format in " + path);

  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::stringstream header(line);
  Index rows = 0, cols = 0;
  long long nnz = 0;
  header >> rows >> cols >> nnz;
  if (rows < 1 || cols < 1 || nnz < 0) throw std::runtime_error("invalid MatrixMarket size line in " + path);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  for (long long k = 0; k < nnz; ++k) {
    Index i = 0, j = 0;
    double v = 0;
    if (!(in >> i >> j >> v)) throw std::runtime_error("truncated MatrixMarket data in " + path);
    if (i < 1 || i > rows || j < 1 || j > cols)
      throw std::runtime_error("MatrixMarket index out of range in " + path);
    triplets.emplace_back(i - 1, j - 1, v);
  }
  SparseMatrix a(rows, cols);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  return a;
}

Matrix read_matrix_any(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "csv") return read_matrix_csv(path);
  if (ext == "mtx") return Matrix(read_matrix_market(path));
  if (ext == "pgm") return read_pgm(path);
  throw std::runtime_error("unsupported matrix file extension: " + path);
}

}  // namespace orim
