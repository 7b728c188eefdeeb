#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tvvi/core/exceptions.hpp"
#include "tvvi/io/format.hpp"
#include "tvvi/util/linalg.hpp"

namespace tvvi {

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct MMHeader {
  bool coordinate = true;  // false: array
  bool symmetric = false;
};

inline MMHeader read_mm_header(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty matrix file: " + path);
  std::istringstream h(lower(line));
  std::string banner, object, fmt, field, sym;
  h >> banner >> object >> fmt >> field >> sym;
  if (banner != "%%matrixmarket" || object != "matrix")
    throw Error("not a Matrix Market file: " + path);
  MMHeader out;
  if (fmt == "coordinate")
    out.coordinate = true;
  else if (fmt == "array")
    out.coordinate = false;
  else
    throw Error("unsupported Matrix Market format '" + fmt + "' in " + path);
  if (field != "real" && field != "integer")
    throw Error("unsupported Matrix Market field '" + field + "' in " + path);
  if (sym == "symmetric")
    out.symmetric = true;
  else if (sym != "general")
    throw Error("unsupported Matrix Market symmetry '" + sym + "' in " + path);
  return out;
}

inline bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == '%') continue;
    return true;
  }
  return false;
}

}  // namespace detail

inline SpMat read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  auto hdr = detail::read_mm_header(in, path);
  std::string line;
  if (!detail::next_data_line(in, line)) throw Error("missing size line in " + path);
  std::istringstream sz(line);
  long rows = 0, cols = 0, nnz = 0;
  if (hdr.coordinate) {
    if (!(sz >> rows >> cols >> nnz)) throw Error("bad size line in " + path);
  } else {
    if (!(sz >> rows >> cols)) throw Error("bad size line in " + path);
    nnz = rows * cols;
  }
  if (rows < 0 || cols < 0) throw Error("negative dimensions in " + path);

  std::vector<Triplet> t;
  t.reserve(static_cast<size_t>(hdr.symmetric ? 2 * nnz : nnz));
  if (hdr.coordinate) {
    for (long k = 0; k < nnz; ++k) {
      if (!detail::next_data_line(in, line)) throw Error("truncated entries in " + path);
      std::istringstream e(line);
      long i = 0, j = 0;
      double v = 0.0;
      if (!(e >> i >> j >> v)) throw Error("bad entry line in " + path);
      if (i < 1 || i > rows || j < 1 || j > cols) throw Error("entry out of range in " + path);
      t.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1), v);
      if (hdr.symmetric && i != j)
        t.emplace_back(static_cast<int>(j - 1), static_cast<int>(i - 1), v);
    }
  } else {
    // array format stores columns contiguously
    for (long j = 0; j < cols; ++j)
      for (long i = (hdr.symmetric ? j : 0); i < rows; ++i) {
        if (!detail::next_data_line(in, line)) throw Error("truncated entries in " + path);
        double v = std::stod(line);
        if (v != 0.0) {
          t.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
          if (hdr.symmetric && i != j) t.emplace_back(static_cast<int>(j), static_cast<int>(i), v);
        }
      }
  }
  SpMat M(static_cast<int>(rows), static_cast<int>(cols));
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

inline dvec read_matrix_market_vector(const std::string& path) {
  SpMat M = read_matrix_market(path);
  if (M.cols() != 1) throw Error("expected a single-column matrix in " + path);
  return dvec(dmat(M).col(0));
}

inline void write_matrix_market(const std::string& path, const SpMat& M) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << M.rows() << " " << M.cols() << " " << M.nonZeros() << "\n";
  for (int k = 0; k < M.outerSize(); ++k)
    for (SpMat::InnerIterator it(M, k); it; ++it)
      out << (it.row() + 1) << " " << (it.col() + 1) << " " << format_double(it.value()) << "\n";
  if (!out) throw Error("write failed for " + path);
}

inline void write_matrix_market_vector(const std::string& path, const dvec& v) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "%%MatrixMarket matrix array real general\n";
  out << v.size() << " 1\n";
  for (int i = 0; i < v.size(); ++i) out << format_double(v[i]) << "\n";
  if (!out) throw Error("write failed for " + path);
}

}  // namespace tvvi
