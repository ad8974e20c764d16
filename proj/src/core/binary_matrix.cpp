#include "deepfactor/binary_matrix.hpp"

#include <algorithm>

#include "deepfactor/error.hpp"

namespace deepfactor {

BinaryMatrix::BinaryMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), bits_(rows * cols, 0), counts_(cols, 0) {}

BinaryMatrix BinaryMatrix::from_rows(const std::vector<std::string>& rows) {
  const std::size_t n = rows.size();
  const std::size_t k = n == 0 ? 0 : rows.front().size();
  BinaryMatrix m(n, k);
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != k) throw_invalid("BinaryMatrix: ragged rows");
    for (std::size_t c = 0; c < k; ++c) {
      const char ch = rows[r][c];
      if (ch != '0' && ch != '1') throw_invalid("BinaryMatrix: entries must be '0' or '1'");
      m.set(r, c, ch == '1');
    }
  }
  return m;
}

void BinaryMatrix::set(std::size_t r, std::size_t c, bool value) {
  auto& bit = bits_[r * cols_ + c];
  if ((bit != 0) == value) return;
  bit = value ? 1 : 0;
  if (value) {
    ++counts_[c];
  } else {
    --counts_[c];
  }
}

std::size_t BinaryMatrix::nonempty_columns() const {
  return static_cast<std::size_t>(
      std::count_if(counts_.begin(), counts_.end(), [](std::size_t m) { return m > 0; }));
}

std::vector<std::uint8_t> BinaryMatrix::column(std::size_t c) const {
  std::vector<std::uint8_t> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = bits_[r * cols_ + c];
  return out;
}

std::string BinaryMatrix::row_string(std::size_t r) const {
  std::string s(cols_, '0');
  for (std::size_t c = 0; c < cols_; ++c)
    if (bits_[r * cols_ + c]) s[c] = '1';
  return s;
}

std::vector<std::string> BinaryMatrix::row_strings() const {
  std::vector<std::string> out;
  out.reserve(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out.push_back(row_string(r));
  return out;
}

void BinaryMatrix::append_zero_column() {
  append_column(std::vector<std::uint8_t>(rows_, 0));
}

void BinaryMatrix::append_column(const std::vector<std::uint8_t>& column) {
  if (column.size() != rows_) throw_invalid("BinaryMatrix::append_column: length mismatch");
  std::vector<std::uint8_t> bits(rows_ * (cols_ + 1));
  std::size_t m = 0;
  for (std::size_t r = 0; r < rows_; ++r) {
    std::copy_n(bits_.begin() + static_cast<std::ptrdiff_t>(r * cols_), cols_,
                bits.begin() + static_cast<std::ptrdiff_t>(r * (cols_ + 1)));
    bits[r * (cols_ + 1) + cols_] = column[r] ? 1 : 0;
    m += column[r] ? 1 : 0;
  }
  bits_ = std::move(bits);
  ++cols_;
  counts_.push_back(m);
}

void BinaryMatrix::remove_column(std::size_t c) {
  if (c >= cols_) throw_invalid("BinaryMatrix::remove_column: index out of range");
  std::vector<std::uint8_t> bits;
  bits.reserve(rows_ * (cols_ - 1));
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t j = 0; j < cols_; ++j)
      if (j != c) bits.push_back(bits_[r * cols_ + j]);
  bits_ = std::move(bits);
  --cols_;
  counts_.erase(counts_.begin() + static_cast<std::ptrdiff_t>(c));
}

BinaryMatrix BinaryMatrix::with_columns(const std::vector<std::size_t>& order) const {
  BinaryMatrix out(rows_, order.size());
  for (std::size_t j = 0; j < order.size(); ++j)
    for (std::size_t r = 0; r < rows_; ++r) out.set(r, j, (*this)(r, order[j]));
  return out;
}

}  // namespace deepfactor
