#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace deepfactor {

/// Dense N×K 0/1 matrix with cached column sums m_k.
class BinaryMatrix {
 public:
  BinaryMatrix() = default;
  BinaryMatrix(std::size_t rows, std::size_t cols);

  /// Builds a matrix from row strings such as {"101", "001"}.
  static BinaryMatrix from_rows(const std::vector<std::string>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  bool operator()(std::size_t r, std::size_t c) const {
    return bits_[r * cols_ + c] != 0;
  }
  void set(std::size_t r, std::size_t c, bool value);

  std::size_t column_count(std::size_t c) const { return counts_[c]; }
  const std::vector<std::size_t>& column_counts() const { return counts_; }
  bool column_is_empty(std::size_t c) const { return counts_[c] == 0; }
  std::size_t nonempty_columns() const;

  std::vector<std::uint8_t> column(std::size_t c) const;
  std::string row_string(std::size_t r) const;
  std::vector<std::string> row_strings() const;

  void append_zero_column();
  void append_column(const std::vector<std::uint8_t>& column);
  void remove_column(std::size_t c);
  BinaryMatrix with_columns(const std::vector<std::size_t>& order) const;

  friend bool operator==(const BinaryMatrix& a, const BinaryMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.bits_ == b.bits_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;  // row-major
  std::vector<std::size_t> counts_;
};

}  // namespace deepfactor
