#ifndef KHCLUST_IO_HPP
#define KHCLUST_IO_HPP

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "core.hpp"
#include "segment.hpp"

namespace kh {

/// Malformed input file; line and column are 1-based, 0 when not applicable.
class InputError : public std::runtime_error {
public:
    InputError(const std::string& what, std::size_t line = 0, std::size_t column = 0);

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/**
 * One point per row, comma-separated reals. A first row that does not parse
 * as numbers is taken as a header. Blank lines are skipped.
 */
Dataset read_csv(std::istream& in);
Dataset read_csv_file(const std::string& path);

/// Plain (P2) or raw (P5) graymap with maxval <= 255.
GrayImage read_pgm(std::istream& in);
GrayImage read_pgm_file(const std::string& path);

/// Writes a raw (P5) graymap; intensities are rounded half-up and clamped.
void write_pgm(std::ostream& out, const GrayImage& img);
void write_pgm_file(const std::string& path, const GrayImage& img);

}  // namespace kh

#endif  // KHCLUST_IO_HPP
