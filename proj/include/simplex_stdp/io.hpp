#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace simplex_stdp {

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

// FNV-1a 64-bit digest, hex encoded.
std::string digest_hex(std::string_view text);

// {prefix}_1, ..., {prefix}_d
std::vector<std::string> indexed_header(std::string_view prefix, std::size_t d);

void write_text_file(const std::filesystem::path& path, std::string_view content);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& cell(double x);
  CsvWriter& cell(int x);
  CsvWriter& cell(unsigned long x);
  CsvWriter& cell(unsigned long long x);
  CsvWriter& cell(std::string_view x);
  CsvWriter& cells(std::span<const double> xs);
  void end_row();
  void close();

 private:
  void separator();

  std::filesystem::path path_;
  std::ofstream out_;
  std::string line_;
  bool row_started_ = false;
};

}  // namespace simplex_stdp
