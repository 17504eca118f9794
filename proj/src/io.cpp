#include "simplex_stdp/io.hpp"

#include <charconv>
#include <cstdio>

#include "simplex_stdp/errors.hpp"

namespace simplex_stdp {

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string digest_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> indexed_header(std::string_view prefix, std::size_t d) {
  std::vector<std::string> out;
  out.reserve(d);
  for (std::size_t i = 1; i <= d; ++i) out.push_back(std::string(prefix) + "_" + std::to_string(i));
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw OutputError("write failed: " + path.string());
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw OutputError("cannot open " + path.string() + " for writing");
  for (const auto& h : header) cell(std::string_view(h));
  end_row();
}

void CsvWriter::separator() {
  if (row_started_) line_ += ',';
  row_started_ = true;
}

CsvWriter& CsvWriter::cell(double x) {
  separator();
  line_ += format_double(x);
  return *this;
}

CsvWriter& CsvWriter::cell(unsigned long x) {
  separator();
  line_ += std::to_string(x);
  return *this;
}

CsvWriter& CsvWriter::cell(int x) {
  separator();
  line_ += std::to_string(x);
  return *this;
}

CsvWriter& CsvWriter::cell(unsigned long long x) {
  separator();
  line_ += std::to_string(x);
  return *this;
}

CsvWriter& CsvWriter::cell(std::string_view x) {
  separator();
  line_ += x;
  return *this;
}

CsvWriter& CsvWriter::cells(std::span<const double> xs) {
  for (double x : xs) cell(x);
  return *this;
}

void CsvWriter::end_row() {
  line_ += '\n';
  out_ << line_;
  line_.clear();
  row_started_ = false;
}

void CsvWriter::close() {
  out_.close();
  if (!out_) throw OutputError("write failed: " + path_.string());
}

}  // namespace simplex_stdp
