#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace deepfa::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

// Reads a comma-separated file with a header line. Fields are not quoted.
// Blank lines are skipped; a trailing '\r' is stripped.
Table read(const std::filesystem::path& path);
Table parse(std::string_view text, const std::string& source_name);

std::vector<std::string> split_line(std::string_view line);

// Shortest decimal text that parses back to the same double.
std::string format_real(double value);
double parse_real(std::string_view text, const std::string& context);
long long parse_int(std::string_view text, const std::string& context);

// Column index of `name` in the header, or throws ParseError.
std::size_t column(const Table& table, std::string_view name, const std::string& source_name);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace deepfa::csv
