#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace raibench {

// SplitMix64 step; used to derive independent sub-seeds from one 64-bit seed.
std::uint64_t mix64(std::uint64_t x);

// Shortest decimal representation that round-trips the exact double value.
// All CSV/stdout number formatting goes through this so that identical values
// always serialize to identical bytes.
std::string format_double(double v);

// Strict parse of a full token; throws std::invalid_argument on trailing junk.
double parse_double(const std::string& s);
long long parse_int(const std::string& s);

std::vector<std::string> split_csv_line(const std::string& line);

// Write-to-temp-then-rename so readers never observe a partial file.
void atomic_write(const std::filesystem::path& target, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace raibench
