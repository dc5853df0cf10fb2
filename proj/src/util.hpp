#pragma once

#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace qdsim::util {

/// Shortest text that reads back to the same double (17 significant digits).
std::string fmt17(double v);

/// Whole-token decimal parse; InputError on trailing junk or overflow.
double parse_double(std::string_view s);

std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);

/// Writes next to the target and renames over it, so readers never observe a
/// half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// captured per index and returned; the slot is null on success.
std::vector<std::exception_ptr> parallel_for(std::size_t n, int threads,
                                             const std::function<void(std::size_t)>& body);

/// Thread count: explicit request if > 0, else QDSIM_THREADS, else 1.
int resolve_threads(int requested);

}  // namespace qdsim::util
