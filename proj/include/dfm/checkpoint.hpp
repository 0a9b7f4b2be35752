#pragma once

#include <filesystem>
#include <iosfwd>

#include "dfm/net.hpp"

namespace dfm {

/// Versioned little-endian binary checkpoint:
///
///   "DFMCKPT\0" | u32 version | i32 x 7 shape fields | u64 init seed
///   | u32 tensor count | per tensor: u32 name length, name bytes,
///     u64 rows, u64 cols, rows*cols f64 values (row-major)
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const NetParams& params);
NetParams read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const NetParams& params);
NetParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dfm
