#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "faf/core.hpp"

namespace faf {

// Dataset CSV schema: header row with required columns `y` and `g`; every
// remaining column must be numeric and becomes a covariate in file order.
// Missing or non-numeric cells are rejected with their line number.
// `group_r`/`group_b`, when set, pin which labels map to (r, b); otherwise
// the mapping follows first appearance.
Dataset read_dataset_csv(const std::string& path,
                         std::optional<std::string> group_r = std::nullopt,
                         std::optional<std::string> group_b = std::nullopt);

// Single numeric column (with header), aligned to dataset row order.
std::vector<double> read_column_csv(const std::string& path);

// Two numeric columns (with header), aligned to dataset row order.
std::vector<std::array<double, 2>> read_two_column_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Round-trip formatting for doubles ("%.17g"); used by every CSV writer so
// reruns are byte identical.
std::string format_double(double v);

// FNV-1a 64-bit digest of a file's bytes, rendered as hex.
std::string file_digest(const std::string& path);

}  // namespace faf
