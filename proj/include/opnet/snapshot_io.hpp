#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "opnet/svd.hpp"

namespace opnet {

/// Snapshot CSV layout.
///
/// `<name>.csv`: header row, then one row per snapshot row. The leading
/// columns hold the row coordinates (one column for time series, one per
/// spatial dimension for flattened grids); the remaining m columns hold the
/// snapshot values.
///
/// `<name>.meta.csv`: header `scenario,<component names...>` or `time,t`,
/// then one row per snapshot column: the column label followed by its
/// scenario inputs (or time stamp). The leading header cell fixes the
/// aggregation kind.
///
/// Numbers are written with 17 significant digits.
struct SnapshotCsvNames {
  std::vector<std::string> coord_names;   ///< defaults to y, y1, ...
  std::vector<std::string> column_labels; ///< defaults to c0, c1, ...
  std::vector<std::string> meta_names;    ///< defaults to u0, u1, ... (or t)
};

std::filesystem::path meta_path_for(const std::filesystem::path& csv_path);

void write_snapshot_csv(const std::filesystem::path& path, const SnapshotMatrix& snapshots,
                        const SnapshotCsvNames& names = {});

SnapshotMatrix load_snapshot_csv(const std::filesystem::path& path);

}  // namespace opnet
