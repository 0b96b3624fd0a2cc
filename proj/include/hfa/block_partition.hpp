#pragma once

#include <vector>

#include "hfa/error.hpp"
#include "hfa/types.hpp"

namespace hfa {

/// Rows of a local problem (1-based, 1..m) grouped into blocks. Blocks hold
/// sorted row indices and are ordered by their smallest row; every block is
/// nonempty.
struct BlockPartition {
  std::vector<std::vector<int>> blocks;

  std::vector<int> sizes() const;
  int total() const;
};

/// Column index groups for a loading matrix of shape m x (1 + c*d): one
/// leading dense column, then c blocks of d columns each (0-based indices).
std::vector<std::vector<int>> uniform_block_columns(int c, int d);

/// Raw block-membership scan of a loading matrix. Row i belongs to block s
/// when every entry of row i outside column group s is below `tol` in
/// magnitude. Rows qualifying for zero or several groups are ambiguous.
struct PartitionScan {
  std::vector<int> block_of_row;    // 0-based row -> group index, -1 ambiguous
  std::vector<int> ambiguous_rows;  // 1-based
  std::vector<std::vector<int>> rows_per_block;  // may contain empty groups
  bool ok() const { return ambiguous_rows.empty(); }
};

/// Scans rows of `loadings` against the given column groups. The leading
/// column (any column not listed in a group) is ignored.
PartitionScan scan_partition(const Matrix& loadings,
                             const std::vector<std::vector<int>>& block_columns,
                             double tol);

/// Strict extraction: throws AmbiguousPartition (carrying the 1-based row
/// indices) when any row is ambiguous, and StructuralError when a column
/// group captured no rows. Blocks are ordered by smallest row.
BlockPartition partition_from_loading(
    const Matrix& loadings, const std::vector<std::vector<int>>& block_columns,
    double tol);

/// Fallback used after an ambiguous scan: assigns each ambiguous row to the
/// column group holding its largest absolute entry (ties to the first group).
/// Returned groups follow scan order and may be empty.
std::vector<std::vector<int>> resolve_ambiguous_by_max(
    const Matrix& loadings, const std::vector<std::vector<int>>& block_columns,
    const PartitionScan& scan);

/// Orders nonempty groups by smallest row, dropping empty ones.
BlockPartition make_partition(const std::vector<std::vector<int>>& rows_per_block);

}  // namespace hfa
