#include "hfa/block_partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hfa {

std::vector<int> BlockPartition::sizes() const {
  std::vector<int> s;
  s.reserve(blocks.size());
  for (const auto& b : blocks) s.push_back(static_cast<int>(b.size()));
  return s;
}

int BlockPartition::total() const {
  int t = 0;
  for (const auto& b : blocks) t += static_cast<int>(b.size());
  return t;
}

std::vector<std::vector<int>> uniform_block_columns(int c, int d) {
  std::vector<std::vector<int>> groups(c);
  for (int s = 0; s < c; ++s) {
    groups[s].resize(d);
    std::iota(groups[s].begin(), groups[s].end(), 1 + s * d);
  }
  return groups;
}

PartitionScan scan_partition(const Matrix& loadings,
                             const std::vector<std::vector<int>>& block_columns,
                             double tol) {
  const int m = static_cast<int>(loadings.rows());
  const int c = static_cast<int>(block_columns.size());

  // Per-row maximum magnitude inside each group; a row fits group s when the
  // max over all other groups is below tol.
  Matrix group_max = Matrix::Zero(m, c);
  for (int s = 0; s < c; ++s)
    for (int col : block_columns[s])
      group_max.col(s) = group_max.col(s).cwiseMax(loadings.col(col).cwiseAbs());

  PartitionScan scan;
  scan.block_of_row.assign(m, -1);
  scan.rows_per_block.assign(c, {});
  for (int i = 0; i < m; ++i) {
    int hit = -1;
    int hits = 0;
    for (int s = 0; s < c; ++s) {
      bool rest_small = true;
      for (int r = 0; r < c && rest_small; ++r)
        if (r != s && group_max(i, r) >= tol) rest_small = false;
      if (rest_small) {
        ++hits;
        hit = s;
      }
    }
    if (hits == 1) {
      scan.block_of_row[i] = hit;
      scan.rows_per_block[hit].push_back(i + 1);
    } else {
      scan.ambiguous_rows.push_back(i + 1);
    }
  }
  return scan;
}

BlockPartition make_partition(const std::vector<std::vector<int>>& rows_per_block) {
  BlockPartition part;
  for (auto b : rows_per_block) {
    if (b.empty()) continue;
    std::sort(b.begin(), b.end());
    part.blocks.push_back(std::move(b));
  }
  std::sort(part.blocks.begin(), part.blocks.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return part;
}

BlockPartition partition_from_loading(
    const Matrix& loadings, const std::vector<std::vector<int>>& block_columns,
    double tol) {
  PartitionScan scan = scan_partition(loadings, block_columns, tol);
  if (!scan.ok()) {
    std::ostringstream os;
    os << "rows";
    for (int r : scan.ambiguous_rows) os << ' ' << r;
    os << " fit zero or several blocks at tolerance " << tol;
    throw AmbiguousPartition(os.str(), scan.ambiguous_rows);
  }
  for (std::size_t s = 0; s < scan.rows_per_block.size(); ++s)
    if (scan.rows_per_block[s].empty())
      throw StructuralError("block " + std::to_string(s + 1) +
                            " captured no rows");
  return make_partition(scan.rows_per_block);
}

std::vector<std::vector<int>> resolve_ambiguous_by_max(
    const Matrix& loadings, const std::vector<std::vector<int>>& block_columns,
    const PartitionScan& scan) {
  const int c = static_cast<int>(block_columns.size());
  auto groups = scan.rows_per_block;
  for (int row : scan.ambiguous_rows) {
    const int i = row - 1;
    int best = 0;
    double best_mag = -1.0;
    for (int s = 0; s < c; ++s) {
      double mag = 0.0;
      for (int col : block_columns[s])
        mag = std::max(mag, std::abs(loadings(i, col)));
      if (mag > best_mag) {
        best_mag = mag;
        best = s;
      }
    }
    groups[best].push_back(row);
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  return groups;
}

}  // namespace hfa
