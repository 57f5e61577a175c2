#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lcgibbs/errors.hpp"

namespace lcgibbs {

using Index = Eigen::Index;

/// Partition of R^d into M consecutive blocks of sizes d_1..d_M.
class BlockStructure {
public:
    BlockStructure() = default;

    explicit BlockStructure(std::vector<Index> dims) : dims_(std::move(dims)) {
        if (dims_.empty()) throw ConstructionError("block structure needs at least one block");
        offsets_.reserve(dims_.size());
        Index off = 0;
        for (Index dm : dims_) {
            if (dm < 1) throw ConstructionError("block dimensions must be positive");
            offsets_.push_back(off);
            off += dm;
        }
        dim_ = off;
    }

    static BlockStructure unit(Index d) { return BlockStructure(std::vector<Index>(static_cast<std::size_t>(d), 1)); }

    Index num_blocks() const { return static_cast<Index>(dims_.size()); }
    Index dim() const { return dim_; }
    Index offset(Index m) const { return offsets_.at(static_cast<std::size_t>(m)); }
    Index size(Index m) const { return dims_.at(static_cast<std::size_t>(m)); }
    const std::vector<Index>& dims() const { return dims_; }
    const std::vector<Index>& offsets() const { return offsets_; }

    bool all_unit() const {
        return std::all_of(dims_.begin(), dims_.end(), [](Index v) { return v == 1; });
    }
    Index max_block_dim() const { return *std::max_element(dims_.begin(), dims_.end()); }

    void check_block(Index m) const {
        if (m < 0 || m >= num_blocks())
            throw DimensionError("block index " + std::to_string(m) + " out of range");
    }

    /// Coordinates covered by the given blocks, in increasing block order.
    std::vector<Index> coordinates(std::span<const Index> blocks) const {
        std::vector<Index> sorted(blocks.begin(), blocks.end());
        std::sort(sorted.begin(), sorted.end());
        std::vector<Index> out;
        for (Index m : sorted) {
            check_block(m);
            for (Index i = 0; i < size(m); ++i) out.push_back(offset(m) + i);
        }
        return out;
    }

    std::vector<Index> complement_coordinates(std::span<const Index> blocks) const {
        std::vector<char> in(static_cast<std::size_t>(num_blocks()), 0);
        for (Index m : blocks) {
            check_block(m);
            in[static_cast<std::size_t>(m)] = 1;
        }
        std::vector<Index> out;
        for (Index m = 0; m < num_blocks(); ++m) {
            if (in[static_cast<std::size_t>(m)]) continue;
            for (Index i = 0; i < size(m); ++i) out.push_back(offset(m) + i);
        }
        return out;
    }

    bool operator==(const BlockStructure& o) const { return dims_ == o.dims_; }

private:
    std::vector<Index> dims_;
    std::vector<Index> offsets_;
    Index dim_ = 0;
};

}  // namespace lcgibbs
