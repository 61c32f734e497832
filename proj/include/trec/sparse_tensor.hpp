#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "trec/check.hpp"

namespace trec {

// 4D integer coordinate (x, y, z, k) with k the discrete time index.
using Coord4 = std::array<int32_t, 4>;
// Lattice spacing per axis (spatial strides, temporal stride).
using Stride4 = std::array<int32_t, 4>;

using MatXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Packs a coordinate into one u64, 16 biased bits per component.
// Valid for components in [-32768, 32766]; the all-ones pattern is the
// empty-slot sentinel of CoordHashMap.
inline uint64_t pack_coord(const Coord4& c) {
    return (static_cast<uint64_t>(static_cast<uint16_t>(c[0] + 32768)) << 48) |
           (static_cast<uint64_t>(static_cast<uint16_t>(c[1] + 32768)) << 32) |
           (static_cast<uint64_t>(static_cast<uint16_t>(c[2] + 32768)) << 16) |
           static_cast<uint64_t>(static_cast<uint16_t>(c[3] + 32768));
}

inline Coord4 unpack_coord(uint64_t key) {
    return Coord4{static_cast<int32_t>(static_cast<uint16_t>(key >> 48)) - 32768,
                  static_cast<int32_t>(static_cast<uint16_t>(key >> 32)) - 32768,
                  static_cast<int32_t>(static_cast<uint16_t>(key >> 16)) - 32768,
                  static_cast<int32_t>(static_cast<uint16_t>(key)) - 32768};
}

// Open-addressing hash map from packed coordinate to row index. This sits on
// the hot path of kernel-map construction, where std::unordered_map probe
// cost dominates; linear probing over a flat array is several times faster.
class CoordHashMap {
public:
    static constexpr uint64_t kEmpty = ~0ull;

    explicit CoordHashMap(size_t expected = 0) { rehash(table_size_for(expected)); }

    // Inserts key -> val unless present; returns the stored value.
    int32_t insert(uint64_t key, int32_t val) {
        if ((size_ + 1) * 8 > capacity_ * 7) rehash(capacity_ * 2);
        size_t i = probe_start(key);
        while (keys_[i] != kEmpty) {
            if (keys_[i] == key) return vals_[i];
            i = (i + 1) & mask_;
        }
        keys_[i] = key;
        vals_[i] = val;
        ++size_;
        return val;
    }

    // Row index for key, or -1.
    int32_t find(uint64_t key) const {
        size_t i = probe_start(key);
        while (keys_[i] != kEmpty) {
            if (keys_[i] == key) return vals_[i];
            i = (i + 1) & mask_;
        }
        return -1;
    }

    bool contains(uint64_t key) const { return find(key) >= 0; }
    size_t size() const { return size_; }
    void reserve(size_t expected) {
        size_t want = table_size_for(expected);
        if (want > capacity_) rehash(want);
    }

private:
    static size_t table_size_for(size_t expected) {
        size_t cap = 16;
        while (cap * 7 < (expected + 1) * 8) cap <<= 1;
        return cap;
    }

    static uint64_t mix(uint64_t x) {
        x ^= x >> 33;
        x *= 0xFF51AFD7ED558CCDull;
        x ^= x >> 33;
        x *= 0xC4CEB9FE1A85EC53ull;
        x ^= x >> 33;
        return x;
    }

    size_t probe_start(uint64_t key) const { return static_cast<size_t>(mix(key)) & mask_; }

    void rehash(size_t new_cap) {
        std::vector<uint64_t> old_keys = std::move(keys_);
        std::vector<int32_t> old_vals = std::move(vals_);
        capacity_ = new_cap;
        mask_ = new_cap - 1;
        keys_.assign(new_cap, kEmpty);
        vals_.assign(new_cap, -1);
        for (size_t i = 0; i < old_keys.size(); ++i) {
            if (old_keys[i] == kEmpty) continue;
            size_t j = probe_start(old_keys[i]);
            while (keys_[j] != kEmpty) j = (j + 1) & mask_;
            keys_[j] = old_keys[i];
            vals_[j] = old_vals[i];
        }
    }

    std::vector<uint64_t> keys_;
    std::vector<int32_t> vals_;
    size_t capacity_ = 0;
    size_t mask_ = 0;
    size_t size_ = 0;
};

// Insertion-ordered set of unique 4D coordinates with O(1) lookup. Row r of
// an attached feature matrix corresponds to coords()[r]; the insertion order
// is the single source of truth for tensor layout, which keeps every
// downstream reduction deterministic.
class CoordSet {
public:
    explicit CoordSet(const Stride4& stride = {1, 1, 1, 1}, size_t expected = 0)
        : index_(expected), stride_(stride) {
        coords_.reserve(expected);
    }

    // Returns the row of the coordinate, inserting it if new.
    int32_t insert(const Coord4& c) {
        const int32_t next = static_cast<int32_t>(coords_.size());
        const int32_t row = index_.insert(pack_coord(c), next);
        if (row == next) coords_.push_back(c);
        return row;
    }

    // Row of the coordinate or -1.
    int32_t find(const Coord4& c) const { return index_.find(pack_coord(c)); }
    bool contains(const Coord4& c) const { return find(c) >= 0; }

    const std::vector<Coord4>& coords() const { return coords_; }
    const Stride4& stride() const { return stride_; }
    size_t size() const { return coords_.size(); }
    bool empty() const { return coords_.empty(); }

private:
    std::vector<Coord4> coords_;
    CoordHashMap index_;
    Stride4 stride_;
};

using CoordSetPtr = std::shared_ptr<CoordSet>;

inline CoordSetPtr make_coord_set(const Stride4& stride = {1, 1, 1, 1}, size_t expected = 0) {
    return std::make_shared<CoordSet>(stride, expected);
}

// Set of 4D integer coordinates with per-coordinate feature vectors and a
// tensor stride. Treated as an immutable value after construction.
struct SparseTensor {
    CoordSetPtr coords = make_coord_set();
    MatXf feats;  // size() x channels

    SparseTensor() = default;
    SparseTensor(CoordSetPtr c, MatXf f) : coords(std::move(c)), feats(std::move(f)) {
        TREC_CHECK(static_cast<size_t>(feats.rows()) == coords->size(),
                   "feature rows must match coordinate count");
    }

    static SparseTensor empty(int channels, const Stride4& stride = {1, 1, 1, 1}) {
        return SparseTensor(make_coord_set(stride), MatXf::Zero(0, channels));
    }

    size_t size() const { return coords->size(); }
    int channels() const { return static_cast<int>(feats.cols()); }
    const Stride4& stride() const { return coords->stride(); }
};

}  // namespace trec
