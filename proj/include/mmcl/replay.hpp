#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mmcl/rng.hpp"

namespace mmcl {

struct BufferEntry {
    std::vector<double> audio;
    std::vector<double> visual;
    int label = 0;
    std::vector<double> z_a, z_v, z_av;  // logits frozen at insertion time
};

// Bounded episodic memory with reservoir sampling: after N observations
// every stream item has inclusion probability min(1, M/N).
class ReservoirBuffer {
public:
    ReservoirBuffer(std::size_t capacity, std::uint64_t seed)
        : capacity_(capacity), rng_(seed) {}

    void observe(BufferEntry entry);

    // k entries: without replacement when k <= size, with replacement
    // otherwise. An empty buffer yields an empty batch.
    std::vector<const BufferEntry*> sample(std::size_t k, Rng& rng) const;

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    std::uint64_t seen_count() const { return seen_; }
    bool empty() const { return entries_.empty(); }
    const std::vector<BufferEntry>& entries() const { return entries_; }

    // Checkpoint: <prefix>.json manifest + <prefix>.bin blob, exact.
    void save(const std::filesystem::path& prefix) const;
    static ReservoirBuffer load(const std::filesystem::path& prefix);

private:
    std::size_t capacity_;
    std::vector<BufferEntry> entries_;
    std::uint64_t seen_ = 0;
    Rng rng_;
};

}  // namespace mmcl
