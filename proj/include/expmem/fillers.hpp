#pragma once

#include <cstdint>
#include <vector>

#include "expmem/embedding.hpp"
#include "expmem/memory_store.hpp"
#include "expmem/util.hpp"

namespace expmem {

struct FillerRecord {
    ScenarioKey key;
    std::string summary;
};

/// Deterministic bank of unrelated simple-task experiences (uneventful pick
/// and place episodes) used to pad the long-term memory.
std::vector<FillerRecord> make_filler_records(std::size_t count, std::uint64_t seed);

/// Embeds and appends `count` filler records to the store.
void seed_fillers(MemoryStore& store, Embedder& embedder, std::size_t count,
                  std::uint64_t seed, LogicalClock& clock);

}  // namespace expmem
