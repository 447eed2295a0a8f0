#include "expmem/fillers.hpp"

#include <random>

namespace expmem {

namespace {

const char* kObjects[] = {
    "marker",  "water bottle", "spoon",   "remote",  "book",    "cup",
    "pen",     "stapler",      "notepad", "fork",    "bottle",  "can",
    "pencil",  "eraser",       "charger", "wallet",  "keyring", "coaster",
    "napkin",  "battery",      "candle",  "magnet",  "ruler",   "tape roll",
};

const char* kDestinations[] = {
    "shelf", "tray", "basket", "corner", "mat", "stand", "rack", "holder",
};

}  // namespace

std::vector<FillerRecord> make_filler_records(std::size_t count, std::uint64_t seed) {
    constexpr std::size_t n_obj = std::size(kObjects);
    constexpr std::size_t n_dst = std::size(kDestinations);
    std::mt19937_64 rng(splitmix64(seed ^ 0xf111e7u));

    std::vector<FillerRecord> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::string obj = kObjects[uniform_below(rng, n_obj)];
        const std::string dst = kDestinations[uniform_below(rng, n_dst)];
        FillerRecord r;
        switch (uniform_below(rng, 3)) {
            case 0:
                r.key.instruction = "Pick up the " + obj + ".";
                r.key.scene_description =
                    "The " + obj + " sits alone near the middle of an otherwise "
                    "clear workspace.";
                r.summary = "The robot wrapped its gripper around the " + obj +
                            " and lifted it without any issues.";
                break;
            case 1:
                r.key.instruction = "Place the " + obj + " next to the " + dst + ".";
                r.key.scene_description =
                    "The " + obj + " was already in the robot's gripper, and the " +
                    dst + " stood in an otherwise clear workspace.";
                r.summary = "The robot lowered the " + obj + " beside the " + dst +
                            " and released it cleanly.";
                break;
            default:
                r.key.instruction = "Bring the " + obj + " over to the " + dst + ".";
                r.key.scene_description =
                    "The " + obj + " and the " + dst +
                    " stood far apart in an otherwise clear workspace.";
                r.summary = "The robot carried the " + obj + " across to the " + dst +
                            " in one uneventful motion.";
                break;
        }
        out.push_back(std::move(r));
    }
    return out;
}

void seed_fillers(MemoryStore& store, Embedder& embedder, std::size_t count,
                  std::uint64_t seed, LogicalClock& clock) {
    const auto records = make_filler_records(count, seed);
    for (std::size_t i = 0; i < records.size(); ++i) {
        store.append(records[i].key, records[i].summary,
                     embedder.embed(records[i].key.key_text()),
                     "filler-" + std::to_string(i), clock.now_rfc3339(), "none");
    }
}

}  // namespace expmem
