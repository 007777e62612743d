#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "wrecon/params.hpp"

namespace wrecon {

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double seconds = 0;
};

/// Complete training state. On disk: 8-byte magic, little-endian uint64
/// header length, JSON header (config, epoch, tensor directory with
/// name/shape/offset), then contiguous little-endian float32 blobs.
struct Checkpoint {
    static constexpr int kSchemaVersion = 1;

    int schema_version = kSchemaVersion;
    nlohmann::json config;  // {"model", "train", "policy", "universe", ...}
    int epoch = 0;          // completed epochs
    ParamStore<float> params;
    std::int64_t optimizer_step = 0;
    std::vector<Tensor<float>> adam_m;
    std::vector<Tensor<float>> adam_v;
    std::string rng_state;
    std::vector<EpochRecord> history;
    double best_val = std::numeric_limits<double>::infinity();
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws DataError on a bad magic, version mismatch, malformed header or
/// truncated payload; nothing is returned unless the whole file parsed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace wrecon
