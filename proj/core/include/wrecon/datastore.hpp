#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace wrecon {

/// Ordered set of surface variable names. Index i always denotes the same
/// variable for a dataset and every model trained on it.
class VariableUniverse {
public:
    VariableUniverse() : VariableUniverse(standard_names()) {}
    explicit VariableUniverse(std::vector<std::string> names);

    static std::vector<std::string> standard_names() { return {"SSH", "U", "V", "B"}; }

    int size() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(int i) const { return names_.at(static_cast<std::size_t>(i)); }
    /// Throws DataError for unknown names.
    int index_of(const std::string& name) const;
    bool contains(const std::string& name) const;

    bool operator==(const VariableUniverse&) const = default;

private:
    std::vector<std::string> names_;
};

/// Which universe variables are observed, in universe order.
class AvailabilityMask {
public:
    AvailabilityMask() = default;
    explicit AvailabilityMask(std::vector<bool> bits) : bits_(std::move(bits)) {}

    static AvailabilityMask full(int n) { return AvailabilityMask(std::vector<bool>(static_cast<std::size_t>(n), true)); }
    static AvailabilityMask from_names(const VariableUniverse& u, std::span<const std::string> names);
    /// Parses "SSH+U+V" style specifications.
    static AvailabilityMask parse(const VariableUniverse& u, const std::string& spec);

    int size() const { return static_cast<int>(bits_.size()); }
    bool test(int i) const { return bits_.at(static_cast<std::size_t>(i)); }
    void set(int i, bool v = true) { bits_.at(static_cast<std::size_t>(i)) = v; }
    int count() const;
    bool any() const { return count() > 0; }
    std::vector<int> present() const;
    const std::vector<bool>& bits() const { return bits_; }
    std::string to_string(const VariableUniverse& u) const;

    bool operator==(const AvailabilityMask&) const = default;

private:
    std::vector<bool> bits_;
};

/// One time snapshot: surface grids keyed by variable name plus a
/// [channels, height, width] target of filtered vertical velocity.
struct FieldSample {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::map<std::string, std::vector<float>> surface;
    std::vector<float> target;
    int time_index = 0;

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    /// Throws DataError on inconsistent sizes or non-finite values.
    void validate() const;
};

struct ChannelStats {
    double mean = 0;
    double std = 1;
};

struct NormStats {
    static constexpr double kStdFloor = 1e-8;

    std::map<std::string, ChannelStats> variables;
    std::vector<ChannelStats> target;

    const ChannelStats& variable(const std::string& name) const;
};

struct Splits {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

struct DatasetManifest {
    static constexpr int kSchemaVersion = 1;

    int schema_version = kSchemaVersion;
    VariableUniverse universe;
    int height = 0;
    int width = 0;
    int channels = 3;
    int samples = 0;  // total number of time snapshots stored
    std::vector<int> target_levels{20, 40, 60};
    Splits splits;
    std::map<std::string, std::string> files;  // variable name -> file
    std::string target_file = "target.bin";
    std::string stats_file = "stats.json";
    std::string provenance;

    std::filesystem::path root;  // directory holding the manifest; not serialized

    int t_train() const { return static_cast<int>(splits.train.size()); }
    int t_val() const { return static_cast<int>(splits.val.size()); }
    int t_test() const { return static_cast<int>(splits.test.size()); }
};

/// Writes `<var>.bin`, `target.bin`, `manifest.json` and `stats.json` into `dir`.
/// Raw tensors are little-endian float32, row-major [T,H,W] (target [T,C,H,W]).
DatasetManifest write_dataset(std::span<const FieldSample> samples, const Splits& splits,
                              const VariableUniverse& universe, const std::filesystem::path& dir,
                              const std::string& provenance = {});

/// Loads and validates `dir/manifest.json` (file sizes, split disjointness).
DatasetManifest read_manifest(const std::filesystem::path& dir);

FieldSample read_sample(const DatasetManifest& manifest, int index);

/// Mean and population standard deviation over the train split only,
/// with std floored at NormStats::kStdFloor.
NormStats compute_norm_stats(const DatasetManifest& manifest);

void write_norm_stats(const NormStats& stats, const std::filesystem::path& file);
NormStats read_norm_stats(const std::filesystem::path& file);

FieldSample normalize(const FieldSample& sample, const NormStats& stats);
FieldSample denormalize(const FieldSample& sample, const NormStats& stats);

/// A dataset held fully in memory (raw physical units) with its statistics.
struct Dataset {
    DatasetManifest manifest;
    NormStats stats;
    std::vector<FieldSample> samples;  // indexed by time index

    static Dataset load(const std::filesystem::path& dir);
    const std::vector<int>& split(const std::string& name) const;
};

}  // namespace wrecon
