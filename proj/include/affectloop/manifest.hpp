#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "affectloop/store.hpp"
#include "affectloop/types.hpp"
#include "json.hpp"

namespace affectloop {

enum class Split : std::uint8_t { train, val };

std::string_view to_string(Split split);

struct ManifestRow {
    std::string frame_id;
    std::string image_path;
    EmotionClass final_label = EmotionClass::neutral;
    DecisionBranch label_source = DecisionBranch::unanimous;
    std::string session_id;
    EmotionClass automatic_label = EmotionClass::neutral;
    Split split = Split::train;

    bool operator==(const ManifestRow&) const = default;
};

nlohmann::json to_json(const ManifestRow& row);
ManifestRow manifest_row_from_json(const nlohmann::json& j);

/// Empty optionals accept everything.
struct ExportFilter {
    std::optional<std::set<EmotionClass>> classes;
    std::optional<std::set<DecisionBranch>> sources;
    std::optional<std::set<std::string>> sessions;
};

struct ExportSummary {
    std::size_t rows = 0;
    std::size_t train = 0;
    std::size_t val = 0;
    std::array<std::size_t, kEmotionCount> train_per_class{};
    std::array<std::size_t, kEmotionCount> val_per_class{};
    std::size_t decisions = 0;
    std::size_t discarded = 0;
    std::size_t non_emotion = 0;  // none / unknown / contempt
    std::size_t filtered_out = 0;
};

nlohmann::json to_json(const ExportSummary& summary);

struct ExportResult {
    std::vector<ManifestRow> rows;  // sorted by frame_id
    ExportSummary summary;
};

/// One group of frames that must land in the same split.
struct SplitGroup {
    std::string key;
    std::array<std::size_t, kEmotionCount> per_class{};
};

/// Assigns whole groups to train/val so each class's train count tracks
/// `train_fraction * class_total` as closely as group granularity allows. Greedy placement
/// (largest groups first, seeded tie order) followed by single-move and pairwise-swap
/// improvement. Returns one Split per input group.
std::vector<Split> assign_group_splits(const std::vector<SplitGroup>& groups, double train_fraction,
                                       std::uint64_t seed);

/// Rows for every decision with a 7-emotion final label that passes `filter`; splits are
/// grouped by session. Throws no_exportable_frames when nothing qualifies.
ExportResult build_manifest(const Store& store, const ExportFilter& filter, double train_fraction,
                            std::uint64_t seed);

/// JSON Lines, one row per line, '\n' terminated.
std::string manifest_jsonl(const std::vector<ManifestRow>& rows);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Writes <root>/<class_name>/<frame_id>.png for every row.
void export_class_directories(const Store& store, const std::vector<ManifestRow>& rows,
                              const std::filesystem::path& root);

}  // namespace affectloop
