#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "affectloop/scoring.hpp"
#include "affectloop/types.hpp"

namespace affectloop {

struct QueueConfig {
    std::size_t required_labels = 3;
    std::size_t batch_size = 24;

    /// required_labels >= 1 and batch_size >= 1. The UI grid wants >= 20 but a smaller
    /// batch is still a valid configuration.
    void validate() const;
};

struct QueueEntry {
    std::string frame_id;
    EntropyScore entropy;
    Timestamp ingested_at{};
    std::size_t labels_received = 0;
    std::set<std::string> served_to;
};

/// Strict priority order: entropy descending, then earlier ingest, then frame id.
bool higher_priority(const QueueEntry& a, const QueueEntry& b);

/// Max-entropy annotation queue. Thread-safe; batch issuance, label receipt and retirement
/// are each atomic per call.
class ActiveLearningQueue {
public:
    /// Returns a fresh score for a frame, or nullopt when scoring failed (the entry then
    /// keeps its previous score).
    using Rescorer = std::function<std::optional<EntropyScore>(const std::string& frame_id)>;

    explicit ActiveLearningQueue(QueueConfig config = {});

    const QueueConfig& config() const noexcept { return config_; }

    /// Inserts a QC-passed frame. Enqueueing a frame already queued returns the existing
    /// entry unchanged. Non-passed or retired frames raise contract_violation.
    QueueEntry enqueue(const Frame& frame, const EntropyScore& score,
                       std::size_t labels_received = 0, std::set<std::string> served_to = {});

    /// Up to `size` eligible frames in priority order; marks them served to the annotator.
    std::vector<std::string> next_batch(const std::string& annotator_id, std::size_t size);

    /// Counts one received label. nullopt when the frame is not queued.
    std::optional<std::size_t> record_label(const std::string& frame_id);

    /// Rescores every queued entry and reorders. Returns how many entries got a new score.
    std::size_t rerank(std::int64_t scorer_version, const Rescorer& rescore);

    /// Removes a frame that reached required_labels or has a decision. Retiring an already
    /// retired frame is a no-op; retiring a still-eligible frame raises contract_violation.
    void retire(const std::string& frame_id, bool has_decision = false);

    bool contains(const std::string& frame_id) const;
    bool is_retired(const std::string& frame_id) const;
    std::optional<QueueEntry> entry(const std::string& frame_id) const;
    /// All entries in priority order.
    std::vector<QueueEntry> ordered() const;
    std::size_t size() const;

private:
    struct Key {
        double entropy;
        std::int64_t ingested_ms;
        std::string frame_id;

        bool operator<(const Key& other) const;
    };

    static Key key_of(const QueueEntry& e);
    void reorder_locked(QueueEntry& entry, const EntropyScore& score);

    QueueConfig config_;
    mutable std::mutex mutex_;
    std::map<std::string, QueueEntry> entries_;
    std::set<Key> order_;
    std::set<std::string> retired_;
};

}  // namespace affectloop
