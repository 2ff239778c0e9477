#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affectloop/types.hpp"

struct sqlite3;

namespace affectloop {

/// Durable record store.
///
/// Metadata lives in an embedded SQLite database (WAL journal, synchronous commits);
/// image payloads are content-addressed files under `images/`. Events and decisions are
/// write-once. All writes go through a single connection guarded by one mutex, so commits
/// are serialized and every read observes all committed writes.
class Store {
public:
    static constexpr const char* kDatabaseFile = "affectloop.db";
    static constexpr const char* kImageDir = "images";

    /// Opens (creating when `create` is set) a data directory.
    static std::unique_ptr<Store> open(const std::filesystem::path& data_dir, bool create = true);

    ~Store();
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    const std::filesystem::path& root() const noexcept { return root_; }

    /// Runs `body` inside one transaction; rolls back if it throws.
    void transaction(const std::function<void()>& body);

    // Sessions
    void put_session(const Session& session);
    std::optional<Session> get_session(const std::string& session_id) const;
    std::vector<Session> list_sessions() const;

    // Images (content-addressed; returns a path relative to root())
    std::string put_image(std::span<const std::uint8_t> bytes);
    std::vector<std::uint8_t> read_image(const std::string& image_ref) const;
    std::filesystem::path image_path(const std::string& image_ref) const;

    // Frames
    void put_frame(const Frame& frame);
    std::optional<Frame> get_frame(const std::string& frame_id) const;
    std::vector<Frame> list_frames() const;
    std::vector<Frame> list_frames_with_status(QcStatus status) const;
    /// Moves a pending frame to `status`; a frame that already left pending keeps its
    /// status. Returns the status in effect afterward.
    QcStatus settle_qc_status(const std::string& frame_id, QcStatus status);

    // Annotators
    void put_annotator(const Annotator& annotator);
    std::optional<Annotator> get_annotator(const std::string& annotator_id) const;
    std::optional<Annotator> find_annotator_by_token(const std::string& token) const;
    std::vector<Annotator> list_annotators() const;

    // Annotation events (append-only, one per annotator/frame pair)
    std::int64_t append_event(const AnnotationEvent& event);
    std::vector<AnnotationEvent> events_for_frame(const std::string& frame_id) const;
    std::vector<AnnotationEvent> list_events() const;
    std::optional<AnnotationEvent> find_event(const std::string& annotator_id,
                                              const std::string& frame_id) const;
    std::map<std::string, std::int64_t> event_counts_by_annotator() const;
    std::int64_t event_count(const std::string& frame_id) const;

    // Scores
    void put_score(const StoredScore& score);
    std::optional<StoredScore> latest_score(const std::string& frame_id) const;
    std::optional<StoredScore> get_score(const std::string& frame_id, std::int64_t version) const;

    // Decisions (write-once)
    void put_decision(const ConsensusDecision& decision);
    std::optional<ConsensusDecision> get_decision(const std::string& frame_id) const;
    std::vector<ConsensusDecision> list_decisions() const;

    // Batch issuance audit
    void mark_served(const std::string& frame_id, const std::string& annotator_id);
    bool was_served(const std::string& frame_id, const std::string& annotator_id) const;
    std::vector<std::string> served_annotators(const std::string& frame_id) const;

    // Small named values (model state, counters)
    void put_meta(const std::string& key, const std::string& value);
    std::optional<std::string> get_meta(const std::string& key) const;

private:
    explicit Store(std::filesystem::path root);

    void exec(const char* sql) const;

    std::filesystem::path root_;
    sqlite3* db_ = nullptr;
    mutable std::recursive_mutex mutex_;
};

}  // namespace affectloop
