#include "affectloop/alqueue.hpp"

#include "affectloop/error.hpp"

namespace affectloop {

void QueueConfig::validate() const {
    if (required_labels == 0) throw Error(ErrorCode::invalid_argument, "required_labels must be positive");
    if (batch_size == 0) throw Error(ErrorCode::invalid_argument, "batch_size must be positive");
}

bool ActiveLearningQueue::Key::operator<(const Key& other) const {
    if (entropy != other.entropy) return entropy > other.entropy;
    if (ingested_ms != other.ingested_ms) return ingested_ms < other.ingested_ms;
    return frame_id < other.frame_id;
}

bool higher_priority(const QueueEntry& a, const QueueEntry& b) {
    if (a.entropy.value != b.entropy.value) return a.entropy.value > b.entropy.value;
    if (a.ingested_at != b.ingested_at) return a.ingested_at < b.ingested_at;
    return a.frame_id < b.frame_id;
}

ActiveLearningQueue::ActiveLearningQueue(QueueConfig config) : config_(config) { config_.validate(); }

ActiveLearningQueue::Key ActiveLearningQueue::key_of(const QueueEntry& e) {
    return {e.entropy.value, to_millis(e.ingested_at), e.frame_id};
}

QueueEntry ActiveLearningQueue::enqueue(const Frame& frame, const EntropyScore& score,
                                        std::size_t labels_received, std::set<std::string> served_to) {
    if (frame.qc_status != QcStatus::passed) {
        throw Error(ErrorCode::contract_violation,
                    "frame " + frame.frame_id + " has qc_status " + std::string(to_string(frame.qc_status)));
    }
    std::lock_guard lock(mutex_);
    if (retired_.contains(frame.frame_id)) {
        throw Error(ErrorCode::contract_violation, "frame " + frame.frame_id + " is already finalized");
    }
    if (const auto it = entries_.find(frame.frame_id); it != entries_.end()) return it->second;
    if (labels_received >= config_.required_labels) {
        throw Error(ErrorCode::contract_violation, "frame " + frame.frame_id + " already has its required labels");
    }

    QueueEntry entry;
    entry.frame_id = frame.frame_id;
    entry.entropy = score;
    entry.entropy.frame_id = frame.frame_id;
    entry.ingested_at = frame.ingested_at;
    entry.labels_received = labels_received;
    entry.served_to = std::move(served_to);
    order_.insert(key_of(entry));
    return entries_.emplace(frame.frame_id, std::move(entry)).first->second;
}

std::vector<std::string> ActiveLearningQueue::next_batch(const std::string& annotator_id, std::size_t size) {
    std::lock_guard lock(mutex_);
    std::vector<std::string> batch;
    for (auto it = order_.begin(); it != order_.end() && batch.size() < size; ++it) {
        auto& entry = entries_.at(it->frame_id);
        if (entry.labels_received >= config_.required_labels) continue;
        if (!entry.served_to.insert(annotator_id).second) continue;
        batch.push_back(entry.frame_id);
    }
    return batch;
}

std::optional<std::size_t> ActiveLearningQueue::record_label(const std::string& frame_id) {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(frame_id);
    if (it == entries_.end()) return std::nullopt;
    return ++it->second.labels_received;
}

void ActiveLearningQueue::reorder_locked(QueueEntry& entry, const EntropyScore& score) {
    order_.erase(key_of(entry));
    entry.entropy = score;
    entry.entropy.frame_id = entry.frame_id;
    order_.insert(key_of(entry));
}

std::size_t ActiveLearningQueue::rerank(std::int64_t scorer_version, const Rescorer& rescore) {
    std::vector<std::string> ids;
    {
        std::lock_guard lock(mutex_);
        ids.reserve(entries_.size());
        for (const auto& [id, entry] : entries_) ids.push_back(id);
    }
    // Scoring runs unlocked; results are applied only to entries still queued.
    std::vector<std::pair<std::string, EntropyScore>> fresh;
    fresh.reserve(ids.size());
    for (const auto& id : ids) {
        if (auto score = rescore(id)) {
            score->scorer_version = scorer_version;
            fresh.emplace_back(id, std::move(*score));
        }
    }
    std::lock_guard lock(mutex_);
    std::size_t updated = 0;
    for (auto& [id, score] : fresh) {
        const auto it = entries_.find(id);
        if (it == entries_.end()) continue;
        reorder_locked(it->second, score);
        ++updated;
    }
    return updated;
}

void ActiveLearningQueue::retire(const std::string& frame_id, bool has_decision) {
    std::lock_guard lock(mutex_);
    if (retired_.contains(frame_id)) return;
    const auto it = entries_.find(frame_id);
    if (it == entries_.end()) {
        if (!has_decision) {
            throw Error(ErrorCode::contract_violation, "frame " + frame_id + " is not queued and has no decision");
        }
        retired_.insert(frame_id);
        return;
    }
    if (it->second.labels_received < config_.required_labels && !has_decision) {
        throw Error(ErrorCode::contract_violation,
                    "frame " + frame_id + " has " + std::to_string(it->second.labels_received) + " of " +
                        std::to_string(config_.required_labels) + " required labels");
    }
    order_.erase(key_of(it->second));
    entries_.erase(it);
    retired_.insert(frame_id);
}

bool ActiveLearningQueue::contains(const std::string& frame_id) const {
    std::lock_guard lock(mutex_);
    return entries_.contains(frame_id);
}

bool ActiveLearningQueue::is_retired(const std::string& frame_id) const {
    std::lock_guard lock(mutex_);
    return retired_.contains(frame_id);
}

std::optional<QueueEntry> ActiveLearningQueue::entry(const std::string& frame_id) const {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(frame_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::vector<QueueEntry> ActiveLearningQueue::ordered() const {
    std::lock_guard lock(mutex_);
    std::vector<QueueEntry> out;
    out.reserve(order_.size());
    for (const auto& key : order_) out.push_back(entries_.at(key.frame_id));
    return out;
}

std::size_t ActiveLearningQueue::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

}  // namespace affectloop
