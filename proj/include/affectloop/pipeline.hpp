#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affectloop/alqueue.hpp"
#include "affectloop/consensus.hpp"
#include "affectloop/error.hpp"
#include "affectloop/ingest.hpp"
#include "affectloop/manifest.hpp"
#include "affectloop/scoring.hpp"
#include "affectloop/store.hpp"

namespace affectloop {

struct PipelineConfig {
    QueueConfig queue;
    QcConfig qc;
    double temperature = kDefaultTemperature;
    /// Reinstall the last trained baseline model found in the store.
    bool restore_baseline = true;
};

struct LabelOutcome {
    bool accepted = false;
    std::optional<ErrorCode> error;
    std::string message;
    std::optional<ConsensusDecision> decision;  // set when this label completed the frame
};

/// frames ingested -> QC-passed -> labeled -> consensus-final -> exportable.
struct Funnel {
    std::size_t sessions = 0;
    std::size_t frames_ingested = 0;
    std::size_t qc_passed = 0;
    std::map<QcStatus, std::size_t> qc_by_status;
    std::size_t labeled = 0;
    std::size_t events = 0;
    std::size_t decisions = 0;
    std::size_t consensus_final = 0;
    std::size_t discarded = 0;
    std::size_t exportable = 0;
    std::size_t queued = 0;
};

nlohmann::json to_json(const Funnel& f);
std::string render_funnel(const Funnel& f);

/// Wires ingest, scoring, the annotation queue, consensus and export over one store.
/// The queue is derived state: it is rebuilt from the store on construction.
class Pipeline {
public:
    Pipeline(Store& store, PipelineConfig config, Clock clock = system_clock());

    Store& store() noexcept { return store_; }
    const Store& store() const noexcept { return store_; }
    ActiveLearningQueue& queue() noexcept { return queue_; }
    const ActiveLearningQueue& queue() const noexcept { return queue_; }
    ScorerRegistry& scorers() noexcept { return registry_; }
    const PipelineConfig& config() const noexcept { return config_; }
    Timestamp now() const { return clock_(); }

    std::string register_session(const Session& session);

    /// Ingests, runs QC and, for passed frames, scores with the current scorer and enqueues.
    Frame ingest_frame(const std::string& session_id, std::int64_t index,
                       std::span<const std::uint8_t> image_bytes);

    /// Issues a batch and records it as served before returning.
    std::vector<std::string> next_batch(const std::string& annotator_id, std::size_t size);

    /// Records one label. Completing required_labels resolves the frame synchronously and
    /// retires it from the queue.
    LabelOutcome submit_label(const std::string& annotator_id, const std::string& frame_id,
                              AnnotationLabel label);

    std::vector<ConsensusDecision> resolve_all();

    /// Registers a scorer under the next persistent version and makes it current.
    std::int64_t install_scorer(std::shared_ptr<Scorer> scorer);

    /// Trains a fresh centroid model on the manifest rows' images and installs it.
    std::int64_t retrain_baseline(const std::vector<ManifestRow>& rows);

    /// Rescores every queued frame with `scorer_version`; throws not_found for an unknown
    /// version. Frames whose scoring fails keep their previous score.
    std::size_t rerank(std::int64_t scorer_version);

    /// Scores one frame with a version and persists the score; nullopt on scoring failure.
    std::optional<EntropyScore> score_frame(const Frame& frame, std::int64_t scorer_version);

    ExportResult export_manifest(const ExportFilter& filter, double train_fraction, std::uint64_t seed) const;

    Funnel funnel() const;

private:
    void rebuild_queue();
    std::int64_t next_scorer_version();

    Store& store_;
    PipelineConfig config_;
    Clock clock_;
    Ingestor ingestor_;
    ActiveLearningQueue queue_;
    ScorerRegistry registry_;
    // Serializes label receipt and batch issuance against their persistent records.
    std::mutex mutex_;
};

}  // namespace affectloop
