#include "affectloop/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>

#include "affectloop/error.hpp"

namespace affectloop {

namespace {

constexpr const char* kVersionCounterKey = "scorer_version_counter";
constexpr const char* kBaselineModelKey = "baseline_model";
constexpr const char* kBaselineVersionKey = "baseline_version";

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::not_found, "cannot read image " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

nlohmann::json to_json(const Funnel& f) {
    nlohmann::json qc = nlohmann::json::object();
    for (const auto& [status, n] : f.qc_by_status) qc[std::string(to_string(status))] = n;
    return {
        {"sessions", f.sessions},
        {"frames_ingested", f.frames_ingested},
        {"qc_passed", f.qc_passed},
        {"qc_by_status", qc},
        {"labeled", f.labeled},
        {"events", f.events},
        {"decisions", f.decisions},
        {"consensus_final", f.consensus_final},
        {"discarded", f.discarded},
        {"exportable", f.exportable},
        {"queued", f.queued},
    };
}

std::string render_funnel(const Funnel& f) {
    std::string out;
    char line[96];
    auto row = [&](const char* name, std::size_t n) {
        std::snprintf(line, sizeof line, "%-18s %10zu\n", name, n);
        out += line;
    };
    row("sessions", f.sessions);
    row("frames ingested", f.frames_ingested);
    row("qc passed", f.qc_passed);
    for (const auto& [status, n] : f.qc_by_status) {
        if (status == QcStatus::passed) continue;
        std::snprintf(line, sizeof line, "  %-16s %10zu\n", std::string(to_string(status)).c_str(), n);
        out += line;
    }
    row("labeled", f.labeled);
    row("consensus final", f.consensus_final);
    row("discarded", f.discarded);
    row("exportable", f.exportable);
    row("queued", f.queued);
    return out;
}

Pipeline::Pipeline(Store& store, PipelineConfig config, Clock clock)
    : store_(store),
      config_(std::move(config)),
      clock_(std::move(clock)),
      ingestor_(store_, clock_),
      queue_(config_.queue) {
    config_.qc.validate();
    if (config_.restore_baseline) {
        const auto model = store_.get_meta(kBaselineModelKey);
        const auto version = store_.get_meta(kBaselineVersionKey);
        if (model && version) {
            auto restored = std::make_shared<const CentroidModel>(
                CentroidModel::from_json(nlohmann::json::parse(*model)));
            registry_.install_at(std::stoll(*version),
                                 std::make_shared<BaselineScorer>(restored, config_.temperature));
        }
    }
    rebuild_queue();
}

void Pipeline::rebuild_queue() {
    resolve_all();
    for (const auto& frame : store_.list_frames_with_status(QcStatus::passed)) {
        if (store_.get_decision(frame.frame_id)) {
            queue_.retire(frame.frame_id, true);
            continue;
        }
        const auto labels = static_cast<std::size_t>(store_.event_count(frame.frame_id));
        if (labels >= config_.queue.required_labels) continue;

        std::optional<EntropyScore> score;
        if (const auto stored = store_.latest_score(frame.frame_id)) {
            score = EntropyScore{stored->entropy, frame.frame_id, stored->scorer_version};
        } else {
            score = score_frame(frame, registry_.current_version());
            if (!score) score = score_frame(frame, ScorerRegistry::kPriorVersion);
        }
        if (!score) continue;
        const auto served = store_.served_annotators(frame.frame_id);
        queue_.enqueue(frame, *score, labels, {served.begin(), served.end()});
    }
}

std::string Pipeline::register_session(const Session& session) { return ingestor_.register_session(session); }

Frame Pipeline::ingest_frame(const std::string& session_id, std::int64_t index,
                             std::span<const std::uint8_t> image_bytes) {
    Frame frame = ingestor_.ingest_frame(session_id, index, image_bytes);
    if (frame.qc_status == QcStatus::pending) frame.qc_status = ingestor_.run_qc(frame.frame_id, config_.qc);
    if (frame.qc_status != QcStatus::passed) return frame;

    auto score = score_frame(frame, registry_.current_version());
    if (!score) score = score_frame(frame, ScorerRegistry::kPriorVersion);
    if (score) queue_.enqueue(frame, *score);
    return frame;
}

std::vector<std::string> Pipeline::next_batch(const std::string& annotator_id, std::size_t size) {
    std::lock_guard lock(mutex_);
    if (!store_.get_annotator(annotator_id)) throw Error(ErrorCode::not_found, "unknown annotator " + annotator_id);
    auto batch = queue_.next_batch(annotator_id, size);
    store_.transaction([&] {
        for (const auto& id : batch) store_.mark_served(id, annotator_id);
    });
    return batch;
}

LabelOutcome Pipeline::submit_label(const std::string& annotator_id, const std::string& frame_id,
                                    AnnotationLabel label) {
    std::lock_guard lock(mutex_);
    LabelOutcome outcome;
    auto reject = [&](ErrorCode code, std::string message) {
        outcome.error = code;
        outcome.message = std::move(message);
        return outcome;
    };
    if (!store_.get_frame(frame_id)) return reject(ErrorCode::not_found, "unknown frame " + frame_id);
    if (!store_.get_annotator(annotator_id)) return reject(ErrorCode::not_found, "unknown annotator " + annotator_id);
    if (store_.find_event(annotator_id, frame_id)) {
        return reject(ErrorCode::duplicate, "label already submitted for " + frame_id + "; first label retained");
    }
    if (!store_.was_served(frame_id, annotator_id)) {
        return reject(ErrorCode::contract_violation, "frame " + frame_id + " was not served to this annotator");
    }

    AnnotationEvent event;
    event.annotator_id = annotator_id;
    event.frame_id = frame_id;
    event.label = label;
    event.at = clock_();
    store_.transaction([&] {
        store_.append_event(event);
        if (store_.event_count(frame_id) >= static_cast<std::int64_t>(config_.queue.required_labels)) {
            outcome.decision = resolve_frame(store_, frame_id, config_.queue.required_labels, event.at);
        }
    });
    outcome.accepted = true;

    queue_.record_label(frame_id);
    if (outcome.decision || store_.get_decision(frame_id)) queue_.retire(frame_id, true);
    return outcome;
}

std::vector<ConsensusDecision> Pipeline::resolve_all() {
    std::lock_guard lock(mutex_);
    auto decisions = affectloop::resolve_all(store_, config_.queue.required_labels, clock_());
    for (const auto& d : decisions) queue_.retire(d.frame_id, true);
    return decisions;
}

std::int64_t Pipeline::next_scorer_version() {
    std::int64_t counter = 0;
    if (const auto v = store_.get_meta(kVersionCounterKey)) counter = std::stoll(*v);
    return std::max(counter, registry_.current_version()) + 1;
}

std::int64_t Pipeline::install_scorer(std::shared_ptr<Scorer> scorer) {
    const std::int64_t version = next_scorer_version();
    registry_.install_at(version, std::move(scorer));
    store_.put_meta(kVersionCounterKey, std::to_string(version));
    return version;
}

std::int64_t Pipeline::retrain_baseline(const std::vector<ManifestRow>& rows) {
    auto model = std::make_shared<CentroidModel>();
    for (const auto& row : rows) {
        const auto frame = store_.get_frame(row.frame_id);
        const auto bytes = frame ? store_.read_image(frame->image_ref) : read_file(row.image_path);
        const auto raster = decode_image(bytes);
        if (!raster) throw Error(ErrorCode::integrity, "training image for " + row.frame_id + " does not decode");
        model->add(*raster, row.final_label);
    }
    if (model->empty()) throw Error(ErrorCode::untrained_scorer, "untrained scorer: no training rows");

    const std::int64_t version = next_scorer_version();
    store_.transaction([&] {
        store_.put_meta(kBaselineModelKey, model->to_json().dump());
        store_.put_meta(kBaselineVersionKey, std::to_string(version));
        store_.put_meta(kVersionCounterKey, std::to_string(version));
    });
    registry_.install_at(version, std::make_shared<BaselineScorer>(std::move(model), config_.temperature));
    return version;
}

std::optional<EntropyScore> Pipeline::score_frame(const Frame& frame, std::int64_t scorer_version) {
    if (const auto stored = store_.get_score(frame.frame_id, scorer_version)) {
        return EntropyScore{stored->entropy, frame.frame_id, scorer_version};
    }
    const auto bytes = store_.read_image(frame.image_ref);
    const auto raster = decode_image(bytes);
    if (!raster) return std::nullopt;
    try {
        const auto p = registry_.score(scorer_version, {frame.frame_id, bytes, *raster});
        const double h = entropy(p);
        store_.put_score({frame.frame_id, scorer_version, p.values(), h});
        return EntropyScore{h, frame.frame_id, scorer_version};
    } catch (const Error& e) {
        if (e.code() == ErrorCode::scoring_failure || e.code() == ErrorCode::untrained_scorer) return std::nullopt;
        throw;
    }
}

std::size_t Pipeline::rerank(std::int64_t scorer_version) {
    if (!registry_.has_version(scorer_version)) {
        throw Error(ErrorCode::not_found, "unknown scorer version " + std::to_string(scorer_version));
    }
    return queue_.rerank(scorer_version, [&](const std::string& frame_id) -> std::optional<EntropyScore> {
        const auto frame = store_.get_frame(frame_id);
        if (!frame) return std::nullopt;
        return score_frame(*frame, scorer_version);
    });
}

ExportResult Pipeline::export_manifest(const ExportFilter& filter, double train_fraction, std::uint64_t seed) const {
    return build_manifest(store_, filter, train_fraction, seed);
}

Funnel Pipeline::funnel() const {
    Funnel f;
    f.sessions = store_.list_sessions().size();
    for (const auto& frame : store_.list_frames()) {
        ++f.frames_ingested;
        ++f.qc_by_status[frame.qc_status];
        if (frame.qc_status == QcStatus::passed) ++f.qc_passed;
    }
    std::set<std::string> labeled;
    for (const auto& e : store_.list_events()) {
        labeled.insert(e.frame_id);
        ++f.events;
    }
    f.labeled = labeled.size();
    for (const auto& d : store_.list_decisions()) {
        ++f.decisions;
        if (d.discarded()) {
            ++f.discarded;
            continue;
        }
        ++f.consensus_final;
        if (as_emotion(*d.final_label)) ++f.exportable;
    }
    f.queued = queue_.size();
    return f;
}

}  // namespace affectloop
