#include "affectloop/service.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "affectloop/error.hpp"
#include "httplib.h"

namespace affectloop {

namespace {

constexpr std::size_t kMaxBatch = 1000;

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return 400;
        case ErrorCode::not_found: return 404;
        case ErrorCode::duplicate: return 409;
        case ErrorCode::contract_violation: return 409;
        case ErrorCode::consent_refused: return 403;
        case ErrorCode::integrity: return 422;
        case ErrorCode::no_exportable_frames: return 409;
        case ErrorCode::untrained_scorer:
        case ErrorCode::scoring_failure: return 503;
        case ErrorCode::io: return 500;
    }
    return 500;
}

nlohmann::json error_body(std::string_view code, const std::string& message) {
    return {{"code", std::string(code)}, {"message", message}};
}

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, error_body(code, message));
}

std::optional<std::string> bearer_token(const httplib::Request& req) {
    const auto header = req.get_header_value("Authorization");
    constexpr std::string_view kPrefix = "Bearer ";
    if (header.size() > kPrefix.size() && header.compare(0, kPrefix.size(), kPrefix) == 0) {
        return header.substr(kPrefix.size());
    }
    if (req.has_param("token")) return req.get_param_value("token");
    return std::nullopt;
}

std::optional<long long> parse_integer(const std::string& text) {
    long long v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return v;
}

std::optional<double> parse_double(const std::string& text) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

nlohmann::json decision_json(const ConsensusDecision& d) {
    return {{"frame_id", d.frame_id},
            {"final_label", d.final_label ? nlohmann::json(std::string(to_string(*d.final_label))) : nlohmann::json(nullptr)},
            {"branch", std::string(to_string(d.branch))},
            {"decided_at", to_millis(d.decided_at)}};
}

}  // namespace

std::vector<LeaderboardRow> leaderboard(const Store& store) {
    const auto events = store.list_events();
    std::map<std::string, std::map<IsoWeek, std::int64_t>> by_annotator;
    std::optional<IsoWeek> first;
    std::optional<IsoWeek> last;
    for (const auto& e : events) {
        const IsoWeek w = iso_week(e.at);
        ++by_annotator[e.annotator_id][w];
        if (!first || w < *first) first = w;
        if (!last || *last < w) last = w;
    }
    std::vector<IsoWeek> axis;
    if (first) {
        for (IsoWeek w = *first; !(*last < w); w = next_week(w)) axis.push_back(w);
    }

    std::vector<LeaderboardRow> rows;
    for (const auto& a : store.list_annotators()) {
        LeaderboardRow row;
        row.annotator_id = a.annotator_id;
        row.display_name = a.display_name;
        const auto& weeks = by_annotator[a.annotator_id];
        for (const IsoWeek w : axis) {
            const auto it = weeks.find(w);
            const std::int64_t n = it == weeks.end() ? 0 : it->second;
            row.weekly_counts.emplace_back(w, n);
            row.total_labels += n;
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
        if (a.total_labels != b.total_labels) return a.total_labels > b.total_labels;
        return a.annotator_id < b.annotator_id;
    });
    return rows;
}

nlohmann::json to_json(const std::vector<LeaderboardRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json weeks = nlohmann::json::array();
        for (const auto& [w, n] : r.weekly_counts) weeks.push_back({{"week", to_string(w)}, {"count", n}});
        out.push_back({{"annotator_id", r.annotator_id},
                       {"display_name", r.display_name},
                       {"total_labels", r.total_labels},
                       {"weekly_counts", weeks}});
    }
    return out;
}

Service::Service(Pipeline& pipeline, ServiceConfig config)
    : pipeline_(pipeline), config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

Service::~Service() { stop(); }

void Service::install_routes() {
    auto& srv = *server_;
    auto& pipeline = pipeline_;
    const std::string admin_token = config_.admin_token;

    auto authenticate = [&pipeline](const httplib::Request& req) -> std::optional<Annotator> {
        const auto token = bearer_token(req);
        if (!token || token->empty()) return std::nullopt;
        return pipeline.store().find_annotator_by_token(*token);
    };
    auto is_admin = [admin_token](const httplib::Request& req) {
        const auto token = bearer_token(req);
        return !admin_token.empty() && token && *token == admin_token;
    };

    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const Error& e) {
            send_error(res, http_status(e.code()), to_string(e.code()), e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, 400, "invalid_argument", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    });

    srv.Get("/api/v1/batch", [&pipeline, authenticate](const httplib::Request& req, httplib::Response& res) {
        const auto annotator = authenticate(req);
        if (!annotator) return send_error(res, 401, "unauthorized", "missing or unknown bearer token");
        std::size_t size = pipeline.config().queue.batch_size;
        if (req.has_param("size")) {
            const auto n = parse_integer(req.get_param_value("size"));
            if (!n || *n < 1 || *n > static_cast<long long>(kMaxBatch)) {
                return send_error(res, 400, "invalid_argument", "size must be an integer in [1, 1000]");
            }
            size = static_cast<std::size_t>(*n);
        }
        nlohmann::json out = nlohmann::json::array();
        for (const auto& id : pipeline.next_batch(annotator->annotator_id, size)) {
            out.push_back({{"frame_id", id}, {"image_url", "/api/v1/frames/" + id + "/image"}});
        }
        send_json(res, 200, out);
    });

    srv.Post("/api/v1/labels", [&pipeline, authenticate](const httplib::Request& req, httplib::Response& res) {
        const auto annotator = authenticate(req);
        if (!annotator) return send_error(res, 401, "unauthorized", "missing or unknown bearer token");
        const auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("labels") || !body["labels"].is_array()) {
            return send_error(res, 400, "invalid_argument", "body must be {\"labels\": [{frame_id, label}]}");
        }
        nlohmann::json results = nlohmann::json::array();
        std::size_t accepted = 0;
        const auto& items = body["labels"];
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& item = items[i];
            nlohmann::json result = {{"item_index", i}};
            auto rejected = [&](std::string_view code, const std::string& message) {
                result["status"] = "rejected";
                result["code"] = std::string(code);
                result["message"] = message;
            };
            if (!item.is_object() || !item.contains("frame_id") || !item["frame_id"].is_string() ||
                !item.contains("label") || !item["label"].is_string()) {
                rejected("invalid_argument", "item must be {frame_id: string, label: string}");
                results.push_back(result);
                continue;
            }
            const std::string frame_id = item["frame_id"].get<std::string>();
            result["frame_id"] = frame_id;
            const auto label = parse_annotation_label(item["label"].get<std::string>());
            if (!label) {
                rejected("invalid_argument", "unknown label '" + item["label"].get<std::string>() + "'");
                results.push_back(result);
                continue;
            }
            const auto outcome = pipeline.submit_label(annotator->annotator_id, frame_id, *label);
            if (outcome.accepted) {
                ++accepted;
                result["status"] = "accepted";
                if (outcome.decision) result["decision"] = decision_json(*outcome.decision);
            } else {
                rejected(to_string(*outcome.error), outcome.message);
            }
            results.push_back(result);
        }
        send_json(res, 200, {{"accepted", accepted}, {"rejected", items.size() - accepted}, {"results", results}});
    });

    srv.Get("/api/v1/leaderboard", [&pipeline](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, to_json(leaderboard(pipeline.store())));
    });

    srv.Post("/api/v1/sessions", [&pipeline](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded()) return send_error(res, 400, "invalid_argument", "body is not JSON");
        const Session session = session_from_json(body);
        const auto id = pipeline.register_session(session);
        send_json(res, 201, {{"session_id", id}});
    });

    srv.Post(R"(/api/v1/sessions/([A-Za-z0-9_.\-]+)/frames)",
             [&pipeline](const httplib::Request& req, httplib::Response& res) {
                 const std::string session_id = req.matches[1];
                 if (!req.has_param("index")) return send_error(res, 400, "invalid_argument", "index query parameter required");
                 const auto index = parse_integer(req.get_param_value("index"));
                 if (!index || *index < 0) {
                     return send_error(res, 400, "invalid_argument", "index must be a nonnegative integer");
                 }
                 const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(req.body.data()),
                                                           req.body.size());
                 const Frame frame = pipeline.ingest_frame(session_id, *index, bytes);
                 send_json(res, 201, to_json(frame));
             });

    srv.Get(R"(/api/v1/frames/([A-Za-z0-9_.\-]+)/image)",
            [&pipeline, authenticate, is_admin](const httplib::Request& req, httplib::Response& res) {
                if (!authenticate(req) && !is_admin(req)) {
                    return send_error(res, 401, "unauthorized", "missing or unknown bearer token");
                }
                const auto frame = pipeline.store().get_frame(req.matches[1]);
                if (!frame) return send_error(res, 404, "not_found", "unknown frame");
                const auto bytes = pipeline.store().read_image(frame->image_ref);
                const auto format = sniff_format(bytes);
                res.status = 200;
                res.set_header("Cache-Control", "public, max-age=31536000, immutable");
                // The image ref is content-addressed, so its digest doubles as the ETag.
                const auto slash = frame->image_ref.find_last_of('/');
                res.set_header("ETag", "\"" + frame->image_ref.substr(slash + 1) + "\"");
                res.set_content(std::string(bytes.begin(), bytes.end()), std::string(content_type(format)));
            });

    srv.Get("/api/v1/export", [&pipeline, is_admin, admin_token](const httplib::Request& req, httplib::Response& res) {
        if (!admin_token.empty() && !is_admin(req)) {
            return send_error(res, 401, "unauthorized", "admin token required");
        }
        double fraction = 0.8;
        std::uint64_t seed = 0;
        if (req.has_param("split")) {
            const auto v = parse_double(req.get_param_value("split"));
            if (!v || *v < 0.0 || *v > 1.0) return send_error(res, 400, "invalid_argument", "split must lie in [0,1]");
            fraction = *v;
        }
        if (req.has_param("seed")) {
            const auto v = parse_integer(req.get_param_value("seed"));
            if (!v || *v < 0) return send_error(res, 400, "invalid_argument", "seed must be a nonnegative integer");
            seed = static_cast<std::uint64_t>(*v);
        }
        try {
            const auto result = pipeline.export_manifest({}, fraction, seed);
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& r : result.rows) rows.push_back(to_json(r));
            send_json(res, 200, {{"status", "ok"}, {"summary", to_json(result.summary)}, {"rows", rows}});
        } catch (const Error& e) {
            if (e.code() != ErrorCode::no_exportable_frames) throw;
            send_json(res, 200, {{"status", "no_exportable_frames"}, {"message", "no exportable frames"}});
        }
    });

    srv.Get("/api/v1/stats", [&pipeline](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, to_json(pipeline.funnel()));
    });

    srv.Post("/api/v1/admin/rerank", [&pipeline, is_admin, admin_token](const httplib::Request& req, httplib::Response& res) {
        if (admin_token.empty()) return send_error(res, 403, "forbidden", "admin endpoints are disabled");
        if (!is_admin(req)) return send_error(res, 401, "unauthorized", "admin token required");
        const auto body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) return send_error(res, 400, "invalid_argument", "body must be a JSON object");
        std::int64_t version = pipeline.scorers().current_version();
        if (body.value("retrain", false)) {
            version = pipeline.retrain_baseline(pipeline.export_manifest({}, 1.0, 0).rows);
        } else if (body.contains("scorer_version")) {
            version = body["scorer_version"].get<std::int64_t>();
        }
        const std::size_t rescored = pipeline.rerank(version);
        send_json(res, 200, {{"scorer_version", version}, {"rescored", rescored}});
    });

    if (!config_.static_dir.empty()) srv.set_mount_point("/", config_.static_dir);
}

int Service::bind() {
    if (config_.port == 0) {
        port_ = server_->bind_to_any_port(config_.host);
    } else {
        port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
    }
    if (port_ < 0) {
        throw Error(ErrorCode::io, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
    }
    return port_;
}

void Service::run() { server_->listen_after_bind(); }

int Service::start() {
    const int port = bind();
    thread_ = std::thread([this] { run(); });
    server_->wait_until_ready();
    return port;
}

void Service::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace affectloop
