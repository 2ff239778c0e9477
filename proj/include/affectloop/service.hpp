#pragma once

#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "affectloop/pipeline.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace affectloop {

struct LeaderboardRow {
    std::string annotator_id;
    std::string display_name;
    std::int64_t total_labels = 0;
    std::vector<std::pair<IsoWeek, std::int64_t>> weekly_counts;
};

/// One row per registered annotator, sorted by total descending then id. Every row has the
/// same week axis: each ISO week from the earliest to the latest labeled week.
std::vector<LeaderboardRow> leaderboard(const Store& store);
nlohmann::json to_json(const std::vector<LeaderboardRow>& rows);

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    /// Enables /api/v1/admin/* and guards /api/v1/export when nonempty.
    std::string admin_token;
    /// Optional directory served at "/" (the annotation UI build).
    std::string static_dir;
};

/// HTTP binding of a Pipeline under /api/v1. Responses are JSON (UTF-8) except image bytes;
/// errors carry {code, message} and per-item results carry item_index.
class Service {
public:
    Service(Pipeline& pipeline, ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds the listening socket; returns the port. Throws io on failure.
    int bind();
    /// Serves on the bound socket until stop(). Blocks.
    void run();
    /// bind() + run() on a background thread.
    int start();
    void stop();

    int port() const noexcept { return port_; }

private:
    void install_routes();

    Pipeline& pipeline_;
    ServiceConfig config_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = -1;
};

}  // namespace affectloop
