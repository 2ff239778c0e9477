#pragma once

#include <sys/types.h>

#include <chrono>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affectloop/scoring.hpp"

namespace affectloop {

std::string base64_encode(std::span<const std::uint8_t> bytes);

/// One request object: {"frame_id": ..., "image_b64": ...}.
nlohmann::json make_scorer_request(const std::string& frame_id, std::span<const std::uint8_t> encoded);

/// Accepts {"probs": [7 numbers], "scorer_version": int} or a bare 7-number array.
/// Anything else, including an all-zero vector, raises scoring_failure.
ProbabilityVector parse_scorer_response(std::string_view body);

/// POSTs each request to a URL such as "http://127.0.0.1:9000/score".
class HttpScorer final : public Scorer {
public:
    HttpScorer(std::string url, std::chrono::milliseconds timeout = std::chrono::seconds(10));

    ProbabilityVector score(const ScoringInput& input) override;
    std::string describe() const override { return "http:" + url_; }

private:
    std::string url_;
    std::string origin_;
    std::string path_;
    std::chrono::milliseconds timeout_;
};

/// Talks line-delimited JSON with a child process over its stdin/stdout. The child is
/// started lazily and restarted after a timeout or broken pipe.
class ChildProcessScorer final : public Scorer {
public:
    ChildProcessScorer(std::vector<std::string> argv,
                       std::chrono::milliseconds timeout = std::chrono::seconds(10));
    ~ChildProcessScorer() override;

    ChildProcessScorer(const ChildProcessScorer&) = delete;
    ChildProcessScorer& operator=(const ChildProcessScorer&) = delete;

    ProbabilityVector score(const ScoringInput& input) override;
    std::string describe() const override;

private:
    void start();
    void stop();
    std::string read_line();

    std::vector<std::string> argv_;
    std::chrono::milliseconds timeout_;
    std::mutex mutex_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string pending_;
};

}  // namespace affectloop
