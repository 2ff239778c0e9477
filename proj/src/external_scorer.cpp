#include "affectloop/external_scorer.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>

#include <openssl/evp.h>

#include "affectloop/error.hpp"
#include "httplib.h"

namespace affectloop {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

nlohmann::json make_scorer_request(const std::string& frame_id, std::span<const std::uint8_t> encoded) {
    return {{"frame_id", frame_id}, {"image_b64", base64_encode(encoded)}};
}

ProbabilityVector parse_scorer_response(std::string_view body) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::scoring_failure, "malformed scorer response: not JSON");

    const nlohmann::json* probs = nullptr;
    std::int64_t version = 0;
    if (j.is_array()) {
        probs = &j;
    } else if (j.is_object() && j.contains("probs")) {
        probs = &j["probs"];
        if (j.contains("scorer_version")) {
            if (!j["scorer_version"].is_number_integer()) {
                throw Error(ErrorCode::scoring_failure, "malformed scorer response: scorer_version must be an integer");
            }
            version = j["scorer_version"].get<std::int64_t>();
        }
    } else {
        throw Error(ErrorCode::scoring_failure, "malformed scorer response: expected probs");
    }
    if (!probs->is_array() || probs->size() != kEmotionCount) {
        throw Error(ErrorCode::scoring_failure, "malformed scorer response: expected exactly 7 probabilities");
    }
    ProbabilityVector::Values values{};
    for (std::size_t i = 0; i < kEmotionCount; ++i) {
        if (!(*probs)[i].is_number()) {
            throw Error(ErrorCode::scoring_failure, "malformed scorer response: non-numeric probability");
        }
        values[i] = (*probs)[i].get<double>();
    }
    try {
        return ProbabilityVector(values, version);
    } catch (const Error& e) {
        throw Error(ErrorCode::scoring_failure, std::string("non-normalizable scorer response: ") + e.what());
    }
}

HttpScorer::HttpScorer(std::string url, std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {
    // httplib is built without TLS here, so only plain http is accepted.
    constexpr std::string_view kScheme = "http://";
    if (url_.rfind(kScheme, 0) != 0 || url_.size() == kScheme.size()) {
        throw Error(ErrorCode::invalid_argument, "scorer URL must be http://host[:port]/path: " + url_);
    }
    const auto path_start = url_.find('/', kScheme.size());
    origin_ = url_.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url_.substr(path_start);
}

ProbabilityVector HttpScorer::score(const ScoringInput& input) {
    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const std::string body = make_scorer_request(input.frame_id, input.encoded).dump();
    const auto res = client.Post(path_, body, "application/json");
    if (!res) {
        throw Error(ErrorCode::scoring_failure, "scorer request failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw Error(ErrorCode::scoring_failure, "scorer returned HTTP " + std::to_string(res->status));
    }
    return parse_scorer_response(res->body);
}

ChildProcessScorer::ChildProcessScorer(std::vector<std::string> argv, std::chrono::milliseconds timeout)
    : argv_(std::move(argv)), timeout_(timeout) {
    if (argv_.empty()) throw Error(ErrorCode::invalid_argument, "scorer command is empty");
}

ChildProcessScorer::~ChildProcessScorer() { stop(); }

std::string ChildProcessScorer::describe() const {
    std::string out = "process:";
    for (const auto& a : argv_) out += (out.size() > 8 ? " " : "") + a;
    return out;
}

void ChildProcessScorer::start() {
    // A child that exits early must surface as a failed write, not kill this process.
    std::signal(SIGPIPE, SIG_IGN);
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0) throw Error(ErrorCode::scoring_failure, "pipe failed");
    if (::pipe(out_pipe) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw Error(ErrorCode::scoring_failure, "pipe failed");
    }
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorCode::scoring_failure, "fork failed");
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    pending_.clear();
}

void ChildProcessScorer::stop() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, nullptr, 0);
    }
    pid_ = -1;
    pending_.clear();
}

std::string ChildProcessScorer::read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
        if (const auto nl = pending_.find('\n'); nl != std::string::npos) {
            std::string line = pending_.substr(0, nl);
            pending_.erase(0, nl + 1);
            return line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) throw Error(ErrorCode::scoring_failure, "scorer process timed out");
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) throw Error(ErrorCode::scoring_failure, "scorer process timed out");
        char buf[4096];
        const ssize_t n = ::read(from_child_, buf, sizeof buf);
        if (n <= 0) throw Error(ErrorCode::scoring_failure, "scorer process closed its output");
        pending_.append(buf, static_cast<std::size_t>(n));
    }
}

ProbabilityVector ChildProcessScorer::score(const ScoringInput& input) {
    std::lock_guard lock(mutex_);
    if (pid_ < 0) start();
    const std::string line = make_scorer_request(input.frame_id, input.encoded).dump() + "\n";
    try {
        std::size_t written = 0;
        while (written < line.size()) {
            const ssize_t n = ::write(to_child_, line.data() + written, line.size() - written);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) throw Error(ErrorCode::scoring_failure, "scorer process closed its input");
            written += static_cast<std::size_t>(n);
        }
        return parse_scorer_response(read_line());
    } catch (const Error&) {
        // A protocol error leaves the stream position unknown; restart on the next call.
        stop();
        throw;
    }
}

}  // namespace affectloop
