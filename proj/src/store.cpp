#include "affectloop/store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>
#include <sqlite3.h>

#include "affectloop/error.hpp"
#include "affectloop/image.hpp"
#include "json.hpp"

namespace affectloop {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS sessions(
  session_id TEXT PRIMARY KEY,
  child_id TEXT NOT NULL,
  prompt INTEGER NOT NULL CHECK(prompt BETWEEN 0 AND 6),
  started_at INTEGER NOT NULL,
  duration_s REAL NOT NULL CHECK(duration_s > 0),
  consent INTEGER NOT NULL CHECK(consent IN (1, 2))
);
CREATE TABLE IF NOT EXISTS frames(
  frame_id TEXT PRIMARY KEY,
  session_id TEXT NOT NULL REFERENCES sessions(session_id),
  idx INTEGER NOT NULL CHECK(idx >= 0),
  ingested_at INTEGER NOT NULL,
  image_ref TEXT NOT NULL,
  width INTEGER NOT NULL,
  height INTEGER NOT NULL,
  automatic_label INTEGER NOT NULL,
  qc_status INTEGER NOT NULL,
  UNIQUE(session_id, idx)
);
CREATE TABLE IF NOT EXISTS annotators(
  annotator_id TEXT PRIMARY KEY,
  display_name TEXT NOT NULL,
  token TEXT NOT NULL UNIQUE,
  created_at INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS events(
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  annotator_id TEXT NOT NULL REFERENCES annotators(annotator_id),
  frame_id TEXT NOT NULL REFERENCES frames(frame_id),
  label INTEGER NOT NULL CHECK(label BETWEEN 0 AND 9),
  at INTEGER NOT NULL,
  UNIQUE(annotator_id, frame_id)
);
CREATE INDEX IF NOT EXISTS events_by_frame ON events(frame_id);
CREATE TABLE IF NOT EXISTS scores(
  frame_id TEXT NOT NULL REFERENCES frames(frame_id),
  scorer_version INTEGER NOT NULL,
  probs TEXT NOT NULL,
  entropy REAL NOT NULL,
  PRIMARY KEY(frame_id, scorer_version)
);
CREATE TABLE IF NOT EXISTS decisions(
  frame_id TEXT PRIMARY KEY REFERENCES frames(frame_id),
  final_label INTEGER,
  branch INTEGER NOT NULL,
  decided_at INTEGER NOT NULL,
  input_events TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS served(
  frame_id TEXT NOT NULL REFERENCES frames(frame_id),
  annotator_id TEXT NOT NULL REFERENCES annotators(annotator_id),
  PRIMARY KEY(frame_id, annotator_id)
);
CREATE TABLE IF NOT EXISTS meta(key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TRIGGER IF NOT EXISTS events_append_only_u BEFORE UPDATE ON events
  BEGIN SELECT RAISE(ABORT, 'annotation events are append-only'); END;
CREATE TRIGGER IF NOT EXISTS events_append_only_d BEFORE DELETE ON events
  BEGIN SELECT RAISE(ABORT, 'annotation events are append-only'); END;
CREATE TRIGGER IF NOT EXISTS decisions_write_once_u BEFORE UPDATE ON decisions
  BEGIN SELECT RAISE(ABORT, 'decisions are write-once'); END;
CREATE TRIGGER IF NOT EXISTS decisions_write_once_d BEFORE DELETE ON decisions
  BEGIN SELECT RAISE(ABORT, 'decisions are write-once'); END;
CREATE TRIGGER IF NOT EXISTS qc_leaves_pending_once BEFORE UPDATE OF qc_status ON frames
  WHEN OLD.qc_status != 0
  BEGIN SELECT RAISE(ABORT, 'qc status already settled'); END;
)sql";

[[noreturn]] void throw_sqlite(sqlite3* db, int rc, const std::string& what) {
    const std::string message = what + ": " + sqlite3_errmsg(db);
    switch (rc) {
        case SQLITE_CONSTRAINT_PRIMARYKEY:
        case SQLITE_CONSTRAINT_UNIQUE:
            throw Error(ErrorCode::duplicate, message);
        case SQLITE_CONSTRAINT_FOREIGNKEY:
        case SQLITE_CONSTRAINT_CHECK:
        case SQLITE_CONSTRAINT_NOTNULL:
        case SQLITE_CONSTRAINT_TRIGGER:
            throw Error(ErrorCode::integrity, message);
        default:
            throw Error(ErrorCode::io, message);
    }
}

class Statement {
public:
    Statement(sqlite3* db, const char* sql) : db_(db) {
        const int rc = sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr);
        if (rc != SQLITE_OK) throw_sqlite(db, rc, "prepare");
    }
    ~Statement() { sqlite3_finalize(stmt_); }
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    Statement& bind(int i, std::int64_t v) {
        sqlite3_bind_int64(stmt_, i, v);
        return *this;
    }
    Statement& bind(int i, double v) {
        sqlite3_bind_double(stmt_, i, v);
        return *this;
    }
    Statement& bind(int i, const std::string& v) {
        sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
        return *this;
    }
    Statement& bind_null(int i) {
        sqlite3_bind_null(stmt_, i);
        return *this;
    }

    /// True while a row is available.
    bool step() {
        const int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        throw_sqlite(db_, sqlite3_extended_errcode(db_), "step");
    }
    void run() {
        while (step()) {
        }
    }

    std::int64_t int64(int col) const { return sqlite3_column_int64(stmt_, col); }
    double real(int col) const { return sqlite3_column_double(stmt_, col); }
    bool is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }
    std::string text(int col) const {
        const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
        return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col))) : std::string{};
    }

private:
    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

constexpr const char* kFrameColumns =
    "frame_id, session_id, idx, ingested_at, image_ref, width, height, automatic_label, qc_status";

Frame read_frame(const Statement& s) {
    Frame f;
    f.frame_id = s.text(0);
    f.session_id = s.text(1);
    f.index_in_session = s.int64(2);
    f.ingested_at = from_millis(s.int64(3));
    f.image_ref = s.text(4);
    f.width_px = static_cast<int>(s.int64(5));
    f.height_px = static_cast<int>(s.int64(6));
    f.automatic_label = static_cast<EmotionClass>(s.int64(7));
    f.qc_status = static_cast<QcStatus>(s.int64(8));
    return f;
}

constexpr const char* kSessionColumns =
    "session_id, child_id, prompt, started_at, duration_s, consent";

Session read_session(const Statement& s) {
    Session out;
    out.session_id = s.text(0);
    out.child_id = s.text(1);
    out.prompt = static_cast<EmotionClass>(s.int64(2));
    out.started_at = from_millis(s.int64(3));
    out.duration_s = s.real(4);
    out.consent = static_cast<ConsentTier>(s.int64(5));
    return out;
}

Annotator read_annotator(const Statement& s) {
    return {s.text(0), s.text(1), s.text(2), from_millis(s.int64(3))};
}

AnnotationEvent read_event(const Statement& s) {
    AnnotationEvent e;
    e.seq = s.int64(0);
    e.annotator_id = s.text(1);
    e.frame_id = s.text(2);
    e.label = static_cast<AnnotationLabel>(s.int64(3));
    e.at = from_millis(s.int64(4));
    return e;
}

ConsensusDecision read_decision(const Statement& s) {
    ConsensusDecision d;
    d.frame_id = s.text(0);
    if (!s.is_null(1)) d.final_label = static_cast<AnnotationLabel>(s.int64(1));
    d.branch = static_cast<DecisionBranch>(s.int64(2));
    d.decided_at = from_millis(s.int64(3));
    d.input_events = nlohmann::json::parse(s.text(4)).get<std::vector<std::int64_t>>();
    return d;
}

StoredScore read_score(const Statement& s) {
    StoredScore out;
    out.frame_id = s.text(0);
    out.scorer_version = s.int64(1);
    out.probs = nlohmann::json::parse(s.text(2)).get<std::array<double, kEmotionCount>>();
    out.entropy = s.real(3);
    return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::io, "sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0F]);
    }
    return out;
}

void write_file_durably(const fs::path& path, std::span<const std::uint8_t> bytes) {
    // A unique temp name per call: threads of one process may write the same image at once.
    std::string tmp_name = path.string() + ".tmpXXXXXX";
    const int fd = ::mkstemp(tmp_name.data());
    if (fd < 0) throw Error(ErrorCode::io, "cannot create a temp file for " + path.string());
    const fs::path tmp(tmp_name);
    ::fchmod(fd, 0644);
    std::size_t written = 0;
    while (written < bytes.size()) {
        const ssize_t n = ::write(fd, bytes.data() + written, bytes.size() - written);
        if (n < 0) {
            ::close(fd);
            throw Error(ErrorCode::io, "write failed for " + tmp.string());
        }
        written += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::io, "cannot place " + path.string());
    }
}

bool safe_image_ref(const std::string& ref) {
    if (ref.rfind(std::string(Store::kImageDir) + "/", 0) != 0) return false;
    for (char c : ref) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '/' || c == '.';
        if (!ok) return false;
    }
    return ref.find("..") == std::string::npos;
}

}  // namespace

Store::Store(fs::path root) : root_(std::move(root)) {}

Store::~Store() {
    if (db_) sqlite3_close(db_);
}

std::unique_ptr<Store> Store::open(const fs::path& data_dir, bool create) {
    std::error_code ec;
    if (fs::exists(data_dir, ec)) {
        if (!fs::is_directory(data_dir, ec)) {
            throw Error(ErrorCode::io, "data directory is not a directory: " + data_dir.string());
        }
    } else if (!create) {
        throw Error(ErrorCode::io, "data directory does not exist: " + data_dir.string());
    } else if (!fs::create_directories(data_dir, ec) || ec) {
        throw Error(ErrorCode::io, "cannot create data directory: " + data_dir.string());
    }
    fs::create_directories(data_dir / kImageDir, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create image directory under " + data_dir.string());

    std::unique_ptr<Store> store(new Store(data_dir));
    const fs::path db_path = data_dir / kDatabaseFile;
    const int rc = sqlite3_open_v2(db_path.c_str(), &store->db_,
                                   SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_NOMUTEX,
                                   nullptr);
    if (rc != SQLITE_OK) {
        const std::string msg = store->db_ ? sqlite3_errmsg(store->db_) : "out of memory";
        throw Error(ErrorCode::io, "cannot open " + db_path.string() + ": " + msg);
    }
    sqlite3_extended_result_codes(store->db_, 1);
    sqlite3_busy_timeout(store->db_, 5000);
    store->exec("PRAGMA journal_mode=WAL;");
    store->exec("PRAGMA synchronous=FULL;");
    store->exec("PRAGMA foreign_keys=ON;");
    store->exec(kSchema);
    return store;
}

void Store::exec(const char* sql) const {
    char* err = nullptr;
    const int rc = sqlite3_exec(db_, sql, nullptr, nullptr, &err);
    if (rc != SQLITE_OK) {
        const std::string message = err ? err : "sqlite error";
        sqlite3_free(err);
        throw Error(ErrorCode::io, message);
    }
}

void Store::transaction(const std::function<void()>& body) {
    std::lock_guard lock(mutex_);
    exec("SAVEPOINT tx;");
    try {
        body();
    } catch (...) {
        exec("ROLLBACK TO tx; RELEASE tx;");
        throw;
    }
    exec("RELEASE tx;");
}

void Store::put_session(const Session& session) {
    if (session.consent == ConsentTier::delete_video) {
        throw Error(ErrorCode::consent_refused, "consent refused for session " + session.session_id);
    }
    std::lock_guard lock(mutex_);
    Statement s(db_,
                "INSERT INTO sessions(session_id, child_id, prompt, started_at, duration_s, consent) "
                "VALUES(?,?,?,?,?,?)");
    s.bind(1, session.session_id)
        .bind(2, session.child_id)
        .bind(3, static_cast<std::int64_t>(code(session.prompt)))
        .bind(4, to_millis(session.started_at))
        .bind(5, session.duration_s)
        .bind(6, static_cast<std::int64_t>(session.consent));
    s.run();
}

std::optional<Session> Store::get_session(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, (std::string("SELECT ") + kSessionColumns + " FROM sessions WHERE session_id=?").c_str());
    s.bind(1, session_id);
    if (s.step()) return read_session(s);
    return std::nullopt;
}

std::vector<Session> Store::list_sessions() const {
    std::lock_guard lock(mutex_);
    Statement s(db_, (std::string("SELECT ") + kSessionColumns + " FROM sessions ORDER BY session_id").c_str());
    std::vector<Session> out;
    while (s.step()) out.push_back(read_session(s));
    return out;
}

std::string Store::put_image(std::span<const std::uint8_t> bytes) {
    const std::string digest = sha256_hex(bytes);
    const std::string ref = std::string(kImageDir) + "/" + digest.substr(0, 2) + "/" + digest +
                            std::string(file_extension(sniff_format(bytes)));
    const fs::path path = root_ / ref;
    std::error_code ec;
    if (fs::exists(path, ec)) return ref;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::io, "cannot create " + path.parent_path().string());
    write_file_durably(path, bytes);
    return ref;
}

fs::path Store::image_path(const std::string& image_ref) const {
    if (!safe_image_ref(image_ref)) throw Error(ErrorCode::invalid_argument, "bad image reference");
    return root_ / image_ref;
}

std::vector<std::uint8_t> Store::read_image(const std::string& image_ref) const {
    std::ifstream in(image_path(image_ref), std::ios::binary);
    if (!in) throw Error(ErrorCode::not_found, "image missing: " + image_ref);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void Store::put_frame(const Frame& frame) {
    std::lock_guard lock(mutex_);
    if (!get_session(frame.session_id)) {
        throw Error(ErrorCode::integrity, "frame references unknown session " + frame.session_id);
    }
    Statement s(db_, (std::string("INSERT INTO frames(") + kFrameColumns +
                      ") VALUES(?,?,?,?,?,?,?,?,?)").c_str());
    s.bind(1, frame.frame_id)
        .bind(2, frame.session_id)
        .bind(3, frame.index_in_session)
        .bind(4, to_millis(frame.ingested_at))
        .bind(5, frame.image_ref)
        .bind(6, static_cast<std::int64_t>(frame.width_px))
        .bind(7, static_cast<std::int64_t>(frame.height_px))
        .bind(8, static_cast<std::int64_t>(code(frame.automatic_label)))
        .bind(9, static_cast<std::int64_t>(frame.qc_status));
    s.run();
}

std::optional<Frame> Store::get_frame(const std::string& frame_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, (std::string("SELECT ") + kFrameColumns + " FROM frames WHERE frame_id=?").c_str());
    s.bind(1, frame_id);
    if (s.step()) return read_frame(s);
    return std::nullopt;
}

std::vector<Frame> Store::list_frames() const {
    std::lock_guard lock(mutex_);
    Statement s(db_, (std::string("SELECT ") + kFrameColumns + " FROM frames ORDER BY frame_id").c_str());
    std::vector<Frame> out;
    while (s.step()) out.push_back(read_frame(s));
    return out;
}

std::vector<Frame> Store::list_frames_with_status(QcStatus status) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, (std::string("SELECT ") + kFrameColumns +
                      " FROM frames WHERE qc_status=? ORDER BY frame_id").c_str());
    s.bind(1, static_cast<std::int64_t>(status));
    std::vector<Frame> out;
    while (s.step()) out.push_back(read_frame(s));
    return out;
}

QcStatus Store::settle_qc_status(const std::string& frame_id, QcStatus status) {
    std::lock_guard lock(mutex_);
    const auto frame = get_frame(frame_id);
    if (!frame) throw Error(ErrorCode::not_found, "unknown frame " + frame_id);
    if (frame->qc_status != QcStatus::pending || status == QcStatus::pending) return frame->qc_status;
    Statement s(db_, "UPDATE frames SET qc_status=? WHERE frame_id=? AND qc_status=0");
    s.bind(1, static_cast<std::int64_t>(status)).bind(2, frame_id);
    s.run();
    return status;
}

void Store::put_annotator(const Annotator& annotator) {
    if (annotator.annotator_id.empty() || annotator.token.empty()) {
        throw Error(ErrorCode::invalid_argument, "annotator id and token must be nonempty");
    }
    std::lock_guard lock(mutex_);
    Statement s(db_, "INSERT INTO annotators(annotator_id, display_name, token, created_at) VALUES(?,?,?,?)");
    s.bind(1, annotator.annotator_id)
        .bind(2, annotator.display_name)
        .bind(3, annotator.token)
        .bind(4, to_millis(annotator.created_at));
    s.run();
}

std::optional<Annotator> Store::get_annotator(const std::string& annotator_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT annotator_id, display_name, token, created_at FROM annotators WHERE annotator_id=?");
    s.bind(1, annotator_id);
    if (s.step()) return read_annotator(s);
    return std::nullopt;
}

std::optional<Annotator> Store::find_annotator_by_token(const std::string& token) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT annotator_id, display_name, token, created_at FROM annotators WHERE token=?");
    s.bind(1, token);
    if (s.step()) return read_annotator(s);
    return std::nullopt;
}

std::vector<Annotator> Store::list_annotators() const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT annotator_id, display_name, token, created_at FROM annotators ORDER BY annotator_id");
    std::vector<Annotator> out;
    while (s.step()) out.push_back(read_annotator(s));
    return out;
}

std::int64_t Store::append_event(const AnnotationEvent& event) {
    std::lock_guard lock(mutex_);
    if (!get_frame(event.frame_id)) {
        throw Error(ErrorCode::integrity, "event references unknown frame " + event.frame_id);
    }
    if (!get_annotator(event.annotator_id)) {
        throw Error(ErrorCode::integrity, "event references unknown annotator " + event.annotator_id);
    }
    Statement s(db_, "INSERT INTO events(annotator_id, frame_id, label, at) VALUES(?,?,?,?)");
    s.bind(1, event.annotator_id)
        .bind(2, event.frame_id)
        .bind(3, static_cast<std::int64_t>(code(event.label)))
        .bind(4, to_millis(event.at));
    s.run();
    return sqlite3_last_insert_rowid(db_);
}

std::vector<AnnotationEvent> Store::events_for_frame(const std::string& frame_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT seq, annotator_id, frame_id, label, at FROM events WHERE frame_id=? ORDER BY seq");
    s.bind(1, frame_id);
    std::vector<AnnotationEvent> out;
    while (s.step()) out.push_back(read_event(s));
    return out;
}

std::vector<AnnotationEvent> Store::list_events() const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT seq, annotator_id, frame_id, label, at FROM events ORDER BY seq");
    std::vector<AnnotationEvent> out;
    while (s.step()) out.push_back(read_event(s));
    return out;
}

std::optional<AnnotationEvent> Store::find_event(const std::string& annotator_id,
                                                 const std::string& frame_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT seq, annotator_id, frame_id, label, at FROM events WHERE annotator_id=? AND frame_id=?");
    s.bind(1, annotator_id).bind(2, frame_id);
    if (s.step()) return read_event(s);
    return std::nullopt;
}

std::map<std::string, std::int64_t> Store::event_counts_by_annotator() const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT annotator_id, COUNT(*) FROM events GROUP BY annotator_id");
    std::map<std::string, std::int64_t> out;
    while (s.step()) out[s.text(0)] = s.int64(1);
    return out;
}

std::int64_t Store::event_count(const std::string& frame_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT COUNT(*) FROM events WHERE frame_id=?");
    s.bind(1, frame_id);
    s.step();
    return s.int64(0);
}

void Store::put_score(const StoredScore& score) {
    std::lock_guard lock(mutex_);
    // Scores are immutable once tagged with a version; a repeat write keeps the first.
    Statement s(db_, "INSERT OR IGNORE INTO scores(frame_id, scorer_version, probs, entropy) VALUES(?,?,?,?)");
    if (!get_frame(score.frame_id)) {
        throw Error(ErrorCode::integrity, "score references unknown frame " + score.frame_id);
    }
    s.bind(1, score.frame_id)
        .bind(2, score.scorer_version)
        .bind(3, nlohmann::json(score.probs).dump())
        .bind(4, score.entropy);
    s.run();
}

std::optional<StoredScore> Store::latest_score(const std::string& frame_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT frame_id, scorer_version, probs, entropy FROM scores WHERE frame_id=? "
                     "ORDER BY scorer_version DESC LIMIT 1");
    s.bind(1, frame_id);
    if (s.step()) return read_score(s);
    return std::nullopt;
}

std::optional<StoredScore> Store::get_score(const std::string& frame_id, std::int64_t version) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT frame_id, scorer_version, probs, entropy FROM scores WHERE frame_id=? AND scorer_version=?");
    s.bind(1, frame_id).bind(2, version);
    if (s.step()) return read_score(s);
    return std::nullopt;
}

void Store::put_decision(const ConsensusDecision& decision) {
    std::lock_guard lock(mutex_);
    if (!get_frame(decision.frame_id)) {
        throw Error(ErrorCode::integrity, "decision references unknown frame " + decision.frame_id);
    }
    Statement s(db_, "INSERT INTO decisions(frame_id, final_label, branch, decided_at, input_events) VALUES(?,?,?,?,?)");
    s.bind(1, decision.frame_id);
    if (decision.final_label) {
        s.bind(2, static_cast<std::int64_t>(code(*decision.final_label)));
    } else {
        s.bind_null(2);
    }
    s.bind(3, static_cast<std::int64_t>(decision.branch))
        .bind(4, to_millis(decision.decided_at))
        .bind(5, nlohmann::json(decision.input_events).dump());
    s.run();
}

std::optional<ConsensusDecision> Store::get_decision(const std::string& frame_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT frame_id, final_label, branch, decided_at, input_events FROM decisions WHERE frame_id=?");
    s.bind(1, frame_id);
    if (s.step()) return read_decision(s);
    return std::nullopt;
}

std::vector<ConsensusDecision> Store::list_decisions() const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT frame_id, final_label, branch, decided_at, input_events FROM decisions ORDER BY frame_id");
    std::vector<ConsensusDecision> out;
    while (s.step()) out.push_back(read_decision(s));
    return out;
}

void Store::mark_served(const std::string& frame_id, const std::string& annotator_id) {
    std::lock_guard lock(mutex_);
    Statement s(db_, "INSERT OR IGNORE INTO served(frame_id, annotator_id) VALUES(?,?)");
    s.bind(1, frame_id).bind(2, annotator_id);
    s.run();
}

bool Store::was_served(const std::string& frame_id, const std::string& annotator_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT 1 FROM served WHERE frame_id=? AND annotator_id=?");
    s.bind(1, frame_id).bind(2, annotator_id);
    return s.step();
}

std::vector<std::string> Store::served_annotators(const std::string& frame_id) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT annotator_id FROM served WHERE frame_id=? ORDER BY annotator_id");
    s.bind(1, frame_id);
    std::vector<std::string> out;
    while (s.step()) out.push_back(s.text(0));
    return out;
}

void Store::put_meta(const std::string& key, const std::string& value) {
    std::lock_guard lock(mutex_);
    Statement s(db_, "INSERT INTO meta(key, value) VALUES(?,?) ON CONFLICT(key) DO UPDATE SET value=excluded.value");
    s.bind(1, key).bind(2, value);
    s.run();
}

std::optional<std::string> Store::get_meta(const std::string& key) const {
    std::lock_guard lock(mutex_);
    Statement s(db_, "SELECT value FROM meta WHERE key=?");
    s.bind(1, key);
    if (s.step()) return s.text(0);
    return std::nullopt;
}

}  // namespace affectloop
