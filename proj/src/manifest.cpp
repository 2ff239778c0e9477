#include "affectloop/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "affectloop/error.hpp"
#include "affectloop/image.hpp"

namespace affectloop {

namespace fs = std::filesystem;

std::string_view to_string(Split split) { return split == Split::train ? "train" : "val"; }

nlohmann::json to_json(const ManifestRow& r) {
    return {
        {"frame_id", r.frame_id},
        {"image_path", r.image_path},
        {"final_label", std::string(to_string(r.final_label))},
        {"label_source", std::string(to_string(r.label_source))},
        {"session_id", r.session_id},
        {"automatic_label", std::string(to_string(r.automatic_label))},
        {"split", std::string(to_string(r.split))},
    };
}

ManifestRow manifest_row_from_json(const nlohmann::json& j) {
    auto emotion = [&](const char* key) {
        const auto e = parse_emotion(j.at(key).get<std::string>());
        if (!e) throw Error(ErrorCode::invalid_argument, std::string("manifest field ") + key + " is not an emotion");
        return *e;
    };
    ManifestRow r;
    r.frame_id = j.at("frame_id").get<std::string>();
    r.image_path = j.at("image_path").get<std::string>();
    r.final_label = emotion("final_label");
    const auto source = parse_branch(j.at("label_source").get<std::string>());
    if (!source || *source == DecisionBranch::discarded_no_support) {
        throw Error(ErrorCode::invalid_argument, "manifest label_source must be unanimous or automatic_fallback");
    }
    r.label_source = *source;
    r.session_id = j.at("session_id").get<std::string>();
    r.automatic_label = emotion("automatic_label");
    const std::string split = j.at("split").get<std::string>();
    if (split != "train" && split != "val") throw Error(ErrorCode::invalid_argument, "manifest split must be train or val");
    r.split = split == "train" ? Split::train : Split::val;
    return r;
}

nlohmann::json to_json(const ExportSummary& s) {
    nlohmann::json per_class = nlohmann::json::object();
    for (EmotionClass c : kAllEmotions) {
        per_class[std::string(to_string(c))] = {{"train", s.train_per_class[code(c)]},
                                                {"val", s.val_per_class[code(c)]}};
    }
    return {
        {"rows", s.rows},         {"train", s.train},
        {"val", s.val},           {"per_class", per_class},
        {"decisions", s.decisions}, {"discarded", s.discarded},
        {"non_emotion", s.non_emotion}, {"filtered_out", s.filtered_out},
    };
}

namespace {

struct SplitCost {
    const std::vector<SplitGroup>& groups;
    std::array<double, kEmotionCount> target{};
    double target_total = 0.0;

    double operator()(const std::array<double, kEmotionCount>& train) const {
        double cost = 0.0;
        double total = 0.0;
        for (std::size_t c = 0; c < kEmotionCount; ++c) {
            const double d = train[c] - target[c];
            cost += d * d;
            total += train[c];
        }
        const double dt = total - target_total;
        return cost + dt * dt;
    }
};

std::size_t group_size(const SplitGroup& g) { return std::accumulate(g.per_class.begin(), g.per_class.end(), std::size_t{0}); }

void add_group(std::array<double, kEmotionCount>& train, const SplitGroup& g, double sign) {
    for (std::size_t c = 0; c < kEmotionCount; ++c) train[c] += sign * static_cast<double>(g.per_class[c]);
}

}  // namespace

std::vector<Split> assign_group_splits(const std::vector<SplitGroup>& groups, double train_fraction,
                                       std::uint64_t seed) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
        throw Error(ErrorCode::invalid_argument, "split fraction must lie in [0,1]");
    }
    SplitCost cost{groups};
    for (const auto& g : groups) {
        for (std::size_t c = 0; c < kEmotionCount; ++c) {
            cost.target[c] += train_fraction * static_cast<double>(g.per_class[c]);
        }
        cost.target_total += train_fraction * static_cast<double>(group_size(g));
    }

    // Seeded visiting order: sort by key for a canonical start, shuffle, then place the
    // largest groups first (stable, so equal sizes keep the shuffled order).
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return groups[a].key < groups[b].key; });
    std::seed_seq seq{static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(seed)};
    std::mt19937_64 gen(seq);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(gen() % i)]);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return group_size(groups[a]) > group_size(groups[b]); });

    std::vector<Split> assignment(groups.size(), Split::val);
    std::array<double, kEmotionCount> train{};
    for (const std::size_t g : order) {
        auto with = train;
        add_group(with, groups[g], 1.0);
        if (cost(with) <= cost(train)) {
            assignment[g] = Split::train;
            train = with;
        }
    }

    // Local improvement until no single move or swap lowers the cost.
    constexpr int kMaxPasses = 64;
    bool improved = true;
    for (int pass = 0; improved && pass < kMaxPasses; ++pass) {
        improved = false;
        double current = cost(train);
        for (const std::size_t g : order) {
            auto moved = train;
            add_group(moved, groups[g], assignment[g] == Split::train ? -1.0 : 1.0);
            const double c = cost(moved);
            if (c + 1e-9 < current) {
                assignment[g] = assignment[g] == Split::train ? Split::val : Split::train;
                train = moved;
                current = c;
                improved = true;
            }
        }
        for (std::size_t i = 0; i < order.size(); ++i) {
            for (std::size_t j = i + 1; j < order.size(); ++j) {
                const std::size_t a = order[i];
                const std::size_t b = order[j];
                if (assignment[a] == assignment[b]) continue;
                auto swapped = train;
                add_group(swapped, groups[a], assignment[a] == Split::train ? -1.0 : 1.0);
                add_group(swapped, groups[b], assignment[b] == Split::train ? -1.0 : 1.0);
                const double c = cost(swapped);
                if (c + 1e-9 < current) {
                    std::swap(assignment[a], assignment[b]);
                    train = swapped;
                    current = c;
                    improved = true;
                }
            }
        }
    }
    return assignment;
}

ExportResult build_manifest(const Store& store, const ExportFilter& filter, double train_fraction,
                            std::uint64_t seed) {
    ExportResult result;
    auto& summary = result.summary;
    for (const auto& d : store.list_decisions()) {
        ++summary.decisions;
        if (d.discarded()) {
            ++summary.discarded;
            continue;
        }
        const auto emotion = as_emotion(*d.final_label);
        if (!emotion) {
            ++summary.non_emotion;
            continue;
        }
        const auto frame = store.get_frame(d.frame_id);
        if (!frame) throw Error(ErrorCode::integrity, "decision for unknown frame " + d.frame_id);
        const bool keep = (!filter.classes || filter.classes->contains(*emotion)) &&
                          (!filter.sources || filter.sources->contains(d.branch)) &&
                          (!filter.sessions || filter.sessions->contains(frame->session_id));
        if (!keep) {
            ++summary.filtered_out;
            continue;
        }
        ManifestRow row;
        row.frame_id = frame->frame_id;
        row.image_path = fs::absolute(store.image_path(frame->image_ref)).lexically_normal().string();
        row.final_label = *emotion;
        row.label_source = d.branch;
        row.session_id = frame->session_id;
        row.automatic_label = frame->automatic_label;
        result.rows.push_back(std::move(row));
    }
    if (result.rows.empty()) throw Error(ErrorCode::no_exportable_frames, "no exportable frames");

    std::map<std::string, SplitGroup> by_session;
    for (const auto& r : result.rows) {
        auto& g = by_session[r.session_id];
        g.key = r.session_id;
        ++g.per_class[code(r.final_label)];
    }
    std::vector<SplitGroup> groups;
    for (auto& [key, g] : by_session) groups.push_back(g);
    const auto splits = assign_group_splits(groups, train_fraction, seed);
    std::map<std::string, Split> session_split;
    for (std::size_t i = 0; i < groups.size(); ++i) session_split[groups[i].key] = splits[i];

    std::sort(result.rows.begin(), result.rows.end(),
              [](const ManifestRow& a, const ManifestRow& b) { return a.frame_id < b.frame_id; });
    for (auto& r : result.rows) {
        r.split = session_split.at(r.session_id);
        if (r.split == Split::train) {
            ++summary.train;
            ++summary.train_per_class[code(r.final_label)];
        } else {
            ++summary.val;
            ++summary.val_per_class[code(r.final_label)];
        }
    }
    summary.rows = result.rows.size();
    return result;
}

std::string manifest_jsonl(const std::vector<ManifestRow>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRow>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write manifest " + path.string());
    out << manifest_jsonl(rows);
    if (!out) throw Error(ErrorCode::io, "failed writing manifest " + path.string());
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot read manifest " + path.string());
    std::vector<ManifestRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw Error(ErrorCode::invalid_argument, "manifest line " + std::to_string(line_no) + " is not JSON");
        }
        rows.push_back(manifest_row_from_json(j));
    }
    return rows;
}

void export_class_directories(const Store& store, const std::vector<ManifestRow>& rows, const fs::path& root) {
    for (const auto& r : rows) {
        const auto frame = store.get_frame(r.frame_id);
        if (!frame) throw Error(ErrorCode::integrity, "manifest row for unknown frame " + r.frame_id);
        const auto bytes = store.read_image(frame->image_ref);
        const fs::path dir = root / std::string(to_string(r.final_label));
        fs::create_directories(dir);
        std::vector<std::uint8_t> png;
        if (sniff_format(bytes) == ImageFormat::png) {
            png = bytes;
        } else {
            const auto raster = decode_image(bytes);
            if (!raster) throw Error(ErrorCode::integrity, "stored image for " + r.frame_id + " does not decode");
            png = encode_png(*raster);
        }
        std::ofstream out(dir / (r.frame_id + ".png"), std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
        if (!out) throw Error(ErrorCode::io, "cannot write image for " + r.frame_id);
    }
}

}  // namespace affectloop
