#include "affectloop/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "affectloop/error.hpp"

namespace affectloop {

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::uint64_t s = 0;
    for (auto v : counts_[truth]) s += v;
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const {
    std::uint64_t s = 0;
    for (const auto& row : counts_) s += row[pred];
    return s;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (std::size_t t = 0; t < kEmotionCount; ++t) s += row_sum(t);
    return s;
}

ConfusionMatrix confusion(std::span<const EmotionClass> truth, std::span<const EmotionClass> pred) {
    if (truth.size() != pred.size()) {
        throw Error(ErrorCode::invalid_argument, "truth and prediction lists differ in length");
    }
    if (truth.empty()) throw Error(ErrorCode::invalid_argument, "cannot evaluate an empty sample");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
    return cm;
}

ClassMetrics class_metrics(const ConfusionMatrix& cm, EmotionClass c) {
    const std::size_t k = code(c);
    const std::uint64_t tp = cm.at(k, k);
    const std::uint64_t predicted = cm.col_sum(k);
    const std::uint64_t actual = cm.row_sum(k);
    ClassMetrics m;
    m.label = c;
    m.support = actual;
    m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    const double denom = m.precision + m.recall;
    m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
    return m;
}

namespace {

void require_nonempty(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error(ErrorCode::invalid_argument, "confusion matrix has no samples");
}

template <typename Fn>
double mean_over_present(const ConfusionMatrix& cm, Fn metric) {
    require_nonempty(cm);
    double sum = 0.0;
    std::size_t n = 0;
    for (EmotionClass c : kAllEmotions) {
        if (cm.row_sum(code(c)) == 0) continue;
        sum += metric(class_metrics(cm, c));
        ++n;
    }
    return sum / static_cast<double>(n);
}

}  // namespace

double balanced_accuracy(const ConfusionMatrix& cm) {
    return mean_over_present(cm, [](const ClassMetrics& m) { return m.recall; });
}

double macro_f1(const ConfusionMatrix& cm) {
    return mean_over_present(cm, [](const ClassMetrics& m) { return m.f1; });
}

double micro_f1(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    std::uint64_t tp = 0;
    for (std::size_t k = 0; k < kEmotionCount; ++k) tp += cm.at(k, k);
    return static_cast<double>(tp) / static_cast<double>(cm.total());
}

double weighted_f1(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    double sum = 0.0;
    for (EmotionClass c : kAllEmotions) {
        const auto m = class_metrics(cm, c);
        sum += static_cast<double>(m.support) * m.f1;
    }
    return sum / static_cast<double>(cm.total());
}

EvalReport evaluate(const ConfusionMatrix& cm) {
    EvalReport r;
    r.confusion = cm;
    r.balanced_accuracy = balanced_accuracy(cm);
    r.macro_f1 = macro_f1(cm);
    r.micro_f1 = micro_f1(cm);
    r.weighted_f1 = weighted_f1(cm);
    for (EmotionClass c : kAllEmotions) {
        r.per_class[code(c)] = class_metrics(cm, c);
        if (cm.row_sum(code(c)) == 0) r.classes_excluded.push_back(c);
    }
    return r;
}

std::uint64_t DifficultyBinReport::total() const {
    std::uint64_t s = 0;
    for (const auto& b : bins) s += b.count;
    return s;
}

std::size_t difficulty_bin_index(double agreement_pct) {
    if (!(agreement_pct >= 0.0 && agreement_pct <= 100.0)) {
        throw Error(ErrorCode::invalid_argument, "agreement percentage outside [0,100]");
    }
    return std::min<std::size_t>(9, static_cast<std::size_t>(std::floor(agreement_pct / 10.0)));
}

DifficultyBinReport difficulty_bins(std::span<const AgreementSample> samples) {
    DifficultyBinReport report;
    std::array<std::uint64_t, 10> correct{};
    for (std::size_t i = 0; i < report.bins.size(); ++i) {
        report.bins[i].lo = 10.0 * static_cast<double>(i);
        report.bins[i].hi = 10.0 * static_cast<double>(i + 1);
        report.bins[i].closed_top = i == report.bins.size() - 1;
    }
    for (const auto& s : samples) {
        const std::size_t k = difficulty_bin_index(s.agreement_pct);
        ++report.bins[k].count;
        if (s.correct) ++correct[k];
    }
    for (std::size_t i = 0; i < report.bins.size(); ++i) {
        if (report.bins[i].count) {
            report.bins[i].accuracy =
                static_cast<double>(correct[i]) / static_cast<double>(report.bins[i].count);
        }
    }
    return report;
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json labels = nlohmann::json::array();
    nlohmann::json rows = nlohmann::json::array();
    for (EmotionClass t : kAllEmotions) {
        labels.push_back(std::string(to_string(t)));
        nlohmann::json row = nlohmann::json::array();
        for (EmotionClass p : kAllEmotions) row.push_back(r.confusion.at(t, p));
        rows.push_back(row);
    }
    nlohmann::json per_class = nlohmann::json::array();
    for (const auto& m : r.per_class) {
        per_class.push_back({{"class", std::string(to_string(m.label))},
                             {"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1},
                             {"support", m.support}});
    }
    nlohmann::json excluded = nlohmann::json::array();
    for (auto c : r.classes_excluded) excluded.push_back(std::string(to_string(c)));
    return {
        {"confusion", {{"labels", labels}, {"counts", rows}, {"total", r.confusion.total()}}},
        {"balanced_accuracy", r.balanced_accuracy},
        {"macro_f1", r.macro_f1},
        {"micro_f1", r.micro_f1},
        {"weighted_f1", r.weighted_f1},
        {"per_class", per_class},
        {"classes_excluded", excluded},
    };
}

nlohmann::json to_json(const DifficultyBinReport& r) {
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : r.bins) {
        bins.push_back({{"range", {b.lo, b.hi}},
                        {"closed_top", b.closed_top},
                        {"count", b.count},
                        {"accuracy", b.accuracy ? nlohmann::json(*b.accuracy) : nlohmann::json(nullptr)}});
    }
    return {{"bins", bins}, {"total", r.total()}};
}

std::string render_table(const EvalReport& r) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "balanced accuracy %.4f   macro-F1 %.4f   micro-F1 %.4f   weighted-F1 %.4f\n",
                  r.balanced_accuracy, r.macro_f1, r.micro_f1, r.weighted_f1);
    out += line;
    std::snprintf(line, sizeof line, "%-10s %9s %9s %9s %8s\n", "class", "precision", "recall", "f1", "support");
    out += line;
    for (const auto& m : r.per_class) {
        std::snprintf(line, sizeof line, "%-10s %9.4f %9.4f %9.4f %8llu\n", std::string(to_string(m.label)).c_str(),
                      m.precision, m.recall, m.f1, static_cast<unsigned long long>(m.support));
        out += line;
    }
    out += "confusion (rows=true, cols=pred)\n";
    for (EmotionClass t : kAllEmotions) {
        std::snprintf(line, sizeof line, "%-10s", std::string(to_string(t)).c_str());
        out += line;
        for (EmotionClass p : kAllEmotions) {
            std::snprintf(line, sizeof line, " %6llu", static_cast<unsigned long long>(r.confusion.at(t, p)));
            out += line;
        }
        out += "\n";
    }
    return out;
}

std::string render_table(const DifficultyBinReport& r) {
    std::string out = "agreement      count  accuracy\n";
    char line[80];
    for (const auto& b : r.bins) {
        const std::string acc = b.accuracy ? std::to_string(*b.accuracy).substr(0, 6) : "-";
        std::snprintf(line, sizeof line, "[%3.0f,%3.0f%c %8llu  %8s\n", b.lo, b.hi, b.closed_top ? ']' : ')',
                      static_cast<unsigned long long>(b.count), acc.c_str());
        out += line;
    }
    return out;
}

}  // namespace affectloop
