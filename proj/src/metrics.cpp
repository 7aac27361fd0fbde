#include "lida/metrics.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "lida/error.hpp"

namespace lida {

namespace {

const std::string& predicted(const QueryOutcome& q) {
    return q.predicted_label.empty() ? q.ranking.top_label() : q.predicted_label;
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace

double rank1(std::span<const QueryOutcome> outcomes) {
    if (outcomes.empty()) throw PreconditionViolation("rank1: no queries");
    std::size_t hits = 0;
    for (const auto& q : outcomes) hits += predicted(q) == q.true_label ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

std::optional<double> average_precision(const RankedResult& ranking, const std::string& true_label) {
    std::size_t relevant = 0;
    double sum = 0.0;
    for (std::size_t r = 0; r < ranking.entries.size(); ++r) {
        if (ranking.entries[r].label != true_label) continue;
        ++relevant;
        sum += static_cast<double>(relevant) / static_cast<double>(r + 1);
    }
    if (relevant == 0) return std::nullopt;
    return sum / static_cast<double>(relevant);
}

MapResult mean_average_precision(std::span<const QueryOutcome> outcomes) {
    MapResult m;
    double sum = 0.0;
    for (const auto& q : outcomes) {
        if (auto ap = average_precision(q.ranking, q.true_label)) {
            sum += *ap;
            ++m.evaluated;
        } else {
            ++m.excluded;
        }
    }
    m.percent = m.evaluated == 0 ? 0.0 : 100.0 * sum / static_cast<double>(m.evaluated);
    return m;
}

double detection_accuracy(const std::vector<bool>& verdicts, const std::vector<bool>& truths) {
    if (verdicts.size() != truths.size()) {
        throw InvalidArgument("detection_accuracy: verdicts and truths differ in length");
    }
    if (verdicts.empty()) throw PreconditionViolation("detection_accuracy: no samples");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < verdicts.size(); ++i) hits += verdicts[i] == truths[i] ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(verdicts.size());
}

EvalReport build_report(std::span<const QueryOutcome> outcomes, std::optional<double> detection_acc) {
    if (outcomes.empty()) throw PreconditionViolation("build_report: no queries");
    std::map<std::string, std::vector<QueryOutcome>> by_label;
    for (const auto& q : outcomes) by_label[q.true_label].push_back(q);

    EvalReport rep;
    rep.query_count = outcomes.size();
    rep.detection_accuracy = detection_acc;
    for (const auto& [label, qs] : by_label) {
        const MapResult m = mean_average_precision(qs);
        rep.map_excluded += m.excluded;
        std::optional<double> map;
        if (m.evaluated > 0) map = m.percent;
        rep.per_label.push_back({label, qs.size(), rank1(qs), map});
    }
    std::size_t with_map = 0;
    for (const auto& s : rep.per_label) {
        rep.avg_rank1 += s.rank1;
        if (s.map) {
            rep.avg_map += *s.map;
            ++with_map;
        }
    }
    rep.avg_rank1 /= static_cast<double>(rep.per_label.size());
    if (with_map > 0) rep.avg_map /= static_cast<double>(with_map);
    return rep;
}

std::string EvalReport::to_table() const {
    std::size_t width = 5;
    for (const auto& s : per_label) width = std::max(width, s.label.size());
    std::ostringstream os;
    const auto row = [&](const std::string& label, const std::string& n, const std::string& r1,
                         const std::string& map) {
        os << label << std::string(width - label.size() + 2, ' ');
        os << std::string(8 - std::min<std::size_t>(8, n.size()), ' ') << n;
        os << std::string(9 - std::min<std::size_t>(9, r1.size()), ' ') << r1;
        os << std::string(9 - std::min<std::size_t>(9, map.size()), ' ') << map << '\n';
    };
    row("label", "queries", "Rank-1", "mAP");
    for (const auto& s : per_label) {
        row(s.label, std::to_string(s.queries), fixed(s.rank1, 1), s.map ? fixed(*s.map, 1) : "-");
    }
    row("Avg", std::to_string(query_count), fixed(avg_rank1, 1), fixed(avg_map, 1));
    if (detection_accuracy) os << "detection accuracy: " << fixed(*detection_accuracy, 1) << '\n';
    if (map_excluded > 0) os << "mAP excluded queries: " << map_excluded << '\n';
    return os.str();
}

std::string EvalReport::to_tsv() const {
    std::ostringstream os;
    os << "label\tqueries\trank1\tmap\n";
    for (const auto& s : per_label) {
        os << s.label << '\t' << s.queries << '\t' << fixed(s.rank1, 6) << '\t' << (s.map ? fixed(*s.map, 6) : "-") << '\n';
    }
    os << "Avg\t" << query_count << '\t' << fixed(avg_rank1, 6) << '\t' << fixed(avg_map, 6) << '\n';
    if (detection_accuracy) os << "detection_accuracy\t" << query_count << '\t' << fixed(*detection_accuracy, 6) << "\t\n";
    return os.str();
}

}  // namespace lida
