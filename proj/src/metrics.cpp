#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "caption.hpp"
#include "io_util.hpp"
#include "json.hpp"

namespace gebc {

using nlohmann::json;

std::string ngram_key(const TokenList& tokens, size_t i, int n) {
    std::string key = tokens[i];
    for (int k = 1; k < n; ++k) {
        key.push_back(' ');
        key += tokens[i + k];
    }
    return key;
}

namespace {

std::unordered_map<std::string, int> ngram_counts(const TokenList& tokens, int n) {
    std::unordered_map<std::string, int> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (size_t i = 0; i + n <= tokens.size(); ++i) ++counts[ngram_key(tokens, i, n)];
    return counts;
}

}  // namespace

NGramStats NGramStats::build(const std::vector<std::vector<TokenList>>& reference_docs) {
    NGramStats stats;
    stats.corpus_size_ = static_cast<int>(reference_docs.size());
    for (const auto& doc : reference_docs) {
        for (int n = 1; n <= kMaxN; ++n) {
            std::set<std::string> seen;
            for (const TokenList& ref : doc) {
                if (static_cast<int>(ref.size()) < n) continue;
                for (size_t i = 0; i + n <= ref.size(); ++i) seen.insert(ngram_key(ref, i, n));
            }
            for (const std::string& key : seen) ++stats.doc_freq_[n - 1][key];
        }
    }
    return stats;
}

int NGramStats::doc_freq(int n, const std::string& key) const {
    const auto& m = doc_freq_[n - 1];
    auto it = m.find(key);
    return it == m.end() ? 0 : it->second;
}

double NGramStats::idf(int n, const std::string& key) const {
    if (corpus_size_ <= 0) return 0.0;
    int df = std::max(1, doc_freq(n, key));
    return std::log(static_cast<double>(corpus_size_) / df);
}

double cider_d(const TokenList& candidate, const std::vector<TokenList>& references,
               const NGramStats& stats, int n_max, double sigma) {
    if (references.empty()) throw DataError("cider_d: no references");
    if (candidate.empty()) return 0.0;

    double total = 0.0;
    for (const TokenList& ref : references) {
        double len_delta = static_cast<double>(candidate.size()) - static_cast<double>(ref.size());
        double penalty = std::exp(-(len_delta * len_delta) / (2.0 * sigma * sigma));
        double sum_over_n = 0.0;
        for (int n = 1; n <= n_max; ++n) {
            auto cand_counts = ngram_counts(candidate, n);
            auto ref_counts = ngram_counts(ref, n);
            // candidate counts clipped to the reference, then TF-IDF cosine
            double dot = 0.0, cand_norm2 = 0.0, ref_norm2 = 0.0;
            for (const auto& [key, count] : cand_counts) {
                auto it = ref_counts.find(key);
                int clipped = it == ref_counts.end() ? 0 : std::min(count, it->second);
                if (clipped == 0) continue;
                double w = stats.idf(n, key);
                double cand_v = clipped * w;
                cand_norm2 += cand_v * cand_v;
                dot += cand_v * (it->second * w);
            }
            for (const auto& [key, count] : ref_counts) {
                double v = count * stats.idf(n, key);
                ref_norm2 += v * v;
            }
            if (cand_norm2 > 0.0 && ref_norm2 > 0.0)
                sum_over_n += dot / (std::sqrt(cand_norm2) * std::sqrt(ref_norm2));
        }
        total += penalty * sum_over_n / n_max;
    }
    return 10.0 * total / static_cast<double>(references.size());
}

namespace {

int lcs_length(const TokenList& a, const TokenList& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

}  // namespace

double rouge_l(const TokenList& candidate, const std::vector<TokenList>& references,
               double beta) {
    if (references.empty()) throw DataError("rouge_l: no references");
    if (candidate.empty()) return 0.0;
    double best = 0.0;
    for (const TokenList& ref : references) {
        if (ref.empty()) continue;
        int lcs = lcs_length(candidate, ref);
        if (lcs == 0) continue;
        double precision = static_cast<double>(lcs) / candidate.size();
        double recall = static_cast<double>(lcs) / ref.size();
        double f = (1.0 + beta * beta) * precision * recall / (recall + beta * beta * precision);
        best = std::max(best, f);
    }
    return best;
}

namespace {

double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace

MetricAggregate aggregate_metric(const std::vector<double>& subject_scores,
                                 const std::vector<double>& before_scores,
                                 const std::vector<double>& after_scores) {
    if (subject_scores.empty() || before_scores.empty() || after_scores.empty())
        throw DataError("aggregate: every caption kind needs at least one score");
    MetricAggregate agg;
    agg.subject = mean(subject_scores);
    agg.before = mean(before_scores);
    agg.after = mean(after_scores);
    agg.average = (agg.subject + agg.before + agg.after) / 3.0;
    return agg;
}

ScoreReport::Entry& ScoreReport::entry(CaptionKind kind) {
    switch (kind) {
        case CaptionKind::Subject: return subject;
        case CaptionKind::Before: return before;
        case CaptionKind::After: return after;
    }
    return subject;
}

const ScoreReport::Entry& ScoreReport::entry(CaptionKind kind) const {
    return const_cast<ScoreReport*>(this)->entry(kind);
}

namespace {

json report_to_json_doc(const ScoreReport& report, bool percent) {
    double rouge_scale = percent ? 100.0 : 1.0;
    json doc;
    doc["rouge_l_scale"] = percent ? "percent" : "unit";
    for (CaptionKind kind : {CaptionKind::Subject, CaptionKind::Before, CaptionKind::After}) {
        const ScoreReport::Entry& e = report.entry(kind);
        if (!e.present) continue;
        doc["kinds"][to_string(kind)] = {{"boundaries", e.boundaries},
                                         {"cider", e.cider},
                                         {"rouge_l", e.rouge_l * rouge_scale}};
    }
    if (report.cider_average) doc["average"]["cider"] = *report.cider_average;
    if (report.rouge_l_average) doc["average"]["rouge_l"] = *report.rouge_l_average * rouge_scale;
    return doc;
}

}  // namespace

std::string ScoreReport::to_json(bool percent) const {
    return report_to_json_doc(*this, percent).dump(2);
}

std::string ScoreReport::to_text(bool percent) const {
    double rouge_scale = percent ? 100.0 : 1.0;
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-8s %12s %12s %12s\n", "metric", "kind", "boundaries",
                  "score");
    out << line;
    for (CaptionKind kind : {CaptionKind::Subject, CaptionKind::Before, CaptionKind::After}) {
        const Entry& e = entry(kind);
        if (!e.present) continue;
        std::snprintf(line, sizeof(line), "%-8s %12s %12d %12.4f\n", "CIDEr", to_string(kind),
                      e.boundaries, e.cider);
        out << line;
    }
    if (cider_average) {
        std::snprintf(line, sizeof(line), "%-8s %12s %12s %12.4f\n", "CIDEr", "average", "-",
                      *cider_average);
        out << line;
    }
    for (CaptionKind kind : {CaptionKind::Subject, CaptionKind::Before, CaptionKind::After}) {
        const Entry& e = entry(kind);
        if (!e.present) continue;
        std::snprintf(line, sizeof(line), "%-8s %12s %12d %12.4f\n", "ROUGE_L", to_string(kind),
                      e.boundaries, e.rouge_l * rouge_scale);
        out << line;
    }
    if (rouge_l_average) {
        std::snprintf(line, sizeof(line), "%-8s %12s %12s %12.4f\n", "ROUGE_L", "average", "-",
                      *rouge_l_average * rouge_scale);
        out << line;
    }
    return out.str();
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw DataError("prediction file '" + path + "': " + e.what());
    }
    if (!doc.is_array()) throw DataError("prediction file '" + path + "': expected a JSON array");
    std::vector<PredictionRecord> records;
    for (size_t i = 0; i < doc.size(); ++i) {
        const json& v = doc[i];
        try {
            PredictionRecord rec;
            rec.video_id = v.at("video_id").get<std::string>();
            rec.boundary_index = v.at("boundary_index").get<int>();
            rec.kind = caption_kind_from_string(v.at("kind").get<std::string>());
            rec.caption = v.at("caption").get<std::string>();
            records.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw DataError("prediction file '" + path + "' entry " + std::to_string(i) + ": " +
                            e.what());
        } catch (const ConfigError& e) {
            throw DataError("prediction file '" + path + "' entry " + std::to_string(i) + ": " +
                            e.what());
        }
    }
    return records;
}

void save_predictions(const std::string& path, const std::vector<PredictionRecord>& records) {
    json doc = json::array();
    for (const PredictionRecord& rec : records)
        doc.push_back({{"video_id", rec.video_id},
                       {"boundary_index", rec.boundary_index},
                       {"kind", to_string(rec.kind)},
                       {"caption", rec.caption}});
    atomic_write_text(path, doc.dump(2) + "\n");
}

ScoreReport score_prediction_records(const std::vector<PredictionRecord>& predictions,
                                     const std::vector<VideoRecord>& annotations,
                                     std::optional<CaptionKind> kind_filter) {
    if (predictions.empty()) throw DataError("no predictions to score");

    std::map<std::string, const VideoRecord*> by_id;
    for (const VideoRecord& rec : annotations) by_id[rec.video_id] = &rec;

    std::vector<CaptionKind> kinds;
    if (kind_filter)
        kinds = {*kind_filter};
    else
        kinds = {CaptionKind::Subject, CaptionKind::Before, CaptionKind::After};

    // (video, boundary, kind) -> caption; reject strays and duplicates
    std::map<std::tuple<std::string, int, int>, std::string> table;
    std::vector<std::string> offenders;
    for (const PredictionRecord& p : predictions) {
        if (kind_filter && p.kind != *kind_filter) continue;
        auto it = by_id.find(p.video_id);
        bool known = it != by_id.end() && p.boundary_index >= 0 &&
                     p.boundary_index < it->second->num_boundaries();
        if (!known) {
            offenders.push_back(p.video_id + "#" + std::to_string(p.boundary_index));
            continue;
        }
        auto key = std::make_tuple(p.video_id, p.boundary_index, static_cast<int>(p.kind));
        if (!table.emplace(key, p.caption).second)
            throw DataError("duplicate prediction for " + p.video_id + "#" +
                            std::to_string(p.boundary_index) + " kind " + to_string(p.kind));
    }
    if (!offenders.empty()) {
        std::string msg = "predictions reference unknown boundaries:";
        for (size_t i = 0; i < offenders.size() && i < 10; ++i) msg += " " + offenders[i];
        if (offenders.size() > 10) msg += " ...";
        throw DataError(msg);
    }

    ScoreReport report;
    for (CaptionKind kind : kinds) {
        // IDF source: the references of the split being scored
        std::vector<std::vector<TokenList>> docs;
        for (const VideoRecord& rec : annotations)
            for (const CaptionTriple& triple : rec.captions)
                docs.push_back({tokenize(caption_field(triple, kind))});
        NGramStats stats = NGramStats::build(docs);

        std::vector<double> cider_scores, rouge_scores;
        std::vector<std::string> missing;
        for (const VideoRecord& rec : annotations) {
            for (int b = 0; b < rec.num_boundaries(); ++b) {
                auto key = std::make_tuple(rec.video_id, b, static_cast<int>(kind));
                auto it = table.find(key);
                if (it == table.end()) {
                    missing.push_back(rec.video_id + "#" + std::to_string(b) + " (" +
                                      to_string(kind) + ")");
                    continue;
                }
                TokenList cand = tokenize(it->second);
                std::vector<TokenList> refs = {tokenize(caption_field(rec.captions[b], kind))};
                cider_scores.push_back(cider_d(cand, refs, stats));
                rouge_scores.push_back(rouge_l(cand, refs));
            }
        }
        if (!missing.empty()) {
            std::string msg = "missing predictions for boundaries:";
            for (size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
            if (missing.size() > 10) msg += " ...";
            throw DataError(msg);
        }
        ScoreReport::Entry& e = report.entry(kind);
        e.present = true;
        e.boundaries = static_cast<int>(cider_scores.size());
        e.cider = mean(cider_scores);
        e.rouge_l = mean(rouge_scores);
    }

    if (report.complete()) {
        report.cider_average = (report.subject.cider + report.before.cider + report.after.cider) / 3.0;
        report.rouge_l_average =
            (report.subject.rouge_l + report.before.rouge_l + report.after.rouge_l) / 3.0;
    }
    return report;
}

ScoreReport score_predictions(const std::string& prediction_path,
                              const std::string& annotation_path,
                              std::optional<CaptionKind> kind_filter) {
    return score_prediction_records(load_predictions(prediction_path),
                                    load_annotations(annotation_path), kind_filter);
}

}  // namespace gebc
