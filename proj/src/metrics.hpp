#pragma once

#include <array>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "datamodel.hpp"

namespace gebc {

using TokenList = std::vector<std::string>;

// Corpus n-gram statistics (n = 1..4) for CIDEr-D. A "document" is the
// reference set of one boundary; document frequency counts documents whose
// reference set contains the n-gram.
class NGramStats {
public:
    static constexpr int kMaxN = 4;

    static NGramStats build(const std::vector<std::vector<TokenList>>& reference_docs);

    int corpus_size() const { return corpus_size_; }
    double idf(int n, const std::string& key) const;
    int doc_freq(int n, const std::string& key) const;

private:
    int corpus_size_ = 0;
    std::array<std::unordered_map<std::string, int>, kMaxN> doc_freq_;
};

// Joins n consecutive tokens with a single space, starting at position i.
std::string ngram_key(const TokenList& tokens, size_t i, int n);

// TF-IDF n-gram cosine with candidate counts clipped to the reference, a
// Gaussian length penalty, averaged over n = 1..n_max and over references,
// scaled to [0, 10]. Empty candidates score 0.
double cider_d(const TokenList& candidate, const std::vector<TokenList>& references,
               const NGramStats& stats, int n_max = 4, double sigma = 6.0);

// LCS F-measure, max over references; 0 when LCS = 0 or candidate is empty.
double rouge_l(const TokenList& candidate, const std::vector<TokenList>& references,
               double beta = 1.2);

// Per-kind mean plus the arithmetic mean of the three kinds.
struct MetricAggregate {
    double subject = 0.0;
    double before = 0.0;
    double after = 0.0;
    double average = 0.0;
};

MetricAggregate aggregate_metric(const std::vector<double>& subject_scores,
                                 const std::vector<double>& before_scores,
                                 const std::vector<double>& after_scores);

struct ScoreReport {
    struct Entry {
        bool present = false;
        int boundaries = 0;
        double cider = 0.0;
        double rouge_l = 0.0;
    };
    Entry subject, before, after;
    // Present only when all three kinds were evaluated.
    std::optional<double> cider_average;
    std::optional<double> rouge_l_average;

    Entry& entry(CaptionKind kind);
    const Entry& entry(CaptionKind kind) const;
    bool complete() const { return subject.present && before.present && after.present; }

    // Machine-readable report; ROUGE-L (and its average) is multiplied by
    // 100 when percent is set.
    std::string to_json(bool percent) const;
    std::string to_text(bool percent) const;
};

struct PredictionRecord {
    std::string video_id;
    int boundary_index = 0;
    CaptionKind kind = CaptionKind::Subject;
    std::string caption;
};

std::vector<PredictionRecord> load_predictions(const std::string& path);
void save_predictions(const std::string& path, const std::vector<PredictionRecord>& records);

ScoreReport score_prediction_records(const std::vector<PredictionRecord>& predictions,
                                     const std::vector<VideoRecord>& annotations,
                                     std::optional<CaptionKind> kind_filter);

ScoreReport score_predictions(const std::string& prediction_path,
                              const std::string& annotation_path,
                              std::optional<CaptionKind> kind_filter = std::nullopt);

}  // namespace gebc
