#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace featstat {

using Tokens = std::vector<std::string>;

struct CaptionRecord {
  std::string item_id;
  Tokens hypothesis;
  std::vector<Tokens> references;
};

using Corpus = std::vector<CaptionRecord>;

/// Lower-cases, drops the `<sos>`/`<eos>` padding tokens, treats every
/// character outside [a-z0-9'] as a separator and splits on whitespace.
/// Throws Error{EmptyAfterTokenization} when nothing is left.
Tokens tokenize(std::string_view raw);

CaptionRecord make_record(std::string item_id, std::string_view hypothesis,
                          const std::vector<std::string>& references);

/// Corpus JSON lines: {"id": ..., "hyp": "...", "refs": ["...", ...]}.
Corpus parse_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);

struct BleuResult {
  double score = 0.0;
  std::vector<double> precisions;  ///< clipped precision per order 1..n
  double brevity_penalty = 1.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
  /// Set when some order had no matched n-gram and the score collapsed to 0.
  bool zero_precision = false;
};

/// Corpus-level BLEU with uniform weights over orders 1..n, per-reference
/// clipping, closest-reference brevity penalty and no smoothing.
BleuResult bleu(const Corpus& corpus, int max_order);
inline double bleu_n(const Corpus& corpus, int max_order) { return bleu(corpus, max_order).score; }

inline constexpr double kRougeBeta = 1.2;

std::size_t lcs_length(const Tokens& a, const Tokens& b);
/// Best LCS F-measure of the hypothesis against any one reference.
double rouge_l_item(const CaptionRecord& record, double beta = kRougeBeta);

struct ItemizedScore {
  double corpus = 0.0;
  std::vector<double> per_item;
};

ItemizedScore rouge_l(const Corpus& corpus, double beta = kRougeBeta);

inline constexpr double kCiderSigma = 6.0;

/// CIDEr-D over n-gram orders 1..4, scaled by 10. Throws Error{CorpusTooSmall}
/// for fewer than two items.
ItemizedScore cider_d(const Corpus& corpus, double sigma = kCiderSigma);

struct SpiderScore {
  double value = 0.0;
  /// "spider" when SPICE was supplied, "spider_lite" for the CIDEr-only fallback.
  std::string key;
};

SpiderScore spider(double cider_score, std::optional<double> spice_score);

/// External SPICE scores: a JSON object mapping item id to score.
std::map<std::string, double> load_spice(const std::filesystem::path& path);
std::map<std::string, double> parse_spice(std::istream& in);

/// Mean SPICE over the corpus items. Throws Error{MissingSpice} naming the first absent id.
double corpus_spice(const Corpus& corpus, const std::map<std::string, double>& spice);

struct MetricReport {
  std::map<std::string, double> scores;
  std::vector<double> per_item_cider;
  std::vector<double> per_item_rouge_l;
  bool bleu_zero_precision = false;
};

/// Metric names: bleu1..bleu4, rouge_l, cider, spider (spider implies cider and
/// is reported as spider_lite when `spice` is empty).
MetricReport evaluate(const Corpus& corpus, const std::vector<std::string>& metrics,
                      const std::optional<std::map<std::string, double>>& spice = std::nullopt);

}  // namespace featstat
