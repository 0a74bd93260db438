#include "featstat/caption_metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "featstat/error.hpp"

namespace featstat {
namespace {

using NgramCounts = std::map<std::string, int>;

NgramCounts count_ngrams(const Tokens& tokens, int order) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < order) return counts;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int k = 1; k < order; ++k) {
      key += ' ';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

void strip_padding_tokens(std::string& text) {
  for (const std::string_view pad : {"<sos>", "<eos>"}) {
    for (auto pos = text.find(pad); pos != std::string::npos; pos = text.find(pad, pos)) {
      text.replace(pos, pad.size(), " ");
    }
  }
}

}  // namespace

Tokens tokenize(std::string_view raw) {
  std::string text;
  text.reserve(raw.size());
  for (const char ch : raw) {
    text.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  strip_padding_tokens(text);

  Tokens tokens;
  std::string current;
  for (const char ch : text) {
    const bool keep = (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '\'';
    if (keep) {
      current.push_back(ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  if (tokens.empty()) {
    throw Error(Errc::EmptyAfterTokenization,
                "caption \"" + std::string(raw) + "\" is empty after tokenization");
  }
  return tokens;
}

CaptionRecord make_record(std::string item_id, std::string_view hypothesis,
                          const std::vector<std::string>& references) {
  if (references.empty()) {
    throw Error(Errc::EmptyReferences, "item " + item_id + " has no references");
  }
  CaptionRecord record;
  record.item_id = std::move(item_id);
  record.hypothesis = tokenize(hypothesis);
  record.references.reserve(references.size());
  for (const auto& ref : references) record.references.push_back(tokenize(ref));
  return record;
}

Corpus parse_corpus(std::istream& in) {
  using nlohmann::json;
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto malformed = [&](const std::string& why) {
      return Error(Errc::MalformedLine, "corpus line " + std::to_string(line_no) + ": " + why);
    };
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw malformed(e.what());
    }
    if (!doc.is_object()) throw malformed("expected a JSON object");
    const auto id = doc.find("id");
    const auto hyp = doc.find("hyp");
    const auto refs = doc.find("refs");
    if (id == doc.end() || !(id->is_string() || id->is_number_integer())) {
      throw malformed("\"id\" must be a string");
    }
    if (hyp == doc.end() || !hyp->is_string()) throw malformed("\"hyp\" must be a string");
    if (refs == doc.end() || !refs->is_array()) throw malformed("\"refs\" must be an array");
    std::vector<std::string> references;
    for (const auto& r : *refs) {
      if (!r.is_string()) throw malformed("every reference must be a string");
      references.push_back(r.get<std::string>());
    }
    const std::string item_id = id->is_string() ? id->get<std::string>() : id->dump();
    try {
      corpus.push_back(make_record(item_id, hyp->get<std::string>(), references));
    } catch (const Error& e) {
      throw Error(e.code(), "corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open corpus " + path.string());
  return parse_corpus(in);
}

// ---------------------------------------------------------------------------

BleuResult bleu(const Corpus& corpus, int max_order) {
  if (max_order < 1 || max_order > 4) {
    throw Error(Errc::InvalidArgument, "BLEU order must be in 1..4");
  }
  std::vector<double> matched(max_order, 0.0);
  std::vector<double> total(max_order, 0.0);
  BleuResult result;

  for (const auto& record : corpus) {
    const std::size_t hyp_len = record.hypothesis.size();
    result.hypothesis_length += hyp_len;

    std::size_t closest = record.references.front().size();
    for (const auto& ref : record.references) {
      const auto diff = [&](std::size_t len) {
        return len > hyp_len ? len - hyp_len : hyp_len - len;
      };
      if (diff(ref.size()) < diff(closest) ||
          (diff(ref.size()) == diff(closest) && ref.size() < closest)) {
        closest = ref.size();
      }
    }
    result.reference_length += closest;

    for (int order = 1; order <= max_order; ++order) {
      const NgramCounts hyp_counts = count_ngrams(record.hypothesis, order);
      NgramCounts max_ref;
      for (const auto& ref : record.references) {
        for (const auto& [gram, count] : count_ngrams(ref, order)) {
          int& slot = max_ref[gram];
          slot = std::max(slot, count);
        }
      }
      for (const auto& [gram, count] : hyp_counts) {
        const auto it = max_ref.find(gram);
        if (it != max_ref.end()) matched[order - 1] += std::min(count, it->second);
        total[order - 1] += count;
      }
    }
  }

  double log_sum = 0.0;
  result.precisions.resize(max_order);
  for (int k = 0; k < max_order; ++k) {
    result.precisions[k] = total[k] > 0.0 ? matched[k] / total[k] : 0.0;
    if (result.precisions[k] == 0.0) {
      result.zero_precision = true;
    } else {
      log_sum += std::log(result.precisions[k]) / max_order;
    }
  }

  const double c = static_cast<double>(result.hypothesis_length);
  const double r = static_cast<double>(result.reference_length);
  result.brevity_penalty = (c >= r) ? 1.0 : (c > 0.0 ? std::exp(1.0 - r / c) : 0.0);
  result.score = result.zero_precision ? 0.0 : result.brevity_penalty * std::exp(log_sum);
  return result;
}

// ---------------------------------------------------------------------------

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_item(const CaptionRecord& record, double beta) {
  double best = 0.0;
  for (const auto& ref : record.references) {
    const double lcs = static_cast<double>(lcs_length(record.hypothesis, ref));
    if (lcs == 0.0) continue;
    const double precision = lcs / static_cast<double>(record.hypothesis.size());
    const double recall = lcs / static_cast<double>(ref.size());
    const double b2 = beta * beta;
    const double f = (1.0 + b2) * precision * recall / (recall + b2 * precision);
    best = std::max(best, f);
  }
  return best;
}

ItemizedScore rouge_l(const Corpus& corpus, double beta) {
  ItemizedScore out;
  out.per_item.reserve(corpus.size());
  for (const auto& record : corpus) out.per_item.push_back(rouge_l_item(record, beta));
  if (!out.per_item.empty()) {
    out.corpus = std::accumulate(out.per_item.begin(), out.per_item.end(), 0.0) /
                 static_cast<double>(out.per_item.size());
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kCiderOrders = 4;

struct CiderVector {
  std::array<std::map<std::string, double>, kCiderOrders> weights;
  std::array<double, kCiderOrders> norms{};
  double length = 0.0;
};

using CountsByOrder = std::array<NgramCounts, kCiderOrders>;

CountsByOrder cook(const Tokens& tokens) {
  CountsByOrder counts;
  for (int n = 1; n <= kCiderOrders; ++n) counts[n - 1] = count_ngrams(tokens, n);
  return counts;
}

CiderVector tfidf(const CountsByOrder& counts, std::size_t length,
                  const std::map<std::string, int>& doc_freq, double log_corpus) {
  CiderVector vec;
  vec.length = static_cast<double>(length);
  for (int k = 0; k < kCiderOrders; ++k) {
    double norm2 = 0.0;
    for (const auto& [gram, tf] : counts[k]) {
      const auto it = doc_freq.find(gram);
      const double df = it == doc_freq.end() ? 1.0 : std::max(1.0, static_cast<double>(it->second));
      const double w = static_cast<double>(tf) * (log_corpus - std::log(df));
      vec.weights[k].emplace(gram, w);
      norm2 += w * w;
    }
    vec.norms[k] = std::sqrt(norm2);
  }
  return vec;
}

std::array<double, kCiderOrders> clipped_similarity(const CiderVector& hyp, const CiderVector& ref,
                                                    double sigma) {
  const double delta = hyp.length - ref.length;
  const double penalty = std::exp(-(delta * delta) / (2.0 * sigma * sigma));
  std::array<double, kCiderOrders> sims{};
  for (int k = 0; k < kCiderOrders; ++k) {
    double dot = 0.0;
    for (const auto& [gram, wh] : hyp.weights[k]) {
      const auto it = ref.weights[k].find(gram);
      if (it != ref.weights[k].end()) dot += std::min(wh, it->second) * it->second;
    }
    if (hyp.norms[k] != 0.0 && ref.norms[k] != 0.0) dot /= hyp.norms[k] * ref.norms[k];
    sims[k] = dot * penalty;
  }
  return sims;
}

}  // namespace

ItemizedScore cider_d(const Corpus& corpus, double sigma) {
  if (corpus.size() < 2) {
    throw Error(Errc::CorpusTooSmall, "CIDEr needs at least two corpus items for IDF, got " +
                                          std::to_string(corpus.size()));
  }

  std::vector<std::vector<CountsByOrder>> ref_counts(corpus.size());
  std::map<std::string, int> doc_freq;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::set<std::string> seen;
    for (const auto& ref : corpus[i].references) {
      ref_counts[i].push_back(cook(ref));
      for (const auto& order : ref_counts[i].back()) {
        for (const auto& [gram, count] : order) seen.insert(gram);
      }
    }
    for (const auto& gram : seen) ++doc_freq[gram];
  }

  const double log_corpus = std::log(static_cast<double>(corpus.size()));
  ItemizedScore out;
  out.per_item.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& record = corpus[i];
    const CiderVector hyp =
        tfidf(cook(record.hypothesis), record.hypothesis.size(), doc_freq, log_corpus);
    std::array<double, kCiderOrders> sum{};
    for (std::size_t r = 0; r < record.references.size(); ++r) {
      const CiderVector ref =
          tfidf(ref_counts[i][r], record.references[r].size(), doc_freq, log_corpus);
      const auto sims = clipped_similarity(hyp, ref, sigma);
      for (int k = 0; k < kCiderOrders; ++k) sum[k] += sims[k];
    }
    const double mean_over_orders =
        std::accumulate(sum.begin(), sum.end(), 0.0) / static_cast<double>(kCiderOrders);
    out.per_item.push_back(10.0 * mean_over_orders /
                           static_cast<double>(record.references.size()));
  }
  out.corpus = std::accumulate(out.per_item.begin(), out.per_item.end(), 0.0) /
               static_cast<double>(out.per_item.size());
  return out;
}

// ---------------------------------------------------------------------------

SpiderScore spider(double cider_score, std::optional<double> spice_score) {
  if (!std::isfinite(cider_score)) throw Error(Errc::InvalidArgument, "CIDEr score is not finite");
  if (spice_score) return {(cider_score + *spice_score) / 2.0, "spider"};
  return {cider_score, "spider_lite"};
}

std::map<std::string, double> parse_spice(std::istream& in) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::MalformedLine, std::string("SPICE file: ") + e.what());
  }
  if (!doc.is_object()) throw Error(Errc::MalformedLine, "SPICE file must hold a JSON object");
  std::map<std::string, double> out;
  for (const auto& [id, value] : doc.items()) {
    if (!value.is_number()) {
      throw Error(Errc::MalformedLine, "SPICE score for \"" + id + "\" is not a number");
    }
    out.emplace(id, value.get<double>());
  }
  return out;
}

std::map<std::string, double> load_spice(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open SPICE file " + path.string());
  return parse_spice(in);
}

double corpus_spice(const Corpus& corpus, const std::map<std::string, double>& spice) {
  if (corpus.empty()) throw Error(Errc::CorpusTooSmall, "empty corpus");
  double sum = 0.0;
  for (const auto& record : corpus) {
    const auto it = spice.find(record.item_id);
    if (it == spice.end()) {
      throw Error(Errc::MissingSpice, "no SPICE score for item \"" + record.item_id + "\"");
    }
    sum += it->second;
  }
  return sum / static_cast<double>(corpus.size());
}

MetricReport evaluate(const Corpus& corpus, const std::vector<std::string>& metrics,
                      const std::optional<std::map<std::string, double>>& spice) {
  MetricReport report;
  std::optional<ItemizedScore> cider;
  const auto need_cider = [&]() -> const ItemizedScore& {
    if (!cider) cider = cider_d(corpus);
    return *cider;
  };

  for (const auto& metric : metrics) {
    if (metric.size() == 5 && metric.rfind("bleu", 0) == 0 && metric[4] >= '1' && metric[4] <= '4') {
      const BleuResult b = bleu(corpus, metric[4] - '0');
      report.scores[metric] = b.score;
      report.bleu_zero_precision = report.bleu_zero_precision || b.zero_precision;
    } else if (metric == "rouge_l") {
      ItemizedScore r = rouge_l(corpus);
      report.scores[metric] = r.corpus;
      report.per_item_rouge_l = std::move(r.per_item);
    } else if (metric == "cider") {
      report.scores[metric] = need_cider().corpus;
      report.per_item_cider = need_cider().per_item;
    } else if (metric == "spider") {
      const double c = need_cider().corpus;
      report.per_item_cider = need_cider().per_item;
      std::optional<double> s;
      if (spice) s = corpus_spice(corpus, *spice);
      const SpiderScore sp = spider(c, s);
      report.scores[sp.key] = sp.value;
    } else {
      throw Error(Errc::InvalidArgument, "unknown metric \"" + metric + "\"");
    }
  }
  return report;
}

}  // namespace featstat
