#ifndef EEGTEXT_TEXTGEN_HPP_
#define EEGTEXT_TEXTGEN_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "eegtext/classifier.hpp"
#include "eegtext/ingest.hpp"
#include "eegtext/trainer.hpp"

namespace eegtext {

// ---- Prompt template ------------------------------------------------------

extern const char kDefaultPromptTemplate[];

struct PromptTemplate {
  std::string text;  // contains exactly one [CLASS] placeholder
};

// Validates the single-placeholder invariant.
PromptTemplate parse_prompt_template(const std::string& text);

// Substitutes the placeholder (single pass, no re-expansion) with the
// prediction's class name. The probability vector stays out of the prompt.
std::string build_prompt(const PromptTemplate& tmpl,
                         const ClassPrediction& pred);

void attach_class_names(std::vector<ClassPrediction>& preds,
                        const LabelMap& labels);

// ---- Character n-gram language model ---------------------------------------
// Laplace-smoothed, character-level, with begin/end sentinels. The corpus is
// split on newlines; each line is padded with order-1 BOS markers and closed
// with one EOS. Smoothed conditionals cover the whole vocabulary (sentinels
// included), so unseen contexts degrade to the uniform 1/V distribution.

constexpr char kBosChar = '\x02';
constexpr char kEosChar = '\x03';

struct NgramModel {
  size_t order = 3;
  double smoothing = 1.0;
  std::string vocab;  // sorted distinct symbols, sentinels included
  std::map<std::string, std::map<char, size_t>> counts;  // context -> next
  std::map<std::string, size_t> context_totals;

  bool trained() const { return !vocab.empty(); }
};

NgramModel ngram_train(const std::string& corpus, size_t order = 3,
                       double smoothing = 1.0);

// P(next | last order-1 chars of ctx), Laplace-smoothed.
double ngram_prob(const NgramModel& model, const std::string& ctx, char next);

// Full conditional aligned with model.vocab; sums to 1 up to rounding.
std::vector<double> ngram_next_probs(const NgramModel& model,
                                     const std::string& ctx);

// Natural-log probability of each character of `text`, contexts seeded by
// BOS padding plus `prefix` (e.g. the prompt). No EOS term is scored.
std::vector<double> ngram_score(const NgramModel& model,
                                const std::string& text,
                                const std::string& prefix = "");

// ---- Backends ---------------------------------------------------------------

enum class BackendKind { BuiltinNgram, Remote };

struct BackendSpec {
  BackendKind kind = BackendKind::BuiltinNgram;
  std::string url;         // remote only, http://host[:port][/path]
  std::string auth_token;  // remote only; sent as a bearer token when set
  std::string model_id = "builtin-ngram";
  double timeout_s = 30.0;
  size_t max_tokens = 64;
  double temperature = 1.0;  // 0 = greedy (builtin)
  uint64_t seed = 0;         // builtin only
};

struct Backend {
  BackendSpec spec;
  NgramModel ngram;  // required when kind == BuiltinNgram
};

struct GenerationResult {
  std::string prompt;
  int label = -1;                  // classifier snapshot, -1 when standalone
  std::vector<double> class_probs;
  std::vector<std::string> tokens;
  std::vector<double> logprobs;  // natural logs, aligned with tokens
  bool has_logprobs = false;     // remote backends may omit logprobs
  std::string backend;           // model identifier
};

// Builtin: seeded sampling (seed mixed with a hash of the prompt, so equal
// prompts reproduce bitwise); reported logprobs are the model conditionals
// of the emitted characters, independent of temperature. Remote: HTTP POST
// {model, prompt, max_tokens, temperature, logprobs:true} expecting
// {tokens:[...], logprobs:[...]}, passed through verbatim.
GenerationResult backend_complete(const Backend& backend,
                                  const std::string& prompt,
                                  size_t max_tokens);

// ---- Perplexity -------------------------------------------------------------

// exp(-mean(logprobs)). Errors: empty list, positive entries.
double perplexity(const std::vector<double>& logprobs);

// Bits per character, log2(ppl). Errors: ppl < 1.
double bpc(double ppl);

struct PplReport {
  size_t n_classes = 0;
  double mean_ppl = 0.0;
  double mean_bpc = 0.0;  // log2 of mean_ppl
  size_t n_sequences = 0;
};

// Per trial: classify, build the class prompt, score either the backend's
// generated continuation or the caller-supplied reference sentence.
// References require the builtin backend (the remote protocol has no
// scoring mode); zero-length generations are excluded from the mean.
PplReport eval_perplexity_by_class(
    const Checkpoint& ck, const EpochTensor& epochs, const Backend& backend,
    const PromptTemplate& tmpl, const LabelMap& labels,
    const std::vector<std::string>* references = nullptr);

// Whole-dataset generation: classify every trial, prompt the
// backend, keep the probability snapshot alongside the generation.
std::vector<GenerationResult> generate_for_trials(const Checkpoint& ck,
                                                  const EpochTensor& epochs,
                                                  const Backend& backend,
                                                  const PromptTemplate& tmpl,
                                                  const LabelMap& labels);

// CSV rows `n_classes,mean_ppl,mean_bpc,n_sequences`.
std::string ppl_report_csv(const std::vector<PplReport>& rows);

}  // namespace eegtext

#endif  // EEGTEXT_TEXTGEN_HPP_
