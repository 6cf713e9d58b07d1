#include "eegtext/textgen.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "eegtext/errors.hpp"
#include "eegtext/io.hpp"
#include "eegtext/rng.hpp"
#include "httplib.h"
#include "json.hpp"

namespace eegtext {

using nlohmann::json;

const char kDefaultPromptTemplate[] =
    "Based on EEG signals classified as [CLASS], generate a relevant "
    "descriptive sentence: ";

namespace {

constexpr char kPlaceholder[] = "[CLASS]";

size_t count_placeholders(const std::string& text) {
  size_t n = 0;
  for (size_t pos = text.find(kPlaceholder); pos != std::string::npos;
       pos = text.find(kPlaceholder, pos + 1))
    ++n;
  return n;
}

// Last order-1 characters of `ctx`, left-padded with BOS when shorter.
std::string context_tail(const NgramModel& model, const std::string& ctx) {
  const size_t len = model.order - 1;
  if (ctx.size() >= len) return ctx.substr(ctx.size() - len);
  return std::string(len - ctx.size(), kBosChar) + ctx;
}

void validate_backend(const BackendSpec& spec) {
  if (spec.kind == BackendKind::Remote && spec.url.empty())
    throw ConfigError("remote backend requires a URL");
  if (!(spec.temperature >= 0.0))
    throw ConfigError("temperature must be >= 0");
  if (!(spec.timeout_s > 0.0)) throw ConfigError("timeout must be > 0");
}

GenerationResult builtin_complete(const Backend& backend,
                                  const std::string& prompt,
                                  size_t max_tokens) {
  const NgramModel& model = backend.ngram;
  if (!model.trained())
    throw ConfigError("builtin backend requires a trained n-gram model");

  GenerationResult result;
  result.prompt = prompt;
  result.backend = backend.spec.model_id;
  result.has_logprobs = true;

  // Equal prompts reproduce bitwise; distinct prompts decorrelate.
  Rng rng(mix_seed(backend.spec.seed, fnv1a64(prompt)));
  const double temp = backend.spec.temperature;
  std::string state = context_tail(model, prompt);

  for (size_t step = 0; step < max_tokens; ++step) {
    const std::vector<double> probs = ngram_next_probs(model, state);

    // Sampling support excludes BOS; reported logprobs stay the model's
    // untempered conditionals.
    size_t pick = 0;
    if (temp == 0.0) {
      double best = -1.0;
      for (size_t i = 0; i < probs.size(); ++i) {
        if (model.vocab[i] == kBosChar) continue;
        if (probs[i] > best) {
          best = probs[i];
          pick = i;
        }
      }
    } else {
      double max_logit = -HUGE_VAL;
      for (size_t i = 0; i < probs.size(); ++i) {
        if (model.vocab[i] == kBosChar) continue;
        max_logit = std::max(max_logit, std::log(probs[i]) / temp);
      }
      std::vector<double> w(probs.size(), 0.0);
      double total = 0.0;
      for (size_t i = 0; i < probs.size(); ++i) {
        if (model.vocab[i] == kBosChar) continue;
        w[i] = std::exp(std::log(probs[i]) / temp - max_logit);
        total += w[i];
      }
      double u = rng.uniform(0.0, total);
      pick = probs.size() - 1;
      for (size_t i = 0; i < probs.size(); ++i) {
        if (w[i] <= 0.0) continue;
        if (u <= w[i]) {
          pick = i;
          break;
        }
        u -= w[i];
      }
    }

    const char c = model.vocab[pick];
    if (c == kEosChar) break;
    result.tokens.emplace_back(1, c);
    result.logprobs.push_back(std::log(probs[pick]));
    state = context_tail(model, state + c);
  }
  return result;
}

// http://host[:port][/path]
struct ParsedUrl {
  std::string host;
  int port = 80;
  std::string path = "/";
};

ParsedUrl parse_http_url(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0)
    throw ConfigError("only http:// backend URLs are supported, got \"" + url +
                      "\"");
  std::string rest = url.substr(scheme.size());
  ParsedUrl out;
  const size_t slash = rest.find('/');
  std::string authority = rest.substr(0, slash);
  if (slash != std::string::npos) out.path = rest.substr(slash);
  const size_t colon = authority.find(':');
  if (colon == std::string::npos) {
    out.host = authority;
  } else {
    out.host = authority.substr(0, colon);
    try {
      out.port = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad port in URL \"" + url + "\"");
    }
  }
  if (out.host.empty()) throw ConfigError("missing host in URL \"" + url + "\"");
  return out;
}

GenerationResult remote_complete(const BackendSpec& spec,
                                 const std::string& prompt,
                                 size_t max_tokens) {
  const ParsedUrl url = parse_http_url(spec.url);
  httplib::Client client(url.host, url.port);
  const auto sec = static_cast<time_t>(spec.timeout_s);
  const auto usec =
      static_cast<time_t>((spec.timeout_s - static_cast<double>(sec)) * 1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);

  httplib::Headers headers;
  if (!spec.auth_token.empty())
    headers.emplace("Authorization", "Bearer " + spec.auth_token);

  const json body = {{"model", spec.model_id},
                     {"prompt", prompt},
                     {"max_tokens", max_tokens},
                     {"temperature", spec.temperature},
                     {"logprobs", true}};
  httplib::Result res =
      client.Post(url.path, headers, body.dump(), "application/json");
  if (!res)
    throw TransportError("cannot reach " + spec.url + " (" +
                         httplib::to_string(res.error()) + ")");
  if (res->status < 200 || res->status >= 300)
    throw TransportError("endpoint " + spec.url + " returned HTTP " +
                         std::to_string(res->status));

  GenerationResult result;
  result.prompt = prompt;
  result.backend = spec.model_id;
  try {
    const json j = json::parse(res->body);
    j.at("tokens").get_to(result.tokens);
    if (j.contains("logprobs") && j.at("logprobs").is_array()) {
      j.at("logprobs").get_to(result.logprobs);
      if (result.logprobs.size() != result.tokens.size())
        throw ParseError(
            "backend returned " + std::to_string(result.tokens.size()) +
            " tokens but " + std::to_string(result.logprobs.size()) +
            " logprobs");
      result.has_logprobs = true;
    }
  } catch (const json::exception& e) {
    throw ParseError("malformed response from " + spec.url + ": " + e.what());
  }
  return result;
}

// Infer-mode class predictions for every trial, names attached.
std::vector<ClassPrediction> classify_trials(const Checkpoint& ck,
                                             const EpochTensor& epochs,
                                             const LabelMap& labels) {
  const size_t n = epochs.data.defined() ? epochs.data.shape()[0] : 0;
  if (n == 0) throw ConfigError("no trials to classify");
  ParamStore params = ck.params;
  const size_t bs = std::max<size_t>(1, ck.train.batch_size);
  const Shape& s = epochs.data.shape();
  const size_t row = s[1] * s[2] * s[3];
  Rng unused(0);

  std::vector<ClassPrediction> preds;
  preds.reserve(n);
  for (size_t lo = 0; lo < n; lo += bs) {
    const size_t hi = std::min(n, lo + bs);
    std::vector<double> rows(epochs.data.values().begin() + lo * row,
                             epochs.data.values().begin() + hi * row);
    Tensor xb({hi - lo, s[1], s[2], s[3]}, std::move(rows),
              epochs.data.dtype());
    Tensor probs = model_forward(xb, params, ck.model, Mode::Infer, unused);
    for (ClassPrediction& p : predictions(probs)) preds.push_back(std::move(p));
  }
  attach_class_names(preds, labels);
  return preds;
}

}  // namespace

PromptTemplate parse_prompt_template(const std::string& text) {
  const size_t n = count_placeholders(text);
  if (n != 1)
    throw ConfigError("prompt template must contain exactly one " +
                      std::string(kPlaceholder) + " placeholder, found " +
                      std::to_string(n));
  return PromptTemplate{text};
}

std::string build_prompt(const PromptTemplate& tmpl,
                         const ClassPrediction& pred) {
  if (count_placeholders(tmpl.text) != 1)
    throw ConfigError("prompt template lost its placeholder");
  if (pred.class_name.empty())
    throw ConfigError("prediction carries no class name");
  std::string out = tmpl.text;
  out.replace(out.find(kPlaceholder), sizeof(kPlaceholder) - 1,
              pred.class_name);
  return out;
}

void attach_class_names(std::vector<ClassPrediction>& preds,
                        const LabelMap& labels) {
  for (ClassPrediction& p : preds) {
    if (p.label < 0 || static_cast<size_t>(p.label) >= labels.n_classes())
      throw ConfigError("label " + std::to_string(p.label) +
                        " outside the label map (" +
                        std::to_string(labels.n_classes()) + " classes)");
    p.class_name = labels.class_names[static_cast<size_t>(p.label)];
  }
}

NgramModel ngram_train(const std::string& corpus, size_t order,
                       double smoothing) {
  if (order < 1) throw ConfigError("n-gram order must be >= 1");
  if (!(smoothing > 0.0)) throw ConfigError("smoothing must be > 0");
  if (corpus.size() < order)
    throw ConfigError("corpus has " + std::to_string(corpus.size()) +
                      " characters, need at least the order (" +
                      std::to_string(order) + ")");

  NgramModel model;
  model.order = order;
  model.smoothing = smoothing;

  std::string vocab = {kBosChar, kEosChar};
  size_t start = 0;
  while (start <= corpus.size()) {
    size_t end = corpus.find('\n', start);
    if (end == std::string::npos) end = corpus.size();
    std::string line = corpus.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    start = end + 1;
    if (line.empty()) continue;

    vocab += line;
    const std::string padded =
        std::string(order - 1, kBosChar) + line + kEosChar;
    for (size_t i = order - 1; i < padded.size(); ++i) {
      const std::string ctx = padded.substr(i - (order - 1), order - 1);
      model.counts[ctx][padded[i]] += 1;
      model.context_totals[ctx] += 1;
    }
  }
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  model.vocab = vocab;
  return model;
}

double ngram_prob(const NgramModel& model, const std::string& ctx, char next) {
  if (!model.trained()) throw ConfigError("n-gram model is not trained");
  const std::string key = context_tail(model, ctx);
  size_t count = 0, total = 0;
  const auto it = model.counts.find(key);
  if (it != model.counts.end()) {
    const auto jt = it->second.find(next);
    if (jt != it->second.end()) count = jt->second;
    total = model.context_totals.at(key);
  }
  const double v = static_cast<double>(model.vocab.size());
  return (static_cast<double>(count) + model.smoothing) /
         (static_cast<double>(total) + model.smoothing * v);
}

std::vector<double> ngram_next_probs(const NgramModel& model,
                                     const std::string& ctx) {
  std::vector<double> probs;
  probs.reserve(model.vocab.size());
  for (char c : model.vocab) probs.push_back(ngram_prob(model, ctx, c));
  return probs;
}

std::vector<double> ngram_score(const NgramModel& model,
                                const std::string& text,
                                const std::string& prefix) {
  if (!model.trained()) throw ConfigError("n-gram model is not trained");
  std::string state = context_tail(model, prefix);
  std::vector<double> lps;
  lps.reserve(text.size());
  for (char c : text) {
    lps.push_back(std::log(ngram_prob(model, state, c)));
    state = context_tail(model, state + c);
  }
  return lps;
}

GenerationResult backend_complete(const Backend& backend,
                                  const std::string& prompt,
                                  size_t max_tokens) {
  validate_backend(backend.spec);
  if (backend.spec.kind == BackendKind::Remote)
    return remote_complete(backend.spec, prompt, max_tokens);
  return builtin_complete(backend, prompt, max_tokens);
}

double perplexity(const std::vector<double>& logprobs) {
  if (logprobs.empty())
    throw ConfigError("perplexity of an empty sequence is undefined");
  double sum = 0.0;
  for (double lp : logprobs) {
    if (!std::isfinite(lp) || lp > 0.0)
      throw NumericError("logprobs must be finite and <= 0, got " +
                         format_double(lp));
    sum += lp;
  }
  return std::exp(-sum / static_cast<double>(logprobs.size()));
}

double bpc(double ppl) {
  if (!(ppl >= 1.0))
    throw NumericError("bpc requires ppl >= 1, got " + format_double(ppl));
  return std::log2(ppl);
}

PplReport eval_perplexity_by_class(const Checkpoint& ck,
                                   const EpochTensor& epochs,
                                   const Backend& backend,
                                   const PromptTemplate& tmpl,
                                   const LabelMap& labels,
                                   const std::vector<std::string>* references) {
  validate_backend(backend.spec);
  const std::vector<ClassPrediction> preds =
      classify_trials(ck, epochs, labels);
  if (references) {
    if (backend.spec.kind != BackendKind::BuiltinNgram)
      throw ConfigError(
          "reference scoring requires the builtin backend (the remote "
          "protocol has no scoring mode)");
    if (references->size() != preds.size())
      throw ConfigError(std::to_string(references->size()) +
                        " references for " + std::to_string(preds.size()) +
                        " trials");
  }

  double ppl_sum = 0.0;
  size_t scored = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const std::string prompt = build_prompt(tmpl, preds[i]);
    std::vector<double> lps;
    if (references) {
      lps = ngram_score(backend.ngram, (*references)[i], prompt);
    } else {
      GenerationResult r =
          backend_complete(backend, prompt, backend.spec.max_tokens);
      if (!r.has_logprobs)
        throw ConfigError("backend \"" + r.backend +
                          "\" returned no logprobs; cannot evaluate "
                          "perplexity");
      lps = std::move(r.logprobs);
    }
    if (lps.empty()) continue;  // zero-length generation, nothing to score
    ppl_sum += perplexity(lps);
    scored += 1;
  }
  if (scored == 0)
    throw NumericError("every sequence was empty; perplexity undefined");

  PplReport report;
  report.n_classes = ck.model.classifier.n_classes;
  report.n_sequences = scored;
  report.mean_ppl = ppl_sum / static_cast<double>(scored);
  report.mean_bpc = bpc(report.mean_ppl);
  return report;
}

std::vector<GenerationResult> generate_for_trials(const Checkpoint& ck,
                                                  const EpochTensor& epochs,
                                                  const Backend& backend,
                                                  const PromptTemplate& tmpl,
                                                  const LabelMap& labels) {
  validate_backend(backend.spec);
  const std::vector<ClassPrediction> preds =
      classify_trials(ck, epochs, labels);
  std::vector<GenerationResult> out;
  out.reserve(preds.size());
  for (const ClassPrediction& p : preds) {
    GenerationResult r = backend_complete(backend, build_prompt(tmpl, p),
                                          backend.spec.max_tokens);
    r.label = p.label;
    r.class_probs = p.probs;
    out.push_back(std::move(r));
  }
  return out;
}

std::string ppl_report_csv(const std::vector<PplReport>& rows) {
  std::string out = "n_classes,mean_ppl,mean_bpc,n_sequences\n";
  for (const PplReport& r : rows) {
    out += std::to_string(r.n_classes);
    out += ',';
    out += format_double(r.mean_ppl);
    out += ',';
    out += format_double(r.mean_bpc);
    out += ',';
    out += std::to_string(r.n_sequences);
    out += '\n';
  }
  return out;
}

}  // namespace eegtext
