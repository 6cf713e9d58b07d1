// Pipeline driver: synth -> preprocess -> train -> eval / sweep / generate /
// ppl, all sharing one flat config file. Exit codes: 0 success, 1 I/O,
// 2 argument or config error, 3 numerical failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eegtext/config.hpp"
#include "eegtext/dsp.hpp"
#include "eegtext/errors.hpp"
#include "eegtext/ingest.hpp"
#include "eegtext/io.hpp"
#include "eegtext/textgen.hpp"
#include "eegtext/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace eegtext;

namespace {

constexpr char kEpochsMagic[] = "EEGEPOC1";

void ensure_parent_dir(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// ---- Cached-epochs container ------------------------------------------------

struct EpochsFile {
  EpochTensor epochs;
  std::vector<Split> splits;  // aligned with trials
  size_t n_classes = 0;
  std::vector<std::string> class_names;
};

void write_epochs_file(const std::string& path, const EpochsFile& f) {
  const Shape& s = f.epochs.data.shape();
  json manifest = {{"version", 1},
                   {"shape", s},
                   {"labels", f.epochs.labels},
                   {"sample_rate_hz", f.epochs.sample_rate_hz},
                   {"n_classes", f.n_classes},
                   {"class_names", f.class_names}};
  std::vector<std::string> split_names;
  split_names.reserve(f.splits.size());
  for (Split sp : f.splits)
    split_names.emplace_back(sp == Split::Train ? "train" : "val");
  manifest["splits"] = split_names;
  ensure_parent_dir(path);
  write_container(path, kEpochsMagic, manifest.dump(),
                  pack_doubles_le(f.epochs.data.values()));
}

EpochsFile read_epochs_file(const std::string& path) {
  const Container c = read_container(path, kEpochsMagic);
  EpochsFile f;
  try {
    const json m = json::parse(c.manifest);
    if (m.at("version").get<int>() != 1)
      throw IoError("unsupported epochs-file version in " + path);
    Shape shape = m.at("shape").get<Shape>();
    if (shape.size() != 4)
      throw IoError("epochs file " + path + " has a non-4D shape");
    size_t total = 1;
    for (size_t d : shape) total *= d;
    f.epochs.data =
        Tensor(shape, unpack_doubles_le(c.payload, 0, total), DType::F64);
    m.at("labels").get_to(f.epochs.labels);
    m.at("sample_rate_hz").get_to(f.epochs.sample_rate_hz);
    m.at("n_classes").get_to(f.n_classes);
    m.at("class_names").get_to(f.class_names);
    std::vector<std::string> split_names =
        m.at("splits").get<std::vector<std::string>>();
    if (split_names.size() != shape[0] ||
        f.epochs.labels.size() != shape[0])
      throw IoError("epochs file " + path + " has inconsistent row counts");
    for (const std::string& name : split_names) {
      if (name != "train" && name != "val")
        throw IoError("epochs file " + path + " has unknown split \"" + name +
                      "\"");
      f.splits.push_back(name == "train" ? Split::Train : Split::Val);
    }
  } catch (const json::exception& e) {
    throw IoError("bad epochs-file manifest in " + path + ": " + e.what());
  }
  return f;
}

EpochTensor take_split(const EpochsFile& f, const std::string& which) {
  const Shape& s = f.epochs.data.shape();
  const size_t row = s[1] * s[2] * s[3];
  std::vector<double> data;
  std::vector<int> labels;
  for (size_t i = 0; i < s[0]; ++i) {
    const bool is_train = f.splits[i] == Split::Train;
    if ((which == "train" && !is_train) || (which == "val" && is_train))
      continue;
    const auto& v = f.epochs.data.values();
    data.insert(data.end(), v.begin() + i * row, v.begin() + (i + 1) * row);
    labels.push_back(f.epochs.labels[i]);
  }
  EpochTensor out;
  out.data = Tensor({labels.size(), s[1], s[2], s[3]}, std::move(data));
  out.labels = std::move(labels);
  out.sample_rate_hz = f.epochs.sample_rate_hz;
  return out;
}

// ---- Shared loaders ---------------------------------------------------------

DatasetManifest read_manifest_file(const std::string& path) {
  return parse_manifest(read_file(path));
}

std::vector<RawTrial> load_trials(const DatasetManifest& manifest,
                                  const std::string& dir) {
  std::vector<RawTrial> trials;
  trials.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) {
    const std::string path = (fs::path(dir) / e.path).string();
    RawTrial t = parse_trial_csv(read_file(path));
    t.label = e.label;
    t.meta.synset = e.synset;
    t.meta.session = e.session;
    t.meta.global_session = e.global_session;
    trials.push_back(std::move(t));
  }
  return trials;
}

size_t infer_n_classes(const DatasetManifest& manifest) {
  int max_label = -1;
  for (const ManifestEntry& e : manifest.entries)
    max_label = std::max(max_label, e.label);
  if (max_label < 0) throw ConfigError("manifest has no labeled entries");
  return static_cast<size_t>(max_label) + 1;
}

Backend make_backend(const AppConfig& cfg) {
  Backend b;
  b.spec = cfg.textgen.backend;
  if (b.spec.kind == BackendKind::BuiltinNgram) {
    if (cfg.textgen.corpus_path.empty())
      throw ConfigError(
          "builtin backend needs textgen.corpus (a training text file)");
    b.ngram = ngram_train(read_file(cfg.textgen.corpus_path),
                          cfg.textgen.ngram_order, cfg.textgen.smoothing);
  } else if (b.spec.url.empty()) {
    throw ConfigError("remote backend requires textgen.url");
  }
  return b;
}

LabelMap label_map_for(const EpochsFile& f) {
  LabelMap map;
  map.class_names = f.class_names;
  if (map.class_names.size() < f.n_classes)
    map.class_names = builtin_class_names(f.n_classes);
  return map;
}

// ---- Subcommands ------------------------------------------------------------

void cmd_synth(const AppConfig& cfg, size_t classes, size_t per_class,
               uint64_t seed, size_t samples, double freq_step,
               double amplitude, double noise, const std::string& out_dir) {
  if (classes < 2) throw ConfigError("--classes must be at least 2");
  if (per_class < 1) throw ConfigError("--per-class must be at least 1");

  SynthSpec spec;
  spec.n_classes = classes;
  spec.trials_per_class = per_class;
  spec.seed = seed;
  spec.n_samples = samples;
  spec.sample_rate_hz = cfg.dsp.filter.sample_rate_hz;
  spec.freq_step_hz = freq_step;
  spec.amplitude = amplitude;
  spec.noise_sigma = noise;
  const std::vector<RawTrial> trials = synth_generate(spec);

  fs::create_directories(out_dir);
  DatasetManifest manifest;
  manifest.seed = seed;
  for (const RawTrial& t : trials) {
    const std::string name = default_filename(t.meta);
    write_file((fs::path(out_dir) / name).string(), serialize_trial_csv(t));
    ManifestEntry e;
    e.path = name;
    e.synset = t.meta.synset;
    e.label = t.label;
    e.session = t.meta.session;
    e.global_session = t.meta.global_session;
    manifest.entries.push_back(e);
  }
  manifest = split_train_val(manifest, cfg.train.val_fraction, split_seed(cfg));
  write_file((fs::path(out_dir) / "manifest.tsv").string(),
             serialize_manifest(manifest));
  write_file((fs::path(out_dir) / "labels.tsv").string(),
             serialize_label_map(synth_label_map(classes)));
  std::printf("wrote %zu trials, manifest.tsv, labels.tsv to %s\n",
              trials.size(), out_dir.c_str());
}

void cmd_preprocess(const AppConfig& cfg, const std::string& manifest_path,
                    const std::string& out_path, bool debug) {
  const DatasetManifest manifest = read_manifest_file(manifest_path);
  const std::string dir = fs::path(manifest_path).parent_path().string();
  const std::vector<RawTrial> trials = load_trials(manifest, dir);

  EpochsFile f;
  f.epochs = assemble_epochs(trials, cfg.dsp);
  for (const ManifestEntry& e : manifest.entries) f.splits.push_back(e.split);
  f.n_classes = infer_n_classes(manifest);

  const std::string labels_path = (fs::path(dir) / "labels.tsv").string();
  if (fs::exists(labels_path)) {
    f.class_names = parse_label_map(read_file(labels_path)).class_names;
  } else {
    f.class_names = builtin_class_names(f.n_classes);
  }

  if (debug) {
    const std::vector<double> taps = fir_design(cfg.dsp.filter);
    const fs::path debug_dir = fs::path(out_path).parent_path();
    for (size_t i = 0; i < trials.size(); ++i) {
      RawTrial filtered = trials[i];
      for (auto& ch : filtered.channels)
        ch = filtfilt(fix_length(ch, cfg.dsp.target_length), taps);
      const std::string name = manifest.entries[i].path + ".filtered.csv";
      write_file((debug_dir / name).string(), serialize_trial_csv(filtered));
    }
  }

  write_epochs_file(out_path, f);
  const Shape& s = f.epochs.data.shape();
  std::printf("wrote %s with shape (%zu,%zu,%zu,%zu), %zu classes\n",
              out_path.c_str(), s[0], s[1], s[2], s[3], f.n_classes);
}

void cmd_train(AppConfig cfg, const std::string& epochs_path,
               const std::string& ckpt_path, const std::string& metrics_path) {
  const EpochsFile f = read_epochs_file(epochs_path);
  // The data defines the head size; the config sets everything else.
  cfg.model.classifier.n_classes = f.n_classes;

  const FitResult r =
      fit(take_split(f, "train"), take_split(f, "val"), cfg.model, cfg.train);
  ensure_parent_dir(ckpt_path);
  save_checkpoint(r.best, ckpt_path);
  ensure_parent_dir(metrics_path);
  write_file(metrics_path, r.log.to_csv());

  const MetricsRow& last = r.log.rows.back();
  std::printf(
      "trained %zu epochs (best val loss %.6f at epoch %zu); "
      "final val acc %.4f\nwrote %s and %s\n",
      r.stopped_epoch, r.best.best_val_loss, r.best.epoch, last.val_acc,
      ckpt_path.c_str(), metrics_path.c_str());
}

void cmd_eval(const std::string& ckpt_path, const std::string& epochs_path,
              const std::string& out_path, const std::string& split) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  const EpochsFile f = read_epochs_file(epochs_path);
  const EpochTensor data = take_split(f, split);
  const EvalResult ev =
      evaluate(ck.params, ck.model, data, ck.train.batch_size);

  std::string csv = "classes,accuracy\n";
  csv += std::to_string(ev.n_classes) + "," + format_double(ev.accuracy) + "\n";
  ensure_parent_dir(out_path);
  write_file(out_path, csv);

  std::printf("accuracy %.4f over %zu trials (%s split), mean CE %.6f\n",
              ev.accuracy, data.labels.size(), split.c_str(), ev.mean_loss);
  for (size_t c = 0; c < ev.n_classes; ++c)
    std::printf("  class %zu accuracy %.4f\n", c, ev.per_class_accuracy[c]);
  std::printf("confusion (rows = true class):\n");
  for (size_t i = 0; i < ev.n_classes; ++i) {
    std::printf("  ");
    for (size_t j = 0; j < ev.n_classes; ++j)
      std::printf("%5zu", ev.confusion[i * ev.n_classes + j]);
    std::printf("\n");
  }
  std::printf("wrote %s\n", out_path.c_str());
}

void cmd_sweep(AppConfig cfg, const std::string& manifest_path,
               const std::vector<size_t>& ks, const std::string& out_path) {
  if (ks.empty()) throw ConfigError("--k needs at least one value");
  const DatasetManifest manifest = read_manifest_file(manifest_path);
  const std::string dir = fs::path(manifest_path).parent_path().string();
  const std::vector<RawTrial> trials = load_trials(manifest, dir);
  cfg.model.classifier.n_classes = infer_n_classes(manifest);

  const std::vector<SweepRow> rows = sweep_data_efficiency(
      trials, manifest, subsample_seed(cfg), cfg.dsp, cfg.model, cfg.train, ks);

  std::string csv = "samples_per_class,accuracy,val_loss\n";
  for (const SweepRow& r : rows) {
    csv += std::to_string(r.k) + "," + format_double(r.accuracy) + "," +
           format_double(r.val_loss) + "\n";
    std::printf("k=%zu accuracy %.4f val loss %.6f\n", r.k, r.accuracy,
                r.val_loss);
  }
  ensure_parent_dir(out_path);
  write_file(out_path, csv);
  std::printf("wrote %s\n", out_path.c_str());
}

void cmd_generate(const AppConfig& cfg, const std::string& ckpt_path,
                  const std::string& epochs_path, const std::string& out_path,
                  const std::string& split) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const EpochsFile f = read_epochs_file(epochs_path);
  const Backend backend = make_backend(cfg);
  const PromptTemplate tmpl =
      parse_prompt_template(cfg.textgen.prompt_template);
  const LabelMap labels = label_map_for(f);

  const std::vector<GenerationResult> gens = generate_for_trials(
      ck, take_split(f, split), backend, tmpl, labels);

  std::string out;
  for (const GenerationResult& g : gens) {
    json line = {{"prompt", g.prompt},
                 {"class", labels.class_names[static_cast<size_t>(g.label)]},
                 {"label", g.label},
                 {"class_probs", g.class_probs},
                 {"tokens", g.tokens},
                 {"logprobs", g.logprobs},
                 {"has_logprobs", g.has_logprobs},
                 {"backend", g.backend}};
    out += line.dump();
    out += '\n';
  }
  ensure_parent_dir(out_path);
  write_file(out_path, out);
  std::printf("wrote %zu generations to %s\n", gens.size(), out_path.c_str());
}

void cmd_ppl(const AppConfig& cfg, const std::string& generations_path,
             const std::string& ckpt_path, const std::string& epochs_path,
             const std::string& references_path, const std::string& out_path,
             const std::string& split, bool append) {
  PplReport report;

  if (!generations_path.empty()) {
    const std::string text = read_file(generations_path);
    double ppl_sum = 0.0;
    size_t start = 0;
    while (start < text.size()) {
      size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      const std::string line = text.substr(start, end - start);
      start = end + 1;
      if (line.empty()) continue;
      try {
        const json j = json::parse(line);
        if (!j.contains("logprobs") || !j.at("logprobs").is_array() ||
            j.value("has_logprobs", true) == false)
          throw ConfigError("generations in " + generations_path +
                            " carry no logprobs");
        const auto lps = j.at("logprobs").get<std::vector<double>>();
        if (report.n_classes == 0 && j.contains("class_probs"))
          report.n_classes = j.at("class_probs").size();
        if (lps.empty()) continue;
        ppl_sum += perplexity(lps);
        report.n_sequences += 1;
      } catch (const json::exception& e) {
        throw ParseError("bad JSONL line in " + generations_path + ": " +
                         e.what());
      }
    }
    if (report.n_sequences == 0)
      throw NumericError("no scoreable sequences in " + generations_path);
    report.mean_ppl = ppl_sum / static_cast<double>(report.n_sequences);
    report.mean_bpc = bpc(report.mean_ppl);
  } else {
    if (ckpt_path.empty() || epochs_path.empty())
      throw ConfigError("ppl needs either --generations or --ckpt + --epochs");
    const Checkpoint ck = load_checkpoint(ckpt_path);
    const EpochsFile f = read_epochs_file(epochs_path);
    const Backend backend = make_backend(cfg);
    const PromptTemplate tmpl =
        parse_prompt_template(cfg.textgen.prompt_template);
    const LabelMap labels = label_map_for(f);
    const EpochTensor data = take_split(f, split);

    if (!references_path.empty()) {
      std::vector<std::string> refs;
      const std::string text = read_file(references_path);
      size_t start = 0;
      while (start < text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        start = end + 1;
        if (!line.empty()) refs.push_back(std::move(line));
      }
      report = eval_perplexity_by_class(ck, data, backend, tmpl, labels, &refs);
    } else {
      report = eval_perplexity_by_class(ck, data, backend, tmpl, labels);
    }
  }

  std::string csv;
  const bool fresh = !append || !fs::exists(out_path);
  if (fresh) csv = "n_classes,mean_ppl,mean_bpc,n_sequences\n";
  csv += std::to_string(report.n_classes) + "," +
         format_double(report.mean_ppl) + "," +
         format_double(report.mean_bpc) + "," +
         std::to_string(report.n_sequences) + "\n";
  ensure_parent_dir(out_path);
  if (fresh) {
    write_file(out_path, csv);
  } else {
    write_file(out_path, read_file(out_path) + csv);
  }
  std::printf("n_classes %zu mean ppl %.4f bpc %.4f over %zu sequences\n",
              report.n_classes, report.mean_ppl, report.mean_bpc,
              report.n_sequences);
  std::printf("wrote %s\n", out_path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG-to-text pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--set", sets, "override one config key, e.g. train.lr=0.01");

  auto config = [&] { return load_config(config_path, sets); };

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  size_t classes = 2, per_class = 50, samples = 384;
  uint64_t seed_arg = 0;
  double freq_step = 3.0, amplitude = 10.0, noise = 1.0;
  std::string out_dir;
  auto* seed_opt = synth->add_option("--seed", seed_arg, "generator seed");
  synth->add_option("--classes", classes, "number of classes");
  synth->add_option("--per-class", per_class, "trials per class");
  synth->add_option("--samples", samples, "samples per channel");
  synth->add_option("--freq-step", freq_step, "Hz between class tones");
  synth->add_option("--amplitude", amplitude, "tone amplitude");
  synth->add_option("--noise", noise, "noise sigma");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->callback([&] {
    AppConfig cfg = config();
    const uint64_t seed = seed_opt->count() ? seed_arg : synth_seed(cfg);
    cmd_synth(cfg, classes, per_class, seed, samples, freq_step, amplitude,
              noise, out_dir);
  });

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "manifest -> epoch tensor file");
  std::string manifest_path, epochs_out;
  bool debug = false;
  pre->add_option("--manifest", manifest_path, "manifest.tsv path")->required();
  pre->add_option("--out", epochs_out, "output epochs file")->required();
  pre->add_flag("--debug", debug, "also dump per-trial .filtered.csv files");
  pre->callback(
      [&] { cmd_preprocess(config(), manifest_path, epochs_out, debug); });

  // train
  auto* train = app.add_subcommand("train", "fit the encoder + classifier");
  std::string epochs_path, ckpt_out, metrics_out;
  train->add_option("--epochs-file", epochs_path, "preprocessed epochs file")
      ->required();
  auto* ckpt_opt = train->add_option("--out", ckpt_out, "checkpoint path");
  auto* metrics_opt =
      train->add_option("--metrics", metrics_out, "metrics CSV path");
  train->callback([&] {
    AppConfig cfg = config();
    if (!ckpt_opt->count()) ckpt_out = cfg.paths.checkpoint;
    if (!metrics_opt->count())
      metrics_out =
          (fs::path(cfg.paths.output_dir) / "metrics.csv").string();
    cmd_train(cfg, epochs_path, ckpt_out, metrics_out);
  });

  // eval
  auto* eval = app.add_subcommand("eval", "accuracy report for a checkpoint");
  std::string ckpt_path, eval_out = "eval.csv", eval_split = "val";
  eval->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  eval->add_option("--epochs-file", epochs_path, "preprocessed epochs file")
      ->required();
  eval->add_option("--out", eval_out, "report CSV path");
  eval->add_option("--split", eval_split, "train, val, or all")
      ->check(CLI::IsMember({"train", "val", "all"}));
  eval->callback(
      [&] { cmd_eval(ckpt_path, epochs_path, eval_out, eval_split); });

  // sweep
  auto* sweep = app.add_subcommand("sweep", "data-efficiency curve");
  std::vector<size_t> ks = {10, 25, 50, 100};
  std::string sweep_out = "sweep.csv";
  sweep->add_option("--manifest", manifest_path, "manifest.tsv path")
      ->required();
  sweep->add_option("--k", ks, "training trials per class")->delimiter(',');
  sweep->add_option("--out", sweep_out, "output CSV path");
  sweep->callback([&] { cmd_sweep(config(), manifest_path, ks, sweep_out); });

  // generate
  auto* gen = app.add_subcommand("generate", "class-conditioned generations");
  std::string gen_out = "generations.jsonl", gen_split = "val";
  gen->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  gen->add_option("--epochs-file", epochs_path, "preprocessed epochs file")
      ->required();
  gen->add_option("--out", gen_out, "output JSONL path");
  gen->add_option("--split", gen_split, "train, val, or all")
      ->check(CLI::IsMember({"train", "val", "all"}));
  gen->callback([&] {
    cmd_generate(config(), ckpt_path, epochs_path, gen_out, gen_split);
  });

  // ppl
  auto* ppl = app.add_subcommand("ppl", "perplexity / BPC report");
  std::string generations_path, references_path, ppl_out = "ppl.csv",
              ppl_split = "val";
  bool append = false;
  ppl->add_option("--generations", generations_path,
                  "score an existing generations JSONL");
  ppl->add_option("--ckpt", ckpt_path, "checkpoint path");
  ppl->add_option("--epochs-file", epochs_path, "preprocessed epochs file");
  ppl->add_option("--references", references_path,
                  "newline-separated reference sentences (builtin backend)");
  ppl->add_option("--out", ppl_out, "output CSV path");
  ppl->add_option("--split", ppl_split, "train, val, or all")
      ->check(CLI::IsMember({"train", "val", "all"}));
  ppl->add_flag("--append", append, "append a row instead of rewriting");
  ppl->callback([&] {
    cmd_ppl(config(), generations_path, ckpt_path, epochs_path,
            references_path, ppl_out, ppl_split, append);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
