// delichain: command-line driver for corpus synthesis, pair generation,
// training, inference, scoring, baselines, annotation and gradient checks.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "delichain/annotate.hpp"
#include "delichain/baselines.hpp"
#include "delichain/graph.hpp"
#include "delichain/io.hpp"
#include "delichain/metrics.hpp"
#include "delichain/pipeline.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace delichain;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kNumeric = 4, kService = 5 };

struct RunConfig {
  // paths
  std::string out_dir = "out";
  std::string train, dev, test, input, gold, pred, checkpoint, transcript, chains, embedding_file;

  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string schema = "delidata";

  // synthesis
  int n_train = 60, n_dev = 20, n_test = 20;
  double mean_dialogue_len = 33.0, mean_chain_len = 5.0, intervention_density = 0.3, cross_chain_leak = 0.02;
  int content_vocab = 20;

  // pairs and features
  int window = 0;  // 0 = schema default
  int context_k = kDefaultContextDepth;
  int max_sequence_len = kDefaultMaxSequenceLen;
  std::string sweep_windows = "3,6,9,12,15,18";
  std::string embedding = "hashed";
  std::size_t embedding_dim = kDefaultEmbeddingDim;

  // scorer
  std::vector<std::size_t> hidden{kDefaultHiddenWidth};
  int batch_size = 24, epochs = 16;
  double lr_link = 1e-4, lr_intervention = 1e-5;
  double alpha_link = 1.0, alpha_probing = 0.01, alpha_causal = 0.01;
  bool bidirectional = false, scale_inputs = true;
  double input_scale_floor = 1e-2;

  // inference
  std::string mentions = "gold";
  std::string pair_mode = "windowed";
  double threshold = 0.5;
  double chain_size = 0.0;  // 0 = from the train corpus

  // baselines
  std::string baseline = "lexical";
  std::string baseline_threshold;  // empty = calibrate on dev
  std::string calibration_population = "gold-linked";

  // annotation
  std::string annotator = "replay";
  std::string probing_source = "gold";
  int annotation_window = 25;
  std::string endpoint = HttpAnnotatorConfig{}.endpoint;
  std::string llm_model = HttpAnnotatorConfig{}.model;
  int max_attempts = 3;

  // gradient check
  int gradcheck_draws = 50;
  double gradcheck_step = 1e-5;
  std::size_t gradcheck_dim = 12, gradcheck_hidden = 6, gradcheck_batch = 4;
  double gradcheck_tolerance = 1e-4;
};

// Settings that determine artifact content. Paths, the output directory and
// the worker count are left out; inputs are fingerprinted by content instead.
ojson settings_json(const RunConfig& c) {
  ojson j;
  j["schema"] = c.schema;
  j["n_train"] = c.n_train;
  j["n_dev"] = c.n_dev;
  j["n_test"] = c.n_test;
  j["mean_dialogue_len"] = c.mean_dialogue_len;
  j["mean_chain_len"] = c.mean_chain_len;
  j["intervention_density"] = c.intervention_density;
  j["content_vocab"] = c.content_vocab;
  j["cross_chain_leak"] = c.cross_chain_leak;
  j["window"] = c.window;
  j["context_k"] = c.context_k;
  j["max_sequence_len"] = c.max_sequence_len;
  j["sweep_windows"] = c.sweep_windows;
  j["embedding"] = c.embedding;
  j["embedding_dim"] = c.embedding_dim;
  j["hidden"] = c.hidden;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["lr_link"] = c.lr_link;
  j["lr_intervention"] = c.lr_intervention;
  j["alpha_link"] = c.alpha_link;
  j["alpha_probing"] = c.alpha_probing;
  j["alpha_causal"] = c.alpha_causal;
  j["bidirectional"] = c.bidirectional;
  j["scale_inputs"] = c.scale_inputs;
  j["input_scale_floor"] = c.input_scale_floor;
  j["mentions"] = c.mentions;
  j["pair_mode"] = c.pair_mode;
  j["threshold"] = c.threshold;
  j["chain_size"] = c.chain_size;
  j["baseline"] = c.baseline;
  j["baseline_threshold"] = c.baseline_threshold;
  j["calibration_population"] = c.calibration_population;
  j["annotator"] = c.annotator;
  j["probing_source"] = c.probing_source;
  j["annotation_window"] = c.annotation_window;
  j["endpoint"] = c.endpoint;
  j["llm_model"] = c.llm_model;
  j["max_attempts"] = c.max_attempts;
  j["gradcheck_draws"] = c.gradcheck_draws;
  j["gradcheck_step"] = c.gradcheck_step;
  j["gradcheck_dim"] = c.gradcheck_dim;
  j["gradcheck_hidden"] = c.gradcheck_hidden;
  j["gradcheck_batch"] = c.gradcheck_batch;
  j["gradcheck_tolerance"] = c.gradcheck_tolerance;
  return j;
}

std::string content_hash(std::string_view data) { return hex64(fnv1a64(data)); }

// Collects artifacts in memory and commits them, manifest last.
class Run {
 public:
  Run(std::string command, const RunConfig& config) : command_(std::move(command)), config_(config) {}

  std::string read_input(const std::string& key, const std::string& path) {
    std::string data = read_file(path);
    inputs_[key] = content_hash(data);
    return data;
  }

  void add(const std::string& name, std::string content) { artifacts_.emplace_back(name, std::move(content)); }

  void commit() {
    const fs::path dir = config_.out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
    ojson m;
    m["command"] = command_;
    m["version"] = kVersion;
    m["seed"] = config_.seed;
    const auto settings = settings_json(config_);
    m["config_hash"] = content_hash(settings.dump());
    m["config"] = settings;
    m["inputs"] = inputs_;
    ojson arts = ojson::object();
    for (const auto& [name, content] : artifacts_) {
      write_file_atomic(dir / name, content);
      arts[name] = content_hash(content);
    }
    m["artifacts"] = arts;
    write_file_atomic(dir / (command_ + ".manifest.json"), m.dump(2) + "\n");
  }

 private:
  std::string command_;
  const RunConfig& config_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::pair<std::string, std::string>> artifacts_;
};

const std::string& require_path(const std::string& path, const std::string& key) {
  if (path.empty()) throw ConfigError("'" + key + "' is required for this command");
  if (!fs::is_regular_file(path)) throw ConfigError("'" + key + "' does not name a file: " + path);
  return path;
}

Corpus read_input_corpus(Run& run, const RunConfig& c, const std::string& path, const std::string& key) {
  std::istringstream in(run.read_input(key, require_path(path, key)));
  Corpus corpus = read_corpus(in, schema_from_name(c.schema));
  validate_corpus(corpus);
  return corpus;
}

Schema corpus_schema(const Corpus& corpus, const RunConfig& c) {
  return corpus.dialogues.empty() ? schema_from_name(c.schema) : corpus.dialogues.front().task_schema;
}

int resolve_window(const RunConfig& c, const Corpus& corpus) {
  if (c.window < 0) throw ConfigError("window must be >= 0");
  return c.window == 0 ? default_window(corpus_schema(corpus, c)) : c.window;
}

std::unique_ptr<EmbeddingProvider> make_provider(Run& run, const RunConfig& c) {
  if (c.embedding == "hashed") {
    if (c.embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
    return std::make_unique<HashedBowProvider>(c.embedding_dim);
  }
  if (c.embedding == "file") {
    run.read_input("embedding_file", require_path(c.embedding_file, "embedding_file"));
    return file_embed_provider(c.embedding_file);
  }
  throw ConfigError("embedding must be 'hashed' or 'file', got '" + c.embedding + "'");
}

ContextConfig context_config(const RunConfig& c) {
  if (c.context_k < 0) throw ConfigError("context_k must be >= 0");
  if (c.max_sequence_len < 1) throw ConfigError("max_sequence_len must be >= 1");
  return ContextConfig{c.context_k, c.max_sequence_len};
}

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("'" + key + "' must be a comma-separated list of integers");
    }
  }
  if (out.empty()) throw ConfigError("'" + key + "' is empty");
  return out;
}

std::string dump_corpus(const Corpus& corpus) {
  std::ostringstream ss;
  write_corpus(corpus, ss);
  return ss.str();
}

// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& c) {
  Run run("synth", c);
  SynthConfig sc;
  sc.mean_dialogue_len = c.mean_dialogue_len;
  sc.mean_chain_len = c.mean_chain_len;
  sc.intervention_density = c.intervention_density;
  sc.content_vocab_size = c.content_vocab;
  sc.cross_chain_leak = c.cross_chain_leak;
  sc.schema = schema_from_name(c.schema);
  sc.vocab_seed = c.seed;
  const std::pair<const char*, int> splits[] = {{"train", c.n_train}, {"dev", c.n_dev}, {"test", c.n_test}};
  std::uint64_t offset = 1;
  for (const auto& [name, n] : splits) {
    sc.n_dialogues = n;
    const Corpus corpus = synthesize_corpus(sc, c.seed * 1000 + offset++, name);
    validate_corpus(corpus);
    const auto st = corpus_statistics(corpus);
    std::printf("%-5s dialogues %d utterances %d probing %d causal %d clusters %d mean chain %.2f mean length %.1f\n",
                name, st.dialogues, st.utterances, st.probing, st.causal, st.clusters, st.mean_chain,
                st.mean_dialogue_len);
    run.add(std::string(name) + ".jsonl", dump_corpus(corpus));
  }
  run.commit();
  return kOk;
}

int cmd_pairs(const RunConfig& c) {
  Run run("pairs", c);
  const Corpus train = read_input_corpus(run, c, c.train, "train");
  const int window = resolve_window(c, train);
  std::vector<LabeledPair> pairs;
  for (const auto& d : train.dialogues) {
    auto p = generate_training_pairs(d, train.gold, window);
    pairs.insert(pairs.end(), p.begin(), p.end());
  }
  const auto st = pair_statistics(pairs);
  std::printf("window %d pairs %ld positives %ld negatives %ld ratio %.4f\n", window, st.positives + st.negatives,
              st.positives, st.negatives, st.ratio);
  std::ostringstream dump;
  write_pairs(pairs, dump);
  run.add("pairs.jsonl", dump.str());

  if (!c.dev.empty()) {
    const Corpus dev = read_input_corpus(run, c, c.dev, "dev");
    const auto candidates = parse_int_list(c.sweep_windows, "sweep_windows");
    const auto sweep = sweep_window(dev, candidates);
    ojson j;
    j["chosen"] = sweep.chosen;
    auto pts = ojson::array();
    for (const auto& p : sweep.points) {
      ojson r;
      r["window"] = p.window;
      r["positives"] = p.stats.positives;
      r["negatives"] = p.stats.negatives;
      r["ratio"] = p.stats.ratio;
      r["positive_coverage"] = p.positive_coverage;
      pts.push_back(r);
      std::printf("sweep W=%-3d ratio %.4f coverage %.4f\n", p.window, p.stats.ratio, p.positive_coverage);
    }
    j["points"] = pts;
    std::printf("sweep chose W=%d\n", sweep.chosen);
    run.add("window_sweep.json", j.dump(2) + "\n");
  }
  run.commit();
  return kOk;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig tc;
  tc.batch_size = c.batch_size;
  tc.lr_link = c.lr_link;
  tc.lr_intervention = c.lr_intervention;
  tc.epochs = c.epochs;
  tc.bidirectional = c.bidirectional;
  tc.seed = c.seed;
  tc.scale_inputs = c.scale_inputs;
  tc.input_scale_floor = c.input_scale_floor;
  tc.validate();
  return tc;
}

int cmd_train(const RunConfig& c) {
  Run run("train", c);
  const TrainConfig tc = train_config(c);
  if (c.hidden.empty()) throw ConfigError("hidden must list at least one width");
  const Corpus train = read_input_corpus(run, c, c.train, "train");
  const auto provider = make_provider(run, c);
  const int window = resolve_window(c, train);
  const auto examples = build_training_set(train, *provider, window, context_config(c), c.bidirectional, c.workers);
  if (examples.empty()) throw ValidationError("training corpus yields no pairs");
  JointScorerModel model(provider->dimension(), c.hidden, LossWeights{c.alpha_link, c.alpha_probing, c.alpha_causal},
                         c.seed);
  std::printf("training on %zu pairs (window %d, %zu parameters)\n", examples.size(), window,
              model.parameter_count());
  auto result = delichain::train(std::move(model), examples, tc);
  for (std::size_t e = 0; e < result.history.size(); ++e) std::printf("epoch %2zu loss %.6f\n", e + 1, result.history[e]);
  run.add("checkpoint.json", checkpoint_to_string(Checkpoint{std::move(result.model), tc, result.history}));
  run.commit();
  return kOk;
}

MentionMode mention_mode(const RunConfig& c) {
  if (c.mentions == "gold") return MentionMode::GoldInterventions;
  if (c.mentions == "all") return MentionMode::AllUtterances;
  throw ConfigError("mentions must be 'gold' or 'all', got '" + c.mentions + "'");
}

int cmd_infer(const RunConfig& c) {
  Run run("infer", c);
  const Checkpoint ckpt = checkpoint_from_string(run.read_input("checkpoint", require_path(c.checkpoint, "checkpoint")));
  const Corpus test = read_input_corpus(run, c, c.test, "test");
  const auto provider = make_provider(run, c);
  if (provider->dimension() != ckpt.model.dimension)
    throw ShapeError("embedding dimension " + std::to_string(provider->dimension()) + " does not match checkpoint (" +
                     std::to_string(ckpt.model.dimension) + ")");

  InferenceConfig ic;
  ic.mentions = mention_mode(c);
  if (c.pair_mode == "windowed")
    ic.mode = PairMode::Windowed;
  else if (c.pair_mode == "naive")
    ic.mode = PairMode::Naive;
  else
    throw ConfigError("pair_mode must be 'windowed' or 'naive', got '" + c.pair_mode + "'");
  ic.window = resolve_window(c, test);
  ic.threshold = c.threshold;
  if (ic.mode == PairMode::Naive) {
    if (c.chain_size > 0)
      ic.chain_size_stat = c.chain_size;
    else if (!c.train.empty())
      ic.chain_size_stat = chain_size_stat(read_input_corpus(run, c, c.train, "train"));
    else
      throw ConfigError("naive pair mode needs chain_size or a train corpus to derive it from");
  }
  ic.validate();

  const auto scorer = joint_scorer(ckpt.model, *provider, context_config(c), c.bidirectional);
  const auto pred = predict_corpus(test, scorer, ic, c.workers);
  std::ostringstream clusters, chains, scores;
  write_clustering(pred.clustering, clusters);
  write_chains(pred.chains, chains);
  write_pair_scores(pred.scores, scores);
  std::printf("scored %zu pairs, %zu chains over %zu dialogues\n", pred.scores.size(), pred.chains.size(),
              test.dialogues.size());
  run.add("predictions.jsonl", clusters.str());
  run.add("chains.jsonl", chains.str());
  run.add("pair_scores.jsonl", scores.str());
  run.commit();
  return kOk;
}

// Gold mentions missing from a clustering file were written without a
// cluster; they enter the predicted partition as singletons.
Partition predicted_partition(PredictedClustering pred, const Corpus& gold) {
  for (const auto& [m, role] : gold.gold.labels) {
    if (role == Role::Neither || pred.assignments.count(m)) continue;
    pred.assignments[m] = "\x01singleton/" + to_string(m);
    pred.labels[m] = role;
  }
  return to_partition(pred);
}

int cmd_score(const RunConfig& c) {
  Run run("score", c);
  const Corpus gold = read_input_corpus(run, c, c.gold, "gold");
  std::istringstream pin(run.read_input("pred", require_path(c.pred, "pred")));
  const auto report = score(gold_partition(gold), predicted_partition(read_clustering(pin), gold));
  std::cout << report_table({{"system", report}});
  std::printf("CoNLL F1: %.4f\n", report.conll_f1);
  run.add("score.json", report_json(report));
  run.commit();
  return kOk;
}

int cmd_baseline(const RunConfig& c) {
  Run run("baseline", c);
  BaselineSpec spec;
  spec.kind = baseline_from_name(c.baseline);
  spec.schema = schema_from_name(c.schema);
  std::unique_ptr<EmbeddingProvider> provider;
  if (spec.kind == BaselineKind::Cosine) {
    provider = make_provider(run, c);
    spec.provider = provider.get();
  }

  CalibrationArtifact cal{spec.kind, 0.0, ""};
  if (!c.baseline_threshold.empty()) {
    try {
      std::size_t used = 0;
      cal.threshold = std::stod(c.baseline_threshold, &used);
      if (used != c.baseline_threshold.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("baseline_threshold must be a number");
    }
  } else {
    const Corpus dev = read_input_corpus(run, c, c.dev, "dev");
    if (!dev.dialogues.empty()) spec.schema = dev.dialogues.front().task_schema;
    CalibrationPopulation pop;
    if (c.calibration_population == "gold-linked")
      pop = CalibrationPopulation::GoldLinked;
    else if (c.calibration_population == "all-candidates")
      pop = CalibrationPopulation::AllCandidates;
    else
      throw ConfigError("calibration_population must be 'gold-linked' or 'all-candidates'");
    cal.threshold = calibrate(calibration_pairs(dev, pop), spec);
    cal.dev_split_hash = corpus_hash(dev);
  }
  spec.threshold = cal.threshold;
  spec.validate();
  std::printf("%s threshold %.6f\n", std::string(baseline_name(spec.kind)).c_str(), cal.threshold);
  run.add("calibration.json", calibration_to_json(cal));

  if (!c.test.empty()) {
    const Corpus test = read_input_corpus(run, c, c.test, "test");
    if (!test.dialogues.empty()) spec.schema = test.dialogues.front().task_schema;
    const auto pred = run_baseline(test, spec, mention_mode(c));
    const auto report = score(gold_partition(test), to_partition(pred));
    std::cout << report_table({{std::string(baseline_name(spec.kind)), report}});
    std::ostringstream out;
    write_clustering(pred, out);
    run.add("baseline_predictions.jsonl", out.str());
    run.add("baseline_score.json", report_json(report));
  }
  run.commit();
  return kOk;
}

// Records every raw reply so a run can be replayed.
class RecordingAnnotator : public AnnotatorClient {
 public:
  explicit RecordingAnnotator(AnnotatorClient& inner) : inner_(inner) {}
  std::string complete(const Utterance& probing, std::span<const Utterance> context, PromptTemplate t) override {
    std::string raw = inner_.complete(probing, context, t);
    std::lock_guard lock(mu_);
    entries_[{probing.id, t}] = raw;
    return raw;
  }
  std::map<std::pair<std::string, PromptTemplate>, std::string> entries() const {
    std::lock_guard lock(mu_);
    return entries_;
  }

 private:
  AnnotatorClient& inner_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, PromptTemplate>, std::string> entries_;
};

int cmd_annotate(const RunConfig& c) {
  Run run("annotate", c);
  const Corpus corpus = read_input_corpus(run, c, c.input, "input");
  if (c.annotation_window < 0) throw ConfigError("annotation_window must be >= 0");

  std::unique_ptr<AnnotatorClient> client;
  HttpAnnotator* http = nullptr;
  if (c.annotator == "replay") {
    std::istringstream in(run.read_input("transcript", require_path(c.transcript, "transcript")));
    client = std::make_unique<ReplayAnnotator>(read_transcript(in));
  } else if (c.annotator == "http") {
    HttpAnnotatorConfig hc;
    hc.endpoint = c.endpoint;
    hc.model = c.llm_model;
    hc.max_attempts = c.max_attempts;
    auto h = std::make_unique<HttpAnnotator>(hc);
    http = h.get();
    client = std::move(h);
  } else {
    throw ConfigError("annotator must be 'replay' or 'http', got '" + c.annotator + "'");
  }
  RecordingAnnotator recorder(*client);
  const MappingOptions opts{c.annotation_window, c.workers};

  std::vector<MentionRef> probing;
  if (c.probing_source == "gold") {
    for (const auto& [m, role] : corpus.gold.labels)
      if (role == Role::Probing) probing.push_back(m);
    // temporal order per dialogue, dialogues in corpus order
    std::map<std::string, std::size_t> order;
    for (std::size_t d = 0; d < corpus.dialogues.size(); ++d) order[corpus.dialogues[d].id] = d;
    std::sort(probing.begin(), probing.end(), [&](const MentionRef& a, const MentionRef& b) {
      return std::pair(order.at(a.dialogue_id), a.index) < std::pair(order.at(b.dialogue_id), b.index);
    });
  } else if (c.probing_source == "detect") {
    probing = detect_probing(corpus.dialogues, recorder, opts);
  } else {
    throw ConfigError("probing_source must be 'gold' or 'detect', got '" + c.probing_source + "'");
  }

  const GoldMap map = gold_cluster_mapping(corpus.dialogues, probing, recorder, opts);
  Corpus annotated{corpus.dialogues, map.to_gold(probing), corpus.split_name};
  validate_corpus(annotated);

  // transcript in corpus order
  std::vector<TranscriptEntry> transcript;
  const auto recorded = recorder.entries();
  for (const auto& d : corpus.dialogues)
    for (const auto& u : d.utterances)
      for (auto t : {PromptTemplate::ProbingDetection, PromptTemplate::CausalExtraction})
        if (auto it = recorded.find({u.id, t}); it != recorded.end()) transcript.push_back({u.id, t, it->second});
  std::ostringstream tout;
  write_transcript(transcript, tout);

  std::ostringstream events;
  for (const auto& e : map.responses) {
    ojson j;
    j["utterance_id"] = e.utterance_id;
    j["context"] = e.context;
    j["raw"] = e.raw;
    j["causal_refs"] = e.causal_refs;
    j["rationales"] = e.rationales;
    j["warnings"] = e.warnings;
    events << j.dump() << "\n";
  }
  ojson summary;
  summary["probing"] = probing.size();
  summary["labelled"] = map.labels.size();
  summary["collisions"] = map.collisions;
  summary["log"] = map.log;
  if (http) summary["http_warnings"] = http->warnings();

  std::printf("annotated %zu probing interventions, %zu labelled utterances, %d collisions\n", probing.size(),
              map.labels.size(), map.collisions);
  for (const auto& line : map.log) std::fprintf(stderr, "annotate: %s\n", line.c_str());
  run.add("gold_map.jsonl", dump_corpus(annotated));
  run.add("transcript.jsonl", tout.str());
  run.add("annotation_log.jsonl", events.str());
  run.add("annotation_summary.json", summary.dump(2) + "\n");
  run.commit();
  return kOk;
}

int cmd_gradcheck(const RunConfig& c) {
  Run run("gradcheck", c);
  GradCheckOptions o;
  o.draws = c.gradcheck_draws;
  o.step = c.gradcheck_step;
  o.dimension = c.gradcheck_dim;
  o.hidden = c.gradcheck_hidden;
  o.batch = c.gradcheck_batch;
  o.seed = c.seed;
  const auto draws = run_grad_checks(o);
  double worst = 0.0;
  ojson j;
  auto arr = ojson::array();
  for (const auto& d : draws) {
    worst = std::max(worst, d.report.max_relative_error);
    ojson r;
    r["seed"] = d.seed;
    r["bidirectional"] = d.bidirectional;
    r["max_relative_error"] = d.report.max_relative_error;
    r["checked"] = d.report.checked;
    r["skipped_kinks"] = d.report.skipped_kinks;
    r["worst_parameter"] = d.report.worst_parameter;
    arr.push_back(r);
  }
  const bool pass = worst < c.gradcheck_tolerance;
  j["max_relative_error"] = worst;
  j["tolerance"] = c.gradcheck_tolerance;
  j["pass"] = pass;
  j["draws"] = arr;
  std::printf("gradcheck %d draws, max relative error %.3e (tolerance %.1e): %s\n", o.draws, worst,
              c.gradcheck_tolerance, pass ? "PASS" : "FAIL");
  run.add("gradcheck.json", j.dump(2) + "\n");
  run.commit();
  return pass ? kOk : kNumeric;
}

int cmd_report(const RunConfig& c) {
  std::ifstream in(require_path(c.chains, "chains"));
  const auto chains = read_chains(in);
  std::map<std::string, std::vector<const DeliberationChain*>> by_dialogue;
  int degenerate = 0;
  for (const auto& ch : chains) {
    by_dialogue[ch.dialogue_id].push_back(&ch);
    degenerate += ch.degenerate;
  }
  for (const auto& [dlg, list] : by_dialogue) {
    std::printf("%s\n", dlg.c_str());
    for (const auto* ch : list) {
      std::string members;
      for (const auto& m : ch->members)
        members += (members.empty() ? "" : " -> ") + std::to_string(m.index) + role_code(m.role);
      std::printf("  %-24s %s%s\n", ch->cluster_label.c_str(), members.c_str(), ch->degenerate ? "  [degenerate]" : "");
    }
  }
  std::printf("%zu chains in %zu dialogues, %d degenerate\n", chains.size(), by_dialogue.size(), degenerate);
  return kOk;
}

void register_options(CLI::App& app, RunConfig& c) {
  const char* paths = "Paths";
  app.add_option("--out_dir", c.out_dir, "Directory for artifacts and the run manifest")->group(paths);
  app.add_option("--train", c.train, "Training corpus (JSON lines or TSV)")->group(paths);
  app.add_option("--dev", c.dev, "Development corpus")->group(paths);
  app.add_option("--test", c.test, "Test corpus")->group(paths);
  app.add_option("--input", c.input, "Corpus to annotate")->group(paths);
  app.add_option("--gold", c.gold, "Gold corpus for scoring")->group(paths);
  app.add_option("--pred", c.pred, "Predicted clustering for scoring")->group(paths);
  app.add_option("--checkpoint", c.checkpoint, "Model checkpoint for inference")->group(paths);
  app.add_option("--transcript", c.transcript, "Annotation transcript to replay")->group(paths);
  app.add_option("--chains", c.chains, "Chain export to summarize (report)")->group(paths);
  app.add_option("--embedding_file", c.embedding_file, "Precomputed vectors when embedding=file")->group(paths);

  const char* run = "Run";
  app.add_option("--seed", c.seed, "Seed for every stochastic step")->required()->group(run);
  app.add_option("--workers", c.workers, "Upper bound on worker threads")->check(CLI::PositiveNumber)->group(run);
  app.add_option("--schema", c.schema, "Entity schema: delidata or wtd")->group(run);

  const char* synth = "Synthesis";
  app.add_option("--n_train", c.n_train, "Synthetic train dialogues")->group(synth);
  app.add_option("--n_dev", c.n_dev, "Synthetic dev dialogues")->group(synth);
  app.add_option("--n_test", c.n_test, "Synthetic test dialogues")->group(synth);
  app.add_option("--mean_dialogue_len", c.mean_dialogue_len, "Mean utterances per dialogue")->group(synth);
  app.add_option("--mean_chain_len", c.mean_chain_len, "Mean chain length")->group(synth);
  app.add_option("--intervention_density", c.intervention_density, "Share of utterances inside chains")->group(synth);
  app.add_option("--content_vocab", c.content_vocab, "Topic word pool size")->group(synth);
  app.add_option("--cross_chain_leak", c.cross_chain_leak, "Chance of mentioning another chain's topic")->group(synth);

  const char* feat = "Pairs and features";
  app.add_option("--window", c.window, "Training/inference window W; 0 picks 18 (delidata) or 9 (wtd)")->group(feat);
  app.add_option("--context_k", c.context_k, "Context utterances before the consequent")->group(feat);
  app.add_option("--max_sequence_len", c.max_sequence_len, "Token budget of a rendered pair")->group(feat);
  app.add_option("--sweep_windows", c.sweep_windows, "Candidate windows for the dev sweep (pairs)")->group(feat);
  app.add_option("--embedding", c.embedding, "Embedding provider: hashed or file")->group(feat);
  app.add_option("--embedding_dim", c.embedding_dim, "Hashed bag-of-words dimension")->group(feat);

  const char* sc = "Scorer";
  app.add_option("--hidden", c.hidden, "Hidden layer widths, comma separated")->delimiter(',')->group(sc);
  app.add_option("--batch_size", c.batch_size, "Mini-batch size")->group(sc);
  app.add_option("--epochs", c.epochs, "Training epochs")->group(sc);
  app.add_option("--lr_link", c.lr_link, "Learning rate of the link head")->group(sc);
  app.add_option("--lr_intervention", c.lr_intervention, "Learning rate of the intervention heads")->group(sc);
  app.add_option("--alpha_link", c.alpha_link, "Loss weight of the link term")->group(sc);
  app.add_option("--alpha_probing", c.alpha_probing, "Loss weight of the probing term")->group(sc);
  app.add_option("--alpha_causal", c.alpha_causal, "Loss weight of the causal term")->group(sc);
  app.add_option("--bidirectional", c.bidirectional, "Train and score pairs in both marker orders")->group(sc);
  app.add_option("--scale_inputs", c.scale_inputs, "Fit per-component input scaling before training")->group(sc);
  app.add_option("--input_scale_floor", c.input_scale_floor, "Lower bound on the fitted component RMS")->group(sc);

  const char* inf = "Inference";
  app.add_option("--mentions", c.mentions, "Mention set: gold (interventions) or all (utterances)")->group(inf);
  app.add_option("--pair_mode", c.pair_mode, "Candidate pairs: windowed or naive")->group(inf);
  app.add_option("--threshold", c.threshold, "Link threshold for clustering")->group(inf);
  app.add_option("--chain_size", c.chain_size, "C in tau = G x C for naive pruning; 0 derives it from --train")
      ->group(inf);

  const char* bl = "Baselines";
  app.add_option("--baseline", c.baseline, "Baseline: lexical, entity or cosine")->group(bl);
  app.add_option("--baseline_threshold", c.baseline_threshold, "Fixed threshold; empty calibrates on --dev")->group(bl);
  app.add_option("--calibration_population", c.calibration_population,
                 "Dev pairs averaged for calibration: gold-linked or all-candidates")
      ->group(bl);

  const char* an = "Annotation";
  app.add_option("--annotator", c.annotator, "Annotator client: replay or http")->group(an);
  app.add_option("--probing_source", c.probing_source, "Probing list: gold labels or detect")->group(an);
  app.add_option("--annotation_window", c.annotation_window, "Context utterances shown; 0 = full history")->group(an);
  app.add_option("--endpoint", c.endpoint, "Chat-completion endpoint (http)")->group(an);
  app.add_option("--llm_model", c.llm_model, "Model name sent to the endpoint (http)")->group(an);
  app.add_option("--max_attempts", c.max_attempts, "Attempts per request (http)")->group(an);

  const char* gc = "Gradient check";
  app.add_option("--gradcheck_draws", c.gradcheck_draws, "Random model/batch draws")->group(gc);
  app.add_option("--gradcheck_step", c.gradcheck_step, "Central difference step")->group(gc);
  app.add_option("--gradcheck_dim", c.gradcheck_dim, "Embedding dimension of the checked models")->group(gc);
  app.add_option("--gradcheck_hidden", c.gradcheck_hidden, "Hidden width of the checked models")->group(gc);
  app.add_option("--gradcheck_batch", c.gradcheck_batch, "Examples per checked batch")->group(gc);
  app.add_option("--gradcheck_tolerance", c.gradcheck_tolerance, "Maximum accepted relative error")->group(gc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deliberation chain construction: synthesis, training, inference, scoring and annotation.\n"
               "Settings come from a flat key=value file (--config) with any flag overriding it.\n"
               "The http annotator reads its credential from DELICHAIN_API_KEY.\n"
               "Exit codes: 0 ok, 2 config, 3 data validation, 4 numeric, 5 external service."};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "Flat key=value settings file");
  app.allow_config_extras(false);
  app.fallthrough();
  app.require_subcommand(1);

  RunConfig config;
  register_options(app, config);
  std::map<std::string, int (*)(const RunConfig&)> commands = {
      {"synth", cmd_synth},   {"pairs", cmd_pairs},       {"train", cmd_train},         {"infer", cmd_infer},
      {"score", cmd_score},   {"baseline", cmd_baseline}, {"annotate", cmd_annotate},   {"gradcheck", cmd_gradcheck},
      {"report", cmd_report}};
  const std::map<std::string, std::string> help = {
      {"synth", "Write synthetic train/dev/test corpora"},
      {"pairs", "Dump windowed training pairs; with --dev, sweep candidate windows"},
      {"train", "Train the joint scorer and write a checkpoint"},
      {"infer", "Predict clusters and chains for --test"},
      {"score", "Score --pred against --gold (MUC, B3, CEAFe, CoNLL)"},
      {"baseline", "Calibrate a similarity baseline on --dev and run it on --test"},
      {"annotate", "Map gold clusters from annotator replies (replay or http)"},
      {"gradcheck", "Compare analytic gradients with central differences"},
      {"report", "Summarize a chain export"}};
  for (const auto& [name, fn] : commands) app.add_subcommand(name, help.at(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return commands.at(name)(config);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s: configuration error: %s\n", name.c_str(), e.what());
    return kConfig;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "%s: data validation error: %s\n", name.c_str(), e.what());
    return kData;
  } catch (const TruncationError& e) {
    std::fprintf(stderr, "%s: data validation error: %s\n", name.c_str(), e.what());
    return kData;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "%s: data validation error: %s\n", name.c_str(), e.what());
    return kData;
  } catch (const IoError& e) {
    std::fprintf(stderr, "%s: i/o error: %s\n", name.c_str(), e.what());
    return kData;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "%s: numeric failure: %s\n", name.c_str(), e.what());
    return kNumeric;
  } catch (const ServiceError& e) {
    std::fprintf(stderr, "%s: external service failure: %s\n", name.c_str(), e.what());
    return kService;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s: internal error: %s\n", name.c_str(), e.what());
    return kInternal;
  }
}
