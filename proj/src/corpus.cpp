#include "delichain/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "delichain/io.hpp"

namespace delichain {

using nlohmann::json;
using nlohmann::ordered_json;

const Utterance& Dialogue::at(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= utterances.size())
    throw ValidationError("utterance " + std::to_string(index) + " outside dialogue '" + id + "'");
  return utterances[static_cast<std::size_t>(index)];
}

std::string utterance_id(std::string_view dialogue_id, int index) {
  return std::string(dialogue_id) + "#" + std::to_string(index);
}

Role GoldClustering::role(const MentionRef& m) const {
  auto it = labels.find(m);
  return it == labels.end() ? Role::Neither : it->second;
}

std::optional<std::string> GoldClustering::cluster_of(const MentionRef& m) const {
  auto it = assignments.find(m);
  if (it == assignments.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, std::vector<MentionRef>> GoldClustering::clusters() const {
  std::map<std::string, std::vector<MentionRef>> out;
  for (const auto& [m, label] : assignments) out[label].push_back(m);
  return out;
}

std::vector<int> GoldClustering::interventions(const std::string& dialogue_id) const {
  std::vector<int> out;
  auto it = labels.lower_bound(MentionRef{dialogue_id, INT32_MIN});
  for (; it != labels.end() && it->first.dialogue_id == dialogue_id; ++it)
    if (it->second != Role::Neither) out.push_back(it->first.index);
  return out;
}

GoldClustering GoldClustering::restricted_to(const std::string& dialogue_id) const {
  GoldClustering out;
  for (const auto& [m, l] : assignments)
    if (m.dialogue_id == dialogue_id) out.assignments.emplace(m, l);
  for (const auto& [m, r] : labels)
    if (m.dialogue_id == dialogue_id) out.labels.emplace(m, r);
  return out;
}

const Dialogue* Corpus::find(const std::string& dialogue_id) const {
  for (const auto& d : dialogues)
    if (d.id == dialogue_id) return &d;
  return nullptr;
}

namespace {

void check_split(const std::string& split) {
  if (split != "train" && split != "dev" && split != "test")
    throw ValidationError("split must be one of train/dev/test, got '" + split + "'");
}

// Cluster-level invariants; `where` maps a cluster label to a location hint.
void validate_clusters(const Corpus& corpus,
                       const std::map<std::string, std::size_t>* first_line = nullptr) {
  auto hint = [&](const std::string& label) {
    if (!first_line) return std::string();
    auto it = first_line->find(label);
    return it == first_line->end() ? std::string() : " (first seen on line " + std::to_string(it->second) + ")";
  };
  for (const auto& [m, label] : corpus.gold.assignments) {
    const auto* d = corpus.find(m.dialogue_id);
    if (!d || m.index < 0 || static_cast<std::size_t>(m.index) >= d->size())
      throw ValidationError("gold cluster '" + label + "' references missing utterance " + to_string(m));
    const Role r = corpus.gold.role(m);
    if (r == Role::Neither)
      throw ValidationError("cluster member " + to_string(m) + " is labeled N" + hint(label));
  }
  for (const auto& [m, r] : corpus.gold.labels) {
    const auto* d = corpus.find(m.dialogue_id);
    if (!d || m.index < 0 || static_cast<std::size_t>(m.index) >= d->size())
      throw ValidationError("label references missing utterance " + to_string(m));
  }
  for (const auto& [label, members] : corpus.gold.clusters()) {
    if (members.size() < 2)
      throw ValidationError("gold cluster '" + label + "' is a singleton" + hint(label));
    for (const auto& m : members)
      if (m.dialogue_id != members.front().dialogue_id)
        throw ValidationError("gold cluster '" + label + "' spans dialogues '" +
                              members.front().dialogue_id + "' and '" + m.dialogue_id + "'" + hint(label));
  }
}

}  // namespace

void validate_corpus(const Corpus& corpus) {
  check_split(corpus.split_name);
  std::set<std::string> ids;
  for (const auto& d : corpus.dialogues) {
    if (!ids.insert(d.id).second) throw ValidationError("duplicate dialogue id '" + d.id + "'");
    if (d.task_schema != corpus.dialogues.front().task_schema)
      throw ValidationError("dialogues mix entity schemas");
    std::set<std::string> uids;
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
      const auto& u = d.utterances[i];
      if (u.index != static_cast<int>(i))
        throw ValidationError("dialogue '" + d.id + "': utterance at position " + std::to_string(i) +
                              " has index " + std::to_string(u.index));
      if (trim(u.text).empty())
        throw ValidationError("dialogue '" + d.id + "': utterance " + std::to_string(i) + " has empty text");
      if (!uids.insert(u.id).second)
        throw ValidationError("dialogue '" + d.id + "': duplicate utterance id '" + u.id + "'");
    }
  }
  validate_clusters(corpus);
}

namespace {

struct RawRecord {
  std::string dialogue_id;
  int index = 0;
  std::string speaker;
  std::string text;
  Role label = Role::Neither;
  std::string cluster_id;
  std::size_t line = 0;
};

std::string unescape_tsv(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[++i];
      out.push_back(n == 't' ? '\t' : n == 'n' ? '\n' : n);
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto p = line.find('\t', start);
    out.push_back(line.substr(start, p == std::string::npos ? std::string::npos : p - start));
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return out;
}

RawRecord record_from_json(const json& j, std::size_t line) {
  RawRecord r;
  r.line = line;
  try {
    r.dialogue_id = j.at("dialogue_id").get<std::string>();
    r.index = j.at("index").get<int>();
    r.speaker = j.at("speaker").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.label = role_from_code(j.at("label").get<std::string>());
    if (j.contains("cluster_id") && !j.at("cluster_id").is_null())
      r.cluster_id = j.at("cluster_id").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed record: ") + e.what(), line);
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line);
  }
  return r;
}

RawRecord record_from_tsv(const std::string& raw, std::size_t line) {
  auto cols = split_tabs(raw);
  if (cols.size() != 6) throw ParseError("expected 6 tab-separated columns, got " + std::to_string(cols.size()), line);
  RawRecord r;
  r.line = line;
  r.dialogue_id = unescape_tsv(cols[0]);
  try {
    std::size_t used = 0;
    r.index = std::stoi(cols[1], &used);
    if (used != cols[1].size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ParseError("index '" + cols[1] + "' is not an integer", line);
  }
  r.speaker = unescape_tsv(cols[2]);
  r.text = unescape_tsv(cols[3]);
  try {
    r.label = role_from_code(cols[4]);
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line);
  }
  r.cluster_id = unescape_tsv(cols[5]);
  return r;
}

constexpr std::string_view kTsvHeader = "dialogue_id\tindex\tspeaker\ttext\tlabel\tcluster_id";

}  // namespace

Corpus read_corpus(std::istream& in, Schema fallback_schema) {
  Corpus corpus;
  Schema schema = fallback_schema;
  std::vector<RawRecord> records;
  std::string line;
  std::size_t lineno = 0;
  enum class Kind { Unknown, Jsonl, Tsv } kind = Kind::Unknown;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (kind == Kind::Unknown) {
      if (line == kTsvHeader) {
        kind = Kind::Tsv;
        continue;
      }
      kind = Kind::Jsonl;
    }
    if (kind == Kind::Tsv) {
      records.push_back(record_from_tsv(line, lineno));
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!j.is_object()) throw ParseError("record is not a JSON object", lineno);
    if (j.contains("format")) {
      if (j["format"] != "delichain-corpus") throw ParseError("unknown file format tag", lineno);
      try {
        if (j.contains("split")) corpus.split_name = j["split"].get<std::string>();
        if (j.contains("schema")) schema = schema_from_name(j["schema"].get<std::string>());
      } catch (const std::exception& e) {
        throw ParseError(std::string("bad header: ") + e.what(), lineno);
      }
      continue;
    }
    records.push_back(record_from_json(j, lineno));
  }

  std::map<std::string, std::size_t> dialogue_pos;
  std::vector<std::vector<RawRecord>> grouped;
  for (auto& r : records) {
    auto [it, fresh] = dialogue_pos.emplace(r.dialogue_id, grouped.size());
    if (fresh) grouped.emplace_back();
    grouped[it->second].push_back(std::move(r));
  }

  std::map<std::string, std::size_t> first_line;
  for (auto& group : grouped) {
    std::stable_sort(group.begin(), group.end(),
                     [](const RawRecord& a, const RawRecord& b) { return a.index < b.index; });
    Dialogue d;
    d.id = group.front().dialogue_id;
    d.task_schema = schema;
    for (std::size_t i = 0; i < group.size(); ++i) {
      const auto& r = group[i];
      if (r.index != static_cast<int>(i)) {
        if (r.index < static_cast<int>(i))
          throw ParseError("duplicate utterance index " + std::to_string(r.index) + " in dialogue '" + d.id + "'", r.line);
        throw ParseError("gap before utterance index " + std::to_string(r.index) + " in dialogue '" + d.id + "'", r.line);
      }
      if (trim(r.text).empty()) throw ParseError("empty utterance text", r.line);
      if (r.label == Role::Neither && !r.cluster_id.empty())
        throw ParseError("utterance labeled N carries cluster id '" + r.cluster_id + "'", r.line);
      d.utterances.push_back(Utterance{utterance_id(d.id, r.index), r.speaker, r.text, r.index});
      const MentionRef m{d.id, r.index};
      if (r.label != Role::Neither) corpus.gold.labels.emplace(m, r.label);
      if (!r.cluster_id.empty()) {
        corpus.gold.assignments.emplace(m, r.cluster_id);
        first_line.emplace(r.cluster_id, r.line);
      }
    }
    corpus.dialogues.push_back(std::move(d));
  }
  check_split(corpus.split_name);
  validate_clusters(corpus, &first_line);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, Schema fallback_schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus '" + path.string() + "'");
  return read_corpus(in, fallback_schema);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  validate_corpus(corpus);
  ordered_json header;
  header["format"] = "delichain-corpus";
  header["version"] = 1;
  header["split"] = corpus.split_name;
  header["schema"] = corpus.dialogues.empty() ? "delidata"
                                              : std::string(schema_name(corpus.dialogues.front().task_schema));
  out << header.dump() << '\n';
  for (const auto& d : corpus.dialogues) {
    for (const auto& u : d.utterances) {
      const MentionRef m{d.id, u.index};
      ordered_json rec;
      rec["dialogue_id"] = d.id;
      rec["index"] = u.index;
      rec["speaker"] = u.speaker;
      rec["text"] = u.text;
      rec["label"] = std::string(1, role_code(corpus.gold.role(m)));
      rec["cluster_id"] = corpus.gold.cluster_of(m).value_or("");
      out << rec.dump() << '\n';
    }
  }
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ostringstream ss;
  write_corpus(corpus, ss);
  write_file_atomic(path, ss.str());
}

// ---------------------------------------------------------------------------
// Synthesis

namespace {

const std::vector<std::string> kFiller = {
    "i", "think", "we", "should", "maybe", "the", "so", "it", "is", "that", "this", "right",
    "well", "then", "just", "also", "really", "um", "like", "one", "both", "all", "good", "now",
    "go", "with", "for", "and", "but", "not", "if", "be", "was", "do", "have", "get", "see", "there"};

const std::vector<std::string> kProbingCues = {"why", "can you explain", "what about", "are you sure about",
                                               "how come", "wait why", "could you say more on"};
const std::vector<std::string> kCausalCues = {"i would pick", "it has to be", "we need", "my guess is",
                                              "definitely", "the rule says"};
const std::vector<std::string> kNeutralCues = {"ok", "yeah", "lol", "hmm", "sounds good", "agreed", "nice"};

const std::vector<std::string> kSpeakers = {"Guinea pig", "Koala", "Walrus", "Platypus", "Lynx",
                                            "Jaguar", "Zoë", "Okapi", "Narwhal", "Ibis", "Tapir"};

const std::vector<std::string> kDeliEntities = {"A", "E", "U", "O", "K", "D", "M", "T", "S",
                                                "2", "3", "4", "5", "6", "7", "8", "9"};
const std::vector<std::string> kWtdEntities = {"red", "blue", "green", "purple", "yellow",
                                               "10", "20", "30", "40", "50"};

std::vector<std::string> content_vocabulary(std::uint64_t vocab_seed, std::size_t n) {
  static const std::string consonants = "bdfgklmnprstvz";
  static const std::string vowels = "aeiou";
  Rng rng(vocab_seed ^ 0x5eedc0de5eedc0deULL);
  std::set<std::string> seen(kFiller.begin(), kFiller.end());
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w;
    const int syll = rng.between(2, 3);
    for (int s = 0; s < syll; ++s) {
      w.push_back(consonants[rng.below(consonants.size())]);
      w.push_back(vowels[rng.below(vowels.size())]);
    }
    if (seen.insert(w).second) out.push_back(w);
  }
  return out;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

template <typename T>
void shuffle(Rng& rng, std::vector<T>& v) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

int sample_chain_length(Rng& rng, double mean) {
  // 2 + Binomial(n, p) with n*p = mean - 2.
  const double excess = mean - 2.0;
  if (excess <= 0.0) return 2;
  const int n = std::max(1, static_cast<int>(std::lround(2.0 * excess)));
  const double p = std::min(1.0, excess / n);
  int len = 2;
  for (int t = 0; t < n; ++t) len += rng.bernoulli(p) ? 1 : 0;
  return len;
}

struct PlantedChain {
  std::vector<int> positions;
  std::vector<Role> roles;
  std::string topic, entity;
};

std::string compose(Rng& rng, const std::string& cue, std::vector<std::string> body, char end) {
  const int fillers = rng.between(2, 5);
  for (int f = 0; f < fillers; ++f) body.push_back(pick(rng, kFiller));
  shuffle(rng, body);
  std::string text = cue;
  for (const auto& w : body) {
    if (!text.empty()) text += ' ';
    text += w;
  }
  text.push_back(end);
  return text;
}

// Upper bound on chains per dialogue; each takes its own topic word.
int n_max_chains(const SynthConfig& c) {
  const double longest = std::ceil(c.mean_dialogue_len * 1.3);
  return std::max(1, static_cast<int>(std::lround(longest * c.intervention_density / c.mean_chain_len)));
}

}  // namespace

Corpus synthesize_corpus(const SynthConfig& config, std::uint64_t seed, std::string split_name) {
  if (config.mean_chain_len < 2.0) throw ConfigError("mean_chain_len must be at least 2");
  if (config.n_dialogues < 0) throw ConfigError("n_dialogues must be non-negative");
  if (config.mean_chain_len > config.mean_dialogue_len)
    throw ConfigError("infeasible synthesis config: chains longer than dialogues");
  if (config.intervention_density <= 0.0 || config.intervention_density > 0.8)
    throw ConfigError("intervention_density must be in (0, 0.8]");
  if (!(config.cross_chain_leak >= 0.0 && config.cross_chain_leak <= 1.0))
    throw ConfigError("cross_chain_leak must be in [0, 1]");
  check_split(split_name);

  if (config.content_vocab_size < 2 * n_max_chains(config))
    throw ConfigError("content_vocab_size too small for the chains of one dialogue");
  const auto vocab = content_vocabulary(config.vocab_seed, static_cast<std::size_t>(config.content_vocab_size));
  const auto& entities = config.schema == Schema::Delidata ? kDeliEntities : kWtdEntities;
  Rng rng(seed);
  Corpus corpus;
  corpus.split_name = split_name;

  for (int di = 0; di < config.n_dialogues; ++di) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "%s-%04d", split_name.c_str(), di);
    Dialogue d;
    d.id = idbuf;
    d.task_schema = config.schema;
    const int len = std::max(2, static_cast<int>(std::lround(config.mean_dialogue_len * rng.uniform(0.7, 1.3))));
    const int n_chains =
        std::max(1, static_cast<int>(std::lround(len * config.intervention_density / config.mean_chain_len)));

    std::vector<bool> used(static_cast<std::size_t>(len), false);
    std::vector<PlantedChain> chains;
    std::set<std::string> taken_words;
    for (int c = 0; c < n_chains; ++c) {
      const int clen = std::min(sample_chain_length(rng, config.mean_chain_len), len);
      const int span = static_cast<int>(std::ceil(1.5 * clen)) + 1;
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const int start = rng.between(0, len - 1);
        std::vector<int> free;
        for (int p = start; p < std::min(len, start + span); ++p)
          if (!used[static_cast<std::size_t>(p)]) free.push_back(p);
        if (static_cast<int>(free.size()) < clen) continue;
        shuffle(rng, free);
        free.resize(static_cast<std::size_t>(clen));
        std::sort(free.begin(), free.end());
        PlantedChain pc;
        pc.positions = free;
        for (int k = 0; k < clen; ++k) {
          Role r = (k == 0) ? Role::Causal : (k == clen - 1) ? Role::Probing
                                                              : (rng.bernoulli(0.2) ? Role::Probing : Role::Causal);
          pc.roles.push_back(r);
          used[static_cast<std::size_t>(free[static_cast<std::size_t>(k)])] = true;
        }
        do pc.topic = pick(rng, vocab); while (!taken_words.insert(pc.topic).second);
        pc.entity = pick(rng, entities);
        chains.push_back(std::move(pc));
        placed = true;
      }
      if (!placed) {
        if (chains.empty())
          throw ConfigError("infeasible synthesis config: cannot place a chain of length " +
                            std::to_string(clen) + " in a dialogue of length " + std::to_string(len));
        break;
      }
    }

    std::vector<int> owner(static_cast<std::size_t>(len), -1);
    std::vector<int> rank(static_cast<std::size_t>(len), -1);
    for (std::size_t c = 0; c < chains.size(); ++c)
      for (std::size_t k = 0; k < chains[c].positions.size(); ++k) {
        owner[static_cast<std::size_t>(chains[c].positions[k])] = static_cast<int>(c);
        rank[static_cast<std::size_t>(chains[c].positions[k])] = static_cast<int>(k);
      }

    std::vector<std::string> speakers = kSpeakers;
    shuffle(rng, speakers);
    speakers.resize(static_cast<std::size_t>(rng.between(3, 5)));

    for (int p = 0; p < len; ++p) {
      const int c = owner[static_cast<std::size_t>(p)];
      std::string text;
      if (c >= 0) {
        const auto& pc = chains[static_cast<std::size_t>(c)];
        const Role role = pc.roles[static_cast<std::size_t>(rank[static_cast<std::size_t>(p)])];
        std::vector<std::string> body;
        body.push_back(pc.topic);
        if (rng.bernoulli(0.5)) body.push_back(pc.entity);
        if (chains.size() > 1 && rng.bernoulli(config.cross_chain_leak)) {
          const auto& other = chains[(static_cast<std::size_t>(c) + 1 + rng.below(chains.size() - 1)) % chains.size()];
          body.push_back(other.topic);
        }
        if (role == Role::Probing)
          text = compose(rng, pick(rng, kProbingCues), std::move(body), '?');
        else
          text = compose(rng, pick(rng, kCausalCues), std::move(body), '.');
        const MentionRef m{d.id, p};
        corpus.gold.labels.emplace(m, role);
        corpus.gold.assignments.emplace(m, d.id + "-c" + std::to_string(c));
      } else {
        std::vector<std::string> body;
        if (rng.bernoulli(0.15)) body.push_back(pick(rng, chains).topic);
        if (rng.bernoulli(0.2)) body.push_back(pick(rng, entities));
        text = compose(rng, rng.bernoulli(0.7) ? pick(rng, kNeutralCues) : std::string(), std::move(body), '.');
      }
      d.utterances.push_back(Utterance{utterance_id(d.id, p), pick(rng, speakers), text, p});
    }
    corpus.dialogues.push_back(std::move(d));
  }
  return corpus;
}

CorpusStats corpus_statistics(const Corpus& corpus) {
  CorpusStats s;
  s.dialogues = static_cast<int>(corpus.dialogues.size());
  for (const auto& d : corpus.dialogues) s.utterances += static_cast<int>(d.size());
  for (const auto& [m, r] : corpus.gold.labels) {
    if (r == Role::Probing) ++s.probing;
    if (r == Role::Causal) ++s.causal;
  }
  const auto clusters = corpus.gold.clusters();
  s.clusters = static_cast<int>(clusters.size());
  long total = 0;
  for (const auto& [label, members] : clusters) {
    const int n = static_cast<int>(members.size());
    s.min_chain = s.min_chain == 0 ? n : std::min(s.min_chain, n);
    s.max_chain = std::max(s.max_chain, n);
    total += n;
  }
  s.mean_chain = s.clusters ? static_cast<double>(total) / s.clusters : 0.0;
  s.mean_dialogue_len = s.dialogues ? static_cast<double>(s.utterances) / s.dialogues : 0.0;
  return s;
}

}  // namespace delichain
