#include "delichain/annotate.hpp"

#include <algorithm>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace delichain {

std::string_view template_name(PromptTemplate t) {
  return t == PromptTemplate::CausalExtraction ? "causal-extraction" : "probing-detection";
}

PromptTemplate template_from_name(std::string_view name) {
  if (name == "causal-extraction") return PromptTemplate::CausalExtraction;
  if (name == "probing-detection") return PromptTemplate::ProbingDetection;
  throw ConfigError("unknown prompt template '" + std::string(name) + "'");
}

namespace {

void context_lines(std::ostringstream& out, std::span<const Utterance> context) {
  for (const auto& u : context) out << '[' << u.index << "] " << u.speaker << ": " << u.text << '\n';
}

}  // namespace

std::string render_prompt(const Utterance& probing, std::span<const Utterance> context, PromptTemplate t) {
  for (const auto& u : context)
    if (u.index >= probing.index)
      throw ValidationError("context utterance " + std::to_string(u.index) + " does not precede probing utterance " +
                            std::to_string(probing.index));
  std::ostringstream out;
  if (t == PromptTemplate::CausalExtraction) {
    if (context.empty()) throw ValidationError("probing utterance " + probing.id + " has no prior context");
    out << "The following is part of a group discussion about a collaborative task.\n"
           "A participant asks a probing question: a question that invites the others to respond.\n"
           "Select the earlier utterances that directly caused the probing question to be asked.\n\n"
           "Dialogue history:\n";
    context_lines(out, context);
    out << "\nProbing question:\n[" << probing.index << "] " << probing.speaker << ": " << probing.text << "\n\n"
        << "Answer with one line per selected utterance, using its number from the history:\n"
           "CAUSAL: <number> | RATIONALE: <why this utterance led to the question>\n"
           "Answer NONE if no utterance caused it.\n";
  } else {
    out << "The following is part of a group discussion about a collaborative task.\n"
           "Decide whether the target utterance is a probing question: one that explicitly invites\n"
           "the other participants to respond, reflect or justify.\n\n";
    if (!context.empty()) {
      out << "Dialogue history:\n";
      context_lines(out, context);
      out << '\n';
    }
    out << "Target utterance:\n[" << probing.index << "] " << probing.speaker << ": " << probing.text << "\n\n"
        << "Answer with exactly one line:\nPROBING: yes\nor\nPROBING: no\n";
  }
  return out.str();
}

ParsedReply parse_reply(std::string_view raw, PromptTemplate t) {
  static const std::regex causal_re(R"(^\s*CAUSAL\s*:\s*\[?(\d+)\]?\s*(?:\|\s*RATIONALE\s*:\s*(.*?))?\s*$)",
                                    std::regex::icase);
  static const std::regex probing_re(R"(^\s*PROBING\s*:\s*(yes|no)\b.*$)", std::regex::icase);
  static const std::regex none_re(R"(^\s*NONE\.?\s*$)", std::regex::icase);

  ParsedReply out;
  bool none = false;
  std::istringstream in{std::string(raw)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (std::regex_match(line, none_re)) {
      none = true;
    } else if (t == PromptTemplate::CausalExtraction && std::regex_match(line, m, causal_re)) {
      try {
        out.causal_refs.push_back(std::stoi(m[1].str()));
        out.rationales.push_back(m[2].matched ? m[2].str() : std::string());
      } catch (const std::out_of_range&) {
        out.warnings.push_back("index out of integer range: " + line);
      }
    } else if (t == PromptTemplate::ProbingDetection && std::regex_match(line, m, probing_re)) {
      if (!out.probing) {
        std::string v = m[1].str();
        std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
        out.probing = v == "yes";
      }
    }
  }
  const bool empty = t == PromptTemplate::CausalExtraction ? out.causal_refs.empty() : !out.probing;
  if (empty && !none) out.warnings.push_back("unparseable reply treated as empty");
  return out;
}

// ---------------------------------------------------------------------------

MockAnnotator& MockAnnotator::script(const std::string& utterance_id, std::vector<int> causal_refs) {
  std::string raw;
  for (int r : causal_refs) raw += "CAUSAL: " + std::to_string(r) + " | RATIONALE: scripted\n";
  causal_[utterance_id] = raw.empty() ? "NONE\n" : raw;
  return *this;
}

MockAnnotator& MockAnnotator::script_raw(const std::string& utterance_id, std::string raw) {
  causal_[utterance_id] = std::move(raw);
  return *this;
}

MockAnnotator& MockAnnotator::mark_probing(const std::string& utterance_id, bool probing) {
  probing_[utterance_id] = probing;
  return *this;
}

std::string MockAnnotator::complete(const Utterance& probing, std::span<const Utterance>, PromptTemplate t) {
  if (t == PromptTemplate::ProbingDetection) {
    auto it = probing_.find(probing.id);
    return std::string("PROBING: ") + (it != probing_.end() && it->second ? "yes" : "no") + "\n";
  }
  auto it = causal_.find(probing.id);
  return it == causal_.end() ? "NONE\n" : it->second;
}

void write_transcript(std::span<const TranscriptEntry> entries, std::ostream& out) {
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["utterance_id"] = e.utterance_id;
    j["template"] = std::string(template_name(e.prompt_template));
    j["raw"] = e.raw;
    out << j.dump() << '\n';
  }
}

std::vector<TranscriptEntry> read_transcript(std::istream& in) {
  std::vector<TranscriptEntry> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back(TranscriptEntry{j.at("utterance_id").get<std::string>(),
                                    template_from_name(j.at("template").get<std::string>()),
                                    j.at("raw").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed transcript record: ") + e.what(), n);
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), n);
    }
  }
  return out;
}

ReplayAnnotator::ReplayAnnotator(std::span<const TranscriptEntry> entries) {
  for (const auto& e : entries) replies_[{e.utterance_id, e.prompt_template}] = e.raw;
}

std::string ReplayAnnotator::complete(const Utterance& probing, std::span<const Utterance>, PromptTemplate t) {
  auto it = replies_.find({probing.id, t});
  if (it == replies_.end())
    throw ServiceError("no logged " + std::string(template_name(t)) + " reply for " + probing.id);
  return it->second;
}

// ---------------------------------------------------------------------------

HttpAnnotator::HttpAnnotator(HttpAnnotatorConfig config, HttpTransport transport,
                             std::function<void(std::chrono::milliseconds)> sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
  if (config_.max_attempts < 1) throw ConfigError("annotator needs at least one attempt");
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (!key || !*key) throw ConfigError("environment variable " + config_.api_key_env + " is not set");
  api_key_ = key;
  if (!transport_) transport_ = default_http_transport(config_.timeout);
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpAnnotator::request_body(const std::string& model, const std::string& prompt) {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["temperature"] = 0;
  j["messages"] = nlohmann::ordered_json::array(
      {{{"role", "system"},
        {"content", "You annotate collaborative task dialogues. Follow the requested answer format exactly."}},
       {{"role", "user"}, {"content", prompt}}});
  return j.dump();
}

std::optional<std::string> HttpAnnotator::reply_content(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

std::string HttpAnnotator::complete(const Utterance& probing, std::span<const Utterance> context, PromptTemplate t) {
  const std::string body = request_body(config_.model, render_prompt(probing, context, t));
  const std::map<std::string, std::string> headers{{"Authorization", "Bearer " + api_key_},
                                                   {"Content-Type", "application/json"}};
  auto backoff = config_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    HttpResponse resp;
    try {
      resp = transport_(config_.endpoint, headers, body);
    } catch (const std::exception& e) {
      resp = HttpResponse{0, e.what()};
    }
    {
      std::lock_guard lock(mu_);
      log_.push_back(HttpLogEntry{probing.id, attempt, resp.status, resp.body});
    }
    if (resp.status == 200) {
      if (auto content = reply_content(resp.body)) return *content;
      std::lock_guard lock(mu_);
      warnings_.push_back(probing.id + ": reply does not match the chat-completion schema; treated as empty");
      return "";
    }
    last_error = resp.status == 0 ? resp.body : "HTTP " + std::to_string(resp.status);
    if (attempt < config_.max_attempts) {
      sleep_(backoff);
      backoff *= 2;
    }
  }
  throw ServiceError("annotator request for " + probing.id + " failed after " + std::to_string(config_.max_attempts) +
                     " attempts: " + last_error);
}

std::vector<HttpLogEntry> HttpAnnotator::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::vector<std::string> HttpAnnotator::warnings() const {
  std::lock_guard lock(mu_);
  return warnings_;
}

HttpTransport default_http_transport(std::chrono::seconds timeout) {
  return [timeout](const std::string& url, const std::map<std::string, std::string>& headers,
                   const std::string& body) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, url_re)) throw ConfigError("malformed endpoint URL '" + url + "'");
    httplib::Client client(m[1].str());
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type")
        content_type = v;
      else
        h.emplace(k, v);
    }
    auto res = client.Post(m[2].matched ? m[2].str() : "/", h, body, content_type);
    if (!res) throw ServiceError("transport failure: " + httplib::to_string(res.error()));
    return HttpResponse{res->status, res->body};
  };
}

// ---------------------------------------------------------------------------

std::vector<TranscriptEntry> GoldMap::transcript() const {
  std::vector<TranscriptEntry> out;
  for (const auto& r : responses) out.push_back(TranscriptEntry{r.utterance_id, PromptTemplate::CausalExtraction, r.raw});
  return out;
}

GoldClustering GoldMap::to_gold(std::span<const MentionRef> probing_list) const {
  const std::set<MentionRef> probing(probing_list.begin(), probing_list.end());
  std::map<std::string, int> sizes;
  for (const auto& [m, label] : labels) ++sizes[label];
  GoldClustering g;
  for (const auto& p : probing) g.labels[p] = Role::Probing;
  for (const auto& [m, label] : labels) {
    if (sizes[label] < 2) continue;
    g.assignments[m] = label;
    if (!probing.count(m)) g.labels[m] = Role::Causal;
  }
  return g;
}

bool GoldMap::operator==(const GoldMap& o) const {
  if (labels != o.labels || log != o.log || collisions != o.collisions || responses.size() != o.responses.size())
    return false;
  for (std::size_t k = 0; k < responses.size(); ++k) {
    const auto &a = responses[k], &b = o.responses[k];
    if (a.utterance_id != b.utterance_id || a.context != b.context || a.raw != b.raw ||
        a.causal_refs != b.causal_refs || a.rationales != b.rationales || a.warnings != b.warnings)
      return false;
  }
  return true;
}

namespace {

struct DialogueMap {
  std::map<MentionRef, std::string> labels;
  std::vector<AnnotationEvent> responses;
  std::vector<std::string> log;
  int collisions = 0;
};

std::span<const Utterance> context_of(const Dialogue& d, int t, int window) {
  const int start = window > 0 ? std::max(0, t - window) : 0;
  return std::span<const Utterance>(d.utterances).subspan(static_cast<std::size_t>(start),
                                                         static_cast<std::size_t>(t - start));
}

// Every label is used by refs of one dialogue only and each ref has one label
// by construction of the map; the check guards the dialogue scope.
void check_partition(const DialogueMap& g, const std::string& dialogue_id) {
  for (const auto& [m, label] : g.labels)
    if (m.dialogue_id != dialogue_id || label.rfind(dialogue_id + "-g", 0) != 0)
      throw ValidationError("gold map escapes dialogue " + dialogue_id + " at " + to_string(m));
}

DialogueMap map_dialogue(const Dialogue& d, const std::vector<int>& probings, AnnotatorClient& client,
                         int window) {
  DialogueMap g;
  int next_label = 0;
  auto fresh = [&] { return d.id + "-g" + std::to_string(next_label++); };
  auto assign = [&](int idx, const std::string& label, bool overwrite) {
    const MentionRef m{d.id, idx};
    auto it = g.labels.find(m);
    if (it == g.labels.end()) {
      g.labels.emplace(m, label);
    } else if (it->second != label) {
      ++g.collisions;
      g.log.push_back(to_string(m) + " labelled " + it->second + (overwrite ? ", overwritten with " : ", kept over ") +
                      label);
      if (overwrite) it->second = label;
    }
  };
  auto labelled = [&](int idx) { return g.labels.count(MentionRef{d.id, idx}) > 0; };

  for (std::size_t k = 0; k < probings.size(); ++k) {
    const int t = probings[k];
    const Utterance& p = d.at(t);
    const auto ctx = context_of(d, t, window);
    const ParsedReply reply = [&] {
      const std::string raw = client.complete(p, ctx, PromptTemplate::CausalExtraction);
      ParsedReply r = parse_reply(raw, PromptTemplate::CausalExtraction);
      g.responses.push_back(AnnotationEvent{p.id, {}, raw, {}, {}, r.warnings});
      return r;
    }();
    AnnotationEvent& ev = g.responses.back();
    for (const auto& u : ctx) ev.context.push_back(u.index);

    // Keep in-context refs, first occurrence only.
    const int lo = ctx.empty() ? t : ctx.front().index;
    std::vector<int> r;
    for (std::size_t q = 0; q < reply.causal_refs.size(); ++q) {
      const int idx = reply.causal_refs[q];
      if (idx < lo || idx >= t) {
        const std::string msg = p.id + ": returned ref " + std::to_string(idx) + " outside context, skipped";
        ev.warnings.push_back(msg);
        g.log.push_back(msg);
        continue;
      }
      if (std::find(r.begin(), r.end(), idx) != r.end()) continue;
      r.push_back(idx);
      ev.rationales.push_back(reply.rationales[q]);
    }
    ev.causal_refs = r;
    for (const auto& w : reply.warnings) g.log.push_back(p.id + ": " + w);

    if (r.empty()) {
      g.log.push_back(p.id + ": no causal refs, left unlabelled");
    } else if (k == 0) {
      const std::string label = fresh();
      for (int idx : r) assign(idx, label, false);
      assign(t, g.labels.at(MentionRef{d.id, r.front()}), false);
    } else {
      auto hit = std::find_if(r.begin(), r.end(), labelled);
      if (hit != r.end()) {
        const std::string label = g.labels.at(MentionRef{d.id, *hit});
        assign(t, label, false);
        for (int idx : r) assign(idx, label, false);
      } else {
        auto earlier = std::find_if(r.begin(), r.end(), [&](int idx) {
          return std::find(probings.begin(), probings.begin() + static_cast<std::ptrdiff_t>(k), idx) !=
                 probings.begin() + static_cast<std::ptrdiff_t>(k);
        });
        if (earlier != r.end()) {
          // The earlier probing went unlabelled (its own reply was empty).
          const MentionRef e{d.id, *earlier};
          if (!g.labels.count(e)) assign(*earlier, fresh(), false);
          const std::string label = g.labels.at(e);
          assign(t, label, true);
          for (int idx : r) assign(idx, label, true);
        } else {
          const std::string label = fresh();
          for (int idx : r) assign(idx, label, false);
          assign(t, label, false);
        }
      }
    }
    check_partition(g, d.id);
  }
  return g;
}

}  // namespace

GoldMap gold_cluster_mapping(std::span<const Dialogue> dialogues, std::span<const MentionRef> probing_list,
                             AnnotatorClient& client, const MappingOptions& options) {
  if (options.context_window < 0) throw ConfigError("context window must be >= 0");
  std::map<std::string, std::size_t> position;
  for (std::size_t k = 0; k < dialogues.size(); ++k)
    if (!position.emplace(dialogues[k].id, k).second)
      throw ValidationError("duplicate dialogue id '" + dialogues[k].id + "'");
  std::vector<std::vector<int>> per(dialogues.size());
  for (const auto& p : probing_list) {
    auto it = position.find(p.dialogue_id);
    if (it == position.end()) throw ValidationError("probing ref " + to_string(p) + " names an unknown dialogue");
    dialogues[it->second].at(p.index);
    auto& list = per[it->second];
    if (!list.empty() && list.back() >= p.index)
      throw ValidationError("probing list is not in temporal order at " + to_string(p));
    list.push_back(p.index);
  }

  std::vector<DialogueMap> parts(dialogues.size());
  const unsigned w = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(dialogues.size())));
  if (w == 1) {
    for (std::size_t k = 0; k < dialogues.size(); ++k)
      parts[k] = map_dialogue(dialogues[k], per[k], client, options.context_window);
  } else {
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < w; ++t)
      threads.emplace_back([&, t] {
        try {
          for (std::size_t k = t; k < dialogues.size(); k += w)
            parts[k] = map_dialogue(dialogues[k], per[k], client, options.context_window);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : threads) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  GoldMap out;
  for (auto& p : parts) {
    out.labels.merge(p.labels);
    out.responses.insert(out.responses.end(), p.responses.begin(), p.responses.end());
    out.log.insert(out.log.end(), p.log.begin(), p.log.end());
    out.collisions += p.collisions;
  }
  return out;
}

std::vector<MentionRef> detect_probing(std::span<const Dialogue> dialogues, AnnotatorClient& client,
                                       const MappingOptions& options) {
  std::vector<MentionRef> out;
  for (const auto& d : dialogues)
    for (const auto& u : d.utterances) {
      const auto reply = client.annotate(u, context_of(d, u.index, options.context_window),
                                         PromptTemplate::ProbingDetection);
      if (reply.probing.value_or(false)) out.push_back(MentionRef{d.id, u.index});
    }
  return out;
}

}  // namespace delichain
