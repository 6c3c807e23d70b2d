#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "delichain/corpus.hpp"

namespace delichain {

enum class PromptTemplate { CausalExtraction, ProbingDetection };

std::string_view template_name(PromptTemplate t);
PromptTemplate template_from_name(std::string_view name);  // throws ConfigError

// Causal extraction lists the context as "[index] speaker: text" lines and
// asks for one `CAUSAL: <index> | RATIONALE: <text>` line per selection, or
// `NONE`. Probing detection asks for `PROBING: yes|no` about one utterance.
// Throws ValidationError when causal extraction gets an empty context.
std::string render_prompt(const Utterance& probing, std::span<const Utterance> context, PromptTemplate t);

struct ParsedReply {
  std::vector<int> causal_refs;
  std::vector<std::string> rationales;  // parallel to causal_refs
  std::optional<bool> probing;          // probing detection only
  std::vector<std::string> warnings;
};

// Lines outside the grammar are ignored. A reply with no recognised line
// (other than NONE) yields an empty result and a warning.
ParsedReply parse_reply(std::string_view raw, PromptTemplate t);

// Produces the raw model reply for one prompt. Implementations must be safe
// to call from several threads at once.
class AnnotatorClient {
 public:
  virtual ~AnnotatorClient() = default;
  virtual std::string complete(const Utterance& probing, std::span<const Utterance> context, PromptTemplate t) = 0;

  ParsedReply annotate(const Utterance& probing, std::span<const Utterance> context, PromptTemplate t) {
    return parse_reply(complete(probing, context, t), t);
  }
};

// Scripted replies keyed by utterance id ("<dialogue>#<index>").
class MockAnnotator : public AnnotatorClient {
 public:
  MockAnnotator& script(const std::string& utterance_id, std::vector<int> causal_refs);
  MockAnnotator& script_raw(const std::string& utterance_id, std::string raw);
  MockAnnotator& mark_probing(const std::string& utterance_id, bool probing = true);

  std::string complete(const Utterance& probing, std::span<const Utterance> context, PromptTemplate t) override;

 private:
  std::map<std::string, std::string> causal_;
  std::map<std::string, bool> probing_;
};

struct TranscriptEntry {
  std::string utterance_id;
  PromptTemplate prompt_template = PromptTemplate::CausalExtraction;
  std::string raw;
};

void write_transcript(std::span<const TranscriptEntry> entries, std::ostream& out);
std::vector<TranscriptEntry> read_transcript(std::istream& in);

// Returns logged replies verbatim. Throws ServiceError for a prompt that is
// not in the transcript.
class ReplayAnnotator : public AnnotatorClient {
 public:
  explicit ReplayAnnotator(std::span<const TranscriptEntry> entries);
  std::string complete(const Utterance& probing, std::span<const Utterance> context, PromptTemplate t) override;

 private:
  std::map<std::pair<std::string, PromptTemplate>, std::string> replies_;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// POSTs a JSON body with the given headers; throws on network failure.
using HttpTransport =
    std::function<HttpResponse(const std::string& url, const std::map<std::string, std::string>& headers,
                               const std::string& body)>;

struct HttpAnnotatorConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-3.5-turbo-0125";
  std::string api_key_env = "DELICHAIN_API_KEY";
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{60};
};

struct HttpLogEntry {
  std::string utterance_id;
  int attempt = 0;
  int status = 0;  // 0 when the transport threw
  std::string raw;
};

// Chat-completion client. The credential is read from the environment
// variable named in the config at construction.
class HttpAnnotator : public AnnotatorClient {
 public:
  explicit HttpAnnotator(HttpAnnotatorConfig config, HttpTransport transport = {},
                         std::function<void(std::chrono::milliseconds)> sleep = {});

  std::string complete(const Utterance& probing, std::span<const Utterance> context, PromptTemplate t) override;

  std::vector<HttpLogEntry> log() const;
  std::vector<std::string> warnings() const;

  static std::string request_body(const std::string& model, const std::string& prompt);
  // Content of the first choice; nullopt when the body does not fit the wire schema.
  static std::optional<std::string> reply_content(const std::string& body);

 private:
  HttpAnnotatorConfig config_;
  std::string api_key_;
  HttpTransport transport_;
  std::function<void(std::chrono::milliseconds)> sleep_;
  mutable std::mutex mu_;
  std::vector<HttpLogEntry> log_;
  std::vector<std::string> warnings_;
};

HttpTransport default_http_transport(std::chrono::seconds timeout);

struct AnnotationEvent {
  std::string utterance_id;
  std::vector<int> context;  // indices shown to the client
  std::string raw;
  std::vector<int> causal_refs;  // after range filtering
  std::vector<std::string> rationales;
  std::vector<std::string> warnings;
};

struct GoldMap {
  std::map<MentionRef, std::string> labels;
  std::vector<AnnotationEvent> responses;
  std::vector<std::string> log;
  int collisions = 0;  // refs already labelled in another cluster when merged

  std::vector<TranscriptEntry> transcript() const;

  // Probing list members get the probing role, other labelled refs the causal
  // role; clusters of size one are dropped.
  GoldClustering to_gold(std::span<const MentionRef> probing_list) const;

  bool operator==(const GoldMap&) const;
};

struct MappingOptions {
  int context_window = 25;  // 0 = full prior history
  unsigned workers = 1;
};

// Iterative gold cluster mapping. Dialogues are processed independently (in
// parallel when workers > 1); probings within a dialogue are processed in
// temporal order. Throws ValidationError for a probing ref outside the
// dialogues or out of temporal order.
GoldMap gold_cluster_mapping(std::span<const Dialogue> dialogues, std::span<const MentionRef> probing_list,
                             AnnotatorClient& client, const MappingOptions& options = {});

// Runs the probing-detection template over every utterance.
std::vector<MentionRef> detect_probing(std::span<const Dialogue> dialogues, AnnotatorClient& client,
                                       const MappingOptions& options = {});

}  // namespace delichain
