#include "delichain/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "delichain/text.hpp"

namespace delichain {

double lexical_ratio(std::string_view a, std::string_view b) {
  const std::size_t total = a.size() + b.size();
  if (total == 0) return 100.0;
  // Edit distance with substitution cost 2 (equivalent to insert + delete).
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t c = 0; c <= b.size(); ++c) prev[c] = c;
  for (std::size_t r = 1; r <= a.size(); ++r) {
    cur[0] = r;
    for (std::size_t c = 1; c <= b.size(); ++c) {
      const std::size_t sub = prev[c - 1] + (a[r - 1] == b[c - 1] ? 0 : 2);
      cur[c] = std::min({prev[c] + 1, cur[c - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  const double d = static_cast<double>(prev[b.size()]);
  return (1.0 - d / static_cast<double>(total)) * 100.0;
}

bool CategoryCounts::empty() const {
  for (const auto& [k, v] : counts)
    if (v > 0) return false;
  return true;
}

const std::vector<std::string>& schema_categories(Schema s) {
  static const std::vector<std::string> deli = {"vowels", "consonants", "even", "odd"};
  static const std::vector<std::string> wtd = {"red", "blue", "green", "purple", "yellow", "weight"};
  return s == Schema::Delidata ? deli : wtd;
}

namespace {

bool all_digits(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

CategoryCounts extract_entities(std::string_view text, Schema schema, const EntityOptions& opts) {
  CategoryCounts out{schema, {}};
  for (const auto& tok : split_tokens(text)) {
    if (schema == Schema::Delidata) {
      if (tok.size() == 1 && std::isalpha(static_cast<unsigned char>(tok[0]))) {
        if (tok == "I" || tok == "a" || tok == "i") continue;
        const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(tok[0])));
        const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
        ++out.counts[vowel ? "vowels" : "consonants"];
      } else if (all_digits(tok)) {
        ++out.counts[(tok.back() - '0') % 2 == 0 ? "even" : "odd"];
      }
    } else {
      std::string lower = tok;
      for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      static const std::vector<std::string> colors = {"red", "blue", "green", "purple", "yellow"};
      if (std::find(colors.begin(), colors.end(), lower) != colors.end()) {
        ++out.counts[lower];
      } else if (all_digits(tok) && tok.size() < 10) {
        const int v = std::stoi(tok);
        if (std::find(opts.weight_values.begin(), opts.weight_values.end(), v) != opts.weight_values.end())
          ++out.counts["weight"];
      }
    }
  }
  return out;
}

double entity_iou(const CategoryCounts& a, const CategoryCounts& b) {
  if (a.schema != b.schema) throw ConfigError("entity_iou: schema mismatch");
  long inter = 0, uni = 0;
  for (const auto& cat : schema_categories(a.schema)) {
    auto ia = a.counts.find(cat);
    auto ib = b.counts.find(cat);
    const int ca = ia == a.counts.end() ? 0 : ia->second;
    const int cb = ib == b.counts.end() ? 0 : ib->second;
    inter += std::min(ca, cb);
    uni += std::max(ca, cb);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Vector hashed_bow_embed(std::string_view text, std::size_t dimension) {
  if (dimension < 8) throw ConfigError("embedding dimension must be >= 8");
  Vector v(dimension, 0.0);
  for (const auto& tok : tokenize(text)) v[fnv1a64(tok) % dimension] += 1.0;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

HashedBowProvider::HashedBowProvider(std::size_t dimension) : dim_(dimension) {
  if (dimension < 8) throw ConfigError("embedding dimension must be >= 8");
}

Vector FileEmbeddingProvider::embed(std::string_view key) const {
  auto it = table_.find(std::string(key));
  if (it == table_.end()) throw ValidationError("no precomputed embedding for key '" + escape_key(key) + "'");
  return it->second;
}

std::string FileEmbeddingProvider::escape_key(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '\\') out += "\\\\";
    else if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else out.push_back(c);
  }
  return out;
}

namespace {

std::string unescape_key(std::string_view s) {
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

}  // namespace

FileEmbeddingProvider FileEmbeddingProvider::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file '" + path.string() + "'");
  FileEmbeddingProvider p;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("missing TAB between key and vector", lineno);
    Vector v;
    std::istringstream vs(line.substr(tab + 1));
    std::string num;
    while (vs >> num) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(num, &used));
        if (used != num.size()) throw std::invalid_argument(num);
      } catch (const std::exception&) {
        throw ParseError("bad vector component '" + num + "'", lineno);
      }
      if (!std::isfinite(v.back())) throw ParseError("non-finite vector component", lineno);
    }
    if (v.empty()) throw ParseError("empty vector", lineno);
    if (p.dim_ == 0) p.dim_ = v.size();
    if (v.size() != p.dim_)
      throw ParseError("dimension " + std::to_string(v.size()) + " differs from " + std::to_string(p.dim_), lineno);
    if (!p.table_.emplace(unescape_key(std::string_view(line).substr(0, tab)), std::move(v)).second)
      throw ParseError("duplicate key", lineno);
  }
  return p;
}

std::unique_ptr<EmbeddingProvider> file_embed_provider(const std::filesystem::path& path) {
  return std::make_unique<FileEmbeddingProvider>(FileEmbeddingProvider::load(path));
}

PairFeature pair_feature(const PairText& text, const EmbeddingProvider& provider) {
  const std::size_t d = provider.dimension();
  const Vector ctx = provider.embed(text.rendered);
  const Vector p = provider.embed(text.consequent_text());
  const Vector c = provider.embed(text.antecedent_text());
  if (ctx.size() != d || p.size() != d || c.size() != d) throw ShapeError("provider returned a vector of wrong size");
  PairFeature f;
  f.dimension = d;
  f.concatenated.reserve(4 * d);
  f.concatenated.insert(f.concatenated.end(), ctx.begin(), ctx.end());
  f.concatenated.insert(f.concatenated.end(), p.begin(), p.end());
  f.concatenated.insert(f.concatenated.end(), c.begin(), c.end());
  for (std::size_t k = 0; k < d; ++k) f.concatenated.push_back(p[k] * c[k]);
  return f;
}

}  // namespace delichain
