#include "garag/corpus.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "garag/error.hpp"
#include "garag/log.hpp"

namespace garag::corpus {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
char to_lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

/// Normalized word sequence of an answer string.
std::vector<std::string> answer_keys(std::string_view answer) {
  std::vector<std::string> keys;
  std::size_t i = 0;
  while (i < answer.size()) {
    while (i < answer.size() && is_space(answer[i])) ++i;
    std::size_t start = i;
    while (i < answer.size() && !is_space(answer[i])) ++i;
    if (i > start) {
      std::string key = normalize_token(answer.substr(start, i - start));
      if (!key.empty()) keys.push_back(std::move(key));
    }
  }
  return keys;
}

}  // namespace

std::size_t TokenizedDocument::unprotected_count() const {
  std::size_t n = 0;
  for (const Token& t : tokens) {
    if (!t.is_protected) ++n;
  }
  return n;
}

std::vector<std::size_t> TokenizedDocument::unprotected_indices() const {
  std::vector<std::size_t> indices;
  indices.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!tokens[i].is_protected) indices.push_back(i);
  }
  return indices;
}

TokenizedDocument tokenize(std::string_view text) {
  TokenizedDocument doc;
  doc.source.assign(text);
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) {
      doc.tokens.push_back(Token{std::string(text.substr(start, i - start)), start, i, false});
    }
  }
  return doc;
}

std::string normalize_token(std::string_view token) {
  std::size_t begin = 0;
  std::size_t end = token.size();
  while (begin < end && is_punct(token[begin])) ++begin;
  while (end > begin && is_punct(token[end - 1])) --end;
  std::string out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(to_lower(token[i]));
  return out;
}

std::vector<TokenSpan> find_token_spans(const TokenizedDocument& doc, std::string_view answer) {
  std::vector<TokenSpan> spans;
  const std::vector<std::string> keys = answer_keys(answer);
  if (keys.empty()) return spans;

  std::vector<std::string> token_keys;
  token_keys.reserve(doc.tokens.size());
  for (const Token& t : doc.tokens) token_keys.push_back(normalize_token(t.text));

  std::size_t i = 0;
  while (i + keys.size() <= token_keys.size()) {
    bool match = true;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      if (token_keys[i + k] != keys[k]) {
        match = false;
        break;
      }
    }
    if (match) {
      spans.push_back(TokenSpan{i, i + keys.size(), std::string(answer)});
      i += keys.size();  // non-overlapping, left to right
    } else {
      ++i;
    }
  }
  return spans;
}

std::vector<TokenSpan> locate_answer_spans(TokenizedDocument& doc,
                                           const std::vector<std::string>& answers) {
  std::vector<TokenSpan> all;
  for (const std::string& answer : answers) {
    std::vector<TokenSpan> spans = find_token_spans(doc, answer);
    for (const TokenSpan& span : spans) {
      for (std::size_t t = span.start_token; t < span.end_token; ++t) {
        doc.tokens[t].is_protected = true;
      }
    }
    all.insert(all.end(), spans.begin(), spans.end());
  }
  if (all.empty()) {
    log::info("no answer occurrence found in document; only the generation flip check applies");
  }
  return all;
}

std::string assemble(const TokenizedDocument& base,
                     const std::map<std::size_t, std::string>& overlay) {
  for (const auto& [index, text] : overlay) {
    if (index >= base.tokens.size()) {
      throw Error("assemble: overlay index " + std::to_string(index) + " out of range (" +
                  std::to_string(base.tokens.size()) + " tokens)");
    }
    (void)text;
  }
  std::string out;
  out.reserve(base.source.size() + 16);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < base.tokens.size(); ++i) {
    const Token& token = base.tokens[i];
    out.append(base.source, cursor, token.begin - cursor);
    auto it = overlay.find(i);
    out.append(it != overlay.end() ? it->second : token.text);
    cursor = token.end;
  }
  out.append(base.source, cursor, base.source.size() - cursor);
  return out;
}

std::vector<TripleInstance> load_triples(const std::string& path,
                                         std::optional<std::size_t> limit) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path);

  std::vector<TripleInstance> instances;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (limit && instances.size() >= *limit) break;

    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }

    const char* required[] = {"id", "question", "document", "answers"};
    for (const char* field : required) {
      if (!row.contains(field)) {
        throw DataError(path + ":" + std::to_string(line_no) + ": missing field \"" + field +
                        "\"");
      }
    }

    TripleInstance instance;
    try {
      instance.id = row.at("id").get<std::string>();
      instance.question = row.at("question").get<std::string>();
      instance.document = row.at("document").get<std::string>();
      instance.answers = row.at("answers").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad field type: " + e.what());
    }

    if (instance.answers.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": empty answers list");
    }
    if (instance.document.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": empty document");
    }
    if (!seen_ids.insert(instance.id).second) {
      throw DataError(path + ":" + std::to_string(line_no) + ": duplicate id \"" + instance.id +
                      "\"");
    }
    instances.push_back(std::move(instance));
  }
  if (in.bad()) throw DataError("I/O error while reading " + path);
  return instances;
}

}  // namespace garag::corpus
