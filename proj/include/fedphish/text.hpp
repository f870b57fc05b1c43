#pragma once

// Text normalization pipeline: strip non-letters, lowercase, tokenize,
// lemmatize, drop stop words and one-character tokens. Every stage is a pure
// function over immutable lookup tables, so the whole pipeline is
// deterministic and safe to run from any number of threads.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fedphish/eml.hpp"
#include "fedphish/errors.hpp"
#include "fedphish/wordlists.hpp"

namespace fedphish {

struct ProcessedText {
  std::vector<std::string> tokens;  // lowercase [a-z]+, length >= 2
  int label = 0;
  std::string source_id;
};

namespace detail {

// Non-ASCII codepoints we classify as letters (dropped by clean_chars, since
// the embedding vocabulary is ASCII). Everything else non-ASCII becomes a
// space, like digits and punctuation do.
inline bool is_nonascii_letter(std::uint32_t cp) {
  if (cp >= 0xc0 && cp <= 0x24f) return cp != 0xd7 && cp != 0xf7;  // Latin
  if (cp >= 0x370 && cp <= 0x3ff) return true;                     // Greek
  if (cp >= 0x400 && cp <= 0x4ff) return true;                     // Cyrillic
  if (cp >= 0x590 && cp <= 0x5ff) return true;                     // Hebrew
  if (cp >= 0x600 && cp <= 0x6ff) return true;                     // Arabic
  return false;
}

}  // namespace detail

// Step 1+2: replace every non-letter with a single space and lowercase.
// ASCII letters survive; non-ASCII letters are dropped outright.
inline std::string clean_chars(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char b = static_cast<unsigned char>(text[i]);
    if (b < 0x80) {
      if (b >= 'A' && b <= 'Z')
        out.push_back(static_cast<char>(b - 'A' + 'a'));
      else if (b >= 'a' && b <= 'z')
        out.push_back(static_cast<char>(b));
      else
        out.push_back(' ');
      ++i;
      continue;
    }
    std::size_t len = ((b & 0xe0) == 0xc0) ? 2 : ((b & 0xf0) == 0xe0) ? 3
                      : ((b & 0xf8) == 0xf0) ? 4 : 0;
    std::uint32_t cp = 0;
    bool ok = len > 0 && i + len <= text.size();
    if (ok) {
      cp = b & (0xff >> (len + 1));
      for (std::size_t k = 1; k < len; ++k) {
        unsigned char cb = static_cast<unsigned char>(text[i + k]);
        if ((cb & 0xc0) != 0x80) {
          ok = false;
          break;
        }
        cp = (cp << 6) | (cb & 0x3f);
      }
    }
    if (!ok) {
      out.push_back(' ');
      ++i;
      continue;
    }
    if (!detail::is_nonascii_letter(cp)) out.push_back(' ');
    i += len;
  }
  return out;
}

// Step 3: whitespace split, empties discarded, order preserved.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

namespace detail {

inline bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

inline bool has_vowel(std::string_view s) {
  for (char c : s)
    if (is_vowel(c) || c == 'y') return true;
  return false;
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// One vowel group == one syllable, roughly.
inline int vowel_groups(std::string_view s) {
  int groups = 0;
  bool in_group = false;
  for (char c : s) {
    bool v = is_vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  return groups;
}

// Undo consonant doubling ("stopp" -> "stop"). 'ss'/'zz' stay; 'll' only
// comes apart in longer stems ("controll" -> "control", "call" stays).
inline std::string undouble(std::string stem) {
  std::size_t n = stem.size();
  if (n < 4) return stem;
  char c = stem[n - 1];
  if (c != stem[n - 2] || is_vowel(c)) return stem;
  if (c == 's' || c == 'z') return stem;
  if (c == 'l' && n - 1 < 6) return stem;
  stem.pop_back();
  return stem;
}

inline bool ends_double_consonant(std::string_view s) {
  std::size_t n = s.size();
  return n >= 2 && s[n - 1] == s[n - 2] && !is_vowel(s[n - 1]);
}

// Monosyllabic stems ending consonant-vowel-consonant usually lost a final
// "e" to the suffix ("mak" -> "make", "us" -> "use"). Final w/x/y never
// double and never hide an e.
inline bool wants_final_e(std::string_view stem) {
  std::size_t n = stem.size();
  if (n == 2) return is_vowel(stem[0]) && !is_vowel(stem[1]);
  if (n < 3) return false;
  if (vowel_groups(stem) != 1) return false;
  char c0 = stem[n - 1], c1 = stem[n - 2], c2 = stem[n - 3];
  if (c0 == 'w' || c0 == 'x' || c0 == 'y') return false;
  return !is_vowel(c0) && is_vowel(c1) && !is_vowel(c2);
}

// Suffix families whose bases end in "e" even for polysyllabic stems
// ("updated" -> "update", "organized" -> "organize"). Checked against the
// token minus the plain "ed"/"ing" ending.
inline bool e_restoring_family(std::string_view stem) {
  if (ends_with(stem, "eat") || ends_with(stem, "oat")) return false;  // treat
  if (ends_with(stem, "ear")) return false;                            // clear
  static const char* kTails[] = {"at", "iz", "is", "ur",  "ir",  "id",  "ud",
                                 "uc", "ac", "ic", "nc",  "rc",  "ang", "eng",
                                 "erg", "urg", "arg", "ag", "v",  "z",  "as",
                                 "os", "us", "ar"};
  for (const char* t : kTails)
    if (ends_with(stem, t)) return true;
  return false;
}

inline std::string strip_participle(const std::string& token,
                                    std::size_t suffix_len) {
  std::string stem = token.substr(0, token.size() - suffix_len);
  if (!has_vowel(stem)) return token;
  if (ends_double_consonant(stem)) {
    std::string un = undouble(stem);
    return un.size() < stem.size() ? un : stem;
  }
  if (e_restoring_family(stem)) return stem + "e";
  if (ends_with(stem, "er") || ends_with(stem, "or")) return stem;  // offer...
  if (wants_final_e(stem)) return stem + "e";
  return stem;
}

}  // namespace detail

// Step 4: dictionary form via the exception table plus ordered suffix rules
// (plural -s/-es/-ies, -ing, -ed, comparative -er/-est). A token matching no
// rule comes back unchanged. Rule-based, so imperfect outside the covered
// families; the exception table pins the common irregulars.
inline std::string lemmatize(
    const std::string& token,
    const std::unordered_map<std::string, std::string>& exceptions) {
  auto it = exceptions.find(token);
  if (it != exceptions.end()) return it->second;
  const std::size_t n = token.size();
  using detail::ends_with;

  // Plurals.
  if (n >= 5 && ends_with(token, "sses")) return token.substr(0, n - 2);
  if (n >= 5 && ends_with(token, "zzes")) return token.substr(0, n - 2);
  if (n >= 5 && ends_with(token, "ies")) return token.substr(0, n - 3) + "y";
  if (n >= 4 && (ends_with(token, "xes") || ends_with(token, "ches") ||
                 ends_with(token, "shes") || ends_with(token, "oes")))
    return token.substr(0, n - 2);
  if (n >= 4 && token.back() == 's' && !ends_with(token, "ss") &&
      !ends_with(token, "us") && !ends_with(token, "is"))
    return token.substr(0, n - 1);

  // -ing.
  if (n >= 5 && ends_with(token, "ing")) return detail::strip_participle(token, 3);

  // -ed.
  if (n >= 4 && ends_with(token, "ed")) {
    if (ends_with(token, "eed")) return token;  // need, speed, succeed
    if (n >= 5 && ends_with(token, "ied")) return token.substr(0, n - 3) + "y";
    return detail::strip_participle(token, 2);
  }

  // Comparatives: only the unambiguous -ier/-iest shapes; everything else
  // (paper, offer, letter, and exception-table entries like bigger/better)
  // passes through. A generic -er rule would wreck too many base nouns.
  if (n >= 5 && ends_with(token, "iest")) return token.substr(0, n - 4) + "y";
  if (n >= 5 && ends_with(token, "ier")) return token.substr(0, n - 3) + "y";
  return token;
}

// Step 5: drop stop words and tokens shorter than two characters.
inline std::vector<std::string> filter_tokens(
    const std::vector<std::string>& tokens,
    const std::unordered_set<std::string>& stopwords) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) {
    if (t.size() < 2) continue;
    if (stopwords.count(t)) continue;
    out.push_back(t);
  }
  return out;
}

// --- lookup-table plumbing --------------------------------------------------

inline std::vector<std::string> parse_wordlist(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string w = detail::trim(line);
    if (!w.empty() && w[0] != '#') words.push_back(w);
  }
  return words;
}

inline std::vector<std::string> load_wordlist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataUnreadable(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_wordlist(buf.str());
}

inline std::unordered_map<std::string, std::string> parse_lemma_table(
    std::string_view text) {
  std::unordered_map<std::string, std::string> table;
  for (const std::string& entry : parse_wordlist(text)) {
    std::size_t sp = entry.find(' ');
    if (sp == std::string::npos) continue;
    table.emplace(entry.substr(0, sp), detail::trim(entry.substr(sp + 1)));
  }
  return table;
}

inline std::unordered_map<std::string, std::string> load_lemma_table(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataUnreadable(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_lemma_table(buf.str());
}

// The pipeline's lookup tables, loaded once and shared read-only.
struct TextPipeline {
  std::unordered_set<std::string> stopwords;
  std::unordered_map<std::string, std::string> lemma_exceptions;

  static const TextPipeline& builtin() {
    static const TextPipeline p = [] {
      TextPipeline t;
      for (const std::string& w : parse_wordlist(wordlists::kStopwords))
        t.stopwords.insert(w);
      t.lemma_exceptions = parse_lemma_table(wordlists::kLemmaExceptions);
      return t;
    }();
    return p;
  }
};

inline std::string lemmatize(const std::string& token) {
  return lemmatize(token, TextPipeline::builtin().lemma_exceptions);
}

// Step 6: the full composition.
inline ProcessedText preprocess(const Document& doc,
                                const TextPipeline& pipeline) {
  std::vector<std::string> tokens = tokenize(clean_chars(doc.text));
  for (std::string& t : tokens) t = lemmatize(t, pipeline.lemma_exceptions);
  ProcessedText out;
  out.tokens = filter_tokens(tokens, pipeline.stopwords);
  out.label = doc.label;
  out.source_id = doc.source_id;
  return out;
}

inline ProcessedText preprocess(const Document& doc) {
  return preprocess(doc, TextPipeline::builtin());
}

}  // namespace fedphish
