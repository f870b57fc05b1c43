#pragma once

// RFC-822-style email parsing: headers, MIME multipart bodies, base64 and
// quoted-printable transfer encodings, charset decoding to UTF-8, and a
// tolerant HTML-to-visible-text scanner. One email per file; only text/plain
// and text/html parts contribute text.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedphish/errors.hpp"

namespace fedphish {

struct RawEmail {
  enum class Part { Plain, Html };
  // Lowercase header name -> value. First occurrence wins; later duplicates
  // are stored under "name.1", "name.2", ...
  std::map<std::string, std::string> headers;
  std::vector<std::pair<Part, std::string>> body_parts;  // document order
};

struct Document {
  std::string text;       // subject, one space, body; whitespace-normalized
  int label = 0;          // 0 legitimate, 1 phishing
  std::string source_id;  // opaque origin tag, usually the file path
};

namespace detail {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Collapse runs of whitespace to single spaces and trim the ends.
inline std::string normalize_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending = !out.empty();
    } else {
      if (pending) out.push_back(' ');
      pending = false;
      out.push_back(c);
    }
  }
  return out;
}

// Tolerant base64: whitespace and invalid characters are skipped, incomplete
// trailing groups are dropped. Never fails.
inline std::string base64_decode(std::string_view in) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::string out;
  out.reserve(in.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : in) {
    if (c == '=') break;
    int v = val(c);
    if (v < 0) continue;
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xff));
    }
  }
  return out;
}

// Quoted-printable. Soft line breaks ("=\n" or "=\r\n") vanish; malformed
// escape sequences are kept literally.
inline std::string qp_decode(std::string_view in, bool header_mode = false) {
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    char c = in[i];
    if (c == '=' && i + 1 < in.size()) {
      if (in[i + 1] == '\n') {
        i += 1;
        continue;
      }
      if (in[i + 1] == '\r' && i + 2 < in.size() && in[i + 2] == '\n') {
        i += 2;
        continue;
      }
      if (i + 2 < in.size()) {
        int hi = hex(in[i + 1]), lo = hex(in[i + 2]);
        if (hi >= 0 && lo >= 0) {
          out.push_back(static_cast<char>(hi * 16 + lo));
          i += 2;
          continue;
        }
      }
    }
    if (header_mode && c == '_') {
      out.push_back(' ');  // RFC 2047 Q-encoding
      continue;
    }
    out.push_back(c);
  }
  return out;
}

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

// Windows-1252 codepoints for bytes 0x80..0x9f (0 means undefined -> U+FFFD).
inline std::uint32_t cp1252_high(unsigned char b) {
  static const std::uint16_t table[32] = {
      0x20ac, 0,      0x201a, 0x0192, 0x201e, 0x2026, 0x2020, 0x2021,
      0x02c6, 0x2030, 0x0160, 0x2039, 0x0152, 0,      0x017d, 0,
      0,      0x2018, 0x2019, 0x201c, 0x201d, 0x2022, 0x2013, 0x2014,
      0x02dc, 0x2122, 0x0161, 0x203a, 0x0153, 0,      0x017e, 0x0178};
  return table[b - 0x80];
}

// Re-encode bytes as UTF-8 according to a declared charset. Unknown charsets
// fall back to UTF-8 validation; invalid sequences become U+FFFD.
inline std::string decode_charset(std::string_view bytes, std::string charset) {
  charset = to_lower(charset);
  const std::uint32_t kReplacement = 0xfffd;
  std::string out;
  out.reserve(bytes.size());
  if (charset == "iso-8859-1" || charset == "latin1" || charset == "latin-1" ||
      charset == "windows-1252" || charset == "cp1252") {
    bool win = charset == "windows-1252" || charset == "cp1252";
    for (unsigned char b : bytes) {
      if (b < 0x80) {
        out.push_back(static_cast<char>(b));
      } else if (win && b < 0xa0) {
        std::uint32_t cp = cp1252_high(b);
        append_utf8(out, cp ? cp : kReplacement);
      } else {
        append_utf8(out, b);
      }
    }
    return out;
  }
  // UTF-8 (and us-ascii and everything unknown): validate, replacing invalid
  // sequences so the result is always well-formed.
  std::size_t i = 0;
  while (i < bytes.size()) {
    unsigned char b = static_cast<unsigned char>(bytes[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (b < 0x80) {
      len = 1;
      cp = b;
    } else if ((b & 0xe0) == 0xc0) {
      len = 2;
      cp = b & 0x1f;
    } else if ((b & 0xf0) == 0xe0) {
      len = 3;
      cp = b & 0x0f;
    } else if ((b & 0xf8) == 0xf0) {
      len = 4;
      cp = b & 0x07;
    }
    bool ok = len > 0 && i + len <= bytes.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      unsigned char cb = static_cast<unsigned char>(bytes[i + k]);
      if ((cb & 0xc0) != 0x80)
        ok = false;
      else
        cp = (cp << 6) | (cb & 0x3f);
    }
    if (ok && len == 2 && cp < 0x80) ok = false;  // overlong
    if (ok && len == 3 && cp < 0x800) ok = false;
    if (ok && len == 4 && (cp < 0x10000 || cp > 0x10ffff)) ok = false;
    if (ok && cp >= 0xd800 && cp <= 0xdfff) ok = false;
    if (ok) {
      out.append(bytes.substr(i, len));
      i += len;
    } else {
      append_utf8(out, kReplacement);
      i += 1;
    }
  }
  return out;
}

// RFC 2047 encoded-words in header values: =?charset?B|Q?payload?=
inline std::string decode_header_value(std::string_view raw) {
  std::string out;
  std::size_t i = 0;
  bool last_was_encoded = false;
  std::size_t pending_ws_from = std::string::npos;
  while (i < raw.size()) {
    if (raw[i] == '=' && i + 1 < raw.size() && raw[i + 1] == '?') {
      std::size_t q1 = raw.find('?', i + 2);
      std::size_t q2 = (q1 == std::string_view::npos)
                           ? std::string_view::npos
                           : raw.find('?', q1 + 1);
      std::size_t end = (q2 == std::string_view::npos)
                            ? std::string_view::npos
                            : raw.find("?=", q2 + 1);
      if (end != std::string_view::npos) {
        std::string charset(raw.substr(i + 2, q1 - i - 2));
        char enc = static_cast<char>(
            std::tolower(static_cast<unsigned char>(raw[q1 + 1])));
        std::string_view payload = raw.substr(q2 + 1, end - q2 - 1);
        std::string bytes = (enc == 'b') ? base64_decode(payload)
                                         : qp_decode(payload, true);
        // Whitespace between adjacent encoded words is ignored.
        if (last_was_encoded && pending_ws_from != std::string::npos)
          out.resize(pending_ws_from);
        out += decode_charset(bytes, charset);
        i = end + 2;
        last_was_encoded = true;
        pending_ws_from = std::string::npos;
        continue;
      }
    }
    if (std::isspace(static_cast<unsigned char>(raw[i]))) {
      if (pending_ws_from == std::string::npos) pending_ws_from = out.size();
    } else {
      pending_ws_from = std::string::npos;
      last_was_encoded = false;
    }
    out.push_back(raw[i]);
    ++i;
  }
  return decode_charset(out, "utf-8");
}

struct ContentType {
  std::string type;  // lowercase, e.g. "text/html"
  std::map<std::string, std::string> params;
};

inline ContentType parse_content_type(std::string_view value) {
  ContentType ct;
  std::size_t semi = value.find(';');
  ct.type = to_lower(trim(value.substr(0, semi)));
  while (semi != std::string_view::npos) {
    std::size_t start = semi + 1;
    semi = value.find(';', start);
    std::string_view piece = value.substr(
        start, semi == std::string_view::npos ? semi : semi - start);
    std::size_t eq = piece.find('=');
    if (eq == std::string_view::npos) continue;
    std::string key = to_lower(trim(piece.substr(0, eq)));
    std::string val = trim(piece.substr(eq + 1));
    if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
      val = val.substr(1, val.size() - 2);
    if (!key.empty()) ct.params[key] = val;
  }
  return ct;
}

}  // namespace detail

// --- HTML stripping -------------------------------------------------------

namespace detail {

inline bool is_block_tag(std::string_view tag) {
  static const char* kBlocks[] = {
      "p",   "div",     "br",    "h1",      "h2",     "h3",     "h4",
      "h5",  "h6",      "li",    "ul",      "ol",     "table",  "tr",
      "td",  "th",      "head",  "body",    "html",   "title",  "blockquote",
      "pre", "hr",      "section", "article", "header", "footer", "form",
      "dl",  "dt",      "dd",    "nav",     "aside",  "main",   "figure",
      "figcaption", "address"};
  for (const char* b : kBlocks)
    if (tag == b) return true;
  return false;
}

inline std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    std::size_t semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out.push_back(s[i++]);
      continue;
    }
    std::string_view name = s.substr(i + 1, semi - i - 1);
    if (name == "amp") {
      out.push_back('&');
    } else if (name == "lt") {
      out.push_back('<');
    } else if (name == "gt") {
      out.push_back('>');
    } else if (name == "quot") {
      out.push_back('"');
    } else if (name == "apos") {
      out.push_back('\'');
    } else if (name == "nbsp") {
      out.push_back(' ');
    } else if (name.size() >= 2 && name[0] == '#') {
      std::uint32_t cp = 0;
      bool ok = true;
      if (name[1] == 'x' || name[1] == 'X') {
        if (name.size() < 3) ok = false;
        for (std::size_t k = 2; ok && k < name.size(); ++k) {
          char c = name[k];
          int v = (c >= '0' && c <= '9')   ? c - '0'
                  : (c >= 'a' && c <= 'f') ? c - 'a' + 10
                  : (c >= 'A' && c <= 'F') ? c - 'A' + 10
                                           : -1;
          if (v < 0)
            ok = false;
          else
            cp = cp * 16 + static_cast<std::uint32_t>(v);
        }
      } else {
        for (std::size_t k = 1; ok && k < name.size(); ++k) {
          char c = name[k];
          if (c < '0' || c > '9')
            ok = false;
          else
            cp = cp * 10 + static_cast<std::uint32_t>(c - '0');
        }
      }
      if (ok && cp > 0 && cp <= 0x10ffff) {
        append_utf8(out, cp);
      } else {
        out.append(s.substr(i, semi - i + 1));
      }
    } else {
      out.push_back(s[i++]);
      continue;
    }
    i = semi + 1;
  }
  return out;
}

}  // namespace detail

// Visible text of an HTML fragment. Not a DOM parser: a tolerant scanner that
// drops tag markup, erases script/style/comment content, turns block-level
// tag boundaries into spaces, and decodes common entities. A "<" that never
// opens a real tag (no following ">") is kept as text.
inline std::string strip_html(std::string_view html) {
  std::string out;
  out.reserve(html.size());
  std::size_t i = 0;
  while (i < html.size()) {
    char c = html[i];
    if (c != '<') {
      out.push_back(c);
      ++i;
      continue;
    }
    // Comments and declarations.
    if (html.compare(i, 4, "<!--") == 0) {
      std::size_t end = html.find("-->", i + 4);
      if (end == std::string_view::npos) break;  // unterminated comment
      i = end + 3;
      continue;
    }
    std::size_t j = i + 1;
    bool closing = j < html.size() && html[j] == '/';
    if (closing) ++j;
    if (j >= html.size() ||
        (!std::isalpha(static_cast<unsigned char>(html[j])) && html[j] != '!' &&
         html[j] != '?')) {
      out.push_back('<');  // lone '<' is text
      ++i;
      continue;
    }
    std::size_t name_start = j;
    while (j < html.size() &&
           (std::isalnum(static_cast<unsigned char>(html[j])) || html[j] == '-'))
      ++j;
    std::string tag = detail::to_lower(html.substr(name_start, j - name_start));
    // Find the tag end, skipping quoted attribute values.
    std::size_t k = j;
    char quote = 0;
    while (k < html.size()) {
      char q = html[k];
      if (quote) {
        if (q == quote) quote = 0;
      } else if (q == '"' || q == '\'') {
        quote = q;
      } else if (q == '>') {
        break;
      }
      ++k;
    }
    if (k >= html.size()) {
      // Never-closed opener: everything after '<' is treated as text.
      out.append(html.substr(i + 1));
      break;
    }
    if (!closing && (tag == "script" || tag == "style")) {
      std::string close = "</" + tag;
      std::size_t pos = k + 1;
      std::size_t found = std::string_view::npos;
      while (pos < html.size()) {
        std::size_t cand = html.find('<', pos);
        if (cand == std::string_view::npos) break;
        if (html.size() - cand >= close.size() &&
            detail::to_lower(html.substr(cand, close.size())) == close) {
          found = cand;
          break;
        }
        pos = cand + 1;
      }
      if (found == std::string_view::npos) {
        i = html.size();  // unterminated script/style swallows the rest
      } else {
        std::size_t gt = html.find('>', found);
        i = (gt == std::string_view::npos) ? html.size() : gt + 1;
      }
      if (detail::is_block_tag(tag)) out.push_back(' ');
      continue;
    }
    if (detail::is_block_tag(tag)) out.push_back(' ');
    i = k + 1;
  }
  return detail::decode_entities(out);
}

// --- message parsing ------------------------------------------------------

namespace detail {

struct RawPart {
  std::map<std::string, std::string> headers;
  std::string body;  // raw bytes, not yet transfer-decoded
};

// Header block parser with RFC 822 continuation-line unfolding. Duplicate
// names get ".1", ".2", ... suffixes so nothing is silently overwritten.
inline std::map<std::string, std::string> parse_headers(std::string_view block) {
  std::map<std::string, std::string> headers;
  std::map<std::string, int> seen;
  std::string name, value;
  auto flush = [&]() {
    if (name.empty()) return;
    std::string key = name;
    int n = seen[name]++;
    if (n > 0) key += "." + std::to_string(n);
    headers[key] = decode_header_value(trim(value));
    name.clear();
    value.clear();
  };
  std::size_t pos = 0;
  while (pos <= block.size()) {
    std::size_t eol = block.find('\n', pos);
    std::string_view line = block.substr(
        pos, eol == std::string_view::npos ? block.size() - pos : eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty() && (line[0] == ' ' || line[0] == '\t')) {
      value += ' ';
      value += trim(line);
    } else {
      flush();
      std::size_t colon = line.find(':');
      if (colon != std::string_view::npos) {
        name = to_lower(trim(line.substr(0, colon)));
        value = std::string(line.substr(colon + 1));
      }
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  flush();
  return headers;
}

// Split a header block from its body at the first blank line.
inline bool split_message(std::string_view raw, std::string_view& head,
                          std::string_view& body) {
  std::size_t pos = 0;
  while (pos < raw.size()) {
    std::size_t eol = raw.find('\n', pos);
    if (eol == std::string_view::npos) return false;
    std::size_t line_len = eol - pos;
    if (line_len > 0 && raw[eol - 1] == '\r') --line_len;
    if (line_len == 0) {
      head = raw.substr(0, pos);
      body = raw.substr(eol + 1);
      return true;
    }
    pos = eol + 1;
  }
  return false;
}

inline std::string header_or(const std::map<std::string, std::string>& h,
                             const std::string& key, std::string fallback) {
  auto it = h.find(key);
  return it == h.end() ? fallback : it->second;
}

inline std::string transfer_decode(const RawPart& part) {
  std::string enc =
      to_lower(trim(header_or(part.headers, "content-transfer-encoding", "")));
  if (enc == "base64") return base64_decode(part.body);
  if (enc == "quoted-printable") return qp_decode(part.body);
  return part.body;  // 7bit / 8bit / binary / unspecified
}

inline void collect_text_parts(
    const RawPart& part, std::vector<std::pair<RawEmail::Part, std::string>>& out,
    int depth) {
  ContentType ct = parse_content_type(
      header_or(part.headers, "content-type", "text/plain"));
  if (ct.type.rfind("multipart/", 0) == 0 && depth < 16) {
    auto it = ct.params.find("boundary");
    if (it == ct.params.end() || it->second.empty()) return;
    const std::string sep = "--" + it->second;
    // Slice the body into child parts delimited by the boundary markers.
    std::vector<std::string_view> chunks;
    std::string_view body = part.body;
    std::size_t pos = 0;
    std::size_t start = std::string_view::npos;
    bool closed = false;
    while (pos <= body.size()) {
      std::size_t line_end = body.find('\n', pos);
      std::string_view line = body.substr(
          pos, line_end == std::string_view::npos ? body.size() - pos
                                                  : line_end - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      bool is_boundary = line.rfind(sep, 0) == 0;
      if (is_boundary) {
        if (start != std::string_view::npos && pos > start)
          chunks.push_back(body.substr(start, pos - start));
        if (line.rfind(sep + "--", 0) == 0) {
          closed = true;
          break;
        }
        start = (line_end == std::string_view::npos) ? body.size() : line_end + 1;
      }
      if (line_end == std::string_view::npos) break;
      pos = line_end + 1;
    }
    // Missing final boundary: keep whatever followed the last marker.
    if (!closed && start != std::string_view::npos && start < body.size())
      chunks.push_back(body.substr(start));
    for (std::string_view chunk : chunks) {
      std::string_view chead, cbody;
      RawPart child;
      if (split_message(chunk, chead, cbody)) {
        child.headers = parse_headers(chead);
        child.body = std::string(cbody);
      } else {
        child.body = std::string(chunk);  // headerless part: text/plain
      }
      collect_text_parts(child, out, depth + 1);
    }
    return;
  }
  if (ct.type.rfind("text/", 0) != 0 && !ct.type.empty() &&
      part.headers.count("content-type"))
    return;  // image/*, application/*, ... dropped
  std::string bytes = transfer_decode(part);
  std::string cs = "utf-8";
  auto cit = ct.params.find("charset");
  if (cit != ct.params.end() && !cit->second.empty()) cs = cit->second;
  std::string text = decode_charset(bytes, cs);
  RawEmail::Part kind =
      (ct.type == "text/html") ? RawEmail::Part::Html : RawEmail::Part::Plain;
  out.emplace_back(kind, std::move(text));
}

}  // namespace detail

// Parse one raw message. Throws MalformedMessage when no blank-line
// header/body separator exists; everything else degrades instead of failing
// (undecodable bytes become U+FFFD, unknown parts are dropped).
inline RawEmail parse_eml(std::string_view bytes) {
  std::string_view head, body;
  if (!detail::split_message(bytes, head, body))
    throw MalformedMessage("no header/body separator");
  RawEmail email;
  email.headers = detail::parse_headers(head);
  detail::RawPart top;
  top.headers = email.headers;
  top.body = std::string(body);
  detail::collect_text_parts(top, email.body_parts, 0);
  return email;
}

// Subject + " " + concatenated body parts (HTML stripped), whitespace
// normalized. An absent subject and empty body give an empty-text Document.
inline Document extract_text(const RawEmail& email, int label,
                             std::string source_id = "") {
  std::string joined = detail::header_or(email.headers, "subject", "");
  for (const auto& [kind, payload] : email.body_parts) {
    joined += ' ';
    joined += (kind == RawEmail::Part::Html) ? strip_html(payload) : payload;
  }
  Document doc;
  doc.text = detail::normalize_ws(joined);
  doc.label = label;
  doc.source_id = std::move(source_id);
  return doc;
}

struct IngestResult {
  std::vector<Document> documents;
  std::vector<std::string> skipped;  // unparseable files
};

// Read every regular file under dir (sorted by path for determinism) as one
// email with the given label.
inline IngestResult ingest_directory(const std::filesystem::path& dir,
                                     int label) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataUnreadable(dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  IngestResult result;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      result.skipped.push_back(path.string());
      continue;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
      RawEmail email = parse_eml(buf.str());
      result.documents.push_back(extract_text(email, label, path.string()));
    } catch (const MalformedMessage&) {
      result.skipped.push_back(path.string());
    }
  }
  return result;
}

}  // namespace fedphish
