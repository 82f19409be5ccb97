// Copyright 2026 the ranklab authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ranklab {

namespace detail {

inline bool is_unicode_space(std::uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes one UTF-8 codepoint starting at data[i]; advances i. Malformed
// bytes are passed through as single-byte codepoints.
inline std::uint32_t decode_utf8(const std::string& data, std::size_t& i) {
  const unsigned char b0 = static_cast<unsigned char>(data[i]);
  std::size_t len = 1;
  std::uint32_t cp = b0;
  if ((b0 & 0x80) == 0x00) {
    len = 1;
    cp = b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  }
  if (i + len > data.size()) len = 1, cp = b0;
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char bk = static_cast<unsigned char>(data[i + k]);
    if ((bk & 0xC0) != 0x80) {
      len = 1;
      cp = b0;
      break;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += len;
  return cp;
}

inline bool is_ascii_punct(char c) {
  const unsigned char u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u);
}

}  // namespace detail

/// Word tokenization: ASCII-lowercase, split on Unicode whitespace, strip
/// leading/trailing ASCII punctuation, drop empty tokens. Non-whitespace
/// punctuation inside a word (e.g. an em-dash) is kept as-is.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0, e = cur.size();
    while (b < e && detail::is_ascii_punct(cur[b])) ++b;
    while (e > b && detail::is_ascii_punct(cur[e - 1])) --e;
    if (e > b) tokens.push_back(cur.substr(b, e - b));
    cur.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const std::uint32_t cp = detail::decode_utf8(text, i);
    if (detail::is_unicode_space(cp)) {
      flush();
    } else {
      for (std::size_t k = start; k < i; ++k) {
        char c = text[k];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        cur.push_back(c);
      }
    }
  }
  flush();
  return tokens;
}

/// Token-to-id mapping with five fixed reserved entries. Non-reserved ids
/// are assigned densely starting at 5, most frequent token first.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kReservedCount = 5;

  Vocabulary() {
    static const std::array<const char*, kReservedCount> names = {
        "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    for (const char* n : names) {
      ids_.emplace(n, static_cast<int>(tokens_.size()));
      tokens_.emplace_back(n);
    }
  }

  /// Id for a token; unknown tokens map to [UNK].
  int id(const std::string& token) const {
    const auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token) != 0; }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw std::invalid_argument("Vocabulary::token: id " + std::to_string(id) +
                                  " out of range (size " + std::to_string(tokens_.size()) + ")");
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return tokens_.size(); }

  int add(const std::string& token) {
    const auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    ids_.emplace(token, id);
    tokens_.push_back(token);
    return id;
  }

  /// Non-reserved tokens in id order, one per line. Reserved entries are
  /// implicit, so from_text(to_text(v)) == v.
  std::string to_text() const {
    std::string out;
    for (std::size_t i = kReservedCount; i < tokens_.size(); ++i) {
      out += tokens_[i];
      out += '\n';
    }
    return out;
  }

  static Vocabulary from_text(const std::string& text) {
    Vocabulary v;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) v.add(line);
    }
    return v;
  }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::map<std::string, int> ids_;
  std::vector<std::string> tokens_;
};

/// Builds a vocabulary from raw document texts: tokens with frequency at
/// least min_count, ordered most-frequent-first with lexicographic
/// tie-break, capped at max_size entries including the reserved five.
inline Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_count,
                              std::size_t max_size) {
  if (corpus.empty()) {
    throw std::runtime_error("build_vocab: empty corpus");
  }
  if (max_size < Vocabulary::kReservedCount) {
    throw std::invalid_argument("build_vocab: max_size " + std::to_string(max_size) +
                                " smaller than the " +
                                std::to_string(Vocabulary::kReservedCount) +
                                " reserved entries");
  }
  std::map<std::string, std::size_t> counts;
  for (const std::string& text : corpus) {
    for (const std::string& tok : tokenize(text)) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  const std::size_t cap = max_size - Vocabulary::kReservedCount;
  for (const auto& [tok, cnt] : ranked) {
    if (v.size() - Vocabulary::kReservedCount >= cap) break;
    if (cnt >= min_count) v.add(tok);
  }
  return v;
}

/// Encoded model input: token ids, query/document segment ids, real-vs-pad
/// mask, and per-position source word offsets (-1 for markers and padding).
struct TokenSequence {
  std::vector<int> ids;
  std::vector<int> segments;
  std::vector<int> mask;
  std::vector<int> origin;

  std::size_t length() const { return ids.size(); }

  std::size_t real_length() const {
    std::size_t n = 0;
    while (n < mask.size() && mask[n] == 1) ++n;
    return n;
  }
};

/// Marker layout control; the default is the standard [CLS] ... [SEP] form.
/// The ablation study drops separators and optionally the leading [CLS].
struct EncodeOptions {
  bool cls = true;
  bool sep = true;
};

namespace detail {

inline void check_max_len(std::size_t max_len) {
  if (max_len < 4) {
    throw std::invalid_argument("encode: max_len must be at least 4, got " +
                                std::to_string(max_len));
  }
}

inline void pad_to(TokenSequence& seq, std::size_t max_len) {
  while (seq.ids.size() < max_len) {
    seq.ids.push_back(Vocabulary::kPad);
    seq.segments.push_back(0);
    seq.mask.push_back(0);
    seq.origin.push_back(-1);
  }
}

}  // namespace detail

/// [CLS] q... [SEP] d... [SEP], segment 0 over the query side including its
/// separator and 1 over the document side. When the pair is overlong the
/// document tail is truncated first, then the query tail.
inline TokenSequence encode_pair(const std::vector<std::string>& q_tokens,
                                 const std::vector<std::string>& d_tokens,
                                 const Vocabulary& vocab, std::size_t max_len,
                                 EncodeOptions opts = {}) {
  detail::check_max_len(max_len);
  const std::size_t overhead = (opts.cls ? 1 : 0) + (opts.sep ? 2 : 0);
  std::size_t q_len = q_tokens.size();
  std::size_t d_len = d_tokens.size();
  if (q_len + d_len + overhead > max_len) {
    d_len = max_len > overhead + q_len ? max_len - overhead - q_len : 0;
    if (q_len + d_len + overhead > max_len) q_len = max_len - overhead;
  }
  TokenSequence seq;
  seq.ids.reserve(max_len);
  auto push = [&](int id, int segment, int origin) {
    seq.ids.push_back(id);
    seq.segments.push_back(segment);
    seq.mask.push_back(1);
    seq.origin.push_back(origin);
  };
  if (opts.cls) push(Vocabulary::kCls, 0, -1);
  for (std::size_t i = 0; i < q_len; ++i) push(vocab.id(q_tokens[i]), 0, static_cast<int>(i));
  if (opts.sep) push(Vocabulary::kSep, 0, -1);
  for (std::size_t i = 0; i < d_len; ++i) push(vocab.id(d_tokens[i]), 1, static_cast<int>(i));
  if (opts.sep) push(Vocabulary::kSep, 1, -1);
  detail::pad_to(seq, max_len);
  return seq;
}

/// [CLS] tokens... [SEP] with all-zero segments; same truncation and padding
/// rules as encode_pair.
inline TokenSequence encode_single(const std::vector<std::string>& tokens,
                                   const Vocabulary& vocab, std::size_t max_len,
                                   EncodeOptions opts = {}) {
  detail::check_max_len(max_len);
  const std::size_t overhead = (opts.cls ? 1 : 0) + (opts.sep ? 1 : 0);
  const std::size_t n = std::min(tokens.size(), max_len - overhead);
  TokenSequence seq;
  seq.ids.reserve(max_len);
  auto push = [&](int id, int origin) {
    seq.ids.push_back(id);
    seq.segments.push_back(0);
    seq.mask.push_back(1);
    seq.origin.push_back(origin);
  };
  if (opts.cls) push(Vocabulary::kCls, -1);
  for (std::size_t i = 0; i < n; ++i) push(vocab.id(tokens[i]), static_cast<int>(i));
  if (opts.sep) push(Vocabulary::kSep, -1);
  detail::pad_to(seq, max_len);
  return seq;
}

}  // namespace ranklab
