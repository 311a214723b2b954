#include "legal_synth/text.hpp"

#include <fstream>
#include <sstream>

#include "legal_synth/error.hpp"

namespace legal_synth {

namespace {

bool is_hspace(char c) { return c == ' ' || c == '\t' || c == '\f' || c == '\v'; }

bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) ||
         (c >= 0x5b && c <= 0x60) || (c >= 0x7b && c <= 0x7e);
}

// Multi-byte punctuation treated as separators.
constexpr std::string_view kUtf8Punct[] = {
    "„", "“", "”", "‚", "‘", "’", "«",
    "»", "–", "—", "…", "§", "·", "\xC2\xA0",
};

}  // namespace

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  while (b < s.size() && (is_hspace(s[b]) || s[b] == '\n' || s[b] == '\r')) ++b;
  std::size_t e = s.size();
  while (e > b && (is_hspace(s[e - 1]) || s[e - 1] == '\n' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::string line;
  bool pending_break = false;
  auto flush_line = [&] {
    const auto t = trim(line);
    if (!t.empty()) {
      if (pending_break && !out.empty()) out.push_back('\n');
      out.append(t);
      pending_break = false;
    }
    line.clear();
  };
  for (char c : s) {
    if (c == '\n') {
      flush_line();
      pending_break = true;
    } else if (c == '\r') {
      continue;
    } else if (is_hspace(c)) {
      if (!line.empty() && line.back() != ' ') line.push_back(' ');
    } else {
      line.push_back(c);
    }
  }
  flush_line();
  return out;
}

std::string casefold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c >= 'A' && c <= 'Z') {
      out.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (c == 0xC3 && i + 1 < s.size()) {
      // U+00C0..U+00DE (Latin-1 uppercase, minus U+00D7) fold by +0x20.
      auto n = static_cast<unsigned char>(s[i + 1]);
      if (n >= 0x80 && n <= 0x9E && n != 0x97) n = static_cast<unsigned char>(n + 0x20);
      out.push_back(static_cast<char>(c));
      out.push_back(static_cast<char>(n));
      ++i;
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

std::vector<std::string> fold_tokens(std::string_view s) {
  std::string folded = casefold(s);
  std::string spaced;
  spaced.reserve(folded.size());
  for (std::size_t i = 0; i < folded.size();) {
    bool matched = false;
    for (auto p : kUtf8Punct) {
      if (folded.compare(i, p.size(), p) == 0) {
        spaced.push_back(' ');
        i += p.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    const auto c = static_cast<unsigned char>(folded[i]);
    spaced.push_back(is_ascii_punct(c) ? ' ' : folded[i]);
    ++i;
  }
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : spaced) {
    if (is_hspace(c) || c == '\n' || c == '\r') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

bool is_valid_section_label(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i == 0) return false;
  if (i == s.size()) return true;
  return i + 1 == s.size() && s[i] >= 'a' && s[i] <= 'z';
}

bool section_label_less(std::string_view a, std::string_view b) {
  auto split = [](std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    auto digits = s.substr(0, i);
    while (digits.size() > 1 && digits.front() == '0') digits.remove_prefix(1);
    return std::pair{digits, s.substr(i)};
  };
  const auto [da, ra] = split(a);
  const auto [db, rb] = split(b);
  if (da.size() != db.size()) return da.size() < db.size();
  if (da != db) return da < db;
  if (ra != rb) return ra < rb;
  return a < b;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::Io, "cannot read " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorKind::Io, "short write to " + path.string());
}

std::vector<std::string> split_lines(std::string_view content) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    auto line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

std::uint64_t SeededRng::below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % bound;
}

}  // namespace legal_synth
