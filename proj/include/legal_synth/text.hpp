#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace legal_synth {

std::string_view trim(std::string_view s);

// Collapses runs of spaces/tabs to one space, trims every line and turns any
// run of line breaks into a single '\n'.
std::string normalize_whitespace(std::string_view s);

// ASCII and German umlaut case folding on UTF-8 input.
std::string casefold(std::string_view s);

// Case-folds, replaces punctuation (ASCII and common typographic marks) with
// spaces and splits on whitespace.
std::vector<std::string> fold_tokens(std::string_view s);

// Ordering for section labels such as "433" < "812" < "812a" < "1362".
bool section_label_less(std::string_view a, std::string_view b);

bool is_valid_section_label(std::string_view s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Splits on '\n', drops a trailing '\r' per line. Blank lines are kept so
// row numbers stay meaningful.
std::vector<std::string> split_lines(std::string_view content);

// Portable seeded randomness. std::uniform_int_distribution and std::shuffle
// are implementation-defined, so bounded draws are done here by rejection.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  std::uint64_t below(std::uint64_t bound);
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace legal_synth
