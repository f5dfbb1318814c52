#pragma once

// File helpers: whole-file reads and atomic writes (temp file + rename).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "usat/corpus.hpp"
#include "usat/errors.hpp"
#include "usat/text.hpp"

namespace usat {

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

/// Writes via `fill` into a sibling temp file, then renames it over `path`.
/// Readers never observe a partially written file.
inline void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill) {
  if (path.has_parent_path() && !path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    fill(out);
    out.flush();
    if (!out) throw DataError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot move '" + tmp.string() + "' into place: " + ec.message());
  }
}

inline void write_text_atomically(const std::filesystem::path& path, const std::string& text) {
  write_atomically(path, [&](std::ostream& out) { out << text; });
}

inline ParseResult<Dialogue> read_dialogues(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_dialogues(in);
}

inline ParseResult<TurnAnnotation> read_annotations(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_annotations(in);
}

inline ParseResult<DialogueRating> read_ratings(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_ratings(in);
}

inline Lexicon read_lexicon(const std::filesystem::path& path) {
  auto in = open_input(path);
  return Lexicon::read(in);
}

}  // namespace usat
