#ifndef CTXSUM_INGEST_HPP
#define CTXSUM_INGEST_HPP

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "corpus.hpp"

namespace ctxsum {

// Best-effort language-agnostic subroutine extraction for brace languages:
// a block opened by `identifier ( ... ) ... {` is taken as a subroutine,
// its summary taken from the comment immediately above it. Blocks without
// a comment are skipped since the corpus requires a reference summary.
struct ExtractedSub {
  std::string signature_and_body;
  std::string comment;
};

namespace detail {

inline bool looks_like_subroutine(const std::string& head) {
  // head is the text from the previous statement boundary to the '{'
  size_t open = head.find('(');
  size_t close = head.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open) return false;
  // identifier directly before the '('
  long i = (long)open - 1;
  while (i >= 0 && std::isspace((unsigned char)head[i])) --i;
  long end = i;
  while (i >= 0 && (std::isalnum((unsigned char)head[i]) || head[i] == '_')) --i;
  if (end == i) return false;
  std::string name = head.substr(i + 1, end - i);
  static const std::set<std::string> control{"if", "for", "while", "switch", "catch", "do", "else", "return"};
  return !control.count(name);
}

}  // namespace detail

namespace detail {

// advances past a string/char literal starting at pos (returns one past it)
inline size_t skip_literal(const std::string& text, size_t pos) {
  char quote = text[pos];
  size_t i = pos + 1, n = text.size();
  while (i < n && text[i] != quote) {
    if (text[i] == '\\') ++i;
    ++i;
  }
  return std::min(n, i + 1);
}

// advances past // or /* */ starting at pos
inline size_t skip_comment(const std::string& text, size_t pos) {
  size_t n = text.size();
  if (text[pos + 1] == '/') {
    size_t i = pos;
    while (i < n && text[i] != '\n') ++i;
    return i;
  }
  size_t i = pos + 2;
  while (i + 1 < n && !(text[i] == '*' && text[i + 1] == '/')) ++i;
  return std::min(n, i + 2);
}

}  // namespace detail

inline std::vector<ExtractedSub> extract_subroutines(const std::string& text) {
  std::vector<ExtractedSub> out;
  std::string pending_comment;
  size_t boundary = 0;  // after the last statement boundary or comment
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (c == '"' || c == '\'') {
      i = detail::skip_literal(text, i);
      continue;
    }
    if (c == '/' && i + 1 < n && (text[i + 1] == '/' || text[i + 1] == '*')) {
      size_t start = i;
      i = detail::skip_comment(text, i);
      pending_comment = text.substr(start, i - start);
      boundary = i;
      continue;
    }
    if (c == ';' || c == '}') {
      boundary = i + 1;
      pending_comment.clear();
      ++i;
      continue;
    }
    if (c == '{') {
      std::string head = text.substr(boundary, i - boundary);
      if (detail::looks_like_subroutine(head)) {
        int depth = 1;
        size_t j = i + 1;
        while (j < n && depth > 0) {
          char d = text[j];
          if (d == '"' || d == '\'') {
            j = detail::skip_literal(text, j);
          } else if (d == '/' && j + 1 < n && (text[j + 1] == '/' || text[j + 1] == '*')) {
            j = detail::skip_comment(text, j);
          } else {
            if (d == '{') ++depth;
            if (d == '}') --depth;
            ++j;
          }
        }
        if (depth == 0 && !pending_comment.empty()) {
          ExtractedSub sub;
          sub.signature_and_body = text.substr(boundary, j - boundary);
          sub.comment = pending_comment;
          out.push_back(std::move(sub));
        }
        pending_comment.clear();
        boundary = j;
        i = j;
        continue;
      }
      boundary = i + 1;
      pending_comment.clear();
    }
    ++i;
  }
  return out;
}

// Converts a directory tree of source files into the corpus format.
// Projects are the first-level directories (files at the root go to a
// project named "root"); splits are assigned deterministically by project
// hash, roughly 8/1/1, and can be edited afterwards.
struct IngestStats {
  long files = 0;
  long subroutines = 0;
  long projects = 0;
};

inline IngestStats ingest_tree(const std::string& src_dir, const std::string& out_dir) {
  namespace fs = std::filesystem;
  check(fs::is_directory(src_dir), "ingest: not a directory: " + src_dir);
  static const std::set<std::string> exts{".c",  ".cc", ".cpp", ".cxx", ".h",  ".hh",  ".hpp", ".java",
                                          ".js", ".ts", ".jsx", ".tsx", ".cs", ".go",  ".rs",  ".kt",
                                          ".m",  ".mm", ".php", ".scala", ".swift"};
  std::vector<fs::path> paths;
  for (auto& entry : fs::recursive_directory_iterator(src_dir))
    if (entry.is_regular_file() && exts.count(entry.path().extension().string())) paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());

  fs::create_directories(out_dir);
  std::ofstream jout(out_dir + "/subroutines.jsonl", std::ios::trunc);
  check(jout.good(), "ingest: cannot write " + out_dir + "/subroutines.jsonl");

  IngestStats stats;
  std::set<std::string> projects;
  for (const fs::path& p : paths) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::vector<ExtractedSub> subs = extract_subroutines(ss.str());
    if (subs.empty()) continue;
    fs::path rel = fs::relative(p, src_dir);
    std::string project = rel.begin() != rel.end() && std::next(rel.begin()) != rel.end()
                              ? rel.begin()->string()
                              : std::string("root");
    std::string file_id = rel.generic_string();
    projects.insert(project);
    ++stats.files;
    int pos = 0;
    for (const ExtractedSub& sub : subs) {
      std::vector<std::string> code = tokenize(sub.signature_and_body);
      std::vector<std::string> summary = tokenize(sub.comment);
      if (code.empty() || summary.empty()) continue;
      nlohmann::json j = {{"id", file_id + "#" + std::to_string(pos)},
                          {"project_id", project},
                          {"file_id", file_id},
                          {"position_in_file", pos},
                          {"code", code},
                          {"summary", summary}};
      jout << j.dump() << "\n";
      ++pos;
      ++stats.subroutines;
    }
  }
  stats.projects = (long)projects.size();
  check(stats.subroutines > 0, "ingest: no documented subroutines found under " + src_dir);

  nlohmann::json splits = nlohmann::json::object();
  for (const std::string& p : projects) {
    uint64_t h = fnv1a64(p) % 10;
    splits[p] = h < 8 ? "train" : (h == 8 ? "val" : "test");
  }
  std::ofstream sout(out_dir + "/splits.json", std::ios::trunc);
  check(sout.good(), "ingest: cannot write " + out_dir + "/splits.json");
  sout << splits.dump(2) << "\n";
  return stats;
}

}  // namespace ctxsum

#endif
