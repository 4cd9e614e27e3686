#include "shapeinv/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

#include <unistd.h>

namespace shapeinv {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t j = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

std::string_view strip_comment(std::string_view line) {
  const auto hash = line.find('#');
  return hash == std::string_view::npos ? line : line.substr(0, hash);
}

double parse_number(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line_no) + ": '" + std::string(tok) + "' is not a number");
  }
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::NonFinite, "line " + std::to_string(line_no) + ": non-finite coordinate");
  }
  return v;
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    if (!fn(text.substr(pos, end - pos), line_no)) return;
    pos = end + 1;
  }
}

}  // namespace

PointCloud parse_xyz(std::string_view text) {
  PointCloud cloud;
  for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    const auto tokens = split_ws(strip_comment(raw));
    if (tokens.empty()) return true;
    if (tokens.size() != 3) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 3 numbers, got " +
                                             std::to_string(tokens.size()));
    }
    cloud.push_back(Vec3(parse_number(tokens[0], line_no), parse_number(tokens[1], line_no),
                         parse_number(tokens[2], line_no)));
    return true;
  });
  return cloud;
}

std::string emit_xyz(const PointCloud& cloud) {
  require_finite(cloud, "emit_xyz");
  std::string out;
  out.reserve(cloud.size() * 64);
  std::array<char, 32> buf{};
  for (const Vec3& p : cloud) {
    for (int a = 0; a < 3; ++a) {
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), p[a]);
      out.append(buf.data(), res.ptr);
      out.push_back(a == 2 ? '\n' : ' ');
    }
  }
  return out;
}

PointCloud parse_ply(std::string_view text) {
  enum class State { Magic, Header, Body };
  State state = State::Magic;
  std::size_t vertices = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  std::vector<std::string> props;
  std::array<int, 3> col{-1, -1, -1};
  PointCloud cloud;

  for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    const auto tokens = split_ws(raw);
    auto fail = [&](const std::string& what) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + what);
    };
    switch (state) {
      case State::Magic:
        if (tokens.size() != 1 || tokens[0] != "ply") fail("missing 'ply' magic");
        state = State::Header;
        return true;
      case State::Header:
        if (tokens.empty() || tokens[0] == "comment" || tokens[0] == "obj_info") return true;
        if (tokens[0] == "format") {
          if (tokens.size() < 2 || tokens[1] != "ascii") fail("only ASCII PLY is supported");
        } else if (tokens[0] == "element") {
          if (tokens.size() != 3) fail("malformed element line");
          in_vertex = tokens[1] == "vertex";
          if (in_vertex) {
            if (seen_vertex) fail("duplicate vertex element");
            seen_vertex = true;
            vertices = static_cast<std::size_t>(parse_number(tokens[2], line_no));
          } else if (!seen_vertex) {
            fail("vertex element must come first");
          }
        } else if (tokens[0] == "property") {
          if (in_vertex) {
            if (tokens.size() < 3 || tokens[1] == "list") fail("unsupported vertex property");
            const std::string name(tokens.back());
            for (int a = 0; a < 3; ++a) {
              if (name == std::string(1, static_cast<char>('x' + a))) col[a] = static_cast<int>(props.size());
            }
            props.push_back(name);
          }
        } else if (tokens[0] == "end_header") {
          if (!seen_vertex || col[0] < 0 || col[1] < 0 || col[2] < 0) fail("vertex x/y/z properties missing");
          state = State::Body;
          return vertices > 0;
        } else {
          fail("unknown header keyword '" + std::string(tokens[0]) + "'");
        }
        return true;
      case State::Body:
        if (tokens.empty()) return true;
        if (tokens.size() < props.size()) fail("vertex line has too few values");
        cloud.push_back(Vec3(parse_number(tokens[static_cast<std::size_t>(col[0])], line_no),
                             parse_number(tokens[static_cast<std::size_t>(col[1])], line_no),
                             parse_number(tokens[static_cast<std::size_t>(col[2])], line_no)));
        return cloud.size() < vertices;
    }
    return true;
  });
  if (state != State::Body) throw Error(ErrorCode::ParseError, "PLY header not terminated");
  if (cloud.size() != vertices) {
    throw Error(ErrorCode::ParseError, "PLY declares " + std::to_string(vertices) + " vertices, found " +
                                           std::to_string(cloud.size()));
  }
  return cloud;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot create " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCode::IoError, "write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot move into place: " + path.string());
  }
}

PointCloud read_cloud(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  PointCloud c = path.extension() == ".ply" ? parse_ply(text) : parse_xyz(text);
  if (c.empty()) throw Error(ErrorCode::EmptyCloud, path.string() + " holds no points");
  return c;
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  write_file_atomic(path, emit_xyz(cloud));
}

}  // namespace shapeinv
