#include <algorithm>
#include <cstdint>
#include <unordered_map>

#include "stdcoder/corpus.hpp"

namespace stdcoder {

namespace {

using Ids = std::vector<std::uint32_t>;

// Myers middle-snake bisection over interned line ids. Marks kept[] for every
// line of a and b that is part of the common subsequence.
class Differ {
 public:
  Differ(const Ids& a, const Ids& b) : a_(a), b_(b), keep_a_(a.size(), 0), keep_b_(b.size(), 0) {}

  void run() { diff(0, a_.size(), 0, b_.size()); }

  const std::vector<char>& keep_a() const { return keep_a_; }
  const std::vector<char>& keep_b() const { return keep_b_; }

 private:
  void diff(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
    while (a0 < a1 && b0 < b1 && a_[a0] == b_[b0]) {
      keep_a_[a0++] = 1;
      keep_b_[b0++] = 1;
    }
    while (a0 < a1 && b0 < b1 && a_[a1 - 1] == b_[b1 - 1]) {
      keep_a_[--a1] = 1;
      keep_b_[--b1] = 1;
    }
    if (a0 == a1 || b0 == b1) return;
    auto [x, y] = bisect(a0, a1, b0, b1);
    if (x == 0 && y == 0) return;  // nothing in common
    diff(a0, a0 + x, b0, b0 + y);
    diff(a0 + x, a1, b0 + y, b1);
  }

  std::pair<std::size_t, std::size_t> bisect(std::size_t a0, std::size_t a1, std::size_t b0,
                                             std::size_t b1) {
    const auto n = static_cast<std::ptrdiff_t>(a1 - a0);
    const auto m = static_cast<std::ptrdiff_t>(b1 - b0);
    const std::ptrdiff_t max_d = (n + m + 1) / 2;
    const std::ptrdiff_t off = max_d;
    const std::ptrdiff_t len = 2 * max_d + 2;
    std::vector<std::ptrdiff_t> v1(static_cast<std::size_t>(len), -1);
    std::vector<std::ptrdiff_t> v2(static_cast<std::size_t>(len), -1);
    v1[off + 1] = 0;
    v2[off + 1] = 0;
    const std::ptrdiff_t delta = n - m;
    const bool front = (delta % 2) != 0;
    std::ptrdiff_t k1start = 0, k1end = 0, k2start = 0, k2end = 0;
    auto A = [&](std::ptrdiff_t i) { return a_[a0 + static_cast<std::size_t>(i)]; };
    auto B = [&](std::ptrdiff_t i) { return b_[b0 + static_cast<std::size_t>(i)]; };

    for (std::ptrdiff_t d = 0; d < max_d; ++d) {
      for (std::ptrdiff_t k1 = -d + k1start; k1 <= d - k1end; k1 += 2) {
        const std::ptrdiff_t k1o = off + k1;
        std::ptrdiff_t x1;
        if (k1 == -d || (k1 != d && v1[k1o - 1] < v1[k1o + 1]))
          x1 = v1[k1o + 1];
        else
          x1 = v1[k1o - 1] + 1;
        std::ptrdiff_t y1 = x1 - k1;
        while (x1 < n && y1 < m && A(x1) == B(y1)) {
          ++x1;
          ++y1;
        }
        v1[k1o] = x1;
        if (x1 > n) {
          k1end += 2;
        } else if (y1 > m) {
          k1start += 2;
        } else if (front) {
          const std::ptrdiff_t k2o = off + delta - k1;
          if (k2o >= 0 && k2o < len && v2[k2o] != -1) {
            if (x1 >= n - v2[k2o])
              return {static_cast<std::size_t>(x1), static_cast<std::size_t>(y1)};
          }
        }
      }
      for (std::ptrdiff_t k2 = -d + k2start; k2 <= d - k2end; k2 += 2) {
        const std::ptrdiff_t k2o = off + k2;
        std::ptrdiff_t x2;
        if (k2 == -d || (k2 != d && v2[k2o - 1] < v2[k2o + 1]))
          x2 = v2[k2o + 1];
        else
          x2 = v2[k2o - 1] + 1;
        std::ptrdiff_t y2 = x2 - k2;
        while (x2 < n && y2 < m && A(n - x2 - 1) == B(m - y2 - 1)) {
          ++x2;
          ++y2;
        }
        v2[k2o] = x2;
        if (x2 > n) {
          k2end += 2;
        } else if (y2 > m) {
          k2start += 2;
        } else if (!front) {
          const std::ptrdiff_t k1o = off + delta - k2;
          if (k1o >= 0 && k1o < len && v1[k1o] != -1) {
            const std::ptrdiff_t x1 = v1[k1o];
            const std::ptrdiff_t y1 = off + x1 - k1o;
            if (x1 >= n - x2)
              return {static_cast<std::size_t>(x1), static_cast<std::size_t>(y1)};
          }
        }
      }
    }
    return {0, 0};
  }

  const Ids& a_;
  const Ids& b_;
  std::vector<char> keep_a_;
  std::vector<char> keep_b_;
};

}  // namespace

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = nl + 1;
  }
  return lines;
}

LineDiff compute_diff(std::span<const std::string> parent, std::span<const std::string> child) {
  std::unordered_map<std::string_view, std::uint32_t> intern;
  auto id_of = [&](const std::string& s) {
    auto [it, _] = intern.try_emplace(s, static_cast<std::uint32_t>(intern.size()));
    return it->second;
  };
  Ids a, b;
  a.reserve(parent.size());
  b.reserve(child.size());
  for (const auto& s : parent) a.push_back(id_of(s));
  for (const auto& s : child) b.push_back(id_of(s));

  Differ differ(a, b);
  differ.run();

  LineDiff out;
  for (std::size_t i = 0; i < parent.size(); ++i)
    if (!differ.keep_a()[i]) out.deleted.push_back(parent[i]);
  for (std::size_t j = 0; j < child.size(); ++j)
    if (!differ.keep_b()[j]) out.added.push_back(child[j]);
  return out;
}

LineDiff compute_diff(std::string_view parent_text, std::string_view child_text) {
  auto parent = split_lines(parent_text);
  auto child = split_lines(child_text);
  return compute_diff(parent, child);
}

}  // namespace stdcoder
