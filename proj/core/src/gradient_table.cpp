#include "sphconv/gradient_table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "sphconv/error.hpp"

namespace sphconv {

const Shell* ShellTable::find(double b, double tolerance) const {
  const Shell* best = nullptr;
  for (const Shell& s : shells) {
    const double d = std::abs(s.nominal_b - b);
    if (d <= tolerance && (!best || d < std::abs(best->nominal_b - b))) best = &s;
  }
  return best;
}

ShellTable detect_shells(std::span<const double> bvals, double tolerance, double b0_threshold) {
  if (!(tolerance > 0.0))
    throw InvalidArgument("shell tolerance must be positive, got " + std::to_string(tolerance));

  ShellTable table;
  std::vector<std::size_t> weighted;
  for (std::size_t i = 0; i < bvals.size(); ++i)
    (bvals[i] <= b0_threshold ? table.b0 : weighted).push_back(i);
  std::stable_sort(weighted.begin(), weighted.end(),
                   [&](std::size_t a, std::size_t b) { return bvals[a] < bvals[b]; });

  std::vector<std::vector<std::size_t>> groups;
  double group_min = 0.0;
  for (std::size_t i : weighted) {
    if (groups.empty() || bvals[i] - group_min > tolerance) {
      groups.emplace_back();
      group_min = bvals[i];
    }
    groups.back().push_back(i);
  }

  for (auto& g : groups) {
    const double mean =
        std::accumulate(g.begin(), g.end(), 0.0, [&](double acc, std::size_t i) { return acc + bvals[i]; }) /
        static_cast<double>(g.size());
    std::sort(g.begin(), g.end());
    table.shells.push_back(Shell{std::round(mean / 5.0) * 5.0, std::move(g)});
  }
  return table;
}

GradientScheme::GradientScheme(std::vector<Eigen::Vector3d> vectors, std::vector<double> bvals,
                               double tolerance)
    : vectors_(std::move(vectors)), bvals_(std::move(bvals)) {
  if (vectors_.size() != bvals_.size())
    throw ShapeError("gradient table has " + std::to_string(bvals_.size()) + " b-values but " +
                     std::to_string(vectors_.size()) + " vectors");
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    if (!std::isfinite(bvals_[i]) || !vectors_[i].allFinite())
      throw InvalidArgument("non-finite gradient entry at index " + std::to_string(i));
    const double norm = vectors_[i].norm();
    if (norm > 0.0) {
      vectors_[i] /= norm;
    } else if (bvals_[i] > kB0Threshold) {
      throw InvalidArgument("zero gradient vector at index " + std::to_string(i) + " with b = " +
                            std::to_string(bvals_[i]));
    }
  }
  shells_ = detect_shells(bvals_, tolerance);
}

std::vector<Direction> GradientScheme::directions(const Shell& shell) const {
  std::vector<Direction> dirs;
  dirs.reserve(shell.members.size());
  for (std::size_t i : shell.members) dirs.emplace_back(vectors_.at(i));
  return dirs;
}

namespace {

using Rows = std::vector<std::vector<double>>;

/// Non-empty lines of whitespace-separated reals.
Rows parse_rows(std::string_view text, const char* what) {
  Rows rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);

    std::vector<double> row;
    std::size_t pos = 0;
    while (pos < line.size()) {
      if (std::isspace(static_cast<unsigned char>(line[pos]))) {
        ++pos;
        continue;
      }
      std::size_t end = pos;
      while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
      const std::string_view token = line.substr(pos, end - pos);
      const char* first = token.data();
      if (!token.empty() && token.front() == '+') ++first;
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
      if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value))
        throw ParseError(std::string(what) + ": invalid number \"" + std::string(token) + "\"",
                         line_no, pos + 1);
      row.push_back(value);
      pos = end;
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

}  // namespace

GradientScheme parse_bvals_bvecs(std::string_view bvals_text, std::string_view bvecs_text,
                                 double tolerance) {
  std::vector<double> bvals;
  for (auto& row : parse_rows(bvals_text, "bvals")) bvals.insert(bvals.end(), row.begin(), row.end());
  if (bvals.empty()) throw ParseError("bvals: no values");

  const Rows rows = parse_rows(bvecs_text, "bvecs");
  const std::size_t n = bvals.size();
  std::vector<Eigen::Vector3d> vectors(n);

  auto all_of_length = [&](std::size_t len) {
    return std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return r.size() == len; });
  };

  if (rows.size() == 3 && all_of_length(n)) {
    for (std::size_t i = 0; i < n; ++i) vectors[i] = {rows[0][i], rows[1][i], rows[2][i]};
  } else if (rows.size() == n && all_of_length(3)) {
    for (std::size_t i = 0; i < n; ++i) vectors[i] = {rows[i][0], rows[i][1], rows[i][2]};
  } else if (rows.size() == 3) {
    std::ostringstream os;
    os << "length mismatch: bvals has " << n << " entries, bvecs rows have " << rows[0].size()
       << ", " << rows[1].size() << ", " << rows[2].size() << " columns";
    throw ParseError(os.str());
  } else {
    std::ostringstream os;
    os << "bvecs has " << rows.size() << " rows; expected 3 rows of " << n << " values or " << n
       << " rows of 3 values";
    throw ParseError(os.str());
  }

  try {
    return GradientScheme(std::move(vectors), std::move(bvals), tolerance);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("bvecs: ") + e.what());
  }
}

GradientScheme read_bvals_bvecs(const std::filesystem::path& bvals,
                                const std::filesystem::path& bvecs, double tolerance) {
  return parse_bvals_bvecs(read_text(bvals), read_text(bvecs), tolerance);
}

void write_bvals_bvecs(const std::filesystem::path& bvals, const std::filesystem::path& bvecs,
                       const GradientScheme& scheme) {
  std::ostringstream bv;
  bv << std::setprecision(17);
  for (std::size_t i = 0; i < scheme.size(); ++i) bv << (i ? " " : "") << scheme.bvals()[i];
  bv << "\n";
  write_text(bvals, bv.str());

  std::ostringstream vec;
  vec << std::setprecision(17);
  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t i = 0; i < scheme.size(); ++i) vec << (i ? " " : "") << scheme.vectors()[i][axis];
    vec << "\n";
  }
  write_text(bvecs, vec.str());
}

std::vector<Direction> parse_directions(std::string_view text) {
  const Rows rows = parse_rows(text, "directions");
  if (rows.empty()) throw ParseError("directions: no entries");
  std::vector<Direction> dirs;
  dirs.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 3)
      throw ParseError("directions: entry " + std::to_string(i + 1) + " has " +
                       std::to_string(rows[i].size()) + " values, expected 3");
    try {
      dirs.emplace_back(rows[i][0], rows[i][1], rows[i][2]);
    } catch (const InvalidArgument& e) {
      throw ParseError("directions: entry " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return dirs;
}

std::vector<Direction> read_directions(const std::filesystem::path& path) {
  return parse_directions(read_text(path));
}

void write_directions(const std::filesystem::path& path, std::span<const Direction> dirs) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const Direction& d : dirs) os << d.x() << " " << d.y() << " " << d.z() << "\n";
  write_text(path, os.str());
}

DwiVolume gather_shells(const NormalizedDwi& dwi, std::span<const Shell* const> shells) {
  if (shells.empty()) throw InvalidArgument("no shells selected");
  const std::size_t n = shells.front()->members.size();
  for (const Shell* s : shells)
    if (s->members.size() != n)
      throw ShapeError("selected shells have different numbers of directions (" +
                       std::to_string(n) + " vs " + std::to_string(s->members.size()) + ")");

  const Array4& sig = dwi.signal;
  Volume5 out(Shape5{1, shells.size() * n, sig.dims[0], sig.dims[1], sig.dims[2]});
  std::size_t c = 0;
  for (const Shell* s : shells)
    for (std::size_t acq : s->members) {
      const auto it = std::find(dwi.source_volumes.begin(), dwi.source_volumes.end(), acq);
      if (it == dwi.source_volumes.end())
        throw ShapeError("acquisition volume " + std::to_string(acq) + " is not diffusion weighted");
      const auto src = sig.volume(static_cast<std::size_t>(it - dwi.source_volumes.begin()));
      std::copy(src.begin(), src.end(), out.channel(0, c++).begin());
    }
  return DwiVolume(std::move(out), shells.size());
}

}  // namespace sphconv
