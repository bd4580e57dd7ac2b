#include "embedrul/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace embedrul {

namespace {

constexpr std::size_t kCmapssSensorCount = 24;

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& msg) {
  fail(ErrorKind::parse_error, "line " + std::to_string(line_no) + ": " + msg);
}

double parse_double(const std::string& tok, std::size_t line_no) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    parse_fail(line_no, "bad number '" + tok + "'");
  if (!std::isfinite(v)) parse_fail(line_no, "non-finite number");
  return v;
}

long long parse_int(const std::string& tok, std::size_t line_no) {
  long long v = 0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    parse_fail(line_no, "bad integer '" + tok + "'");
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) toks.push_back(tok);
  return toks;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> toks;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      toks.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  toks.push_back(cur);
  return toks;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct SeriesBuilder {
  std::string id;
  Vec timestamps;
  std::vector<Vec> value_rows;
  std::vector<Vec> present_rows;

  MultivariateSeries finish() const {
    MultivariateSeries s;
    s.instance_id = id;
    s.timestamps = timestamps;
    const std::size_t t = timestamps.size();
    const std::size_t n = value_rows.empty() ? 0 : value_rows[0].size();
    s.values = Matrix(t, n);
    s.present = Matrix(t, n);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        s.values(i, j) = value_rows[i][j];
        s.present(i, j) = present_rows[i][j];
      }
    s.validate();
    return s;
  }
};

}  // namespace

std::vector<MultivariateSeries> parse_cmapss(std::istream& in) {
  std::map<long long, SeriesBuilder> units;
  std::vector<long long> order;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const std::vector<std::string> toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 2 + kCmapssSensorCount)
      parse_fail(line_no, "expected " + std::to_string(2 + kCmapssSensorCount) +
                              " columns, got " + std::to_string(toks.size()));
    const long long unit = parse_int(toks[0], line_no);
    const long long cycle = parse_int(toks[1], line_no);

    auto it = units.find(unit);
    if (it == units.end()) {
      if (cycle != 1)
        fail(ErrorKind::format_error, "line " + std::to_string(line_no) +
                                          ": unit " + std::to_string(unit) +
                                          " does not start at cycle 1");
      it = units.emplace(unit, SeriesBuilder{}).first;
      it->second.id = std::to_string(unit);
      order.push_back(unit);
    } else if (double(cycle - 1) <= it->second.timestamps.back()) {
      fail(ErrorKind::format_error,
           "line " + std::to_string(line_no) + ": unit " + std::to_string(unit) +
               " cycles not ascending");
    }

    Vec row(kCmapssSensorCount);
    for (std::size_t j = 0; j < kCmapssSensorCount; ++j)
      row[j] = parse_double(toks[2 + j], line_no);
    it->second.timestamps.push_back(double(cycle - 1));
    it->second.value_rows.push_back(std::move(row));
    it->second.present_rows.emplace_back(kCmapssSensorCount, 1.0);
  }

  if (order.empty()) fail(ErrorKind::insufficient_data, "no data rows");
  std::vector<MultivariateSeries> out;
  out.reserve(order.size());
  for (long long unit : order) out.push_back(units.at(unit).finish());
  return out;
}

std::vector<long long> parse_rul_file(std::istream& in) {
  std::vector<long long> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string tok = trim(line);
    if (tok.empty()) continue;
    const long long v = parse_int(tok, line_no);
    if (v < 0) parse_fail(line_no, "negative ground-truth value");
    out.push_back(v);
  }
  if (out.empty()) fail(ErrorKind::insufficient_data, "empty ground-truth file");
  return out;
}

std::vector<MultivariateSeries> parse_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(ErrorKind::insufficient_data, "empty file");
  ++line_no;
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3 || trim(header[0]) != "instance" ||
      trim(header[1]) != "timestamp")
    parse_fail(line_no, "header must be instance,timestamp,<sensors...>");
  const std::size_t n = header.size() - 2;

  std::map<std::string, SeriesBuilder> groups;
  std::vector<std::string> order;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> toks = split_csv_line(line);
    if (toks.size() != header.size())
      parse_fail(line_no, "expected " + std::to_string(header.size()) +
                              " cells, got " + std::to_string(toks.size()));
    const std::string id = trim(toks[0]);
    if (id.empty()) parse_fail(line_no, "empty instance id");
    const double ts = parse_double(trim(toks[1]), line_no);

    auto it = groups.find(id);
    if (it == groups.end()) {
      it = groups.emplace(id, SeriesBuilder{}).first;
      it->second.id = id;
      order.push_back(id);
    }
    SeriesBuilder& b = it->second;
    if (!b.timestamps.empty() && !(ts > b.timestamps.back()))
      parse_fail(line_no, "timestamps not strictly increasing for '" + id + "'");
    b.timestamps.push_back(ts);

    Vec vals(n, 0.0), pres(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const std::string cell = trim(toks[2 + j]);
      if (cell.empty()) continue;
      vals[j] = parse_double(cell, line_no);
      pres[j] = 1.0;
    }
    b.value_rows.push_back(std::move(vals));
    b.present_rows.push_back(std::move(pres));
  }

  if (order.empty()) fail(ErrorKind::insufficient_data, "no data rows");
  std::vector<MultivariateSeries> out;
  out.reserve(order.size());
  for (const std::string& id : order) {
    SeriesBuilder& b = groups.at(id);
    const double t0 = b.timestamps[0];
    for (double& t : b.timestamps) t -= t0;
    out.push_back(b.finish());
  }
  return out;
}

void write_csv(std::ostream& out, const std::vector<MultivariateSeries>& list) {
  if (list.empty()) fail(ErrorKind::invalid_argument, "write_csv: empty list");
  const std::size_t n = list[0].dims();
  out << "instance,timestamp";
  for (std::size_t j = 0; j < n; ++j) out << ",s" << (j + 1);
  out << "\n";
  for (const MultivariateSeries& s : list) {
    if (s.dims() != n)
      fail(ErrorKind::invalid_argument, "write_csv: inconsistent dimensions");
    for (std::size_t i = 0; i < s.length(); ++i) {
      out << s.instance_id << "," << format_double(s.timestamps[i]);
      for (std::size_t j = 0; j < n; ++j) {
        out << ",";
        if (s.present(i, j) != 0.0) out << format_double(s.values(i, j));
      }
      out << "\n";
    }
  }
}

MultivariateSeries Normalizer::apply(const MultivariateSeries& s) const {
  if (s.dims() != mean.size())
    fail(ErrorKind::invalid_argument, "Normalizer: dimension mismatch");
  MultivariateSeries out;
  out.instance_id = s.instance_id;
  out.timestamps = s.timestamps;
  const std::size_t t = s.length();
  out.values = Matrix(t, kept.size());
  out.present = Matrix(t, kept.size());
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const std::size_t j = kept[k];
      if (s.present(i, j) != 0.0) {
        out.values(i, k) = (s.values(i, j) - mean[j]) / stddev[j];
        out.present(i, k) = 1.0;
      }
    }
  return out;
}

Normalizer fit_normalizer(const std::vector<MultivariateSeries>& list,
                          double constant_tol) {
  if (list.empty()) fail(ErrorKind::insufficient_data, "fit_normalizer: no series");
  if (constant_tol < 0.0)
    fail(ErrorKind::invalid_argument, "fit_normalizer: negative tolerance");
  const std::size_t n = list[0].dims();

  std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (const MultivariateSeries& s : list) {
    if (s.dims() != n)
      fail(ErrorKind::invalid_argument, "fit_normalizer: inconsistent dimensions");
    for (std::size_t i = 0; i < s.length(); ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (s.present(i, j) != 0.0) {
          sum[j] += s.values(i, j);
          sumsq[j] += s.values(i, j) * s.values(i, j);
          ++count[j];
        }
  }

  Normalizer norm;
  norm.mean.assign(n, 0.0);
  norm.stddev.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (count[j] == 0) continue;  // never observed: dropped
    const double m = sum[j] / double(count[j]);
    const double var = std::max(0.0, sumsq[j] / double(count[j]) - m * m);
    const double sd = std::sqrt(var);
    norm.mean[j] = m;
    norm.stddev[j] = sd;
    if (sd > constant_tol) norm.kept.push_back(j);
  }
  if (norm.kept.empty())
    fail(ErrorKind::degenerate_data, "fit_normalizer: all dimensions dropped");
  return norm;
}

std::pair<Matrix, Matrix> build_mask_delta(const MultivariateSeries& s) {
  const std::size_t t = s.length();
  const std::size_t n = s.dims();
  Matrix mask(t, n), delta(t, n);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < n; ++j) mask(i, j) = s.present(i, j);
  for (std::size_t j = 0; j < n; ++j) {
    delta(0, j) = 0.0;
    for (std::size_t i = 1; i < t; ++i) {
      const double gap = s.timestamps[i] - s.timestamps[i - 1];
      delta(i, j) = mask(i - 1, j) != 0.0 ? gap : gap + delta(i - 1, j);
    }
  }
  return {mask, delta};
}

std::vector<AugmentedWindow> make_windows(const MultivariateSeries& s,
                                          std::size_t w, std::size_t stride) {
  if (w == 0) fail(ErrorKind::invalid_argument, "make_windows: w == 0");
  if (stride == 0) fail(ErrorKind::invalid_argument, "make_windows: stride == 0");
  std::vector<AugmentedWindow> out;
  const std::size_t t_total = s.length();
  if (t_total < w) return out;

  auto [mask, delta] = build_mask_delta(s);
  const std::size_t n = s.dims();
  for (std::size_t end = w; end <= t_total; end += stride) {
    AugmentedWindow win;
    win.end_index = end;
    win.values = Matrix(w, n);
    win.mask = Matrix(w, n);
    win.delta = Matrix(w, n);
    const std::size_t first = end - w;  // 0-based row of window start
    for (std::size_t r = 0; r < w; ++r)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t row = first + r;
        win.mask(r, j) = mask(row, j);
        win.delta(r, j) = delta(row, j);
        win.values(r, j) = mask(row, j) != 0.0 ? s.values(row, j) : 0.0;
      }
    out.push_back(std::move(win));
  }
  return out;
}

MultivariateSeries downsample_daily(const MultivariateSeries& s, double bucket) {
  if (!(bucket > 0.0))
    fail(ErrorKind::invalid_argument, "downsample_daily: bucket must be > 0");
  const std::size_t n = s.dims();
  const std::size_t buckets =
      std::size_t(std::floor(s.timestamps.back() / bucket)) + 1;

  MultivariateSeries out;
  out.instance_id = s.instance_id;
  out.timestamps.resize(buckets);
  for (std::size_t b = 0; b < buckets; ++b) out.timestamps[b] = double(b);
  out.values = Matrix(buckets, 4 * n);
  out.present = Matrix(buckets, 4 * n);

  std::size_t row = 0;
  for (std::size_t b = 0; b < buckets; ++b) {
    const double hi = double(b + 1) * bucket;
    const std::size_t begin = row;
    while (row < s.length() && s.timestamps[row] < hi) ++row;
    for (std::size_t j = 0; j < n; ++j) {
      double mn = 0.0, mx = 0.0, sum = 0.0, sumsq = 0.0;
      std::size_t cnt = 0;
      for (std::size_t i = begin; i < row; ++i) {
        if (s.present(i, j) == 0.0) continue;
        const double v = s.values(i, j);
        if (cnt == 0) {
          mn = mx = v;
        } else {
          mn = std::min(mn, v);
          mx = std::max(mx, v);
        }
        sum += v;
        sumsq += v * v;
        ++cnt;
      }
      if (cnt == 0) continue;  // all four derived entries stay missing
      const double mean = sum / double(cnt);
      const double sd = std::sqrt(std::max(0.0, sumsq / double(cnt) - mean * mean));
      const double vals[4] = {mn, mx, mean, sd};
      for (std::size_t q = 0; q < 4; ++q) {
        out.values(b, 4 * j + q) = vals[q];
        out.present(b, 4 * j + q) = 1.0;
      }
    }
  }
  return out;
}

}  // namespace embedrul
