#include "hybrec/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "hybrec/errors.hpp"
#include "hybrec/metrics.hpp"

namespace hybrec {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

template <class T>
T parse_field(const std::string& s, std::size_t line_no) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw DataError("report line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

// Integer milliseconds once latencies reach 10 ms, two decimals below that so
// sub-millisecond paths stay distinguishable.
std::string latency_cell(const ReportRow& r) {
  return r.latency_mean_ms >= 10.0 ? format_mean_std(r.latency_mean_ms, r.latency_std_ms)
                                   : fixed(r.latency_mean_ms, 2) + " ± " + fixed(r.latency_std_ms, 2);
}

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80 ? 1 : 0;  // count UTF-8 lead bytes
  return n;
}

}  // namespace

ReportFormat report_format_from_string(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "table") return ReportFormat::table;
  throw InvalidArgument("unknown report format '" + std::string(s) + "' (expected csv or table)");
}

std::string render_csv(std::span<const ReportRow> rows) {
  std::string out(kReportHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += csv_field(r.config) + ',' + fixed(r.precision_at_10, 6) + ',' + fixed(r.recall_at_10, 6) + ',' +
           fixed(r.ndcg_at_10, 6) + ',' + fixed(r.latency_mean_ms, 3) + ',' + fixed(r.latency_std_ms, 3) + ',' +
           fixed(r.train_seconds, 3) + ',' + std::to_string(r.trainable_params) + ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

std::string render_table(std::span<const ReportRow> rows) {
  const std::vector<std::string> header{"Config", "P@10", "R@10", "NDCG@10", "Latency (ms)", "Train (s)",
                                        "Trainable params", "Seed"};
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& r : rows) {
    cells.push_back({r.config, fixed(r.precision_at_10, 4), fixed(r.recall_at_10, 4), fixed(r.ndcg_at_10, 4),
                     latency_cell(r), fixed(r.train_seconds, 2), std::to_string(r.trainable_params),
                     std::to_string(r.seed)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(width[c] - display_width(row[c]), ' ');
      if (c > 0) line += "  ";
      line += c == 0 ? row[c] + pad : pad + row[c];  // labels left, numbers right
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

std::string render_tradeoff_csv(std::span<const ReportRow> rows) {
  std::string out = "config,latency_mean_ms,ndcg_at_10\n";
  for (const auto& r : rows) out += csv_field(r.config) + ',' + fixed(r.latency_mean_ms, 3) + ',' + fixed(r.ndcg_at_10, 6) + '\n';
  return out;
}

void emit_report(std::span<const ReportRow> rows, ReportFormat format, const std::filesystem::path& out_path) {
  if (rows.empty()) throw InvalidArgument("emit_report: no rows");
  const std::string text = format == ReportFormat::csv ? render_csv(rows) : render_table(rows);
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot write report to " + out_path.string());
  out << text;
  if (!out) throw DataError("failed writing report to " + out_path.string());
}

std::vector<ReportRow> parse_report_csv(std::string_view text) {
  std::vector<ReportRow> rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (line_no == 1) {
      if (line != kReportHeader) throw DataError("report line 1: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) throw DataError("report line " + std::to_string(line_no) + ": expected 9 fields");
    rows.push_back(ReportRow{f[0], parse_field<double>(f[1], line_no), parse_field<double>(f[2], line_no),
                             parse_field<double>(f[3], line_no), parse_field<double>(f[4], line_no),
                             parse_field<double>(f[5], line_no), parse_field<double>(f[6], line_no),
                             parse_field<std::size_t>(f[7], line_no), parse_field<std::uint64_t>(f[8], line_no)});
  }
  if (line_no == 0) throw DataError("report: empty input");
  return rows;
}

}  // namespace hybrec
