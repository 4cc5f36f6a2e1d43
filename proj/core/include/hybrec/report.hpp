#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hybrec/experiment.hpp"

namespace hybrec {

enum class ReportFormat { csv, table };

ReportFormat report_format_from_string(std::string_view s);

inline constexpr std::string_view kReportHeader =
    "config,precision_at_10,recall_at_10,ndcg_at_10,latency_mean_ms,latency_std_ms,train_seconds,trainable_params,seed";

// Accuracy columns with 6 decimals, milliseconds and seconds with 3.
std::string render_csv(std::span<const ReportRow> rows);

// Aligned text table; latency rendered as "mean ± std".
std::string render_table(std::span<const ReportRow> rows);

// latency_mean_ms,ndcg_at_10 per config, for plotting the latency/accuracy trade-off.
std::string render_tradeoff_csv(std::span<const ReportRow> rows);

// Writes the rendering to `out_path`, or to stdout when the path is empty.
// Throws InvalidArgument on zero rows and DataError when the file cannot be written.
void emit_report(std::span<const ReportRow> rows, ReportFormat format, const std::filesystem::path& out_path);

// Parses render_csv output. Throws DataError naming the line on a bad header,
// a wrong field count or an unparseable number.
std::vector<ReportRow> parse_report_csv(std::string_view text);

}  // namespace hybrec
