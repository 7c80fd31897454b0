#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "harmony/harness.hpp"

namespace harmony {

using nlohmann::json;

double round_significant(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::strtod(buf, nullptr);
}

namespace {

json number(double v) { return std::isfinite(v) ? json(round_significant(v)) : json(nullptr); }

double to_double(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string method_label(const MethodRow& row, bool repeated) {
  if (!repeated) return row.method;
  return row.method + "@" + (row.repeat < 0 ? std::string("mean") : std::to_string(row.repeat));
}

}  // namespace

std::string report_to_json(const ReportDocument& report) {
  json doc;
  doc["schema_version"] = report.schema_version;
  doc["num_classes"] = report.num_classes;
  doc["environment"] = report.environment;
  doc["config"] = report.config;

  json runs = json::array();
  for (const auto& run : report.runs) {
    runs.push_back({{"repeat", run.repeat},
                    {"seed", run.seed},
                    {"partition", {{"strong", run.partition.strong}, {"groups", run.partition.groups}}}});
  }
  doc["runs"] = runs;

  json rows = json::array();
  for (const auto& row : report.rows) {
    json accuracies = json::array();
    for (Eigen::Index k = 0; k < row.per_class_accuracy.size(); ++k) accuracies.push_back(number(row.per_class_accuracy[k]));
    json weak = json::array();
    for (double w : row.weak_accuracy) weak.push_back(number(w));
    rows.push_back({{"method", row.method},
                    {"name", row.name},
                    {"repeat", row.repeat},
                    {"per_class_accuracy", accuracies},
                    {"mean", number(row.mean)},
                    {"variance", number(row.variance)},
                    {"strong_accuracy", row.strong_accuracy ? number(*row.strong_accuracy) : json(nullptr)},
                    {"weak_accuracy", weak},
                    {"forward_passes", row.forward_passes},
                    {"seeds", row.seeds}});
  }
  doc["rows"] = rows;
  return doc.dump(2) + "\n";
}

ReportDocument report_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("report: invalid JSON: ") + e.what());
  }
  try {
    ReportDocument report;
    report.schema_version = doc.at("schema_version").get<int>();
    if (report.schema_version != kReportSchemaVersion) {
      throw DataError("report: unsupported schema_version " + std::to_string(report.schema_version));
    }
    report.num_classes = doc.at("num_classes").get<int>();
    report.environment = doc.at("environment").get<std::map<std::string, std::string>>();
    report.config = doc.at("config").get<std::map<std::string, std::string>>();
    for (const auto& run : doc.at("runs")) {
      RunInfo info;
      info.repeat = run.at("repeat").get<int>();
      info.seed = run.at("seed").get<Seed>();
      info.partition.strong = run.at("partition").at("strong").get<ClassSet>();
      info.partition.groups = run.at("partition").at("groups").get<std::vector<ClassSet>>();
      report.runs.push_back(std::move(info));
    }
    for (const auto& j : doc.at("rows")) {
      MethodRow row;
      row.method = j.at("method").get<std::string>();
      row.name = j.at("name").get<std::string>();
      row.repeat = j.at("repeat").get<int>();
      const auto& acc = j.at("per_class_accuracy");
      row.per_class_accuracy.resize(static_cast<Eigen::Index>(acc.size()));
      for (std::size_t k = 0; k < acc.size(); ++k) row.per_class_accuracy[static_cast<Eigen::Index>(k)] = to_double(acc[k]);
      row.mean = to_double(j.at("mean"));
      row.variance = to_double(j.at("variance"));
      if (!j.at("strong_accuracy").is_null()) row.strong_accuracy = j.at("strong_accuracy").get<double>();
      for (const auto& w : j.at("weak_accuracy")) row.weak_accuracy.push_back(to_double(w));
      row.forward_passes = j.at("forward_passes").get<int>();
      row.seeds = j.at("seeds").get<std::map<std::string, Seed>>();
      report.rows.push_back(std::move(row));
    }
    return report;
  } catch (const json::exception& e) {
    throw DataError(std::string("report: malformed document: ") + e.what());
  }
}

std::string report_to_csv(const ReportDocument& report) {
  const bool repeated = report.runs.size() > 1;
  const std::size_t groups = report.max_groups();
  std::ostringstream out;
  out << "method";
  for (int k = 0; k < report.num_classes; ++k) out << ",class_" << k;
  out << ",avg,var,strong_acc";
  for (std::size_t g = 0; g < groups; ++g) out << ",weak_acc_" << g + 1;
  out << ",fwd_passes\n";
  for (const auto& row : report.rows) {
    out << method_label(row, repeated);
    for (Eigen::Index k = 0; k < row.per_class_accuracy.size(); ++k) out << ',' << csv_number(row.per_class_accuracy[k]);
    out << ',' << csv_number(row.mean) << ',' << csv_number(row.variance) << ','
        << (row.strong_accuracy ? csv_number(*row.strong_accuracy) : "");
    for (std::size_t g = 0; g < groups; ++g) {
      out << ',' << (g < row.weak_accuracy.size() ? csv_number(row.weak_accuracy[g]) : "");
    }
    out << ',' << row.forward_passes << '\n';
  }
  return out.str();
}

std::string timings_to_json(const ReportDocument& report) {
  json rows = json::array();
  for (const auto& t : report.timings) {
    rows.push_back({{"method", t.method}, {"repeat", t.repeat}, {"train_seconds", t.train_seconds},
                    {"infer_seconds", t.infer_seconds}});
  }
  return json{{"timings", rows}}.dump(2) + "\n";
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw DataError("write failure on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::vector<std::filesystem::path> emit_report(const ReportDocument& report, const std::filesystem::path& out_dir,
                                               const std::vector<ReportFormat>& formats, const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto format : formats) {
    if (format == ReportFormat::json) {
      written.push_back(out_dir / (stem + ".json"));
      write_file_atomic(written.back(), report_to_json(report));
      written.push_back(out_dir / "timings.json");
      write_file_atomic(written.back(), timings_to_json(report));
    } else {
      written.push_back(out_dir / (stem + ".csv"));
      write_file_atomic(written.back(), report_to_csv(report));
    }
  }
  return written;
}

}  // namespace harmony
