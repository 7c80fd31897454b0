#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "harmony/config.hpp"
#include "harmony/error.hpp"

namespace harmony {

inline constexpr int kReportSchemaVersion = 1;

/// One method's result on the test split. `method` is the row letter:
/// a target, b weighted target, c (c1, c2, ...) complementary models,
/// d conductor (per-class accuracy of routing to the right expert),
/// e harmony, f and g bagging, h two-target averaging.
struct MethodRow {
  std::string method;
  std::string name;
  // -1 marks a mean over repeats.
  int repeat = 0;
  RealVector per_class_accuracy;
  double mean = 0.0;
  double variance = 0.0;
  std::optional<double> strong_accuracy;
  std::vector<double> weak_accuracy;
  int forward_passes = 1;
  std::map<std::string, Seed> seeds;
};

struct RunInfo {
  int repeat = 0;
  Seed seed = 0;
  WeakGroupPartition partition;
};

// Machine dependent, so kept out of the deterministic report files.
struct RowTiming {
  std::string method;
  int repeat = 0;
  double train_seconds = 0.0;
  double infer_seconds = 0.0;
};

struct ReportDocument {
  int schema_version = kReportSchemaVersion;
  int num_classes = 0;
  std::map<std::string, std::string> environment;
  std::map<std::string, std::string> config;
  std::vector<RunInfo> runs;
  std::vector<MethodRow> rows;
  std::vector<RowTiming> timings;

  const MethodRow* find(std::string_view method, int repeat = 0) const;
  std::size_t max_groups() const;
};

/// Thrown when a stage fails; carries the rows completed so far.
class ExperimentError : public Error {
 public:
  ExperimentError(std::string stage, const std::string& message, ReportDocument partial, int exit_code)
      : Error(stage + ": " + message), stage_(std::move(stage)), partial_(std::move(partial)), exit_code_(exit_code) {}
  const std::string& stage() const noexcept { return stage_; }
  const ReportDocument& partial() const noexcept { return partial_; }
  int exit_code() const noexcept { return exit_code_; }

 private:
  std::string stage_;
  ReportDocument partial_;
  int exit_code_;
};

// ---------------------------------------------------------------------------
// Pieces shared by run_experiment and the CLI.

/// Seed for repeat r: the master seed itself for r = 0, a substream otherwise.
Seed repeat_seed(const ExperimentConfig& config, int repeat);

Dataset load_dataset(const ExperimentConfig& config, Seed run_seed);
DatasetSplits prepare_data(const ExperimentConfig& config, Seed run_seed);
ClassifierSpec model_spec(const ExperimentConfig& config, const Dataset& data);
HarmonyConfig harmony_config(const ExperimentConfig& config, Seed run_seed);

/// Row built from a report; group accuracies use `partition`.
MethodRow make_row(std::string method, std::string name, int repeat, const PerClassReport& report,
                   const WeakGroupPartition& partition, int forward_passes);

/// Per class, the fraction of samples the conductor sends to that class's expert.
PerClassReport routing_report(const HarmonyModel& model, const Dataset& test);

using ProgressFn = std::function<void(const std::string& stage)>;

/// Rows a-h on one shared split per repeat, plus per-method means when
/// repeats > 1. Deterministic given the config.
ReportDocument run_experiment(const ExperimentConfig& config, const ProgressFn& progress = {});

// ---------------------------------------------------------------------------
// Report files

enum class ReportFormat { json, csv };

std::string report_to_json(const ReportDocument& report);
ReportDocument report_from_json(const std::string& text);
std::string report_to_csv(const ReportDocument& report);
std::string timings_to_json(const ReportDocument& report);

/// Writes report.json / report.csv (and timings.json alongside the JSON)
/// into `out_dir` atomically. Returns the written paths.
std::vector<std::filesystem::path> emit_report(const ReportDocument& report, const std::filesystem::path& out_dir,
                                               const std::vector<ReportFormat>& formats,
                                               const std::string& stem = "report");

/// Value rounded to 6 significant digits, as written to report files.
double round_significant(double v);

void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// ---------------------------------------------------------------------------
// Model files

enum class ModelKind { classifier, harmony, ensemble, unknown };
ModelKind detect_model_kind(const std::filesystem::path& path);

}  // namespace harmony
