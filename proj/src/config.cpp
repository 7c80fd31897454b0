#include "harmony/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "harmony/error.hpp"

namespace harmony {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UsageError("config: " + key + " = '" + value + "' is not a valid number");
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  if (value.empty() || value == "none") return out;
  for (const auto& item : split(value, ',')) out.push_back(parse_number<int>(key, item));
  return out;
}

std::string join(const std::vector<int>& values, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(values[i]);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string to_string(DataSource s) {
  switch (s) {
    case DataSource::synthetic:
      return "synthetic";
    case DataSource::csv:
      return "csv";
    case DataSource::idx:
      return "idx";
  }
  return "?";
}

}  // namespace

void ExperimentConfig::validate() const {
  if (source == DataSource::synthetic) synthetic.validate();
  if (source == DataSource::csv && csv_path.empty()) throw UsageError("config: data.csv_path is required for csv data");
  if (source == DataSource::idx && (idx_images.empty() || idx_labels.empty())) {
    throw UsageError("config: data.idx_images and data.idx_labels are required for idx data");
  }
  for (const auto& p : {csv_path, idx_images, idx_labels}) {
    if (!p.empty() && !std::filesystem::exists(p)) throw UsageError("config: file not found: " + p.string());
  }
  split.validate();
  sgd.validate();
  for (int h : classifier.hidden_dims) {
    if (h < 1) throw UsageError("config: model.hidden widths must be positive");
  }
  if (!(detection_delta >= 0.0)) throw UsageError("config: harmony.delta must be >= 0");
  if (!(complementary_weight > 1.0)) throw UsageError("config: harmony.lambda_c must be > 1");
  if (!(weighted_lambda > 1.0)) throw UsageError("config: baseline.lambda_b must be > 1");
  if (!(weighted_lambda < complementary_weight)) {
    throw UsageError("config: baseline.lambda_b must be smaller than harmony.lambda_c (the complementary model is the more biased one)");
  }
  for (int n : bagging_sizes) {
    if (n < 2) throw UsageError("config: baseline.bagging_n entries must be >= 2");
  }
  weakening.validate();
  if (repeats < 1) throw UsageError("config: repeats must be >= 1");
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  const auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };

  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  const std::map<std::string, Setter, std::less<>> setters{
      {"seed", [&](auto& k, auto& v) { c.master_seed = parse_number<Seed>(k, v); }},
      {"repeats", [&](auto& k, auto& v) { c.repeats = parse_number<int>(k, v); }},
      {"out_dir", [&](auto&, auto& v) { c.out_dir = path(v); }},
      {"data.source",
       [&](auto&, auto& v) {
         if (v == "synthetic") c.source = DataSource::synthetic;
         else if (v == "csv") c.source = DataSource::csv;
         else if (v == "idx") c.source = DataSource::idx;
         else throw UsageError("config: data.source must be synthetic, csv or idx");
       }},
      {"data.csv_path", [&](auto&, auto& v) { c.csv_path = path(v); }},
      {"data.label_column",
       [&](auto&, auto& v) {
         std::size_t index = 0;
         const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), index);
         if (ec == std::errc() && ptr == v.data() + v.size()) c.label_column = index;
         else c.label_column = v;
       }},
      {"data.idx_images", [&](auto&, auto& v) { c.idx_images = path(v); }},
      {"data.idx_labels", [&](auto&, auto& v) { c.idx_labels = path(v); }},
      {"synthetic.num_classes", [&](auto& k, auto& v) { c.synthetic.num_classes = parse_number<int>(k, v); }},
      {"synthetic.n_dims", [&](auto& k, auto& v) { c.synthetic.n_dims = parse_number<int>(k, v); }},
      {"synthetic.samples_per_class", [&](auto& k, auto& v) { c.synthetic.samples_per_class = parse_number<int>(k, v); }},
      {"synthetic.overlap_groups",
       [&](auto& k, auto& v) {
         c.synthetic.overlap_groups.clear();
         if (v.empty() || v == "none") return;
         for (const auto& group : split(v, ';')) c.synthetic.overlap_groups.push_back(parse_int_list(k, group));
       }},
      {"synthetic.separation", [&](auto& k, auto& v) { c.synthetic.separation = parse_number<double>(k, v); }},
      {"synthetic.overlap_separation", [&](auto& k, auto& v) { c.synthetic.overlap_separation = parse_number<double>(k, v); }},
      {"synthetic.noise_sigma", [&](auto& k, auto& v) { c.synthetic.noise_sigma = parse_number<double>(k, v); }},
      {"synthetic.seed", [&](auto& k, auto& v) { c.synthetic_seed = parse_number<Seed>(k, v); }},
      {"split.train", [&](auto& k, auto& v) { c.split.train_fraction = parse_number<double>(k, v); }},
      {"split.val", [&](auto& k, auto& v) { c.split.val_fraction = parse_number<double>(k, v); }},
      {"split.test", [&](auto& k, auto& v) { c.split.test_fraction = parse_number<double>(k, v); }},
      {"split.seed", [&](auto& k, auto& v) { c.split_seed = parse_number<Seed>(k, v); }},
      {"model.hidden", [&](auto& k, auto& v) { c.classifier.hidden_dims = parse_int_list(k, v); }},
      {"model.activation", [&](auto&, auto& v) { c.classifier.activation = parse_activation(v); }},
      {"sgd.learning_rate", [&](auto& k, auto& v) { c.sgd.learning_rate = parse_number<double>(k, v); }},
      {"sgd.momentum", [&](auto& k, auto& v) { c.sgd.momentum = parse_number<double>(k, v); }},
      {"sgd.batch_size", [&](auto& k, auto& v) { c.sgd.batch_size = parse_number<int>(k, v); }},
      {"sgd.epochs", [&](auto& k, auto& v) { c.sgd.epochs = parse_number<int>(k, v); }},
      {"harmony.delta", [&](auto& k, auto& v) { c.detection_delta = parse_number<double>(k, v); }},
      {"harmony.coupling_threshold", [&](auto& k, auto& v) { c.coupling_threshold = parse_number<double>(k, v); }},
      {"harmony.lambda_c", [&](auto& k, auto& v) { c.complementary_weight = parse_number<double>(k, v); }},
      {"harmony.weak_classes",
       [&](auto& k, auto& v) {
         if (v.empty() || v == "auto") c.explicit_weak_classes.reset();
         else c.explicit_weak_classes = parse_int_list(k, v);
       }},
      {"harmony.bias_mode", [&](auto&, auto& v) { c.bias_mode = parse_bias_mode(v); }},
      {"baseline.lambda_b", [&](auto& k, auto& v) { c.weighted_lambda = parse_number<double>(k, v); }},
      {"baseline.bagging_n", [&](auto& k, auto& v) { c.bagging_sizes = parse_int_list(k, v); }},
      {"baseline.epoch_fraction", [&](auto& k, auto& v) { c.weakening.epoch_fraction = parse_number<double>(k, v); }},
      {"baseline.bootstrap_fraction", [&](auto& k, auto& v) { c.weakening.bootstrap_fraction = parse_number<double>(k, v); }},
      {"baseline.hidden_fraction", [&](auto& k, auto& v) { c.weakening.hidden_fraction = parse_number<double>(k, v); }},
  };

  std::istringstream in(text);
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    const auto hash = line.find('#');
    const std::string content = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw UsageError("config line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw UsageError("config line " + std::to_string(number) + ": unknown key '" + key + "'");
    it->second(key, value);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

std::map<std::string, std::string> config_echo(const ExperimentConfig& c) {
  std::map<std::string, std::string> out;
  out["seed"] = std::to_string(c.master_seed);
  out["repeats"] = std::to_string(c.repeats);
  out["data.source"] = to_string(c.source);
  if (c.source == DataSource::csv) {
    out["data.csv_path"] = c.csv_path.filename().string();
    out["data.label_column"] = std::holds_alternative<std::size_t>(c.label_column)
                                   ? std::to_string(std::get<std::size_t>(c.label_column))
                                   : std::get<std::string>(c.label_column);
  }
  if (c.source == DataSource::idx) {
    out["data.idx_images"] = c.idx_images.filename().string();
    out["data.idx_labels"] = c.idx_labels.filename().string();
  }
  if (c.source == DataSource::synthetic) {
    out["synthetic.num_classes"] = std::to_string(c.synthetic.num_classes);
    out["synthetic.n_dims"] = std::to_string(c.synthetic.n_dims);
    out["synthetic.samples_per_class"] = std::to_string(c.synthetic.samples_per_class);
    std::string groups;
    for (std::size_t g = 0; g < c.synthetic.overlap_groups.size(); ++g) {
      if (g) groups += ';';
      groups += join(c.synthetic.overlap_groups[g]);
    }
    out["synthetic.overlap_groups"] = groups.empty() ? "none" : groups;
    out["synthetic.separation"] = fmt(c.synthetic.separation);
    out["synthetic.overlap_separation"] = fmt(c.synthetic.overlap_separation);
    out["synthetic.noise_sigma"] = fmt(c.synthetic.noise_sigma);
    out["synthetic.seed"] = c.synthetic_seed ? std::to_string(*c.synthetic_seed) : "derived";
  }
  out["split.train"] = fmt(c.split.train_fraction);
  out["split.val"] = fmt(c.split.val_fraction);
  out["split.test"] = fmt(c.split.test_fraction);
  out["split.seed"] = c.split_seed ? std::to_string(*c.split_seed) : "derived";
  out["model.hidden"] = c.classifier.hidden_dims.empty() ? "none" : join(c.classifier.hidden_dims);
  out["model.activation"] = to_string(c.classifier.activation);
  out["sgd.learning_rate"] = fmt(c.sgd.learning_rate);
  out["sgd.momentum"] = fmt(c.sgd.momentum);
  out["sgd.batch_size"] = std::to_string(c.sgd.batch_size);
  out["sgd.epochs"] = std::to_string(c.sgd.epochs);
  out["harmony.delta"] = fmt(c.detection_delta);
  out["harmony.coupling_threshold"] = fmt(c.coupling_threshold);
  out["harmony.lambda_c"] = fmt(c.complementary_weight);
  out["harmony.weak_classes"] = c.explicit_weak_classes ? join(*c.explicit_weak_classes) : "auto";
  out["harmony.bias_mode"] = to_string(c.bias_mode);
  out["baseline.lambda_b"] = fmt(c.weighted_lambda);
  out["baseline.bagging_n"] = join(c.bagging_sizes);
  out["baseline.epoch_fraction"] = fmt(c.weakening.epoch_fraction);
  out["baseline.bootstrap_fraction"] = fmt(c.weakening.bootstrap_fraction);
  out["baseline.hidden_fraction"] = fmt(c.weakening.hidden_fraction);
  return out;
}

}  // namespace harmony
