#include "harmony/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "harmony/error.hpp"
#include "harmony/numerics.hpp"

namespace harmony {

Dataset::Dataset(RealMatrix features, Labels labels, int num_classes)
    : features_(std::move(features)), labels_(std::move(labels)), num_classes_(num_classes) {
  if (num_classes_ < 2) throw DataError("dataset: num_classes must be >= 2, got " + std::to_string(num_classes_));
  if (static_cast<Eigen::Index>(labels_.size()) != features_.rows()) {
    throw DimensionError("dataset: " + std::to_string(labels_.size()) + " labels for " +
                         std::to_string(features_.rows()) + " feature rows");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= num_classes_) {
      throw DataError("dataset: label " + std::to_string(labels_[i]) + " at row " + std::to_string(i) +
                      " outside [0, " + std::to_string(num_classes_) + ")");
    }
  }
  if (!features_.allFinite()) throw DataError("dataset: features contain non-finite values");
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (ClassId y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.num_classes_ == b.num_classes_ && a.labels_ == b.labels_ && a.features_.rows() == b.features_.rows() &&
         a.features_.cols() == b.features_.cols() && a.features_ == b.features_;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  RealMatrix features(static_cast<Eigen::Index>(indices.size()), ds.num_dims());
  Labels labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= ds.num_samples()) throw DataError("subset: index out of range");
    features.row(static_cast<Eigen::Index>(i)) = ds.features().row(static_cast<Eigen::Index>(indices[i]));
    labels[i] = ds.labels()[indices[i]];
  }
  return Dataset(std::move(features), std::move(labels), ds.num_classes());
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_real(std::string_view cell, double& out) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return false;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

bool parse_label(std::string_view cell, int& out) {
  if (cell.empty()) return false;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && out >= 0;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const LabelColumn& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("csv: cannot open " + path.string());

  std::vector<std::string> lines;
  std::vector<std::size_t> line_numbers;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (trim(line).empty()) continue;
    lines.push_back(line);
    line_numbers.push_back(number);
  }
  if (in.bad()) throw DataError("csv: read failure on " + path.string());
  if (lines.empty()) throw DataError("csv: " + path.string() + " is empty");

  const auto first = split_cells(lines.front());
  const std::size_t arity = first.size();
  bool has_header = false;
  for (auto cell : first) {
    double v;
    if (!parse_real(cell, v)) has_header = true;
  }

  std::size_t label_index = 0;
  if (const auto* index = std::get_if<std::size_t>(&label_column)) {
    label_index = *index;
  } else {
    const auto& name = std::get<std::string>(label_column);
    if (!has_header) throw DataError("csv: label column '" + name + "' requested but " + path.string() + " has no header");
    const auto it = std::find(first.begin(), first.end(), std::string_view(name));
    if (it == first.end()) throw DataError("csv: no column named '" + name + "' in " + path.string());
    label_index = static_cast<std::size_t>(it - first.begin());
  }
  if (label_index >= arity) {
    throw DataError("csv: label column " + std::to_string(label_index) + " out of range for " + std::to_string(arity) +
                    " columns");
  }
  if (arity < 2) throw DataError("csv: need at least one feature column and a label column");

  const std::size_t begin = has_header ? 1 : 0;
  const std::size_t n = lines.size() - begin;
  if (n == 0) throw DataError("csv: " + path.string() + " has a header but no data rows");

  RealMatrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(arity - 1));
  Labels labels(n);
  int max_label = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t row_number = line_numbers[begin + r];
    const auto cells = split_cells(lines[begin + r]);
    if (cells.size() != arity) {
      throw DataError("csv: row " + std::to_string(row_number) + " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(arity));
    }
    Eigen::Index col = 0;
    for (std::size_t c = 0; c < arity; ++c) {
      if (c == label_index) {
        if (!parse_label(cells[c], labels[r])) {
          throw DataError("csv: row " + std::to_string(row_number) + ": label '" + std::string(cells[c]) +
                          "' is not a non-negative integer");
        }
        max_label = std::max(max_label, labels[r]);
      } else {
        double v;
        if (!parse_real(cells[c], v) || !std::isfinite(v)) {
          throw DataError("csv: row " + std::to_string(row_number) + ", column " + std::to_string(c) + ": '" +
                          std::string(cells[c]) + "' is not a finite number");
        }
        features(static_cast<Eigen::Index>(r), col++) = v;
      }
    }
  }
  return Dataset(std::move(features), std::move(labels), std::max(2, max_label + 1));
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("csv: cannot write " + path.string());
  for (Eigen::Index j = 0; j < ds.num_dims(); ++j) out << 'f' << j << ',';
  out << "label\n";
  std::array<char, 32> buf{};
  for (std::size_t i = 0; i < ds.num_samples(); ++i) {
    for (Eigen::Index j = 0; j < ds.num_dims(); ++j) {
      const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(),
                                           ds.features()(static_cast<Eigen::Index>(i), j));
      out.write(buf.data(), ptr - buf.data());
      out << ',';
    }
    out << ds.labels()[i] << '\n';
  }
  if (!out) throw DataError("csv: write failure on " + path.string());
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("idx: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("idx: read failure on " + path.string());
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) throw DataError("idx: truncated header in " + path.string());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex32(std::uint32_t v) {
  std::ostringstream s;
  s << "0x" << std::hex;
  s.width(8);
  s.fill('0');
  s << v;
  return s.str();
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);

  const auto image_magic = read_be32(images, 0, images_path);
  if (image_magic != kIdxImagesMagic) {
    throw DataError("idx: " + images_path.string() + " has magic " + hex32(image_magic) + ", expected " +
                    hex32(kIdxImagesMagic));
  }
  const auto label_magic = read_be32(labels, 0, labels_path);
  if (label_magic != kIdxLabelsMagic) {
    throw DataError("idx: " + labels_path.string() + " has magic " + hex32(label_magic) + ", expected " +
                    hex32(kIdxLabelsMagic));
  }

  const std::size_t count = read_be32(images, 4, images_path);
  const std::size_t rows = read_be32(images, 8, images_path);
  const std::size_t cols = read_be32(images, 12, images_path);
  const std::size_t label_count = read_be32(labels, 4, labels_path);
  if (count != label_count) {
    throw DataError("idx: " + std::to_string(count) + " images but " + std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = rows * cols;
  if (pixels == 0) throw DataError("idx: zero-sized images in " + images_path.string());
  if (images.size() < 16 + count * pixels) {
    throw DataError("idx: image payload truncated: " + std::to_string(images.size() - 16) + " bytes for " +
                    std::to_string(count) + " images of " + std::to_string(pixels) + " pixels");
  }
  if (labels.size() < 8 + count) {
    throw DataError("idx: label payload truncated: " + std::to_string(labels.size() - 8) + " bytes for " +
                    std::to_string(count) + " labels");
  }

  RealMatrix features(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
  Labels ys(count);
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* src = images.data() + 16 + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) {
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = src[p] / 255.0;
    }
    ys[i] = labels[8 + i];
    max_label = std::max(max_label, ys[i]);
  }
  return Dataset(std::move(features), std::move(ys), std::max(2, max_label + 1));
}

// ---------------------------------------------------------------------------
// Synthetic

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw UsageError("synthetic: num_classes must be >= 2");
  if (n_dims < 1) throw UsageError("synthetic: n_dims must be >= 1");
  if (samples_per_class < 1) throw UsageError("synthetic: samples_per_class must be >= 1");
  if (!(separation > 0.0)) throw UsageError("synthetic: separation must be > 0");
  if (!(overlap_separation >= 0.0)) throw UsageError("synthetic: overlap_separation must be >= 0");
  if (!(overlap_separation < separation)) throw UsageError("synthetic: overlap_separation must be < separation");
  if (!(noise_sigma > 0.0)) throw UsageError("synthetic: noise_sigma must be > 0");
  std::vector<bool> used(static_cast<std::size_t>(num_classes), false);
  for (const auto& group : overlap_groups) {
    if (group.empty()) throw UsageError("synthetic: empty overlap group");
    for (ClassId c : group) {
      if (c < 0 || c >= num_classes) throw UsageError("synthetic: overlap group class " + std::to_string(c) + " out of range");
      if (used[static_cast<std::size_t>(c)]) {
        throw UsageError("synthetic: class " + std::to_string(c) + " appears in more than one overlap group");
      }
      used[static_cast<std::size_t>(c)] = true;
    }
  }
}

namespace {

// d x k matrix with orthonormal columns, k <= d.
RealMatrix random_orthonormal(Eigen::Index d, Eigen::Index k, Prng& rng) {
  Eigen::MatrixXd gaussian(d, k);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) gaussian(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
  return q;
}

RealMatrix place_anchors(Eigen::Index count, Eigen::Index d, double spacing, Prng rng) {
  if (count <= d) {
    // Scaled orthonormal directions: every pair is exactly `spacing` apart.
    RealMatrix q = random_orthonormal(d, count, rng);
    RealMatrix anchors = q.transpose() * (spacing / std::sqrt(2.0));
    return anchors;
  }
  const double side = 2.0 * spacing * std::pow(static_cast<double>(count), 1.0 / static_cast<double>(d));
  constexpr int kRestarts = 50;
  constexpr int kAttempts = 2000;
  RealMatrix anchors(count, d);
  for (int restart = 0; restart < kRestarts; ++restart) {
    Eigen::Index placed = 0;
    for (int attempt = 0; attempt < kAttempts && placed < count; ++attempt) {
      RealRowVector candidate(d);
      for (Eigen::Index j = 0; j < d; ++j) candidate(j) = rng.uniform(-side / 2, side / 2);
      bool ok = true;
      for (Eigen::Index p = 0; p < placed && ok; ++p) ok = (anchors.row(p) - candidate).norm() >= spacing;
      if (ok) anchors.row(placed++) = candidate;
    }
    if (placed == count) return anchors;
  }
  throw DataError("synthetic: cannot place " + std::to_string(count) + " cluster anchors " + std::to_string(spacing) +
                  " apart in " + std::to_string(d) + " dimensions");
}

}  // namespace

RealMatrix synthetic_centers(const SyntheticSpec& spec) {
  spec.validate();
  const Eigen::Index d = spec.n_dims;
  const Prng root(spec.seed);

  std::vector<int> group_of(static_cast<std::size_t>(spec.num_classes), -1);
  for (std::size_t g = 0; g < spec.overlap_groups.size(); ++g) {
    for (ClassId c : spec.overlap_groups[g]) group_of[static_cast<std::size_t>(c)] = static_cast<int>(g);
  }

  // One anchor per ungrouped class (in class order) followed by one per group.
  std::vector<Eigen::Index> anchor_of(static_cast<std::size_t>(spec.num_classes));
  Eigen::Index anchors_needed = 0;
  for (ClassId c = 0; c < spec.num_classes; ++c) {
    if (group_of[static_cast<std::size_t>(c)] < 0) anchor_of[static_cast<std::size_t>(c)] = anchors_needed++;
  }
  const Eigen::Index first_group_anchor = anchors_needed;
  anchors_needed += static_cast<Eigen::Index>(spec.overlap_groups.size());

  const RealMatrix anchors =
      place_anchors(anchors_needed, d, spec.separation + spec.overlap_separation, root.substream("anchors"));

  RealMatrix centers(spec.num_classes, d);
  for (ClassId c = 0; c < spec.num_classes; ++c) {
    if (group_of[static_cast<std::size_t>(c)] < 0) centers.row(c) = anchors.row(anchor_of[static_cast<std::size_t>(c)]);
  }

  const double radius = spec.overlap_separation / 2.0;
  for (std::size_t g = 0; g < spec.overlap_groups.size(); ++g) {
    const auto& group = spec.overlap_groups[g];
    const auto size = static_cast<Eigen::Index>(group.size());
    const RealRowVector anchor = anchors.row(first_group_anchor + static_cast<Eigen::Index>(g));
    RealMatrix offsets = RealMatrix::Zero(size, d);
    if (size > 1 && radius > 0.0) {
      Prng rng = root.substream("group/" + std::to_string(g));
      if (size <= d) {
        offsets = random_orthonormal(d, size, rng).transpose();
      } else {
        for (Eigen::Index i = 0; i < size; ++i) {
          for (Eigen::Index j = 0; j < d; ++j) offsets(i, j) = rng.normal();
        }
      }
      const RealRowVector mean = offsets.colwise().mean();
      offsets.rowwise() -= mean;
      const double longest = offsets.rowwise().norm().maxCoeff();
      if (longest > 0.0) offsets *= radius / longest;
    }
    for (Eigen::Index i = 0; i < size; ++i) centers.row(group[static_cast<std::size_t>(i)]) = anchor + offsets.row(i);
  }
  return centers;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  const RealMatrix centers = synthetic_centers(spec);
  const Eigen::Index n = static_cast<Eigen::Index>(spec.num_classes) * spec.samples_per_class;
  RealMatrix features(n, spec.n_dims);
  Labels labels(static_cast<std::size_t>(n));
  Prng rng = Prng(spec.seed).substream("samples");
  Eigen::Index row = 0;
  for (ClassId c = 0; c < spec.num_classes; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (Eigen::Index j = 0; j < spec.n_dims; ++j) features(row, j) = centers(c, j) + spec.noise_sigma * rng.normal();
      labels[static_cast<std::size_t>(row)] = c;
    }
  }
  return Dataset(std::move(features), std::move(labels), spec.num_classes);
}

// ---------------------------------------------------------------------------
// Splitting

void SplitSpec::validate() const {
  for (double f : {train_fraction, val_fraction, test_fraction}) {
    if (!(f > 0.0 && f < 1.0)) throw UsageError("split: fractions must lie in (0, 1)");
  }
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw UsageError("split: fractions must sum to 1");
  }
}

std::vector<std::size_t> largest_remainder_sizes(std::size_t n, std::span<const double> fractions) {
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<double> remainders(fractions.size());
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < fractions.size(); ++j) {
    const double ideal = fractions[j] * static_cast<double>(n);
    sizes[j] = static_cast<std::size_t>(std::floor(ideal));
    remainders[j] = ideal - static_cast<double>(sizes[j]);
    assigned += sizes[j];
  }
  std::vector<std::size_t> order(fractions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % order.size()]];
  return sizes;
}

DatasetSplits stratified_split(const Dataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::array<double, 3> fractions{spec.train_fraction, spec.val_fraction, spec.test_fraction};
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes()));
  for (std::size_t i = 0; i < ds.num_samples(); ++i) by_class[static_cast<std::size_t>(ds.labels()[i])].push_back(i);

  const Prng root(spec.seed);
  std::array<std::vector<std::size_t>, 3> parts;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < 3) {
      throw DataError("split: class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                      " samples, need at least 3");
    }
    Prng rng = root.substream("class/" + std::to_string(c));
    rng.shuffle(members.begin(), members.end());
    const auto sizes = largest_remainder_sizes(members.size(), fractions);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < 3; ++p) {
      parts[p].insert(parts[p].end(), members.begin() + static_cast<std::ptrdiff_t>(offset),
                      members.begin() + static_cast<std::ptrdiff_t>(offset + sizes[p]));
      offset += sizes[p];
    }
  }
  for (auto& part : parts) std::sort(part.begin(), part.end());
  return DatasetSplits{subset(ds, parts[0]), subset(ds, parts[1]), subset(ds, parts[2])};
}

}  // namespace harmony
