#include "fusad/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fusad/error.hpp"
#include "fusad/random.hpp"

namespace fusad {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  std::string out = s.substr(a, b - a);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

bool is_timestamp_name(const std::string& name) {
  const std::string n = lower(name);
  return n == "timestamp" || n == "time" || n == "date" || n == "datetime";
}

}  // namespace

Series load_series_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path.string() + ": file is empty");

  std::vector<std::string> header;
  std::size_t first_data = 0;
  if (schema.has_header) {
    header = split_row(lines[0]);
    first_data = 1;
  } else {
    const std::size_t width = split_row(lines[0]).size();
    for (std::size_t c = 0; c < width; ++c) header.push_back("c" + std::to_string(c));
  }
  const std::size_t width = header.size();
  std::ptrdiff_t time_col = -1;
  std::ptrdiff_t label_col = -1;
  std::vector<std::size_t> value_cols;
  Series s;
  for (std::size_t c = 0; c < width; ++c) {
    if (schema.has_header && time_col < 0 && is_timestamp_name(header[c])) {
      time_col = static_cast<std::ptrdiff_t>(c);
    } else if (schema.has_header && !schema.label_column.empty() && header[c] == schema.label_column) {
      label_col = static_cast<std::ptrdiff_t>(c);
    } else {
      value_cols.push_back(c);
      s.names.push_back(header[c]);
    }
  }
  if (value_cols.empty()) throw ParseError(path.string() + ": no value columns");
  s.values.assign(value_cols.size(), {});

  for (std::size_t r = first_data; r < lines.size(); ++r) {
    const std::size_t row_no = r + 1;
    const auto cells = split_row(lines[r]);
    if (cells.size() != width) {
      throw ParseError(path.string() + ": row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                       " columns, expected " + std::to_string(width));
    }
    if (time_col >= 0) s.timestamps.push_back(cells[static_cast<std::size_t>(time_col)]);
    if (label_col >= 0) {
      double v = 0;
      const auto& cell = cells[static_cast<std::size_t>(label_col)];
      if (!parse_double(cell, v) || (v != 0.0 && v != 1.0)) {
        throw ParseError(path.string() + ": row " + std::to_string(row_no) + ", column '" + schema.label_column +
                         "': label must be 0 or 1, got '" + cell + "'");
      }
      s.labels.push_back(static_cast<int>(v));
    }
    for (std::size_t k = 0; k < value_cols.size(); ++k) {
      const std::size_t c = value_cols[k];
      double v = 0;
      if (!parse_double(cells[c], v)) {
        throw ParseError(path.string() + ": row " + std::to_string(row_no) + ", column " + std::to_string(c + 1) +
                         " ('" + header[c] + "'): non-numeric value '" + cells[c] + "'");
      }
      if (!std::isfinite(v)) {
        throw ParseError(path.string() + ": row " + std::to_string(row_no) + ", column " + std::to_string(c + 1) +
                         " ('" + header[c] + "'): NaN/Inf rows are rejected");
      }
      s.values[k].push_back(v);
    }
  }
  if (s.length() == 0) throw ParseError(path.string() + ": no data rows");
  return s;
}

void save_series_csv(const Series& series, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  const bool stamps = !series.timestamps.empty();
  const bool labels = !series.labels.empty();
  std::vector<std::string> head;
  if (stamps) head.push_back("timestamp");
  for (std::size_t n = 0; n < series.channels(); ++n) {
    head.push_back(n < series.names.size() ? series.names[n] : "c" + std::to_string(n));
  }
  if (labels) head.push_back("label");
  for (std::size_t i = 0; i < head.size(); ++i) out << (i ? "," : "") << head[i];
  out << '\n';
  for (std::size_t t = 0; t < series.length(); ++t) {
    bool first = true;
    auto sep = [&] {
      if (!first) out << ',';
      first = false;
    };
    if (stamps) {
      sep();
      out << series.timestamps[t];
    }
    for (std::size_t n = 0; n < series.channels(); ++n) {
      sep();
      out << format_double(series.values[n][t]);
    }
    if (labels) {
      sep();
      out << series.labels[t];
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  Manifest m;
  bool have_task = false;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    auto pos = line.find('=');
    if (pos == std::string::npos) pos = line.find(':');
    if (pos == std::string::npos) {
      throw ParseError(path.string() + ": line " + std::to_string(row) + " is not 'key = value'");
    }
    const std::string key = trim(line.substr(0, pos));
    const std::string value = trim(line.substr(pos + 1));
    auto number = [&]() -> std::size_t {
      std::size_t v = 0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ParseError(path.string() + ": line " + std::to_string(row) + ": '" + key +
                         "' needs a non-negative integer, got '" + value + "'");
      }
      return v;
    };
    if (key == "task") {
      try {
        m.task = task_from_string(value);
      } catch (const ConfigError& e) {
        throw ParseError(path.string() + ": line " + std::to_string(row) + ": " + e.what());
      }
      have_task = true;
    } else if (key == "n_channels") {
      m.n_channels = number();
    } else if (key == "split_train_end") {
      m.split_train_end = number();
    } else if (key == "horizon") {
      m.horizon = number();
    } else {
      m.extra[key] = value;
    }
  }
  if (!have_task) throw ParseError(path.string() + ": manifest lacks the 'task' key");
  return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "task = " << to_string(m.task) << '\n'
      << "n_channels = " << m.n_channels << '\n'
      << "split_train_end = " << m.split_train_end << '\n'
      << "horizon = " << m.horizon << '\n';
  for (const auto& [k, v] : m.extra) out << k << " = " << v << '\n';
}

// ---------------------------------------------------------------------------

std::size_t SeriesDataset::size() const {
  const std::size_t per = n_channels * length;
  return per == 0 ? 0 : inputs.size() / per;
}

Tensor SeriesDataset::batch_inputs(const std::vector<std::size_t>& indices) const {
  const std::size_t per = n_channels * length;
  std::vector<double> out;
  out.reserve(indices.size() * per);
  for (std::size_t i : indices) {
    out.insert(out.end(), inputs.begin() + static_cast<std::ptrdiff_t>(i * per),
               inputs.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
  }
  return Tensor({indices.size(), n_channels, length}, std::move(out));
}

Tensor SeriesDataset::batch_targets(const std::vector<std::size_t>& indices) const {
  const std::size_t per = n_channels * horizon;
  if (targets.size() != size() * per) throw ContractError("dataset has no forecasting targets");
  std::vector<double> out;
  out.reserve(indices.size() * per);
  for (std::size_t i : indices) {
    out.insert(out.end(), targets.begin() + static_cast<std::ptrdiff_t>(i * per),
               targets.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
  }
  return Tensor({indices.size(), n_channels, horizon}, std::move(out));
}

std::vector<int> SeriesDataset::batch_labels(const std::vector<std::size_t>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

SeriesDataset SeriesDataset::subset(const std::vector<std::size_t>& indices) const {
  SeriesDataset out = *this;
  out.inputs.clear();
  out.labels.clear();
  out.targets.clear();
  out.point_labels.clear();
  const std::size_t per = n_channels * length;
  const std::size_t per_target = n_channels * horizon;
  for (std::size_t i : indices) {
    out.inputs.insert(out.inputs.end(), inputs.begin() + static_cast<std::ptrdiff_t>(i * per),
                      inputs.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    if (!labels.empty()) out.labels.push_back(labels[i]);
    if (!targets.empty()) {
      out.targets.insert(out.targets.end(), targets.begin() + static_cast<std::ptrdiff_t>(i * per_target),
                         targets.begin() + static_cast<std::ptrdiff_t>((i + 1) * per_target));
    }
    if (!point_labels.empty()) {
      out.point_labels.insert(out.point_labels.end(), point_labels.begin() + static_cast<std::ptrdiff_t>(i * length),
                              point_labels.begin() + static_cast<std::ptrdiff_t>((i + 1) * length));
    }
  }
  return out;
}

SeriesDataset load_classification_csv(const std::filesystem::path& path, std::size_t n_channels) {
  if (n_channels == 0) throw ConfigError("classification data needs n_channels >= 1");
  const auto lines = read_lines(path);
  SeriesDataset ds;
  ds.task = Task::classification;
  ds.n_channels = n_channels;
  std::size_t first = 0;
  if (!lines.empty()) {
    const auto cells = split_row(lines[0]);
    double v = 0;
    if (!cells.empty() && !parse_double(cells[0], v)) first = 1;  // header row
  }
  std::size_t width = 0;
  int max_label = -1;
  for (std::size_t r = first; r < lines.size(); ++r) {
    const std::size_t row_no = r + 1;
    const auto cells = split_row(lines[r]);
    if (width == 0) {
      width = cells.size();
      if (width < 2 || (width - 1) % n_channels != 0) {
        throw ParseError(path.string() + ": row " + std::to_string(row_no) + " has " + std::to_string(width - 1) +
                         " values, not a multiple of n_channels = " + std::to_string(n_channels));
      }
      ds.length = (width - 1) / n_channels;
    } else if (cells.size() != width) {
      throw ParseError(path.string() + ": row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                       " columns, expected " + std::to_string(width));
    }
    double label = 0;
    if (!parse_double(cells[0], label) || label < 0 || label != std::floor(label)) {
      throw ParseError(path.string() + ": row " + std::to_string(row_no) +
                       ", column 1: label must be a non-negative integer, got '" + cells[0] + "'");
    }
    ds.labels.push_back(static_cast<int>(label));
    max_label = std::max(max_label, static_cast<int>(label));
    for (std::size_t c = 1; c < width; ++c) {
      double v = 0;
      if (!parse_double(cells[c], v)) {
        throw ParseError(path.string() + ": row " + std::to_string(row_no) + ", column " + std::to_string(c + 1) +
                         ": non-numeric value '" + cells[c] + "'");
      }
      if (!std::isfinite(v)) {
        throw ParseError(path.string() + ": row " + std::to_string(row_no) + ", column " + std::to_string(c + 1) +
                         ": NaN/Inf rows are rejected");
      }
      ds.inputs.push_back(v);
    }
  }
  if (ds.labels.empty()) throw ParseError(path.string() + ": no samples");
  ds.num_classes = static_cast<std::size_t>(max_label + 1);
  return ds;
}

void save_classification_csv(const SeriesDataset& ds, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "label";
  for (std::size_t n = 0; n < ds.n_channels; ++n) {
    for (std::size_t t = 0; t < ds.length; ++t) out << ",c" << n << "_t" << t;
  }
  out << '\n';
  const std::size_t per = ds.n_channels * ds.length;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels.at(i);
    for (std::size_t j = 0; j < per; ++j) out << ',' << format_double(ds.inputs[i * per + j]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

void finish_stats(Normalizer& z, const std::vector<double>& sum, const std::vector<double>& sq_dev_sum,
                  std::size_t count) {
  (void)sum;
  for (std::size_t n = 0; n < z.mean.size(); ++n) {
    const double sd = std::sqrt(sq_dev_sum[n] / static_cast<double>(count));
    z.constant[n] = !(sd > 1e-12);
    z.std[n] = z.constant[n] ? 1.0 : sd;
  }
}

}  // namespace

Normalizer fit_zscore(const Series& series, std::size_t train_end) {
  const std::size_t channels = series.channels();
  if (train_end == 0 || train_end > series.length()) {
    throw InputError("training split end " + std::to_string(train_end) + " is outside the series length " +
                     std::to_string(series.length()));
  }
  Normalizer z;
  z.mean.assign(channels, 0.0);
  z.std.assign(channels, 1.0);
  z.constant.assign(channels, false);
  std::vector<double> sq(channels, 0.0);
  for (std::size_t n = 0; n < channels; ++n) {
    double s = 0;
    for (std::size_t t = 0; t < train_end; ++t) s += series.values[n][t];
    z.mean[n] = s / static_cast<double>(train_end);
    for (std::size_t t = 0; t < train_end; ++t) {
      const double d = series.values[n][t] - z.mean[n];
      sq[n] += d * d;
    }
  }
  finish_stats(z, z.mean, sq, train_end);
  return z;
}

Normalizer fit_zscore(const SeriesDataset& train) {
  const std::size_t channels = train.n_channels;
  const std::size_t samples = train.size();
  if (samples == 0) throw InputError("cannot fit normalization on an empty training split");
  Normalizer z;
  z.mean.assign(channels, 0.0);
  z.std.assign(channels, 1.0);
  z.constant.assign(channels, false);
  std::vector<double> sq(channels, 0.0);
  const std::size_t count = samples * train.length;
  for (std::size_t n = 0; n < channels; ++n) {
    double s = 0;
    for (std::size_t i = 0; i < samples; ++i) {
      const double* row = train.inputs.data() + (i * channels + n) * train.length;
      for (std::size_t t = 0; t < train.length; ++t) s += row[t];
    }
    z.mean[n] = s / static_cast<double>(count);
    for (std::size_t i = 0; i < samples; ++i) {
      const double* row = train.inputs.data() + (i * channels + n) * train.length;
      for (std::size_t t = 0; t < train.length; ++t) sq[n] += (row[t] - z.mean[n]) * (row[t] - z.mean[n]);
    }
  }
  finish_stats(z, z.mean, sq, count);
  return z;
}

void Normalizer::apply(Series& series) const {
  if (series.channels() != mean.size()) throw ShapeError("normalizer channel count differs from the series");
  for (std::size_t n = 0; n < series.channels(); ++n) {
    for (double& v : series.values[n]) v = (v - mean[n]) / std[n];
  }
}

void Normalizer::invert(Series& series) const {
  if (series.channels() != mean.size()) throw ShapeError("normalizer channel count differs from the series");
  for (std::size_t n = 0; n < series.channels(); ++n) {
    for (double& v : series.values[n]) v = v * std[n] + mean[n];
  }
}

namespace {

template <class Fn>
void for_each_channel_block(std::vector<double>& data, std::size_t channels, std::size_t block, Fn&& fn) {
  if (block == 0) return;
  for (std::size_t i = 0; i < data.size() / block; ++i) {
    const std::size_t n = i % channels;
    for (std::size_t t = 0; t < block; ++t) data[i * block + t] = fn(data[i * block + t], n);
  }
}

}  // namespace

void Normalizer::apply(SeriesDataset& ds) const {
  if (ds.n_channels != mean.size()) throw ShapeError("normalizer channel count differs from the dataset");
  auto f = [&](double v, std::size_t n) { return (v - mean[n]) / std[n]; };
  for_each_channel_block(ds.inputs, ds.n_channels, ds.length, f);
  for_each_channel_block(ds.targets, ds.n_channels, ds.horizon, f);
}

void Normalizer::invert(SeriesDataset& ds) const {
  if (ds.n_channels != mean.size()) throw ShapeError("normalizer channel count differs from the dataset");
  auto f = [&](double v, std::size_t n) { return v * std[n] + mean[n]; };
  for_each_channel_block(ds.inputs, ds.n_channels, ds.length, f);
  for_each_channel_block(ds.targets, ds.n_channels, ds.horizon, f);
}

// ---------------------------------------------------------------------------

std::size_t window_count(std::size_t length, const WindowSpec& spec) {
  if (spec.lookback == 0 || spec.stride == 0) throw InputError("window lookback and stride must be positive");
  if (spec.lookback + spec.horizon > length) {
    throw InputError("window lookback " + std::to_string(spec.lookback) + " + horizon " +
                     std::to_string(spec.horizon) + " exceeds series length " + std::to_string(length));
  }
  return (length - spec.lookback - spec.horizon) / spec.stride + 1;
}

std::vector<Window> sliding_windows(const Series& series, const WindowSpec& spec) {
  const std::size_t count = window_count(series.length(), spec);
  const std::size_t channels = series.channels();
  std::vector<Window> out(count);
  for (std::size_t w = 0; w < count; ++w) {
    Window& win = out[w];
    win.start = w * spec.stride;
    win.lookback.reserve(channels * spec.lookback);
    win.target.reserve(channels * spec.horizon);
    for (std::size_t n = 0; n < channels; ++n) {
      const auto& v = series.values[n];
      win.lookback.insert(win.lookback.end(), v.begin() + static_cast<std::ptrdiff_t>(win.start),
                          v.begin() + static_cast<std::ptrdiff_t>(win.start + spec.lookback));
    }
    for (std::size_t n = 0; n < channels; ++n) {
      const auto& v = series.values[n];
      const std::size_t t0 = win.start + spec.lookback;
      win.target.insert(win.target.end(), v.begin() + static_cast<std::ptrdiff_t>(t0),
                        v.begin() + static_cast<std::ptrdiff_t>(t0 + spec.horizon));
    }
    if (!series.labels.empty()) {
      win.labels.assign(series.labels.begin() + static_cast<std::ptrdiff_t>(win.start),
                        series.labels.begin() + static_cast<std::ptrdiff_t>(win.start + spec.lookback));
    }
  }
  return out;
}

SeriesDataset forecasting_dataset(const Series& series, const WindowSpec& spec) {
  if (spec.horizon == 0) throw ConfigError("forecasting needs a horizon of at least 1");
  SeriesDataset ds;
  ds.task = Task::forecasting;
  ds.n_channels = series.channels();
  ds.length = spec.lookback;
  ds.horizon = spec.horizon;
  for (const auto& w : sliding_windows(series, spec)) {
    ds.inputs.insert(ds.inputs.end(), w.lookback.begin(), w.lookback.end());
    ds.targets.insert(ds.targets.end(), w.target.begin(), w.target.end());
  }
  return ds;
}

SeriesDataset anomaly_dataset(const Series& series, const WindowSpec& spec) {
  WindowSpec s = spec;
  s.horizon = 0;
  SeriesDataset ds;
  ds.task = Task::anomaly;
  ds.n_channels = series.channels();
  ds.length = s.lookback;
  for (const auto& w : sliding_windows(series, s)) {
    ds.inputs.insert(ds.inputs.end(), w.lookback.begin(), w.lookback.end());
    if (!w.labels.empty()) ds.point_labels.insert(ds.point_labels.end(), w.labels.begin(), w.labels.end());
  }
  return ds;
}

Series slice_series(const Series& series, std::size_t begin, std::size_t end) {
  if (begin > end || end > series.length()) throw InputError("series slice out of range");
  Series out;
  out.names = series.names;
  auto cut = [&](const auto& v) {
    using V = std::decay_t<decltype(v)>;
    return V(v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end));
  };
  for (const auto& v : series.values) out.values.push_back(cut(v));
  if (!series.labels.empty()) out.labels = cut(series.labels);
  if (!series.timestamps.empty()) out.timestamps = cut(series.timestamps);
  return out;
}

std::size_t chronological_split(std::size_t length, double train_fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(length) * train_fraction));
}

void stratified_split(const std::vector<int>& labels, double val_fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& val) {
  train.clear();
  val.clear();
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(seed);
  for (auto& [label, idx] : by_class) {
    rng.shuffle(idx);
    std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(idx.size())));
    if (val_fraction > 0 && idx.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
    if (idx.size() < 2) n_val = 0;
    val.insert(val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
}

// ---------------------------------------------------------------------------

SeriesDataset synth_classification(const SynthClassificationSpec& spec) {
  if (spec.freqs.size() < 2) throw ConfigError("synthetic classification needs at least two class frequencies");
  if (spec.length == 0 || spec.n_channels == 0) throw ConfigError("synthetic series need positive length and channels");
  Rng rng(spec.seed);
  SeriesDataset ds;
  ds.task = Task::classification;
  ds.n_channels = spec.n_channels;
  ds.length = spec.length;
  ds.num_classes = spec.freqs.size();
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < spec.n_per_class; ++i) {
    for (std::size_t c = 0; c < spec.freqs.size(); ++c) {
      ds.labels.push_back(static_cast<int>(c));
      for (std::size_t n = 0; n < spec.n_channels; ++n) {
        const double phase = rng.uniform(0.0, two_pi);
        for (std::size_t t = 0; t < spec.length; ++t) {
          const double clean =
              std::sin(two_pi * spec.freqs[c] * static_cast<double>(t) / static_cast<double>(spec.length) + phase);
          ds.inputs.push_back(clean + (spec.noise > 0 ? rng.normal(0.0, spec.noise) : 0.0));
        }
      }
    }
  }
  return ds;
}

Series synth_sine(const SynthSineSpec& spec) {
  if (spec.periods.empty()) throw ConfigError("synthetic sine needs at least one period");
  Rng rng(spec.seed);
  Series s;
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t n = 0; n < spec.n_channels; ++n) {
    s.names.push_back("c" + std::to_string(n));
    const double period = spec.periods[n % spec.periods.size()];
    const double phase = rng.uniform(0.0, two_pi);
    std::vector<double> v(spec.length);
    for (std::size_t t = 0; t < spec.length; ++t) {
      v[t] = std::sin(two_pi * static_cast<double>(t) / period + phase) +
             (spec.noise > 0 ? rng.normal(0.0, spec.noise) : 0.0);
    }
    s.values.push_back(std::move(v));
  }
  return s;
}

SynthAnomalyResult synth_anomaly(const SynthAnomalySpec& spec) {
  if (spec.clean_prefix >= spec.length) throw ConfigError("clean_prefix must be shorter than the series");
  SynthSineSpec base_spec;
  base_spec.n_channels = spec.n_channels;
  base_spec.length = spec.length;
  base_spec.periods = {spec.period};
  base_spec.noise = spec.noise;
  base_spec.seed = spec.seed;
  SynthAnomalyResult r;
  r.base = synth_sine(base_spec);

  // Amplitudes are relative to the base signal's spread (first channel).
  double mean = 0;
  for (double v : r.base.values[0]) mean += v;
  mean /= static_cast<double>(spec.length);
  double var = 0;
  for (double v : r.base.values[0]) var += (v - mean) * (v - mean);
  const double sigma = std::sqrt(var / static_cast<double>(spec.length));

  Rng rng(spec.seed ^ 0xa5a5a5a5ULL);
  const std::size_t gap = std::max<std::size_t>(spec.shift_length, static_cast<std::size_t>(spec.period));
  auto place = [&](std::size_t len) {
    const std::size_t span = spec.length - spec.clean_prefix;
    if (len > span) throw ConfigError("injection does not fit in the series");
    for (int attempt = 0; attempt < 100000; ++attempt) {
      const std::size_t start = spec.clean_prefix + rng.index(span - len + 1);
      bool clear = true;
      for (const auto& inj : r.injections) {
        if (start < inj.start + inj.length + gap && inj.start < start + len + gap) clear = false;
      }
      if (clear) return start;
    }
    throw ConfigError("cannot place " + std::to_string(spec.spikes + spec.level_shifts) +
                      " separated injections in the series; lower their number");
  };
  for (std::size_t i = 0; i < spec.spikes; ++i) {
    Injection inj;
    inj.start = place(1);
    inj.length = 1;
    inj.amplitude = (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) * spec.spike_amplitude * sigma;
    inj.spike = true;
    r.injections.push_back(inj);
  }
  for (std::size_t i = 0; i < spec.level_shifts; ++i) {
    Injection inj;
    inj.start = place(spec.shift_length);
    inj.length = spec.shift_length;
    inj.amplitude = (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) * spec.shift_amplitude * sigma;
    inj.spike = false;
    r.injections.push_back(inj);
  }
  std::sort(r.injections.begin(), r.injections.end(), [](const auto& a, const auto& b) { return a.start < b.start; });

  r.series = r.base;
  r.series.labels.assign(spec.length, 0);
  for (const auto& inj : r.injections) {
    for (std::size_t t = inj.start; t < inj.start + inj.length; ++t) {
      for (auto& channel : r.series.values) channel[t] += inj.amplitude;
      r.series.labels[t] = 1;
    }
  }
  return r;
}

}  // namespace fusad
