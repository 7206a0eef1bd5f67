#include "tmach/data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <string_view>

#include "tmach/errors.hpp"
#include "tmach/rng.hpp"
#include "tmach/simd.hpp"
#include "tmach/text.hpp"

namespace tmach {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.x = Matrix(indices.size(), dim());
  out.y.resize(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size()) throw DimensionError("subset: row index out of range");
    std::copy_n(x.row(i).begin(), dim(), out.x.row(k).begin());
    out.y[k] = y[i];
  }
  out.task = task;
  out.state = state;
  out.column_divisors = column_divisors;
  return out;
}

namespace {

std::string where(std::size_t line, std::size_t column) {
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

std::vector<Token> split_whitespace(std::string_view line) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) tokens.push_back({line.substr(start, i - start), start + 1});
  }
  return tokens;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Dataset parse_sparse_text(std::istream& in) {
  struct Entry {
    std::size_t row, col;
    double value;
  };
  std::vector<Entry> entries;
  std::vector<double> labels;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto tokens = split_whitespace(line);
    if (tokens.empty() || tokens.front().text.front() == '#') continue;

    auto label = parse_double(tokens.front().text);
    if (!label) throw DataError("sparse text: bad label at " + where(line_no, tokens.front().column));
    const std::size_t row = labels.size();
    labels.push_back(*label);

    std::size_t last_index = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const Token& tok = tokens[t];
      const auto colon = tok.text.find(':');
      if (colon == std::string_view::npos || colon == 0) {
        throw DataError("sparse text: expected idx:val at " + where(line_no, tok.column));
      }
      const std::string_view idx_text = tok.text.substr(0, colon);
      std::size_t index = 0;
      auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), index);
      if (ec != std::errc() || ptr != idx_text.data() + idx_text.size() || index == 0) {
        throw DataError("sparse text: bad index at " + where(line_no, tok.column));
      }
      if (index <= last_index) {
        throw DataError("sparse text: indices not strictly increasing at " + where(line_no, tok.column));
      }
      auto value = parse_double(tok.text.substr(colon + 1));
      if (!value) {
        throw DataError("sparse text: bad value at " + where(line_no, tok.column + colon + 1));
      }
      last_index = index;
      max_index = std::max(max_index, index);
      entries.push_back({row, index - 1, *value});
    }
  }
  if (labels.empty()) throw DataError("sparse text: no data rows");
  if (max_index == 0) throw DataError("sparse text: no features");

  Dataset data;
  data.x = Matrix(labels.size(), max_index);
  for (const Entry& e : entries) data.x(e.row, e.col) = e.value;
  data.y = std::move(labels);
  return data;
}

void write_sparse_text(std::ostream& out, const Dataset& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_double(data.y[i]);
    auto row = data.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] != 0.0) out << ' ' << (j + 1) << ':' << format_double(row[j]);
    }
    out << '\n';
  }
}

Dataset parse_csv(std::istream& in, int label_column) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;

    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = view.find(',', start);
      cells.push_back(trim(view.substr(start, comma == std::string_view::npos ? view.npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }

    std::vector<double> values;
    values.reserve(cells.size());
    bool numeric = true;
    std::size_t bad_cell = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto v = parse_double(cells[c]);
      if (!v) {
        numeric = false;
        bad_cell = c;
        break;
      }
      values.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty() && width == 0) {
        width = cells.size();  // header row
        continue;
      }
      throw DataError("csv: non-numeric cell at line " + std::to_string(line_no) + ", field " +
                      std::to_string(bad_cell + 1));
    }
    if (width == 0) width = values.size();
    if (values.size() != width) {
      throw DataError("csv: ragged row at line " + std::to_string(line_no) + " (" +
                      std::to_string(values.size()) + " fields, expected " + std::to_string(width) + ")");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError("csv: no data rows");
  if (width < 2) throw DataError("csv: need a label column and at least one feature");

  const int w = static_cast<int>(width);
  const int label = label_column < 0 ? w + label_column : label_column;
  if (label < 0 || label >= w) throw DataError("csv: label column out of range");

  Dataset data;
  data.x = Matrix(rows.size(), width - 1);
  data.y.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t o = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (static_cast<int>(c) == label) {
        data.y[i] = rows[i][c];
      } else {
        data.x(i, o++) = rows[i][c];
      }
    }
  }
  return data;
}

bool normalize_binary_labels(Dataset& data) {
  bool has_zero = false, has_minus = false;
  for (double v : data.y) {
    if (v == 0.0) {
      has_zero = true;
    } else if (v == -1.0) {
      has_minus = true;
    } else if (v != 1.0) {
      throw DataError("binary task: label " + format_double(v) + " is not in {-1,+1} or {0,1}");
    }
  }
  if (has_zero && has_minus) throw DataError("binary task: labels mix 0 and -1");
  data.task = Task::binary;
  if (!has_zero) return false;
  for (double& v : data.y) v = v == 0.0 ? -1.0 : 1.0;
  return true;
}

namespace {

void normalize_rows(Matrix& x) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto row = x.row(i);
    const double norm = std::sqrt(simd::dot(row, row));
    if (norm > 0.0) {
      for (double& v : row) v /= norm;
    }
  }
}

}  // namespace

Dataset apply_preprocessing(const Dataset& data, std::span<const double> column_divisors) {
  if (column_divisors.size() != data.dim()) {
    throw DimensionError("preprocess: " + std::to_string(column_divisors.size()) + " column divisors for " +
                         std::to_string(data.dim()) + " features");
  }
  Dataset out = data;
  if (data.state == PrepState::row_normalized) return out;
  if (data.state == PrepState::raw) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      auto row = out.x.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] /= column_divisors[j];
    }
  }
  normalize_rows(out.x);
  out.state = PrepState::row_normalized;
  out.column_divisors.assign(column_divisors.begin(), column_divisors.end());
  return out;
}

std::pair<Dataset, Dataset> preprocess(const Dataset& train, const Dataset& test) {
  if (train.dim() != test.dim()) {
    throw DimensionError("preprocess: train has " + std::to_string(train.dim()) + " features, test has " +
                         std::to_string(test.dim()));
  }
  if (train.state == PrepState::row_normalized) {
    return {train, apply_preprocessing(test, train.column_divisors)};
  }
  if (train.state != PrepState::raw) throw DataError("preprocess: train set is partially preprocessed");

  std::vector<double> divisors(train.dim(), 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto row = train.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) divisors[j] += row[j] * row[j];
  }
  for (double& v : divisors) v = v > 0.0 ? std::sqrt(v) : 1.0;
  return {apply_preprocessing(train, divisors), apply_preprocessing(test, divisors)};
}

std::vector<std::vector<std::size_t>> kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > n) {
    throw std::invalid_argument("kfold: need 1 <= k <= n (k=" + std::to_string(k) + ", n=" +
                                std::to_string(n) + ")");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto rng = make_rng(seed, stream::kFolds);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(perm.begin() + pos, perm.begin() + pos + len);
    pos += len;
  }
  return folds;
}

Metrics metric(std::span<const double> pred, std::span<const double> truth, Task task) {
  if (pred.size() != truth.size()) throw DimensionError("metric: prediction/truth length mismatch");
  if (pred.empty()) throw std::invalid_argument("metric: no predictions");
  if (task == Task::regression) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      num += (pred[i] - truth[i]) * (pred[i] - truth[i]);
      den += truth[i] * truth[i];
    }
    if (den == 0.0) throw std::invalid_argument("metric: relative error undefined for all-zero truth");
    return {task, std::sqrt(num) / std::sqrt(den)};
  }
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double decision = pred[i] >= 0.0 ? 1.0 : -1.0;
    const double label = truth[i] >= 0.0 ? 1.0 : -1.0;
    if (decision != label) ++wrong;
  }
  return {task, static_cast<double>(wrong) / static_cast<double>(pred.size())};
}

std::vector<double> predict(const TmParams& params, const Dataset& data) {
  if (data.dim() != params.shape().dim) {
    throw DimensionError("predict: data has " + std::to_string(data.dim()) + " features, model expects " +
                         std::to_string(params.shape().dim));
  }
  TmWorkspace ws(params.shape());
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = ws.forward(params, data.row(i));
  return out;
}

SynthTask synth_tm_task(std::uint64_t seed, std::size_t dim, std::size_t degree, std::size_t rank_true,
                        std::size_t n_train, std::size_t n_test, double noise_sd) {
  if (dim == 0 || degree == 0 || rank_true == 0 || n_train == 0 || n_test == 0) {
    throw std::invalid_argument("synth_tm_task: sizes must be positive");
  }
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("synth_tm_task: noise_sd must be nonnegative");

  auto param_rng = make_rng(seed, stream::kSynthParams);
  TmParams truth = init_random(dim, degree, rank_true, 1.0, param_rng);
  auto row_rng = make_rng(seed, stream::kSynthRows);
  auto noise_rng = make_rng(seed, stream::kSynthNoise);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto draw = [&](std::size_t n, bool noisy) {
    Dataset data;
    data.x = Matrix(n, dim);
    data.y.resize(n);
    TmWorkspace ws(truth.shape());
    for (std::size_t i = 0; i < n; ++i) {
      auto row = data.x.row(i);
      double norm = 0.0;
      while (norm == 0.0) {
        for (double& v : row) v = normal(row_rng);
        norm = std::sqrt(simd::dot(row, row));
      }
      for (double& v : row) v /= norm;
      data.y[i] = ws.forward(truth, row);
      if (noisy && noise_sd > 0.0) data.y[i] += noise_sd * normal(noise_rng);
    }
    return data;
  };
  Dataset train = draw(n_train, true);
  Dataset test = draw(n_test, false);
  return {std::move(train), std::move(test), std::move(truth)};
}

}  // namespace tmach
