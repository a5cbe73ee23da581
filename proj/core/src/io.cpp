#include "tokdiff/io.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unistd.h>

#include "tokdiff/errors.hpp"

namespace tokdiff::io {

using nlohmann::json;

namespace {

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

json schedule_json(const PositionalScheduleTable& s) {
  json j;
  j["T"] = s.T;
  j["K"] = s.K;
  j["kind"] = std::string(to_string(s.kind));
  j["N_q"] = s.n_q;
  j["layout"] = std::string(to_string(s.layout));
  j["L"] = s.frames;
  bool shared = true;
  for (const auto& layer : s.layers) {
    shared = shared && layer.alpha_bar == s.layers.front().alpha_bar &&
             layer.gamma_bar == s.layers.front().gamma_bar;
  }
  if (shared) {
    j["alpha_bar"] = s.layers.front().alpha_bar;
    j["gamma_bar"] = s.layers.front().gamma_bar;
    j["beta_bar"] = s.layers.front().beta_bar;
  } else {
    json a = json::array(), g = json::array(), b = json::array();
    for (const auto& layer : s.layers) {
      a.push_back(layer.alpha_bar);
      g.push_back(layer.gamma_bar);
      b.push_back(layer.beta_bar);
    }
    j["alpha_bar"] = a;
    j["gamma_bar"] = g;
    j["beta_bar"] = b;
  }
  return j;
}

ScheduleTable layer_from_arrays(int K, std::vector<double> a, std::vector<double> g,
                                const std::vector<double>* b) {
  ScheduleTable table = schedule_from_cumulative(K, std::move(a), std::move(g));
  if (b) {
    if (b->size() != table.beta_bar.size()) throw FormatError("beta_bar has the wrong length");
    for (std::size_t t = 0; t < b->size(); ++t) {
      if (std::abs((*b)[t] - table.beta_bar[t]) * K > 1e-9) {
        throw ScheduleError("beta_bar disagrees with 1 - alpha_bar - gamma_bar at t = " +
                            std::to_string(t));
      }
    }
  }
  return table;
}

PositionalScheduleTable schedule_from(const json& j) {
  const int T = field<int>(j, "T");
  const int K = field<int>(j, "K");
  const auto kind = parse_schedule_kind(field_or<std::string>(j, "kind", "linear"));
  const int n_q = field_or<int>(j, "N_q", 1);
  const auto layout = parse_layout(field_or<std::string>(j, "layout", "concatenated"));
  const int frames = field_or<int>(j, "L", 1);

  PositionalScheduleTable s;
  if (!j.contains("alpha_bar")) {
    if (kind == ScheduleKind::improved) {
      s = improved_schedule(T, K, n_q, layout, frames);
    } else if (kind == ScheduleKind::linear) {
      s = PositionalScheduleTable::uniform(linear_schedule(T, K), n_q, frames, layout);
    } else {
      throw FormatError("custom schedules need alpha_bar and gamma_bar arrays");
    }
  } else {
    s.kind = kind;
    s.T = T;
    s.K = K;
    s.n_q = n_q;
    s.frames = frames;
    s.layout = layout;
    const json& a = j.at("alpha_bar");
    const json& g = j.at("gamma_bar");
    const bool nested = !a.empty() && a.front().is_array();
    try {
      for (int q = 0; q < n_q; ++q) {
        const json& aq = nested ? a.at(q) : a;
        const json& gq = nested ? g.at(q) : g;
        std::optional<std::vector<double>> bq;
        if (j.contains("beta_bar")) {
          bq = (nested ? j.at("beta_bar").at(q) : j.at("beta_bar")).get<std::vector<double>>();
        }
        s.layers.push_back(layer_from_arrays(K, aq.get<std::vector<double>>(),
                                             gq.get<std::vector<double>>(), bq ? &*bq : nullptr));
      }
    } catch (const json::exception& e) {
      throw FormatError(std::string("schedule arrays: ") + e.what());
    }
  }
  s.validate();
  if (s.T != T) throw FormatError("schedule arrays disagree with T");
  return s;
}

json grid_json(const TokenGrid& grid) {
  json rows = json::array();
  for (int q = 0; q < grid.n_q; ++q) {
    std::vector<int> row(grid.frames);
    for (int l = 0; l < grid.frames; ++l) row[l] = grid.at(q, l);
    rows.push_back(row);
  }
  return rows;
}

TokenGrid grid_from(const json& rows, int K, int n_q, int frames, Layout layout) {
  TokenGrid grid(K, n_q, frames, layout);
  if (!rows.is_array() || static_cast<int>(rows.size()) != n_q) {
    throw FormatError("grid must have N_q rows");
  }
  for (int q = 0; q < n_q; ++q) {
    const json& row = rows.at(q);
    if (!row.is_array() || static_cast<int>(row.size()) != frames) {
      throw FormatError("grid row must have L entries");
    }
    for (int l = 0; l < frames; ++l) {
      if (!row.at(l).is_number_integer()) throw FormatError("tokens must be integers");
      grid.at(q, l) = row.at(l).get<int>();
    }
  }
  grid.validate(true);
  return grid;
}

json label_json(const Condition& cond) { return cond.label ? json(*cond.label) : json(nullptr); }

Condition label_from(const json& j) {
  if (j.is_null()) return Condition::null();
  if (!j.is_number_integer()) throw FormatError("labels must be integers or null");
  return Condition::of(j.get<int>());
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("failed writing '" + path + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot move output into place at '" + path + "'");
  }
}

std::string schedule_to_json(const PositionalScheduleTable& schedule) {
  return schedule_json(schedule).dump(1) + "\n";
}

PositionalScheduleTable schedule_from_json(std::string_view text) {
  return schedule_from(parse(text));
}

std::string tokens_to_json(const TokenFile& file) {
  json j;
  j["K"] = file.K;
  j["N_q"] = file.n_q;
  j["L"] = file.frames;
  j["layout"] = std::string(to_string(file.layout));
  json grids = json::array();
  json labels = json::array();
  for (const auto& g : file.grids) {
    grids.push_back(grid_json(g.grid));
    labels.push_back(label_json(g.cond));
  }
  j["grids"] = grids;
  j["labels"] = labels;
  return j.dump() + "\n";
}

TokenFile tokens_from_json(std::string_view text) {
  const json j = parse(text);
  TokenFile file;
  file.K = field<int>(j, "K");
  file.n_q = field<int>(j, "N_q");
  file.frames = field<int>(j, "L");
  file.layout = parse_layout(field_or<std::string>(j, "layout", "concatenated"));
  if (!j.contains("grids") || !j.at("grids").is_array()) throw FormatError("missing grids array");
  const json& grids = j.at("grids");
  const json labels = j.contains("labels") ? j.at("labels") : json::array();
  if (!labels.is_array() || (!labels.empty() && labels.size() != grids.size())) {
    throw FormatError("labels must be absent or match the number of grids");
  }
  for (std::size_t i = 0; i < grids.size(); ++i) {
    LabeledGrid g{grid_from(grids.at(i), file.K, file.n_q, file.frames, file.layout),
                  labels.empty() ? Condition::null() : label_from(labels.at(i))};
    file.grids.push_back(std::move(g));
  }
  return file;
}

TokenFile make_token_file(const std::vector<TokenGrid>& grids, const Condition& cond) {
  if (grids.empty()) throw ArgumentError("no grids to write");
  TokenFile file;
  file.K = grids.front().K;
  file.n_q = grids.front().n_q;
  file.frames = grids.front().frames;
  file.layout = grids.front().layout;
  for (const auto& g : grids) file.grids.push_back({g, cond});
  return file;
}

std::string tabular_to_json(const TabularDenoiser& model, const PositionalScheduleTable& schedule) {
  json j;
  j["kind"] = "tabular";
  j["T"] = model.steps();
  j["K"] = model.K();
  j["positions"] = model.positions();
  j["labels"] = model.labels();
  j["schedule"] = schedule_json(schedule);
  j["logits"] = model.table();
  return j.dump() + "\n";
}

std::string bayes_to_json(const BayesOracleDenoiser& model) {
  json j;
  j["kind"] = "bayes";
  j["schedule"] = schedule_json(model.schedule());
  json support = json::array();
  for (const auto& p : model.support()) {
    support.push_back({{"grid", grid_json(p.grid)}, {"prob", p.prob}, {"label", label_json(p.cond)}});
  }
  j["support"] = support;
  return j.dump() + "\n";
}

DenoiserFile denoiser_from_json(std::string_view text) {
  const json j = parse(text);
  const auto kind = field<std::string>(j, "kind");
  if (!j.contains("schedule")) throw FormatError("denoiser file has no schedule");
  DenoiserFile file{nullptr, schedule_from(j.at("schedule"))};
  const auto& s = file.schedule;
  if (kind == "tabular") {
    auto model = std::make_unique<TabularDenoiser>(field<int>(j, "T"), field<int>(j, "K"),
                                                   field<std::size_t>(j, "positions"),
                                                   field_or<std::vector<int>>(j, "labels", {}));
    if (model->steps() != s.T || model->K() != s.K || model->positions() != s.length()) {
      throw FormatError("tabular denoiser does not match its schedule");
    }
    auto logits = field<std::vector<double>>(j, "logits");
    if (logits.size() != model->table().size()) throw FormatError("logit table has the wrong size");
    model->table() = std::move(logits);
    file.denoiser = std::move(model);
  } else if (kind == "bayes") {
    if (!j.contains("support") || !j.at("support").is_array()) throw FormatError("missing support");
    std::vector<SupportPoint> support;
    for (const json& p : j.at("support")) {
      support.push_back({grid_from(p.at("grid"), s.K, s.n_q, s.frames, s.layout),
                         field<double>(p, "prob"),
                         p.contains("label") ? label_from(p.at("label")) : Condition::null()});
    }
    file.denoiser = std::make_unique<BayesOracleDenoiser>(std::move(support), s);
  } else {
    throw FormatError("unknown denoiser kind '" + kind + "'");
  }
  return file;
}

std::string codec_to_json(const CodecModel& model) {
  json j;
  j["kind"] = std::string(to_string(model.kind));
  j["G"] = model.groups;
  j["R"] = model.depth;
  j["Kp"] = model.codes;
  json books = json::array();
  for (const auto& book : model.codebooks) {
    json rows = json::array();
    for (std::size_t r = 0; r < book.rows(); ++r) {
      rows.push_back(std::vector<double>(book.row(r).begin(), book.row(r).end()));
    }
    books.push_back(rows);
  }
  j["codebooks"] = books;
  return j.dump() + "\n";
}

CodecModel codec_from_json(std::string_view text) {
  const json j = parse(text);
  CodecModel model;
  model.kind = parse_quantizer_kind(field<std::string>(j, "kind"));
  model.groups = field<int>(j, "G");
  model.depth = field<int>(j, "R");
  model.codes = field<int>(j, "Kp");
  const auto books = field<std::vector<std::vector<std::vector<double>>>>(j, "codebooks");
  for (const auto& rows : books) {
    if (rows.empty()) throw FormatError("empty codebook");
    Matrix book(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != book.cols()) throw FormatError("ragged codebook");
      std::copy(rows[r].begin(), rows[r].end(), book.row(r).begin());
    }
    model.codebooks.push_back(std::move(book));
  }
  if (model.codebooks.empty()) throw FormatError("codec has no codebooks");
  model.dim = static_cast<int>(model.codebooks.front().cols()) * model.groups;
  model.validate();
  return model;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    out.push_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::vector<std::vector<std::string_view>> csv_lines(std::string_view text) {
  std::vector<std::vector<std::string_view>> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty() && line.front() != '#') lines.push_back(split_fields(line));
    start = end + 1;
  }
  return lines;
}

}  // namespace

Matrix matrix_from_csv(std::string_view text) {
  auto lines = csv_lines(text);
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::vector<double> row;
    bool numeric = true;
    for (auto f : lines[i]) {
      double v;
      if (!parse_double(f, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (i == 0) continue;
      throw FormatError("non-numeric CSV field on data line " + std::to_string(i + 1));
    }
    if (cols == 0) cols = row.size();
    if (row.size() != cols) throw FormatError("ragged CSV at line " + std::to_string(i + 1));
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw FormatError("CSV has no data rows");
  return Matrix(rows, cols, std::move(values));
}

std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      const auto res = std::to_chars(buf, buf + sizeof buf, m(r, c));
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

PitchTrack pitch_from_csv(std::string_view text) {
  auto lines = csv_lines(text);
  std::size_t f0_col = 1;
  std::size_t voiced_col = 2;
  std::size_t first = 0;
  if (!lines.empty()) {
    double probe;
    if (!parse_double(lines[0][0], probe)) {
      first = 1;
      for (std::size_t c = 0; c < lines[0].size(); ++c) {
        if (lines[0][c] == "f0") f0_col = c;
        if (lines[0][c] == "voiced") voiced_col = c;
      }
    }
  }
  PitchTrack track;
  for (std::size_t i = first; i < lines.size(); ++i) {
    const auto& row = lines[i];
    double f0, voiced;
    if (row.size() <= std::max(f0_col, voiced_col) || !parse_double(row[f0_col], f0) ||
        !parse_double(row[voiced_col], voiced)) {
      throw FormatError("bad pitch CSV line " + std::to_string(i + 1));
    }
    track.f0.push_back(f0);
    track.voiced.push_back(voiced != 0.0);
  }
  if (track.f0.empty()) throw FormatError("pitch CSV has no frames");
  track.validate();
  return track;
}

}  // namespace tokdiff::io
