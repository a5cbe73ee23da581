#include "tokdiff/codec.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "tokdiff/errors.hpp"
#include "tokdiff/kmeans.hpp"
#include "tokdiff/random.hpp"

namespace tokdiff {

std::string_view to_string(QuantizerKind kind) {
  switch (kind) {
    case QuantizerKind::vq:
      return "VQ";
    case QuantizerKind::rvq:
      return "RVQ";
    case QuantizerKind::gvq:
      return "GVQ";
    case QuantizerKind::grvq:
      return "GRVQ";
  }
  return "VQ";
}

QuantizerKind parse_quantizer_kind(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "VQ") return QuantizerKind::vq;
  if (upper == "RVQ") return QuantizerKind::rvq;
  if (upper == "GVQ") return QuantizerKind::gvq;
  if (upper == "GRVQ") return QuantizerKind::grvq;
  throw ArgumentError("unknown quantizer kind '" + std::string(name) + "'");
}

namespace {

void check_structure(QuantizerKind kind, int groups, int depth) {
  if (groups < 1 || depth < 1) throw ArgumentError("groups and depth must be >= 1");
  switch (kind) {
    case QuantizerKind::vq:
      if (groups != 1 || depth != 1) throw ArgumentError("VQ has one group and depth 1");
      break;
    case QuantizerKind::rvq:
      if (groups != 1) throw ArgumentError("RVQ has a single group");
      break;
    case QuantizerKind::gvq:
      if (depth != 1) throw ArgumentError("GVQ has depth 1");
      break;
    case QuantizerKind::grvq:
      break;
  }
}

int resolve_active(const CodecModel& model, int active_books) {
  if (active_books == 0) return model.n_books();
  if (active_books < 1 || active_books > model.n_books()) {
    throw ArgumentError("active_books must be in 1.." + std::to_string(model.n_books()));
  }
  if (!model.residual() && active_books != model.n_books()) {
    throw ArgumentError(std::string(to_string(model.kind)) + " always uses every codebook");
  }
  return active_books;
}

}  // namespace

void CodecModel::validate() const {
  check_structure(kind, groups, depth);
  if (codes < 2) throw ArgumentError("codebooks need at least two codes");
  if (dim < 1 || dim % groups != 0) throw ArgumentError("dimension must be divisible by groups");
  if (static_cast<int>(codebooks.size()) != n_books()) {
    throw ArgumentError("expected " + std::to_string(n_books()) + " codebooks");
  }
  for (const auto& book : codebooks) {
    if (book.rows() != static_cast<std::size_t>(codes) ||
        book.cols() != static_cast<std::size_t>(sub_dim())) {
      throw ArgumentError("codebook shape does not match codes x dim/groups");
    }
    for (double v : book.data()) {
      if (!std::isfinite(v)) throw ArgumentError("codebook has a non-finite entry");
    }
  }
}

QuantizeResult quantize(const FeatureMatrix& features, const CodecModel& model, int active_books) {
  if (features.cols() != static_cast<std::size_t>(model.dim)) {
    throw ArgumentError("feature dimension " + std::to_string(features.cols()) +
                        " does not match codec dimension " + std::to_string(model.dim));
  }
  if (features.rows() == 0) throw ArgumentError("no frames to quantize");
  const int active = resolve_active(model, active_books);
  const auto frames = static_cast<int>(features.rows());
  const int sub = model.sub_dim();

  if (static_cast<int>(model.codebooks.size()) != model.n_books()) {
    throw ArgumentError("codec model is missing codebooks");
  }
  QuantizeResult out{TokenGrid(model.codes, active, frames), Matrix(frames, model.dim)};
  std::vector<double> residual(sub);
  for (int f = 0; f < frames; ++f) {
    const auto frame = features.row(f);
    auto recon = out.reconstruction.row(f);
    for (int g = 0; g < model.groups; ++g) {
      std::copy(frame.begin() + g * sub, frame.begin() + (g + 1) * sub, residual.begin());
      for (int layer = 0; layer < model.depth; ++layer) {
        const int b = model.book_index(g, layer);
        if (b >= active) break;
        const Matrix& book = model.codebooks[b];
        const int code = nearest_code(book, residual);
        out.tokens.at(b, f) = code;
        const auto vec = book.row(code);
        for (int j = 0; j < sub; ++j) {
          residual[j] -= vec[j];
          recon[g * sub + j] += vec[j];
        }
      }
    }
  }
  return out;
}

FeatureMatrix dequantize(const TokenGrid& tokens, const CodecModel& model) {
  if (tokens.K != model.codes) throw ArgumentError("token alphabet does not match codebook size");
  tokens.validate(false);
  if (tokens.n_q < 1 || tokens.n_q > model.n_books()) {
    throw ArgumentError("token grid has more rows than the codec has books");
  }
  resolve_active(model, tokens.n_q);
  const int sub = model.sub_dim();
  FeatureMatrix out(tokens.frames, model.dim);
  for (int b = 0; b < tokens.n_q; ++b) {
    const int g = b % model.groups;
    const Matrix& book = model.codebooks[b];
    for (int f = 0; f < tokens.frames; ++f) {
      const auto vec = book.row(tokens.at(b, f));
      auto dst = out.row(f);
      for (int j = 0; j < sub; ++j) dst[g * sub + j] += vec[j];
    }
  }
  return out;
}

FitReport fit_codebooks_report(const FeatureMatrix& features, const FitConfig& config) {
  check_structure(config.kind, config.groups, config.depth);
  if (config.codes < 2) throw ArgumentError("codes must be >= 2");
  if (features.rows() == 0 || features.cols() == 0) throw ArgumentError("no frames to fit");
  if (features.cols() % config.groups != 0) {
    throw ArgumentError("feature dimension must be divisible by groups");
  }
  for (double v : features.data()) {
    if (!std::isfinite(v)) throw ArgumentError("features contain a non-finite value");
  }

  FitReport report;
  CodecModel& model = report.model;
  model.kind = config.kind;
  model.groups = config.groups;
  model.depth = config.depth;
  model.codes = config.codes;
  model.dim = static_cast<int>(features.cols());
  model.codebooks.resize(model.n_books());
  report.inertia_traces.resize(model.n_books());

  Rng rng(config.seed);
  const std::size_t frames = features.rows();
  const int sub = model.sub_dim();

  // Quantizer dropout: frame f takes part in fitting layer r iff r < depth_of[f].
  std::vector<int> depth_of(frames, model.depth);
  if (config.dropout && model.residual()) {
    for (auto& d : depth_of) d = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(model.depth)));
  }

  for (int g = 0; g < model.groups; ++g) {
    Matrix residual(frames, sub);
    for (std::size_t f = 0; f < frames; ++f) {
      const auto src = features.row(f);
      std::copy(src.begin() + g * sub, src.begin() + (g + 1) * sub, residual.row(f).begin());
    }
    for (int layer = 0; layer < model.depth; ++layer) {
      const int b = model.book_index(g, layer);
      std::vector<std::size_t> members;
      for (std::size_t f = 0; f < frames; ++f) {
        if (layer < depth_of[f]) members.push_back(f);
      }
      Matrix train(members.size(), sub);
      for (std::size_t m = 0; m < members.size(); ++m) {
        const auto src = residual.row(members[m]);
        std::copy(src.begin(), src.end(), train.row(m).begin());
      }
      // One stream per book keeps books reproducible independently of order.
      Rng book_rng = Rng::derive(config.seed, static_cast<std::uint64_t>(b));
      KMeansResult fit;
      try {
        fit = kmeans(train, config.codes, config.iters, book_rng);
      } catch (const FittingError& e) {
        throw FittingError("codebook " + std::to_string(b) + ": " + e.what());
      }
      model.codebooks[b] = std::move(fit.centroids);
      report.inertia_traces[b] = std::move(fit.inertia_trace);
      for (std::size_t f = 0; f < frames; ++f) {
        auto r = residual.row(f);
        const auto vec = model.codebooks[b].row(nearest_code(model.codebooks[b], r));
        for (int j = 0; j < sub; ++j) r[j] -= vec[j];
      }
    }
  }
  return report;
}

CodecModel fit_codebooks(const FeatureMatrix& features, const FitConfig& config) {
  return fit_codebooks_report(features, config).model;
}

double mean_squared_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ArgumentError("shape mismatch");
  if (a.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    total += d * d;
  }
  return total / static_cast<double>(a.data().size());
}

std::vector<DepthMse> reconstruction_report(const FeatureMatrix& features,
                                            const CodecModel& model) {
  model.validate();
  std::vector<DepthMse> rows;
  const int first = model.residual() ? 1 : model.n_books();
  for (int depth = first; depth <= model.n_books(); ++depth) {
    const QuantizeResult q = quantize(features, model, depth);
    rows.push_back({depth, mean_squared_error(features, q.reconstruction)});
  }
  return rows;
}

FitConfig codec_preset(std::string_view name) {
  FitConfig c;
  if (name == "mel-vq") {
    c.kind = QuantizerKind::vq;
    c.codes = 512;
  } else if (name == "rvq") {
    c.kind = QuantizerKind::rvq;
    c.depth = 12;
    c.codes = 1024;
    c.dropout = true;
  } else if (name == "gvq") {
    c.kind = QuantizerKind::gvq;
    c.groups = 4;
    c.codes = 1024;
  } else if (name == "grvq") {
    c.kind = QuantizerKind::grvq;
    c.groups = 2;
    c.depth = 2;
    c.codes = 1024;
  } else {
    throw ArgumentError("unknown codec preset '" + std::string(name) + "'");
  }
  return c;
}

CodecModel random_codec(const FitConfig& config, int dim, std::uint64_t seed) {
  check_structure(config.kind, config.groups, config.depth);
  if (dim < 1 || dim % config.groups != 0) throw ArgumentError("dimension must be divisible by groups");
  CodecModel model;
  model.kind = config.kind;
  model.groups = config.groups;
  model.depth = config.depth;
  model.codes = config.codes;
  model.dim = dim;
  Rng rng(seed);
  for (int b = 0; b < model.n_books(); ++b) {
    Matrix book(config.codes, model.sub_dim());
    for (double& v : book.data()) v = rng.normal();
    model.codebooks.push_back(std::move(book));
  }
  model.validate();
  return model;
}

}  // namespace tokdiff
