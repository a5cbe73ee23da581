#include "cli/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "tokdiff/auxiliary.hpp"
#include "tokdiff/codec.hpp"
#include "tokdiff/diffusion.hpp"
#include "tokdiff/errors.hpp"
#include "tokdiff/io.hpp"
#include "tokdiff/metrics.hpp"
#include "tokdiff/oracles.hpp"
#include "tokdiff/schedules.hpp"
#include "tokdiff/training.hpp"
#include "tokdiff/transitions.hpp"

namespace tokdiff::cli {

namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Writes to `path`, or to `out` when no path was given.
void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty()) {
    out << content;
    if (!content.empty() && content.back() != '\n') out << '\n';
  } else {
    io::write_text_atomic(path, content);
  }
}

// Per-layer tables are independent of the grid shape, so a schedule can be
// re-targeted to any grid with the same K and N_q.
PositionalScheduleTable fit_schedule(PositionalScheduleTable schedule, int K, int n_q, int frames,
                                     Layout layout) {
  if (schedule.K != K) {
    throw ArgumentError("schedule K=" + std::to_string(schedule.K) + " does not match tokens K=" +
                        std::to_string(K));
  }
  if (schedule.n_q != n_q) {
    throw ArgumentError("schedule N_q=" + std::to_string(schedule.n_q) +
                        " does not match tokens N_q=" + std::to_string(n_q));
  }
  schedule.frames = frames;
  schedule.layout = layout;
  return schedule;
}

GuidanceMode parse_guidance(const std::string& name) {
  if (name == "log") return GuidanceMode::log_space;
  if (name == "prob") return GuidanceMode::prob_space;
  throw ArgumentError("unknown guidance mode '" + name + "' (expected log or prob)");
}

void print_schedule(const PositionalScheduleTable& s, std::ostream& out) {
  out << "# kind=" << to_string(s.kind) << " T=" << s.T << " K=" << s.K << " N_q=" << s.n_q
      << " layout=" << to_string(s.layout) << " L=" << s.frames << '\n';
  bool shared = true;
  for (const auto& layer : s.layers) shared = shared && layer.alpha_bar == s.layers[0].alpha_bar;
  const std::size_t blocks = shared ? 1 : s.layers.size();
  for (std::size_t q = 0; q < blocks; ++q) {
    const ScheduleTable& t = s.layers[q];
    if (!shared) out << "# layer " << q << '\n';
    out << "t alpha_bar K*beta_bar gamma_bar alpha K*beta gamma\n";
    for (int i = 0; i <= t.T; ++i) {
      out << i << ' ' << num(t.alpha_bar[i]) << ' ' << num(t.uniform_mass(i)) << ' '
          << num(t.gamma_bar[i]) << ' ' << num(t.alpha[i]) << ' ' << num(t.K * t.beta[i]) << ' '
          << num(t.gamma[i]) << '\n';
    }
  }
}

struct TransitionsReport {
  double marginal = 0.0;
  double posterior = 0.0;
  double row_sum = 0.0;
  double marginalization = 0.0;
  std::size_t posterior_cases = 0;
  int trials = 0;
};

TransitionsReport check_transitions(int K, int T, int trials, std::uint64_t seed) {
  TransitionsReport r;
  r.trials = trials;
  const bool enumerable = std::pow(K + 1.0, T) <= 2e6;
  for (int i = 0; i < trials; ++i) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
    const ScheduleTable table = oracles::random_schedule(T, K, rng);
    r.marginal = std::max(r.marginal, oracles::marginal_error(table));
    if (enumerable) {
      const auto pc = oracles::posterior_check(table);
      r.posterior = std::max(r.posterior, pc.max_error);
      r.row_sum = std::max(r.row_sum, pc.max_sum_error);
      r.marginalization = std::max(r.marginalization, pc.max_marginal_error);
      r.posterior_cases += pc.cases;
    }
  }
  return r;
}

bool transitions_pass(const TransitionsReport& r) {
  return r.marginal <= 1e-12 && r.posterior <= 1e-12 && r.row_sum <= 1e-12 &&
         r.marginalization <= 1e-12;
}

int selftest(std::ostream& out) {
  int failures = 0;
  auto line = [&](bool ok, const std::string& name, const std::string& detail) {
    out << (ok ? "PASS " : "FAIL ") << name << ' ' << detail << '\n';
    if (!ok) ++failures;
  };

  double marginal = 0.0;
  double posterior = 0.0;
  double row_sum = 0.0;
  for (int K = 2; K <= 5; ++K) {
    for (int T = 2; T <= 8; ++T) {
      const auto r = check_transitions(K, T, 3, 1000 + 10 * K + T);
      marginal = std::max(marginal, r.marginal);
      posterior = std::max(posterior, std::max(r.posterior, r.marginalization));
      row_sum = std::max(row_sum, r.row_sum);
    }
  }
  line(marginal <= 1e-12, "transitions.marginal", "max_abs_error=" + num(marginal));
  line(posterior <= 1e-12 && row_sum <= 1e-12, "transitions.posterior",
       "max_abs_error=" + num(posterior) + " row_sum_error=" + num(row_sum));

  const auto support = oracles::toy_distribution();
  const auto schedule = PositionalScheduleTable::uniform(linear_schedule(10, 4), 1, 3);
  const BayesOracleDenoiser oracle(support, schedule);
  const auto samples = sample_many(oracle, Condition::null(), schedule, {}, 7, 20000);
  const double tv = oracles::total_variation(samples, support);
  line(tv < 0.05, "diffusion.bayes_recovery", "tv=" + num(tv) + " samples=20000");

  out << (failures == 0 ? "selftest passed" : "selftest failed") << '\n';
  return failures == 0 ? 0 : 1;
}

struct Context {
  std::ostream& out;
  std::ostream& err;
};

// Registers every subcommand; the selected one stores its action in `action`.
void build(CLI::App& app, std::function<int()>& action, Context& ctx) {
  auto on = [&action](CLI::App* cmd, std::function<int()> fn) {
    cmd->callback([&action, fn]() { action = fn; });
  };
  std::ostream& out = ctx.out;
  std::ostream& err = ctx.err;

  // schedule
  {
    auto* group = app.add_subcommand("schedule", "Noise schedules");
    group->require_subcommand(1);
    auto* cmd = group->add_subcommand("inspect", "Print the coefficient table of a schedule");
    auto config = std::make_shared<std::string>();
    auto kind = std::make_shared<std::string>("linear");
    auto T = std::make_shared<int>(100);
    auto K = std::make_shared<int>(512);
    auto n_q = std::make_shared<int>(1);
    auto layout = std::make_shared<std::string>("concatenated");
    auto frames = std::make_shared<int>(1);
    auto path = std::make_shared<std::string>();
    cmd->add_option("--config", *config, "Schedule JSON file");
    cmd->add_option("--kind", *kind, "linear or improved");
    cmd->add_option("--T", *T, "Number of steps");
    cmd->add_option("--K", *K, "Codebook size");
    cmd->add_option("--Nq", *n_q, "Number of codebooks");
    cmd->add_option("--layout", *layout, "concatenated or interleaved");
    cmd->add_option("--L", *frames, "Frames per codebook");
    cmd->add_option("--out", *path, "Also write the schedule JSON here");
    on(cmd, [=, &out]() {
      PositionalScheduleTable s;
      if (!config->empty()) {
        s = io::schedule_from_json(io::read_text(*config));
      } else if (parse_schedule_kind(*kind) == ScheduleKind::improved) {
        s = improved_schedule(*T, *K, *n_q, parse_layout(*layout), *frames);
      } else if (parse_schedule_kind(*kind) == ScheduleKind::linear) {
        s = PositionalScheduleTable::uniform(linear_schedule(*T, *K), *n_q, *frames,
                                             parse_layout(*layout));
      } else {
        throw ArgumentError("custom schedules are read with --config");
      }
      s.validate();
      if (!path->empty()) io::write_text_atomic(*path, io::schedule_to_json(s));
      print_schedule(s, out);
      return 0;
    });
  }

  // transitions
  {
    auto* group = app.add_subcommand("transitions", "Transition-matrix oracles");
    group->require_subcommand(1);
    auto* cmd = group->add_subcommand(
        "check", "Compare closed forms with explicit matrix products and Bayes enumeration");
    auto K = std::make_shared<int>(4);
    auto T = std::make_shared<int>(6);
    auto trials = std::make_shared<int>(50);
    auto seed = std::make_shared<std::uint64_t>(0);
    cmd->add_option("--K", *K, "Codebook size");
    cmd->add_option("--T", *T, "Number of steps");
    cmd->add_option("--trials", *trials, "Random schedules to check");
    cmd->add_option("--seed", *seed, "Random seed");
    on(cmd, [=, &out, &err]() {
      if (*K < 1 || *T < 1 || *trials < 1) throw ArgumentError("K, T and trials must be >= 1");
      const auto r = check_transitions(*K, *T, *trials, *seed);
      out << "schedules=" << r.trials << " K=" << *K << " T=" << *T << '\n';
      out << "marginal max_abs_error=" << num(r.marginal) << '\n';
      if (r.posterior_cases > 0) {
        out << "posterior cases=" << r.posterior_cases << " max_abs_error=" << num(r.posterior)
            << " row_sum_error=" << num(r.row_sum)
            << " marginalization_error=" << num(r.marginalization) << '\n';
      } else {
        out << "posterior skipped (enumeration too large)\n";
      }
      const bool ok = transitions_pass(r);
      out << "result=" << (ok ? "pass" : "fail") << '\n';
      if (!ok) err << "error: closed forms disagree with the oracle beyond 1e-12\n";
      return ok ? 0 : 1;
    });
  }

  // diffuse
  {
    auto* group = app.add_subcommand("diffuse", "Forward corruption, sampling, training, VLB");
    group->require_subcommand(1);

    auto* corrupt_cmd = group->add_subcommand("corrupt", "Draw x_t ~ q(x_t | x_0) for every grid");
    {
      auto tokens = std::make_shared<std::string>();
      auto schedule = std::make_shared<std::string>();
      auto t = std::make_shared<int>(0);
      auto seed = std::make_shared<std::uint64_t>(0);
      auto path = std::make_shared<std::string>();
      corrupt_cmd->add_option("--tokens", *tokens, "Token file")->required();
      corrupt_cmd->add_option("--schedule", *schedule, "Schedule file")->required();
      corrupt_cmd->add_option("--t", *t, "Diffusion step")->required();
      corrupt_cmd->add_option("--seed", *seed, "Random seed");
      corrupt_cmd->add_option("--out", *path, "Output token file (default stdout)");
      on(corrupt_cmd, [=, &out]() {
        io::TokenFile file = io::tokens_from_json(io::read_text(*tokens));
        const auto s = fit_schedule(io::schedule_from_json(io::read_text(*schedule)), file.K,
                                    file.n_q, file.frames, file.layout);
        if (*t < 0 || *t > s.T) throw ArgumentError("--t must lie in [0, T]");
        for (std::size_t i = 0; i < file.grids.size(); ++i) {
          Rng rng = Rng::derive(*seed, i);
          file.grids[i].grid = corrupt(file.grids[i].grid, *t, s, rng);
        }
        emit(*path, io::tokens_to_json(file), out);
        return 0;
      });
    }

    auto* sample_cmd = group->add_subcommand("sample", "Run the reverse process");
    {
      auto denoiser = std::make_shared<std::string>();
      auto schedule = std::make_shared<std::string>();
      auto lambda = std::make_shared<double>(0.0);
      auto T = std::make_shared<int>(0);
      auto stride = std::make_shared<int>(1);
      auto count = std::make_shared<int>(1);
      auto seed = std::make_shared<std::uint64_t>(0);
      auto label = std::make_shared<std::optional<int>>();
      auto threads = std::make_shared<int>(1);
      auto guidance = std::make_shared<std::string>("log");
      auto path = std::make_shared<std::string>();
      sample_cmd->add_option("--denoiser", *denoiser, "Denoiser file")->required();
      sample_cmd->add_option("--schedule", *schedule, "Schedule file (default: the denoiser's)");
      sample_cmd->add_option("--lambda", *lambda, "Guidance scale (>= -1)");
      sample_cmd->add_option("--T", *T, "Number of steps; must match the schedule");
      sample_cmd->add_option("--stride", *stride, "Reverse step size");
      sample_cmd->add_option("--count", *count, "Number of samples");
      sample_cmd->add_option("--seed", *seed, "Random seed");
      sample_cmd->add_option("--label", *label, "Condition label (default: null condition)");
      sample_cmd->add_option("--threads", *threads, "Worker threads");
      sample_cmd->add_option("--guidance", *guidance, "log or prob");
      sample_cmd->add_option("--out", *path, "Output token file (default stdout)");
      on(sample_cmd, [=, &out]() {
        io::DenoiserFile model = io::denoiser_from_json(io::read_text(*denoiser));
        PositionalScheduleTable s = model.schedule;
        if (!schedule->empty()) {
          const auto given = io::schedule_from_json(io::read_text(*schedule));
          s = fit_schedule(given, s.K, s.n_q, s.frames, s.layout);
        }
        if (*T != 0 && *T != s.T) {
          throw ArgumentError("--T " + std::to_string(*T) + " does not match the schedule's T=" +
                              std::to_string(s.T));
        }
        if (*count < 1 || *threads < 1) throw ArgumentError("--count and --threads must be >= 1");
        SamplerOptions options;
        options.guidance_scale = *lambda;
        options.mode = parse_guidance(*guidance);
        options.stride = *stride;
        const Condition cond = label->has_value() ? Condition::of(**label) : Condition::null();
        const auto grids = sample_many(*model.denoiser, cond, s, options, *seed, *count, *threads);
        emit(*path, io::tokens_to_json(io::make_token_file(grids, cond)), out);
        return 0;
      });
    }

    auto* train_cmd = group->add_subcommand("train", "Fit a tabular denoiser on the VLB");
    {
      auto tokens = std::make_shared<std::string>();
      auto schedule = std::make_shared<std::string>();
      auto path = std::make_shared<std::string>();
      auto config = std::make_shared<TrainConfig>();
      train_cmd->add_option("--tokens", *tokens, "Training token file")->required();
      train_cmd->add_option("--schedule", *schedule, "Schedule file")->required();
      train_cmd->add_option("--out", *path, "Output denoiser file")->required();
      train_cmd->add_option("--epochs", config->epochs, "Passes over the data");
      train_cmd->add_option("--lr", config->learning_rate, "Learning rate");
      train_cmd->add_option("--null-prob", config->null_prob, "Condition dropout probability");
      train_cmd->add_option("--seed", config->seed, "Random seed");
      on(train_cmd, [=, &out]() {
        const io::TokenFile file = io::tokens_from_json(io::read_text(*tokens));
        const auto s = fit_schedule(io::schedule_from_json(io::read_text(*schedule)), file.K,
                                    file.n_q, file.frames, file.layout);
        const TrainResult result = train_denoiser(file.grids, s, *config);
        io::write_text_atomic(*path, io::tabular_to_json(result.denoiser, s));
        out << "epoch loss\n";
        for (std::size_t e = 0; e < result.loss_trace.size(); ++e) {
          out << e + 1 << ' ' << num(result.loss_trace[e]) << '\n';
        }
        return 0;
      });
    }

    auto* vlb_cmd = group->add_subcommand("vlb", "Estimate the variational bound per grid");
    {
      auto denoiser = std::make_shared<std::string>();
      auto tokens = std::make_shared<std::string>();
      auto samples = std::make_shared<int>(100);
      auto seed = std::make_shared<std::uint64_t>(0);
      vlb_cmd->add_option("--denoiser", *denoiser, "Denoiser file")->required();
      vlb_cmd->add_option("--tokens", *tokens, "Token file")->required();
      vlb_cmd->add_option("--samples", *samples, "Monte-Carlo draws of t per grid");
      vlb_cmd->add_option("--seed", *seed, "Random seed");
      on(vlb_cmd, [=, &out, &err]() {
        const io::DenoiserFile model = io::denoiser_from_json(io::read_text(*denoiser));
        const io::TokenFile file = io::tokens_from_json(io::read_text(*tokens));
        const auto s = fit_schedule(model.schedule, file.K, file.n_q, file.frames, file.layout);
        double total = 0.0;
        out << "grid vlb std_error prior\n";
        for (std::size_t i = 0; i < file.grids.size(); ++i) {
          Rng rng = Rng::derive(*seed, i);
          const auto est =
              vlb_loss(*model.denoiser, file.grids[i].grid, file.grids[i].cond, s, rng, *samples);
          out << i << ' ' << num(est.value) << ' ' << num(est.std_error) << ' '
              << num(est.prior_term) << '\n';
          if (!est.finite) err << "note: grid " << i << ": " << est.diagnostic << '\n';
          total += est.value;
        }
        if (!file.grids.empty()) {
          out << "mean " << num(total / static_cast<double>(file.grids.size())) << '\n';
        }
        return 0;
      });
    }
  }

  // codec
  {
    auto* group = app.add_subcommand("codec", "Vector-quantization codecs");
    group->require_subcommand(1);

    auto* fit_cmd = group->add_subcommand("fit", "Learn codebooks with k-means");
    {
      auto features = std::make_shared<std::string>();
      auto preset = std::make_shared<std::string>();
      auto kind = std::make_shared<std::string>("vq");
      auto config = std::make_shared<FitConfig>();
      auto path = std::make_shared<std::string>();
      fit_cmd->add_option("--features", *features, "Feature CSV, one frame per row")->required();
      fit_cmd->add_option("--preset", *preset, "mel-vq, rvq, gvq or grvq");
      fit_cmd->add_option("--kind", *kind, "vq, rvq, gvq or grvq");
      fit_cmd->add_option("--G", config->groups, "Groups");
      fit_cmd->add_option("--R", config->depth, "Residual layers");
      fit_cmd->add_option("--Kp", config->codes, "Codes per book");
      fit_cmd->add_option("--iters", config->iters, "Lloyd iterations per book");
      fit_cmd->add_option("--seed", config->seed, "Random seed");
      fit_cmd->add_flag("--dropout", config->dropout, "Quantizer dropout (residual kinds)");
      fit_cmd->add_option("--out", *path, "Output codec file")->required();
      on(fit_cmd, [=, &out]() {
        FitConfig c = *config;
        if (!preset->empty()) {
          const FitConfig p = codec_preset(*preset);
          c.kind = p.kind;
          c.groups = p.groups;
          c.depth = p.depth;
          c.codes = p.codes;
          c.dropout = p.dropout || c.dropout;
        } else {
          c.kind = parse_quantizer_kind(*kind);
        }
        const Matrix x = io::matrix_from_csv(io::read_text(*features));
        const FitReport report = fit_codebooks_report(x, c);
        io::write_text_atomic(*path, io::codec_to_json(report.model));
        out << "book iterations inertia\n";
        for (std::size_t b = 0; b < report.inertia_traces.size(); ++b) {
          const auto& trace = report.inertia_traces[b];
          out << b << ' ' << trace.size() << ' ' << num(trace.empty() ? 0.0 : trace.back())
              << '\n';
        }
        return 0;
      });
    }

    auto* encode_cmd = group->add_subcommand("encode", "Quantize features to tokens");
    {
      auto codec = std::make_shared<std::string>();
      auto features = std::make_shared<std::string>();
      auto active = std::make_shared<int>(0);
      auto path = std::make_shared<std::string>();
      encode_cmd->add_option("--codec", *codec, "Codec file")->required();
      encode_cmd->add_option("--features", *features, "Feature CSV")->required();
      encode_cmd->add_option("--active", *active, "Books to use (default all)");
      encode_cmd->add_option("--out", *path, "Output token file (default stdout)");
      on(encode_cmd, [=, &out]() {
        const CodecModel model = io::codec_from_json(io::read_text(*codec));
        const Matrix x = io::matrix_from_csv(io::read_text(*features));
        const QuantizeResult q = quantize(x, model, *active);
        emit(*path, io::tokens_to_json(io::make_token_file({q.tokens})), out);
        return 0;
      });
    }

    auto* decode_cmd = group->add_subcommand("decode", "Reconstruct features from tokens");
    {
      auto codec = std::make_shared<std::string>();
      auto tokens = std::make_shared<std::string>();
      auto index = std::make_shared<std::size_t>(0);
      auto path = std::make_shared<std::string>();
      decode_cmd->add_option("--codec", *codec, "Codec file")->required();
      decode_cmd->add_option("--tokens", *tokens, "Token file")->required();
      decode_cmd->add_option("--index", *index, "Which grid of the token file");
      decode_cmd->add_option("--out", *path, "Output CSV (default stdout)");
      on(decode_cmd, [=, &out]() {
        const CodecModel model = io::codec_from_json(io::read_text(*codec));
        const io::TokenFile file = io::tokens_from_json(io::read_text(*tokens));
        if (*index >= file.grids.size()) throw ArgumentError("--index past the last grid");
        emit(*path, io::matrix_to_csv(dequantize(file.grids[*index].grid, model)), out);
        return 0;
      });
    }

    auto* report_cmd = group->add_subcommand("report", "Reconstruction MSE per active depth");
    {
      auto codec = std::make_shared<std::string>();
      auto features = std::make_shared<std::string>();
      report_cmd->add_option("--codec", *codec, "Codec file")->required();
      report_cmd->add_option("--features", *features, "Feature CSV")->required();
      on(report_cmd, [=, &out]() {
        const CodecModel model = io::codec_from_json(io::read_text(*codec));
        const Matrix x = io::matrix_from_csv(io::read_text(*features));
        out << "kind=" << to_string(model.kind) << " G=" << model.groups << " R=" << model.depth
            << " Kp=" << model.codes << '\n';
        out << "depth mse\n";
        for (const auto& row : reconstruction_report(x, model)) {
          out << row.depth << ' ' << num(row.mse) << '\n';
        }
        return 0;
      });
    }
  }

  // metrics
  {
    auto* group = app.add_subcommand("metrics", "Objective evaluation metrics");
    group->require_subcommand(1);

    auto* mcd_cmd = group->add_subcommand("mcd", "Mel-cepstral distortion");
    {
      auto ref = std::make_shared<std::string>();
      auto syn = std::make_shared<std::string>();
      auto options = std::make_shared<McdOptions>();
      mcd_cmd->add_option("--ref", *ref, "Reference cepstra CSV")->required();
      mcd_cmd->add_option("--syn", *syn, "Synthesized cepstra CSV")->required();
      mcd_cmd->add_option("--order", options->order, "Coefficients compared");
      mcd_cmd->add_flag("--db", options->db_scale, "Apply the 10 sqrt(2) / ln 10 scaling");
      on(mcd_cmd, [=, &out]() {
        const Matrix a = io::matrix_from_csv(io::read_text(*ref));
        const Matrix b = io::matrix_from_csv(io::read_text(*syn));
        out << "mcd=" << num(mcd(a, b, *options)) << '\n';
        return 0;
      });
    }

    auto* ssim_cmd = group->add_subcommand("ssim", "Structural similarity of two matrices");
    {
      auto ref = std::make_shared<std::string>();
      auto syn = std::make_shared<std::string>();
      auto window = std::make_shared<int>(7);
      auto c1 = std::make_shared<std::optional<double>>();
      auto c2 = std::make_shared<std::optional<double>>();
      ssim_cmd->add_option("--ref", *ref, "Reference matrix CSV")->required();
      ssim_cmd->add_option("--syn", *syn, "Synthesized matrix CSV")->required();
      ssim_cmd->add_option("--window", *window, "Window size");
      ssim_cmd->add_option("--c1", *c1, "Luminance constant");
      ssim_cmd->add_option("--c2", *c2, "Contrast constant");
      on(ssim_cmd, [=, &out]() {
        const Matrix a = io::matrix_from_csv(io::read_text(*ref));
        const Matrix b = io::matrix_from_csv(io::read_text(*syn));
        SsimOptions options;
        options.window = *window;
        options.c1 = *c1;
        options.c2 = *c2;
        out << "ssim=" << num(ssim(a, b, options)) << '\n';
        return 0;
      });
    }

    auto* pitch_cmd = group->add_subcommand("pitch", "GPE, VDE and FFE of two pitch tracks");
    {
      auto ref = std::make_shared<std::string>();
      auto syn = std::make_shared<std::string>();
      auto threshold = std::make_shared<double>(0.2);
      pitch_cmd->add_option("--ref", *ref, "Reference track CSV (frame,f0,voiced)")->required();
      pitch_cmd->add_option("--syn", *syn, "Synthesized track CSV")->required();
      pitch_cmd->add_option("--threshold", *threshold, "Relative F0 deviation for a gross error");
      on(pitch_cmd, [=, &out]() {
        const PitchTrack a = io::pitch_from_csv(io::read_text(*ref));
        const PitchTrack b = io::pitch_from_csv(io::read_text(*syn));
        const PitchErrors e = pitch_errors(a, b, *threshold);
        out << "gpe=" << (e.gpe ? num(*e.gpe) : std::string("none")) << " vde=" << num(e.vde)
            << " ffe=" << num(e.ffe) << '\n';
        return 0;
      });
    }
  }

  // aux
  {
    auto* group = app.add_subcommand("aux", "Contrastive losses, retrieval and CLUB");
    group->require_subcommand(1);

    auto* infonce_cmd = group->add_subcommand("infonce", "Symmetric InfoNCE of a similarity matrix");
    {
      auto input = std::make_shared<std::string>();
      auto tau = std::make_shared<double>(1.0);
      infonce_cmd->add_option("--input", *input, "Similarity CSV")->required();
      infonce_cmd->add_option("--tau", *tau, "Temperature");
      on(infonce_cmd, [=, &out]() {
        const Matrix sim = io::matrix_from_csv(io::read_text(*input));
        out << "infonce=" << num(info_nce(sim, *tau)) << '\n';
        return 0;
      });
    }

    auto* rank_cmd = group->add_subcommand("rank-loss", "Bidirectional hinge ranking loss");
    {
      auto input = std::make_shared<std::string>();
      auto margin = std::make_shared<double>(0.2);
      rank_cmd->add_option("--input", *input, "Similarity CSV")->required();
      rank_cmd->add_option("--margin", *margin, "Hinge margin");
      on(rank_cmd, [=, &out]() {
        const Matrix sim = io::matrix_from_csv(io::read_text(*input));
        out << "rank_loss=" << num(contrastive_ranking_loss(sim, *margin)) << '\n';
        return 0;
      });
    }

    auto* recall_cmd = group->add_subcommand("recall", "Recall at rank k (percent)");
    {
      auto input = std::make_shared<std::string>();
      auto k = std::make_shared<int>(1);
      recall_cmd->add_option("--input", *input, "Similarity CSV")->required();
      recall_cmd->add_option("--k", *k, "Rank cut-off");
      on(recall_cmd, [=, &out]() {
        const Matrix sim = io::matrix_from_csv(io::read_text(*input));
        out << "recall@" << *k << '=' << num(recall_at_k(sim, *k)) << '\n';
        return 0;
      });
    }

    auto* club_cmd = group->add_subcommand("club", "CLUB mutual-information upper bound");
    {
      auto input = std::make_shared<std::string>();
      auto x_dims = std::make_shared<int>(1);
      club_cmd->add_option("--input", *input, "CSV of paired rows: x columns then y columns")
          ->required();
      club_cmd->add_option("--x-dims", *x_dims, "Number of leading x columns");
      on(club_cmd, [=, &out, &err]() {
        const Matrix m = io::matrix_from_csv(io::read_text(*input));
        const int dx = *x_dims;
        if (dx < 1 || static_cast<std::size_t>(dx) >= m.cols()) {
          throw ArgumentError("--x-dims must leave at least one y column");
        }
        PairedSamples s{Matrix(m.rows(), dx), Matrix(m.rows(), m.cols() - dx)};
        for (std::size_t i = 0; i < m.rows(); ++i) {
          for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j < static_cast<std::size_t>(dx)) {
              s.x(i, j) = m(i, j);
            } else {
              s.y(i, j - dx) = m(i, j);
            }
          }
        }
        const ClubEstimate est = club_mi(s);
        out << "club=" << num(est.value) << " log_likelihood=" << num(est.log_likelihood) << '\n';
        if (!est.diagnostic.empty()) err << "note: " << est.diagnostic << '\n';
        return 0;
      });
    }
  }

  auto* self = app.add_subcommand("selftest", "Run the brute-force oracle suites");
  on(self, [&out]() { return selftest(out); });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete-diffusion token generation, codecs and evaluation metrics", "tokdiff"};
  app.require_subcommand(1);
  std::function<int()> action;
  Context ctx{out, err};
  build(app, action, ctx);

  std::vector<const char*> argv{"tokdiff"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    err << app.help();
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace tokdiff::cli
