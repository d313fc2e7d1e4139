// gpo: register, evaluate and benchmark Gaussian-primitive deformable
// registration from the command line.
//
// Exit status: 0 success, 1 runtime or numerical failure, 2 usage error.

#include "gpo/config.hpp"
#include "gpo/eval.hpp"
#include "gpo/loss.hpp"
#include "gpo/parallel.hpp"
#include "gpo/pipeline.hpp"
#include "gpo/sweep.hpp"
#include "gpo/synth.hpp"
#include "gpo/text_table.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

using namespace gpo;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct ConfigArgs {
  std::string config_file;
  std::vector<std::string> sets;
};

void add_config_options(CLI::App *cmd, ConfigArgs &a) {
  cmd->add_option("--config", a.config_file, "key = value config file");
  cmd->add_option("--set", a.sets, "override one key, e.g. --set optim.tau_max=200")->take_all();
}

// defaults < config file < --set
RunConfig resolve_config(const ConfigArgs &a, RunConfig cfg = {}) {
  if (!a.config_file.empty()) cfg.apply_file(a.config_file);
  for (const auto &s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Usage, "--set expects key=value, got '" + s + "'");
    cfg.set(trim(s.substr(0, eq)), s.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

void print_tre(const char *label, const TREStats &s) {
  std::printf("%s median=%.4f mean=%.4f max=%.4f n=%zu\n", label, s.median, s.mean, s.max, s.distances.size());
}

// --- register ------------------------------------------------------------

struct RegisterArgs {
  std::string fixed, moving, matches, landmarks, mode, out;
  ConfigArgs config;
  bool print_config = false;
};

int cmd_register(const RegisterArgs &a) {
  RunConfig cfg;
  if (!a.mode.empty()) cfg.set("mode", a.mode);
  cfg = resolve_config(a.config, cfg);
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.print_config) {
    std::cout << cfg.echo();
    return kExitOk;
  }
  if (a.fixed.empty() || a.moving.empty()) fail(ErrorKind::Usage, "register needs --fixed and --moving");

  PipelineInputs in{a.fixed, a.moving, std::nullopt, std::nullopt};
  if (!a.matches.empty()) in.matches = a.matches;
  if (!a.landmarks.empty()) in.landmarks = a.landmarks;
  const PipelineResult r = run_pipeline(in, cfg);

  const auto &trace = r.registration.loss_trace;
  std::printf("mode=%s size=%dx%d nodes=%zu transform=%s\n", to_string(cfg.mode), r.fixed.width(), r.fixed.height(),
              r.registration.final_nodes.size(), to_string(r.coarse.transform.kind()));
  std::printf("loss initial=%.6g final=%.6g ncc=%.6f\n", trace.front().total, trace.back().total,
              trace.back().ncc_value);
  std::printf("field max=%.4f mean=%.4f jacobian_min=%.4f\n", r.field.max_mag, r.field.mean_mag,
              r.field.jacobian_min_det);
  if (r.tre_coarse) print_tre("tre_coarse", *r.tre_coarse);
  if (r.tre_final) print_tre("tre_final", *r.tre_final);
  if (!cfg.output_dir.empty()) std::printf("artifacts=%s\n", cfg.output_dir.string().c_str());
  return kExitOk;
}

// --- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string landmarks, field, transform, out;
  std::vector<int> thresholds = kDefaultAucThresholds;
  double scale_fixed = 1.0, scale_moving = 1.0;
};

int cmd_eval(const EvalArgs &a) {
  LandmarkPairs lm;
  DisplacementField field;
  GlobalTransform t;
  try {
    lm = read_landmarks(a.landmarks);
    field = read_field(a.field);
    t = read_transform(a.transform);
  } catch (const Error &e) {
    if (e.kind() == ErrorKind::Format || e.kind() == ErrorKind::Io) fail(ErrorKind::Usage, e.what());
    throw;
  }
  lm.scale_fixed = {a.scale_fixed, a.scale_fixed};
  lm.scale_moving = {a.scale_moving, a.scale_moving};
  const TREStats s = tre(lm, t, field);
  const AUCCurve c = auc({s}, a.thresholds);
  print_tre("tre", s);
  for (const auto &[thr, v] : c.auc_at) std::printf("auc@%d=%.6f\n", thr, v);
  if (!a.out.empty()) write_report({s}, c, a.out);
  return kExitOk;
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
  int count = 1;
};

int cmd_synth(const SynthArgs &a) {
  if (a.count < 1) fail(ErrorKind::Usage, "--count must be >= 1");
  try {
    a.cfg.validate();
  } catch (const Error &e) {
    fail(ErrorKind::Usage, e.what());
  }
  for (int i = 0; i < a.count; ++i) {
    SynthConfig c = a.cfg;
    c.seed = a.cfg.seed + static_cast<std::uint64_t>(i);
    std::filesystem::path dir = a.out;
    if (a.count > 1) {
      char name[32];
      std::snprintf(name, sizeof name, "pair_%03d", i);
      dir /= name;
    }
    write_synth_bundle(make_pair(c), c, dir);
    std::printf("wrote %s (seed %llu)\n", dir.string().c_str(), static_cast<unsigned long long>(c.seed));
  }
  return kExitOk;
}

// --- gradcheck -----------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 0;
  int trials = 10;
  GradcheckConfig cfg;
  std::optional<double> h;
  bool kinked = false;
};

int cmd_gradcheck(GradcheckArgs a) {
  if (a.trials < 1) fail(ErrorKind::Usage, "--trials must be >= 1");
  a.cfg.smooth = !a.kinked;
  if (a.h) {
    if (!(*a.h > 0.0)) fail(ErrorKind::Usage, "--step must be > 0");
    a.cfg.h_pos = a.cfg.h_beta = *a.h;
  }
  bool all = true;
  GradcheckReport worst;
  double worst_err = -1.0;
  for (int i = 0; i < a.trials; ++i) {
    const GradcheckReport r = gradcheck(a.seed + static_cast<std::uint64_t>(i), a.cfg);
    std::cout << r.to_line() << '\n';
    const double e = std::max({r.max_rel_err_t, r.max_rel_err_g, r.max_rel_err_beta});
    if (e > worst_err) {
      worst_err = e;
      worst = r;
    }
    if (!r.expected_fail && !r.pass) all = false;
  }
  if (!all) {
    std::cerr << "gradcheck failed; worst: " << worst.to_line() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

// --- sweep ---------------------------------------------------------------

struct SweepArgs {
  std::vector<std::string> grid;
  std::string pairs, out, mode = "gcn";
  ConfigArgs config;
};

int cmd_sweep(const SweepArgs &a) {
  if (a.grid.empty()) fail(ErrorKind::Usage, "sweep needs at least one --grid key=v1,v2");
  std::vector<GridAxis> axes;
  for (const auto &g : a.grid) axes.push_back(parse_grid_axis(g));
  RunConfig base;
  base.set("mode", a.mode);
  base = resolve_config(a.config, base);
  std::printf("cell,config_hash,overrides,median_tre,mean_tre,wall_seconds\n");
  run_sweep(base, axes, a.pairs, a.out, [](const SweepRow &r) {
    std::printf("%zu,%016llx,%s,%.6f,%.6f,%.3f\n", r.cell, static_cast<unsigned long long>(r.config_hash),
                r.overrides.c_str(), r.median_tre, r.mean_tre, r.wall_seconds);
    std::fflush(stdout);
  });
  return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Gaussian-primitive deformable image registration"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("gpo ") + build_id());

  RegisterArgs reg;
  auto *r = app.add_subcommand("register", "register a moving image onto a fixed image");
  r->add_option("--fixed", reg.fixed, "fixed image (PNG, PGM/PPM or GPOI)");
  r->add_option("--moving", reg.moving, "moving image");
  r->add_option("--matches", reg.matches, "x_f,y_f,x_m,y_m[,confidence] table (required for dcn)");
  r->add_option("--landmarks", reg.landmarks, "x_f,y_f,x_m,y_m table used to report TRE");
  r->add_option("--mode", reg.mode, "dcn or gcn")->check(CLI::IsMember({"dcn", "gcn"}));
  r->add_option("--out", reg.out, "artifact directory");
  r->add_flag("--print-config", reg.print_config, "print the resolved configuration and exit");
  add_config_options(r, reg.config);

  EvalArgs ev;
  auto *e = app.add_subcommand("eval", "landmark TRE and AUC for a stored field and transform");
  e->add_option("--landmarks", ev.landmarks)->required();
  e->add_option("--field", ev.field, "GPOF field dump")->required();
  e->add_option("--transform", ev.transform, "transform text file")->required();
  e->add_option("--thresholds", ev.thresholds, "AUC thresholds in pixels")->delimiter(',');
  e->add_option("--scale-fixed", ev.scale_fixed, "original / working scale of the fixed image");
  e->add_option("--scale-moving", ev.scale_moving, "original / working scale of the moving image");
  e->add_option("--out", ev.out, "report directory");

  SynthArgs sy;
  auto *s = app.add_subcommand("synth", "generate synthetic vessel pairs with ground truth");
  s->add_option("--seed", sy.cfg.seed);
  s->add_option("--size", sy.cfg.size);
  s->add_option("--deform-max", sy.cfg.deform_max_px);
  s->add_option("--out", sy.out)->required();
  s->add_option("--count", sy.count, "number of pairs; seeds seed..seed+count-1 in pair_NNN/");
  s->add_option("--n-vessels", sy.cfg.n_vessels);
  s->add_option("--vessel-width-min", sy.cfg.vessel_width_min);
  s->add_option("--vessel-width-max", sy.cfg.vessel_width_max);
  s->add_option("--vessel-contrast", sy.cfg.vessel_contrast);
  s->add_option("--deform-nodes", sy.cfg.deform_nodes);
  s->add_option("--homography-jitter", sy.cfg.homography_jitter);
  s->add_option("--intensity-jitter", sy.cfg.intensity_jitter);
  s->add_option("--landmark-count", sy.cfg.landmark_count);
  s->add_option("--match-count", sy.cfg.match_count);
  s->add_option("--match-noise", sy.cfg.match_noise_px);
  s->add_option("--noise", sy.cfg.noise_amplitude);

  GradcheckArgs gc;
  auto *g = app.add_subcommand("gradcheck", "compare analytic gradients with central differences");
  g->add_option("--seed", gc.seed);
  g->add_option("--trials", gc.trials);
  g->add_option("--size", gc.cfg.size);
  g->add_option("--nodes", gc.cfg.n_nodes);
  g->add_option("--K", gc.cfg.K);
  g->add_option("--step", gc.h, "finite-difference step for g, t and beta");
  g->add_flag("--kinked", gc.kinked, "unblurred lattice-aligned instance (reported as expected-fail)");

  SweepArgs sw;
  auto *w = app.add_subcommand("sweep", "Cartesian parameter sweep over a directory of synthetic pairs");
  w->add_option("--grid", sw.grid, "key=v1,v2,... (repeatable)");
  w->add_option("--pairs", sw.pairs)->required();
  w->add_option("--out", sw.out)->required();
  w->add_option("--mode", sw.mode)->check(CLI::IsMember({"dcn", "gcn"}));
  add_config_options(w, sw.config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &pe) {
    const int code = app.exit(pe);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*r) return cmd_register(reg);
    if (*e) return cmd_eval(ev);
    if (*s) return cmd_synth(sy);
    if (*g) return cmd_gradcheck(gc);
    if (*w) return cmd_sweep(sw);
  } catch (const Error &err) {
    std::cerr << "gpo: " << err.what() << '\n';
    return err.kind() == ErrorKind::Usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception &ex) {
    std::cerr << "gpo: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
