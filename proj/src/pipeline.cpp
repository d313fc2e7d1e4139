#include "gpo/pipeline.hpp"
#include "gpo/text_table.hpp"

#include <cmath>
#include <sstream>

namespace gpo {

namespace {

struct Prepared {
  Image image;
  Vec2 scale; // original / working
};

Prepared preprocess(const Image &img, const PreprocConfig &p) {
  int w = img.width(), h = img.height();
  const int longest = std::max(w, h);
  if (p.max_size > 0 && longest > p.max_size) {
    const double s = static_cast<double>(p.max_size) / longest;
    w = std::max(1, static_cast<int>(std::lround(w * s)));
    h = std::max(1, static_cast<int>(std::lround(h * s)));
  }
  Image out = gaussian_blur(img, p.blur_sigma);
  out = resize_bilinear(out, w, h);
  return {std::move(out), {static_cast<double>(img.width()) / w, static_cast<double>(img.height()) / h}};
}

MatchSet to_working(const MatchSet &m, Vec2 sf, Vec2 sm) {
  MatchSet out = m;
  for (auto &p : out.pairs) {
    p.fixed = {p.fixed.x / sf.x, p.fixed.y / sf.y};
    p.moving = {p.moving.x / sm.x, p.moving.y / sm.y};
  }
  return out;
}

Image abs_diff(const Image &a, const Image &b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(a.pixels()[i] - b.pixels()[i]);
  return Image(a.width(), a.height(), std::move(d));
}

} // namespace

PipelineResult run_pipeline(const PipelineInputs &in, const RunConfig &cfg) {
  cfg.validate();
  if (cfg.mode == Mode::Dcn && !in.matches) fail(ErrorKind::Usage, "dcn mode requires a match file");

  std::optional<MatchSet> matches;
  if (in.matches) {
    matches = read_matches(*in.matches);
    if (cfg.mode == Mode::Dcn && matches->size() < 4)
      fail(ErrorKind::Usage, "dcn mode needs at least 4 matches, got " + std::to_string(matches->size()));
  }
  std::optional<LandmarkPairs> landmarks;
  if (in.landmarks) landmarks = read_landmarks(*in.landmarks);

  const Prepared f = preprocess(load_image(in.fixed), cfg.preproc);
  const Prepared m = preprocess(load_image(in.moving), cfg.preproc);

  PipelineResult r;
  r.fixed = f.image;
  r.scale_fixed = f.scale;
  r.scale_moving = m.scale;
  const int w = f.image.width(), h = f.image.height();

  NodeSet nodes;
  if (cfg.mode == Mode::Dcn) {
    const MatchSet wm = to_working(*matches, f.scale, m.scale);
    r.coarse = fit_coarse(wm, cfg.resolved_ransac());
    nodes = init_dcn(wm, r.coarse.transform, static_cast<std::size_t>(cfg.n_nodes), cfg.radius, cfg.init_radius,
                     cfg.seed);
  } else {
    r.coarse = {GlobalTransform::identity(), {}, false};
    nodes = init_gcn(w, h, cfg.grid_n, cfg.radius, cfg.init_radius);
  }
  r.moving_coarse = apply_global(m.image, r.coarse.transform, w, h);

  if (landmarks) {
    landmarks->scale_fixed = f.scale;
    landmarks->scale_moving = m.scale;
    r.tre_coarse = tre(*landmarks, r.coarse.transform, DisplacementField(w, h));
  }

  r.registration = register_images(r.fixed, r.moving_coarse, std::move(nodes), cfg.resolved_optim());
  r.registration.global_transform = r.coarse.transform;
  r.field = field_stats(r.registration.final_field);
  if (landmarks) r.tre_final = tre(*landmarks, r.coarse.transform, r.registration.final_field);

  if (!cfg.output_dir.empty()) write_artifacts(r, cfg, cfg.output_dir);
  return r;
}

void write_artifacts(const PipelineResult &r, const RunConfig &cfg, const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  const auto &reg = r.registration;
  save_png(reg.warped, dir / "warped.png");
  write_field(reg.final_field, dir / "field.gpof");
  write_loss_trace(reg.loss_trace, dir / "loss_trace.csv");
  save_png_rgb(r.fixed, reg.warped, r.fixed, dir / "overlay.png");
  save_png(abs_diff(r.fixed, reg.warped), dir / "diff.png");
  write_transform(r.coarse.transform, dir / "transform.txt");
  write_nodes(reg.final_nodes, dir / "nodes.csv");

  std::ostringstream meta;
  meta << cfg.echo();
  meta << "result.width = " << r.fixed.width() << '\n'
       << "result.height = " << r.fixed.height() << '\n'
       << "result.scale_fixed = " << format_double(r.scale_fixed.x) << ',' << format_double(r.scale_fixed.y) << '\n'
       << "result.scale_moving = " << format_double(r.scale_moving.x) << ',' << format_double(r.scale_moving.y)
       << '\n'
       << "result.transform_kind = " << to_string(r.coarse.transform.kind()) << '\n'
       << "result.affine_fallback = " << (r.coarse.used_affine_fallback ? "true" : "false") << '\n'
       << "result.inliers = " << r.coarse.inliers.size() << '\n'
       << "result.node_count = " << reg.final_nodes.size() << '\n';
  if (!reg.loss_trace.empty()) {
    meta << "result.loss_initial = " << format_double(reg.loss_trace.front().total) << '\n'
         << "result.loss_final = " << format_double(reg.loss_trace.back().total) << '\n';
  }
  meta << "result.field_max = " << format_double(r.field.max_mag) << '\n'
       << "result.field_mean = " << format_double(r.field.mean_mag) << '\n'
       << "result.jacobian_min = " << format_double(r.field.jacobian_min_det) << '\n';
  if (r.tre_coarse && r.tre_final) {
    meta << "result.tre_coarse_median = " << format_double(r.tre_coarse->median) << '\n'
         << "result.tre_coarse_mean = " << format_double(r.tre_coarse->mean) << '\n'
         << "result.tre_median = " << format_double(r.tre_final->median) << '\n'
         << "result.tre_mean = " << format_double(r.tre_final->mean) << '\n';
    std::ostringstream t;
    t << "landmark,coarse,final\n";
    for (std::size_t i = 0; i < r.tre_final->distances.size(); ++i)
      t << i << ',' << format_double(r.tre_coarse->distances[i]) << ',' << format_double(r.tre_final->distances[i])
        << '\n';
    write_text_file(dir / "tre.csv", t.str());
  }
  for (const auto &[phase, secs] : reg.timing) meta << "timing." << phase << " = " << format_double(secs) << '\n';
  write_text_file(dir / "metadata.txt", meta.str());
}

} // namespace gpo
