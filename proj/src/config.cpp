#include "gpo/config.hpp"
#include "gpo/text_table.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace gpo {

const char *to_string(Mode m) { return m == Mode::Dcn ? "dcn" : "gcn"; }

namespace {

[[noreturn]] void bad_value(const std::string &key, const std::string &value, const char *expected) {
  fail(ErrorKind::Usage, "config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

double parse_double(const std::string &key, const std::string &v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

template <class Int> Int parse_int(const std::string &key, const std::string &v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

struct Key {
  std::function<void(RunConfig &, const std::string &, const std::string &)> set;
  std::function<std::string(const RunConfig &)> get;
};

template <class M> Key real(M member) {
  return {[member](RunConfig &c, const std::string &k, const std::string &v) { member(c) = parse_double(k, v); },
          [member](const RunConfig &c) { return format_double(member(c)); }};
}

template <class M> Key integer(M member) {
  return {[member](RunConfig &c, const std::string &k, const std::string &v) {
            auto &ref = member(c);
            ref = parse_int<std::remove_reference_t<decltype(ref)>>(k, v);
          },
          [member](const RunConfig &c) { return std::to_string(member(c)); }};
}

const std::map<std::string, Key> &key_table() {
  static const std::map<std::string, Key> table = {
      {"mode",
       {[](RunConfig &c, const std::string &k, const std::string &v) {
          if (v == "dcn") c.mode = Mode::Dcn;
          else if (v == "gcn") c.mode = Mode::Gcn;
          else bad_value(k, v, "dcn or gcn");
        },
        [](const RunConfig &c) { return std::string(to_string(c.mode)); }}},
      {"seed", integer([](auto &c) -> auto & { return c.seed; })},
      {"preproc.blur_sigma", real([](auto &c) -> auto & { return c.preproc.blur_sigma; })},
      {"preproc.max_size", integer([](auto &c) -> auto & { return c.preproc.max_size; })},
      {"coarse.ransac_iters", integer([](auto &c) -> auto & { return c.ransac.iters; })},
      {"coarse.inlier_thresh_px", real([](auto &c) -> auto & { return c.ransac.inlier_thresh_px; })},
      {"coarse.min_inliers", integer([](auto &c) -> auto & { return c.ransac.min_inliers; })},
      {"radius.r_min", real([](auto &c) -> auto & { return c.radius.r_min; })},
      {"radius.r_max", real([](auto &c) -> auto & { return c.radius.r_max; })},
      {"nodes.n", integer([](auto &c) -> auto & { return c.n_nodes; })},
      {"nodes.grid_n", integer([](auto &c) -> auto & { return c.grid_n; })},
      {"nodes.init_radius", real([](auto &c) -> auto & { return c.init_radius; })},
      {"loss.alpha_gcc",
       {[](RunConfig &c, const std::string &k, const std::string &v) {
          if (v == "auto") c.alpha_gcc.reset();
          else c.alpha_gcc = parse_double(k, v);
        },
        [](const RunConfig &c) { return format_double(c.resolved_alpha_gcc()); }}},
      {"loss.alpha_ncc", real([](auto &c) -> auto & { return c.optim.loss_weights.alpha_ncc; })},
      {"loss.norm_len", real([](auto &c) -> auto & { return c.optim.loss_weights.norm_len; })},
      {"optim.K", integer([](auto &c) -> auto & { return c.optim.K; })},
      {"optim.tau_max", integer([](auto &c) -> auto & { return c.optim.tau_max; })},
      {"optim.eta_g", real([](auto &c) -> auto & { return c.optim.eta_g; })},
      {"optim.eta_t", real([](auto &c) -> auto & { return c.optim.eta_t; })},
      {"optim.eta_r", real([](auto &c) -> auto & { return c.optim.eta_r; })},
      {"optim.t_units",
       {[](RunConfig &c, const std::string &k, const std::string &v) {
          if (v == "normalized") c.optim.t_units = DisplacementRateUnits::Normalized;
          else if (v == "pixels") c.optim.t_units = DisplacementRateUnits::Pixels;
          else bad_value(k, v, "normalized or pixels");
        },
        [](const RunConfig &c) {
          return std::string(c.optim.t_units == DisplacementRateUnits::Normalized ? "normalized" : "pixels");
        }}},
      {"optim.adam_beta1", real([](auto &c) -> auto & { return c.optim.adam_beta1; })},
      {"optim.adam_beta2", real([](auto &c) -> auto & { return c.optim.adam_beta2; })},
      {"optim.adam_eps", real([](auto &c) -> auto & { return c.optim.adam_eps; })},
      {"optim.snapshot_every", integer([](auto &c) -> auto & { return c.optim.snapshot_every; })},
      {"output.dir",
       {[](RunConfig &c, const std::string &, const std::string &v) { c.output_dir = v; },
        [](const RunConfig &c) { return c.output_dir.string(); }}},
  };
  return table;
}

} // namespace

void RunConfig::set(const std::string &key, const std::string &value) {
  const auto &table = key_table();
  const auto it = table.find(key);
  if (it == table.end()) fail(ErrorKind::Usage, "unknown config key '" + key + "'");
  it->second.set(*this, key, trim(value));
}

void RunConfig::apply_text(const std::string &text, const std::string &origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Usage, origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    try {
      set(trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const Error &e) {
      fail(ErrorKind::Usage, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path &path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error &e) {
    fail(ErrorKind::Usage, e.what());
  }
  apply_text(text, path.string());
}

double RunConfig::resolved_alpha_gcc() const {
  if (alpha_gcc) return *alpha_gcc;
  return mode == Mode::Dcn ? 0.4 : 0.0;
}

OptimConfig RunConfig::resolved_optim() const {
  OptimConfig o = optim;
  o.loss_weights.alpha_gcc = resolved_alpha_gcc();
  o.seed = seed;
  return o;
}

RansacConfig RunConfig::resolved_ransac() const {
  RansacConfig r = ransac;
  r.seed = seed;
  return r;
}

void RunConfig::validate() const {
  auto usage = [](const std::string &key, const std::string &msg) { fail(ErrorKind::Usage, key + ": " + msg); };
  if (!(preproc.blur_sigma >= 0.0)) usage("preproc.blur_sigma", "must be >= 0");
  if (preproc.max_size < 0) usage("preproc.max_size", "must be >= 0");
  if (ransac.iters < 1) usage("coarse.ransac_iters", "must be >= 1");
  if (!(ransac.inlier_thresh_px > 0.0)) usage("coarse.inlier_thresh_px", "must be > 0");
  if (ransac.min_inliers < 0) usage("coarse.min_inliers", "must be >= 0");
  if (!(radius.r_min >= 0.0 && radius.r_min < radius.r_max)) usage("radius.r_min", "need 0 <= r_min < r_max");
  if (n_nodes < 1) usage("nodes.n", "must be >= 1");
  if (grid_n < 2) usage("nodes.grid_n", "must be >= 2");
  if (init_radius != 0.0 &&
      !(init_radius > radius.r_min + kRadiusOffset && init_radius < radius.r_max + kRadiusOffset))
    usage("nodes.init_radius", "must be 0 (auto) or inside (r_min + 0.1, r_max + 0.1)");
  if (!(resolved_alpha_gcc() >= 0.0)) usage("loss.alpha_gcc", "must be >= 0");
  if (!(optim.loss_weights.alpha_ncc >= 0.0)) usage("loss.alpha_ncc", "must be >= 0");
  if (!(optim.eta_g > 0.0)) usage("optim.eta_g", "must be > 0");
  if (!(optim.eta_t > 0.0)) usage("optim.eta_t", "must be > 0");
  if (!(optim.eta_r > 0.0)) usage("optim.eta_r", "must be > 0");
  if (optim.K < 1) usage("optim.K", "must be >= 1");
  if (optim.tau_max < 1) usage("optim.tau_max", "must be >= 1");
  if (!(optim.adam_beta1 > 0.0 && optim.adam_beta1 < 1.0)) usage("optim.adam_beta1", "must lie in (0, 1)");
  if (!(optim.adam_beta2 > 0.0 && optim.adam_beta2 < 1.0)) usage("optim.adam_beta2", "must lie in (0, 1)");
  if (!(optim.adam_eps > 0.0)) usage("optim.adam_eps", "must be > 0");
  if (optim.snapshot_every < 0) usage("optim.snapshot_every", "must be >= 0");
}

std::string RunConfig::echo() const {
  std::ostringstream o;
  for (const auto &[key, k] : key_table()) o << key << " = " << k.get(*this) << '\n';
  return o.str();
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto &[key, k] : key_table()) out.push_back(key);
  return out;
}

std::uint64_t config_hash(const RunConfig &cfg) {
  RunConfig c = cfg;
  c.output_dir.clear();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : c.echo()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace gpo
