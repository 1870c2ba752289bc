#pragma once

// Experiment runners behind the CLI: each takes the realized scenario
// objects, draws seeded samples, runs one verification, writes one CSV file
// with a fixed schema, and reports pass/fail against its configured
// tolerance.

#include "finsler/curvature.hpp"
#include "finsler/dynamics.hpp"
#include "finsler/legendre.hpp"
#include "finsler/metrics.hpp"
#include "finsler/sampling.hpp"
#include "finsler/scenario.hpp"
#include "finsler/tensors.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace finsler {

inline constexpr const char* kVersion = "0.1.0";

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> step;
  bool fd = false;
};

struct ExperimentReport {
  std::string type;
  std::string csv_file;
  bool pass = false;
  double max_residual = 0.0;
  double tolerance = 0.0;
  int trials = 0;
  double wall_ms = 0.0;
  std::string message;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& scenario, const std::string& type,
            std::uint64_t seed)
      : out_(path) {
    if (!out_) throw NumericalError("cannot open CSV output file: " + path);
    out_ << "# scenario: " << scenario << "\n";
    out_ << "# experiment: " << type << "\n";
    out_ << "# seed: " << seed << "\n";
    out_ << "# version: " << kVersion << "\n";
  }

  void header(const std::vector<std::string>& cols) {
    for (size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
    out_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

inline std::vector<std::string> point_cells(const Vec& v) {
  std::vector<std::string> out;
  for (int i = 0; i < v.size(); ++i) out.push_back(fmt(v[i]));
  return out;
}

inline void append(std::vector<std::string>& cells, const std::vector<std::string>& more) {
  cells.insert(cells.end(), more.begin(), more.end());
}

struct Context {
  const Scenario& scenario;
  const ScenarioObjects& obj;
  RunOverrides overrides;
  std::string out_dir;
  std::uint64_t seed = 1;
  int index = 0;
  std::ostream* log = nullptr;

  std::uint64_t experiment_seed() const {
    return seed + 1009 * static_cast<std::uint64_t>(index + 1);
  }
  std::ostream& logger() const { return log ? *log : std::cerr; }

  std::string csv_path(const std::string& base) const {
    std::string name = base;
    if (index_suffix > 0) name += "-" + std::to_string(index_suffix + 1);
    return (std::filesystem::path(out_dir) / (name + ".csv")).string();
  }
  int index_suffix = 0;
};

inline double param(const Json& p, const char* key, double dflt) {
  return p.contains(key) ? p[key].get<double>() : dflt;
}
inline int param_int(const Json& p, const char* key, int dflt) {
  return p.contains(key) ? p[key].get<int>() : dflt;
}

inline const SemiRiemannianMetric& require_navigation_g(const Context& ctx) {
  if (!ctx.obj.navigation_g)
    throw NumericalError("experiment requires a zermelo metric (semi-Riemannian g plus wind)");
  return *ctx.obj.navigation_g;
}

inline const WindField& require_wind(const Context& ctx) {
  if (!ctx.obj.wind) throw NumericalError("experiment requires a wind field");
  return *ctx.obj.wind;
}

inline double require_sigma(const Context& ctx) {
  if (!ctx.scenario.wind || !ctx.scenario.wind->sigma)
    throw NumericalError("experiment requires wind.sigma (claimed homothety constant)");
  return *ctx.scenario.wind->sigma;
}

// ---------------------------------------------------------------------------

inline ExperimentReport run_matsumoto(const Context& ctx, const Json& p) {
  ExperimentReport rep;
  rep.type = "matsumoto";
  int samples = param_int(p, "samples", 20);
  rep.tolerance = param(p, "tolerance", 1e-7);
  std::string expect = p.value("expect", std::string("vanish"));
  double threshold = param(p, "threshold", 1e-3);
  DerivMode mode = ctx.overrides.fd ? DerivMode::fd : DerivMode::exact;

  if (ctx.scenario.dimension < 3)
    ctx.logger() << "warning: Matsumoto characterization needs dimension >= 3; n = "
                 << ctx.scenario.dimension << " is outside its scope\n";

  MetricInstance metric = ctx.obj.metric;
  if (p.contains("epsilon") && ctx.obj.navigation_g)
    metric = zermelo_translate(*ctx.obj.navigation_g, require_wind(ctx), p["epsilon"].get<int>());

  CsvWriter csv(ctx.csv_path("matsumoto"), ctx.scenario.name, rep.type, ctx.experiment_seed());
  std::vector<std::string> cols = {"trial"};
  for (int i = 0; i < ctx.scenario.dimension; ++i) cols.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < ctx.scenario.dimension; ++i) cols.push_back("v" + std::to_string(i + 1));
  cols.push_back("max_abs_M");
  csv.header(cols);

  Sampler smp(ctx.experiment_seed());
  double worst = 0.0, best = std::numeric_limits<double>::infinity();
  for (int t = 0; t < samples; ++t) {
    auto [x, v] = smp.domain_sample(metric, ctx.obj.x_box, ctx.obj.v_box, ctx.obj.margin);
    double m = matsumoto_tensor(metric, x, v, mode).max_abs();
    worst = std::max(worst, m);
    best = std::min(best, m);
    std::vector<std::string> cells = {std::to_string(t)};
    append(cells, point_cells(x));
    append(cells, point_cells(v));
    cells.push_back(fmt(m));
    csv.row(cells);
  }
  rep.trials = samples;
  rep.max_residual = worst;
  if (expect == "vanish") {
    rep.pass = worst <= rep.tolerance;
    rep.message = "max |M| = " + fmt(worst);
  } else {
    rep.pass = worst >= threshold;
    rep.tolerance = threshold;
    rep.message = "max |M| = " + fmt(worst) + " (must exceed threshold)";
  }
  rep.csv_file = ctx.csv_path("matsumoto");
  return rep;
}

inline ExperimentReport run_zermelo_translation(const Context& ctx, const Json& p) {
  ExperimentReport rep;
  rep.type = "zermelo_translation";
  const SemiRiemannianMetric& g = require_navigation_g(ctx);
  const WindField& w = require_wind(ctx);
  MetricInstance base = semi_riemannian_instance(g);
  int samples = param_int(p, "samples", 50);
  rep.tolerance = param(p, "tolerance", 1e-9);
  double id_tol = param(p, "identity_tolerance", 1e-10);
  std::vector<int> branches = p.contains("branches") ? p["branches"].get<std::vector<int>>()
                                                     : std::vector<int>{ctx.scenario.metric.epsilon};

  CsvWriter csv(ctx.csv_path("zermelo"), ctx.scenario.name, rep.type, ctx.experiment_seed());
  std::vector<std::string> cols = {"trial", "branch"};
  for (int i = 0; i < ctx.scenario.dimension; ++i) cols.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < ctx.scenario.dimension; ++i) cols.push_back("v" + std::to_string(i + 1));
  cols.insert(cols.end(), {"z_closed", "z_numeric", "rel_diff", "identity_residual"});
  csv.header(cols);

  Sampler smp(ctx.experiment_seed());
  bool ok = true;
  int trial = 0;
  double worst = 0.0, worst_id = 0.0;
  for (int eps : branches) {
    MetricInstance closed = zermelo_translate(g, w, eps);
    auto [sx, sv] = smp.domain_sample(closed, ctx.obj.x_box, ctx.obj.v_box,
                                      std::max(ctx.obj.margin, 1e-3));
    MetricInstance numeric =
        translate_numeric(base, w, TranslationSeed{sx, sv, closed.evaluate(sx, sv) * 1.05});
    TranslationCharacter expect_char =
        eps == 1 ? TranslationCharacter::straight : TranslationCharacter::reverse;
    if (std::get<TranslatedData>(numeric.data).character != expect_char) ok = false;
    for (int t = 0; t < samples; ++t, ++trial) {
      auto [x, v] = smp.domain_sample(closed, ctx.obj.x_box, ctx.obj.v_box,
                                      std::max(ctx.obj.margin, 1e-3));
      double zc = closed.evaluate(x, v);
      double zn = numeric.evaluate(x, v);
      double rel = std::abs(zc - zn) / zc;
      Vec u = v / zn - w.eval(x);
      double idres = std::abs(base.evaluate(x, u) - 1.0);
      worst = std::max(worst, rel);
      worst_id = std::max(worst_id, idres);
      if (translation_character(base, w, x, v, zn) != expect_char) ok = false;
      std::vector<std::string> cells = {std::to_string(trial), std::to_string(eps)};
      append(cells, point_cells(x));
      append(cells, point_cells(v));
      cells.insert(cells.end(), {fmt(zc), fmt(zn), fmt(rel), fmt(idres)});
      csv.row(cells);
    }
  }
  rep.trials = trial;
  rep.max_residual = worst;
  rep.pass = ok && worst <= rep.tolerance && worst_id <= id_tol;
  rep.message = "max rel diff = " + fmt(worst) + ", max identity residual = " + fmt(worst_id);
  rep.csv_file = ctx.csv_path("zermelo");
  return rep;
}

inline ExperimentReport run_navigation_roundtrip(const Context& ctx, const Json& p) {
  ExperimentReport rep;
  rep.type = "navigation_roundtrip";
  int samples = param_int(p, "samples", 20);
  rep.tolerance = param(p, "tolerance", 1e-9);
  bool check_index = p.value("check_index", false);
  int n = ctx.scenario.dimension;

  CsvWriter csv(ctx.csv_path("navigation"), ctx.scenario.name, rep.type, ctx.experiment_seed());
  std::vector<std::string> cols = {"trial", "branch"};
  for (int i = 0; i < n; ++i) cols.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) cols.push_back("v" + std::to_string(i + 1));
  cols.insert(cols.end(),
              {"value", "roundtrip", "rel_diff", "index_expected", "index_actual", "character_ok"});
  csv.header(cols);

  Sampler smp(ctx.experiment_seed());
  bool ok = true;
  double worst = 0.0;
  int trial = 0;

  auto emit = [&](int branch, const Vec& x, const Vec& v, double value, double round,
                  int idx_expected, int idx_actual, bool char_ok) {
    double rel = std::abs(value - round) / std::abs(value);
    worst = std::max(worst, rel);
    if (rel > rep.tolerance || idx_expected != idx_actual || !char_ok) ok = false;
    std::vector<std::string> cells = {std::to_string(trial), std::to_string(branch)};
    append(cells, point_cells(x));
    append(cells, point_cells(v));
    cells.insert(cells.end(),
                 {fmt(value), fmt(round), fmt(rel), std::to_string(idx_expected),
                  std::to_string(idx_actual), char_ok ? "1" : "0"});
    csv.row(cells);
    ++trial;
  };

  if (ctx.scenario.metric.kind == MetricSpecKind::randers ||
      ctx.scenario.metric.kind == MetricSpecKind::kropina) {
    const MetricInstance& m = ctx.obj.metric;
    NavigationData nav = navigation_data(m);
    for (int t = 0; t < samples; ++t) {
      auto [x, v] =
          smp.domain_sample(m, ctx.obj.x_box, ctx.obj.v_box, std::max(ctx.obj.margin, 1e-3));
      // branch of Prop. 2.14: Randers eps' = sign(eps - see (i)(a)); Kropina by region
      int eps_round;
      int idx_expected = 0;
      if (const auto* rd = std::get_if<RandersData>(&m.data)) {
        Mat H = rd->h.eval(x);
        Vec b = rd->beta.eval(x);
        double hbb = b.dot(H.fullPivLu().solve(b));
        double delta = 1.0 - hbb;
        eps_round = (rd->eps > 0) == (delta > 0.0) ? 1 : -1;
        int ih = metric_index(H).index;
        idx_expected = rd->eps == 1 ? ih : n - 1 - ih;
      } else {
        const auto* kd = std::get_if<KropinaData>(&m.data);
        Mat H = kd->h.eval(x);
        Vec b = kd->beta.eval(x);
        double hbb = b.dot(H.fullPivLu().solve(b));
        double hvv = v.dot(H * v);
        eps_round = hbb * hvv > 0.0 ? 1 : -1;
        int ig = metric_index(Mat((4.0 / hbb) * H)).index;
        idx_expected = eps_round == 1 ? ig : n - 1 - ig;
      }
      MetricInstance back = zermelo_translate(nav.g, nav.wind, eps_round);
      double value = m.evaluate(x, v);
      double round = back.evaluate(x, v);
      int idx_actual = check_index ? metric_index(fundamental_tensor(m, x, v)).index : idx_expected;
      emit(eps_round, x, v, value, round, idx_expected, idx_actual, true);
    }
  } else if (ctx.scenario.metric.kind == MetricSpecKind::zermelo) {
    const SemiRiemannianMetric& g = require_navigation_g(ctx);
    const WindField& w = require_wind(ctx);
    MetricInstance base = semi_riemannian_instance(g);
    std::vector<int> branches = p.contains("branches")
                                    ? p["branches"].get<std::vector<int>>()
                                    : std::vector<int>{ctx.scenario.metric.epsilon};
    for (int eps : branches) {
      MetricInstance z = zermelo_translate(g, w, eps);
      for (int t = 0; t < samples; ++t) {
        auto [x, v] =
            smp.domain_sample(z, ctx.obj.x_box, ctx.obj.v_box, std::max(ctx.obj.margin, 1e-3));
        // detect the pointwise Randers/Kropina form, then invert it
        MetricInstance detected = zermelo_as_randers_kropina(z, x);
        NavigationData nav = navigation_data(detected);
        double wind_err = (nav.wind.eval(x) - w.eval(x)).lpNorm<Eigen::Infinity>();
        double g_err = (nav.g.eval(x) - g.eval(x)).lpNorm<Eigen::Infinity>();
        double value = z.evaluate(x, v);
        double round = detected.evaluate(x, v);
        if (wind_err > rep.tolerance * std::max(1.0, w.eval(x).lpNorm<Eigen::Infinity>()) ||
            g_err > rep.tolerance * std::max(1.0, g.eval(x).lpNorm<Eigen::Infinity>()))
          ok = false;
        int mu0 = metric_index(g.eval(x)).index;
        int idx_expected = eps == 1 ? mu0 : n - mu0 - 1;
        int idx_actual =
            check_index ? metric_index(fundamental_tensor(z, x, v)).index : idx_expected;
        bool char_ok = translation_character(base, w, x, v, value) ==
                       (eps == 1 ? TranslationCharacter::straight : TranslationCharacter::reverse);
        emit(eps, x, v, value, round, idx_expected, idx_actual, char_ok);
      }
    }
  } else {
    throw NumericalError("navigation_roundtrip needs a randers, kropina, or zermelo metric");
  }

  rep.trials = trial;
  rep.max_residual = worst;
  rep.pass = ok && worst <= rep.tolerance;
  rep.message = "max rel diff = " + fmt(worst);
  rep.csv_file = ctx.csv_path("navigation");
  return rep;
}

inline ExperimentReport run_legendre_duality(const Context& ctx, const Json& p) {
  ExperimentReport rep;
  rep.type = "legendre_duality";
  const SemiRiemannianMetric& g = require_navigation_g(ctx);
  const WindField& w = require_wind(ctx);
  MetricInstance base = semi_riemannian_instance(g);
  int covectors = param_int(p, "covectors", 20);
  rep.tolerance = param(p, "tolerance", 1e-8);
  std::vector<int> branches = p.contains("branches") ? p["branches"].get<std::vector<int>>()
                                                     : std::vector<int>{ctx.scenario.metric.epsilon};

  CsvWriter csv(ctx.csv_path("duality"), ctx.scenario.name, rep.type, ctx.experiment_seed());
  std::vector<std::string> cols = {"trial", "branch"};
  for (int i = 0; i < ctx.scenario.dimension; ++i) cols.push_back("xi" + std::to_string(i + 1));
  cols.insert(cols.end(), {"lhs", "rhs", "residual"});
  csv.header(cols);

  Sampler smp(ctx.experiment_seed());
  double worst = 0.0;
  int trial = 0;
  for (int eps : branches) {
    MetricInstance zhat = zermelo_translate(g, w, eps);
    TranslationCharacter character =
        eps == 1 ? TranslationCharacter::straight : TranslationCharacter::reverse;
    for (int t = 0; t < covectors; ++t, ++trial) {
      auto [x, vhat] = smp.domain_sample(zhat, ctx.obj.x_box, ctx.obj.v_box,
                                         std::max(ctx.obj.margin, 1e-3));
      Vec xi = legendre(zhat, x, vhat);
      double fhat = zhat.evaluate(x, vhat);
      Vec u0 = character == TranslationCharacter::straight
                   ? Vec(vhat / fhat - w.eval(x))
                   : Vec(w.eval(x) - vhat / fhat);
      Vec seed_base = xi.dot(u0) * u0;
      DualityCheck c = duality_check(base, zhat, w, character, x, xi, vhat, seed_base);
      worst = std::max(worst, c.residual);
      std::vector<std::string> cells = {std::to_string(trial), std::to_string(eps)};
      append(cells, point_cells(xi));
      cells.insert(cells.end(), {fmt(c.lhs), fmt(c.rhs), fmt(c.residual)});
      csv.row(cells);
    }
  }
  rep.trials = trial;
  rep.max_residual = worst;
  rep.pass = worst <= rep.tolerance;
  rep.message = "max duality residual = " + fmt(worst);
  rep.csv_file = ctx.csv_path("duality");
  return rep;
}

inline ExperimentReport run_geodesic_correspondence(const Context& ctx, const Json& p) {
  ExperimentReport rep;
  rep.type = "geodesic_correspondence";
  const SemiRiemannianMetric& g = require_navigation_g(ctx);
  const WindField& w = require_wind(ctx);
  double sigma = require_sigma(ctx);
  MetricInstance base = semi_riemannian_instance(g);
  const MetricInstance& zhat = ctx.obj.metric;

  int samples = param_int(p, "samples", 3);
  double horizon = param(p, "horizon", 0.5);
  double step = ctx.overrides.step.value_or(param(p, "step", 1e-3));
  rep.tolerance = param(p, "tolerance", 1e-5);
  double probe_dt = param(p, "probe_dt", 0.01);
  double halving_factor = param(p, "halving_factor", 8.0);
  double floor = param(p, "halving_floor", 1e-10);
  std::vector<double> halving_steps =
      p.contains("halving_steps") ? p["halving_steps"].get<std::vector<double>>()
                                  : std::vector<double>{0.04, 0.02, 0.01};

  CsvWriter csv(ctx.csv_path("correspondence"), ctx.scenario.name, rep.type,
                ctx.experiment_seed());
  std::vector<std::string> cols = {"trial", "t"};
  for (int i = 0; i < ctx.scenario.dimension; ++i)
    cols.push_back("x_integrated" + std::to_string(i + 1));
  for (int i = 0; i < ctx.scenario.dimension; ++i)
    cols.push_back("x_predicted" + std::to_string(i + 1));
  cols.push_back("mismatch");
  csv.header(cols);

  Sampler smp(ctx.experiment_seed());
  double worst = 0.0;
  std::vector<std::pair<Vec, Vec>> starts;
  for (int t = 0; t < samples; ++t) {
    auto [x0, vraw] = smp.domain_sample(zhat, ctx.obj.x_box, ctx.obj.v_box,
                                        std::max(ctx.obj.margin, 1e-3));
    Vec vhat = vraw / zhat.evaluate(x0, vraw);  // unit speed for the theorem
    starts.emplace_back(x0, vhat);
  }

  for (int t = 0; t < samples; ++t) {
    const auto& [x0, vhat] = starts[static_cast<size_t>(t)];
    Trajectory hat = geodesic(zhat, x0, vhat, horizon, step, ctx.obj.chart);
    if (hat.stopped_early)
      throw NumericalError("translated geodesic stopped early: " + hat.stop_reason);
    Vec u0 = vhat - w.eval(x0);
    int probe_stride = std::max(1, static_cast<int>(std::llround(probe_dt / step)));
    for (size_t i = probe_stride; i < hat.times.size();
         i += static_cast<size_t>(probe_stride)) {
      double ti = hat.times[i];
      Vec pred = corresponding_geodesic_point(base, w, sigma, x0, u0, ti, step, ctx.obj.chart);
      double mis = (hat.x[i] - pred).lpNorm<Eigen::Infinity>();
      worst = std::max(worst, mis);
      std::vector<std::string> cells = {std::to_string(t), fmt(ti)};
      append(cells, point_cells(hat.x[i]));
      append(cells, point_cells(pred));
      cells.push_back(fmt(mis));
      csv.row(cells);
    }
  }

  // 4th-order behavior: halving the step cuts the mismatch by >= the factor
  // until the roundoff floor.
  bool halving_ok = true;
  std::string halving_note;
  {
    const auto& [x0, vhat] = starts.front();
    Vec u0 = vhat - w.eval(x0);
    std::vector<double> mism;
    for (double h : halving_steps) {
      double worst_h = 0.0;
      Trajectory hat = geodesic(zhat, x0, vhat, horizon, h, ctx.obj.chart);
      for (double tp : {0.4 * horizon, 0.8 * horizon}) {
        size_t idx = static_cast<size_t>(std::llround(tp / h));
        if (idx >= hat.times.size()) continue;
        Vec pred =
            corresponding_geodesic_point(base, w, sigma, x0, u0, hat.times[idx], h, ctx.obj.chart);
        worst_h = std::max(worst_h, (hat.x[idx] - pred).lpNorm<Eigen::Infinity>());
      }
      mism.push_back(worst_h);
    }
    for (size_t i = 0; i + 1 < mism.size(); ++i) {
      if (mism[i + 1] < floor) continue;
      double ratio = mism[i] / mism[i + 1];
      halving_note += (halving_note.empty() ? "" : ", ") + fmt(ratio);
      if (ratio < halving_factor) halving_ok = false;
    }
  }

  rep.trials = samples;
  rep.max_residual = worst;
  rep.pass = worst <= rep.tolerance && halving_ok;
  rep.message = "max mismatch = " + fmt(worst) +
                (halving_note.empty() ? std::string(" (halving at floor)")
                                      : ", halving ratios: " + halving_note);
  rep.csv_file = ctx.csv_path("correspondence");
  return rep;
}

inline Flag sample_flag(Sampler& smp, const MetricInstance& m, const Box& x_box, const Box& v_box,
                        double margin) {
  for (int t = 0; t < 500; ++t) {
    auto [x, v] = smp.domain_sample(m, x_box, v_box, margin);
    Vec wvec = smp.vec_in_box(v_box);
    try {
      Flag f = make_flag(m, x, v, wvec);
      if (f.w.norm() > 1e-3) return f;
    } catch (const NumericalError&) {
    }
  }
  throw NumericalError("no nondegenerate flag found in 500 tries");
}

inline ExperimentReport run_curvature_shift(const Context& ctx, const Json& p) {
  ExperimentReport rep;
  rep.type = "curvature_shift";
  const SemiRiemannianMetric& g = require_navigation_g(ctx);
  const WindField& w = require_wind(ctx);
  double sigma = require_sigma(ctx);
  MetricInstance base = semi_riemannian_instance(g);
  const MetricInstance& zhat = ctx.obj.metric;
  int flags = param_int(p, "flags", 10);
  rep.tolerance = param(p, "tolerance", 1e-4);
  std::optional<double> expected_k;
  if (p.contains("expected_k")) expected_k = p["expected_k"].get<double>();
  CurvatureRoute route =
      p.value("route", std::string("spray")) == "fanning" ? CurvatureRoute::fanning
                                                          : CurvatureRoute::spray;

  CsvWriter csv(ctx.csv_path("curvature"), ctx.scenario.name, rep.type, ctx.experiment_seed());
  std::vector<std::string> cols = {"trial"};
  int n = ctx.scenario.dimension;
  for (int i = 0; i < n; ++i) cols.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) cols.push_back("v" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) cols.push_back("w" + std::to_string(i + 1));
  cols.insert(cols.end(), {"K_translated", "K_base", "K_expected", "residual"});
  csv.header(cols);

  Sampler smp(ctx.experiment_seed());
  double worst = 0.0, worst_expected = 0.0;
  for (int t = 0; t < flags; ++t) {
    Flag f = sample_flag(smp, zhat, ctx.obj.x_box, ctx.obj.v_box, std::max(ctx.obj.margin, 1e-3));
    CurvatureShiftResult r = curvature_shift_check(base, zhat, w, sigma, f, route);
    worst = std::max(worst, r.residual);
    if (expected_k) worst_expected = std::max(worst_expected, std::abs(r.k_translated - *expected_k));
    std::vector<std::string> cells = {std::to_string(t)};
    append(cells, point_cells(f.x));
    append(cells, point_cells(f.v));
    append(cells, point_cells(f.w));
    cells.insert(cells.end(), {fmt(r.k_translated), fmt(r.k_base),
                               fmt(r.k_base - 0.25 * sigma * sigma), fmt(r.residual)});
    csv.row(cells);
  }
  rep.trials = flags;
  rep.max_residual = std::max(worst, worst_expected);
  rep.pass = worst <= rep.tolerance && (!expected_k || worst_expected <= rep.tolerance);
  rep.message = "max shift residual = " + fmt(worst) +
                (expected_k ? ", max |K - expected| = " + fmt(worst_expected) : std::string());
  rep.csv_file = ctx.csv_path("curvature");
  return rep;
}

inline ExperimentReport run_fanning_agreement(const Context& ctx, const Json& p) {
  ExperimentReport rep;
  rep.type = "fanning_agreement";
  const MetricInstance& m = ctx.obj.metric;
  int flags = param_int(p, "flags", 10);
  rep.tolerance = param(p, "tolerance", 1e-3);
  std::optional<double> expected_k;
  if (p.contains("expected_k")) expected_k = p["expected_k"].get<double>();

  CsvWriter csv(ctx.csv_path("fanning"), ctx.scenario.name, rep.type, ctx.experiment_seed());
  std::vector<std::string> cols = {"trial"};
  int n = ctx.scenario.dimension;
  for (int i = 0; i < n; ++i) cols.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) cols.push_back("v" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) cols.push_back("w" + std::to_string(i + 1));
  cols.insert(cols.end(), {"K_spray", "K_fanning", "diff"});
  csv.header(cols);

  Sampler smp(ctx.experiment_seed());
  double worst = 0.0, worst_expected = 0.0;
  for (int t = 0; t < flags; ++t) {
    Flag f = sample_flag(smp, m, ctx.obj.x_box, ctx.obj.v_box, std::max(ctx.obj.margin, 1e-3));
    double ks = flag_curvature_spray(m, f);
    double kf = flag_curvature_fanning(m, f);
    double diff = std::abs(ks - kf);
    worst = std::max(worst, diff);
    if (expected_k) worst_expected = std::max(worst_expected, std::abs(kf - *expected_k));
    std::vector<std::string> cells = {std::to_string(t)};
    append(cells, point_cells(f.x));
    append(cells, point_cells(f.v));
    append(cells, point_cells(f.w));
    cells.insert(cells.end(), {fmt(ks), fmt(kf), fmt(diff)});
    csv.row(cells);
  }
  rep.trials = flags;
  rep.max_residual = worst;
  rep.pass = worst <= rep.tolerance && (!expected_k || worst_expected <= 1e-3);
  rep.message = "max |K_fanning - K_spray| = " + fmt(worst);
  rep.csv_file = ctx.csv_path("fanning");
  return rep;
}

inline ExperimentReport run_conservation(const Context& ctx, const Json& p) {
  ExperimentReport rep;
  rep.type = "conservation";
  const MetricInstance& m = ctx.obj.metric;
  int samples = param_int(p, "samples", 5);
  double horizon = param(p, "horizon", 1.0);
  double step = ctx.overrides.step.value_or(param(p, "step", 1e-3));
  rep.tolerance = param(p, "tolerance", 1e-8);
  double sympl_tol = param(p, "symplectic_tolerance", 1e-4);
  double sympl_time = param(p, "symplectic_time", 0.5);

  CsvWriter csv(ctx.csv_path("conservation"), ctx.scenario.name, rep.type, ctx.experiment_seed());
  csv.header({"trial", "kind", "value"});

  Sampler smp(ctx.experiment_seed());
  double worst_drift = 0.0, worst_sympl = 0.0;
  for (int t = 0; t < samples; ++t) {
    auto [x, v] = smp.domain_sample(m, ctx.obj.x_box, ctx.obj.v_box,
                                    std::max(ctx.obj.margin, 1e-3));
    Trajectory geo = geodesic(m, x, v, horizon, step, ctx.obj.chart);
    if (geo.stopped_early)
      throw NumericalError("conservation geodesic stopped early: " + geo.stop_reason);
    double fdrift = geo.conserved_drift();
    worst_drift = std::max(worst_drift, fdrift);
    csv.row({std::to_string(t), "geodesic_F_drift", fmt(fdrift)});

    Vec xi = legendre(m, x, v);
    bool with_lin = t == 0;  // D psi_t needs 4n+1 integrations; one sample suffices
    Trajectory co = cogeodesic_flow(m, x, xi, v, with_lin ? sympl_time : horizon, step, with_lin,
                                    ctx.obj.chart);
    if (co.stopped_early)
      throw NumericalError("conservation cogeodesic flow stopped early: " + co.stop_reason);
    double hdrift = co.conserved_drift();
    worst_drift = std::max(worst_drift, hdrift);
    csv.row({std::to_string(t), "cogeodesic_H_drift", fmt(hdrift)});
    if (with_lin) {
      size_t nodes = co.linearization.size();
      for (size_t i : {nodes / 2, nodes - 1}) {
        double r = symplectic_residual(co.linearization[i]);
        worst_sympl = std::max(worst_sympl, r);
        csv.row({std::to_string(t), "symplectic_residual", fmt(r)});
      }
    }
  }
  rep.trials = samples;
  rep.max_residual = std::max(worst_drift, worst_sympl);
  rep.pass = worst_drift <= rep.tolerance && worst_sympl <= sympl_tol;
  rep.message =
      "max drift = " + fmt(worst_drift) + ", max symplectic residual = " + fmt(worst_sympl);
  rep.csv_file = ctx.csv_path("conservation");
  return rep;
}

inline ExperimentReport run_derivative_oracle(const Context& ctx, const Json& p) {
  ExperimentReport rep;
  rep.type = "derivative_oracle";
  const MetricInstance& m = ctx.obj.metric;
  int samples = param_int(p, "samples", 100);
  double tol_low = param(p, "tol_low", 1e-5);
  double tol4 = param(p, "tol_order4", 1e-3);
  rep.tolerance = tol_low;
  std::vector<std::vector<int>> orders = {{0, 2}, {0, 3}, {1, 1}, {1, 2}, {0, 4}};
  if (p.contains("orders")) orders = p["orders"].get<std::vector<std::vector<int>>>();

  CsvWriter csv(ctx.csv_path("oracle"), ctx.scenario.name, rep.type, ctx.experiment_seed());
  csv.header({"trial", "order_x", "order_v", "max_abs_diff", "tolerance"});

  Sampler smp(ctx.experiment_seed());
  double worst_rel = 0.0;
  bool ok = true;
  int trial = 0;
  for (int t = 0; t < samples; ++t) {
    double margin = std::max(ctx.obj.margin, 0.05);
    auto [x, v] = smp.domain_sample(m, ctx.obj.x_box, ctx.obj.v_box, margin);
    for (const auto& o : orders) {
      int total = o[0] + o[1];
      double tol = total >= 4 ? tol4 : tol_low;
      PartialTensor ad = partial_tensor(m.f_squared, x, v, o[0], o[1], DerivMode::exact);
      PartialTensor fd = partial_tensor(m.f_squared, x, v, o[0], o[1], DerivMode::fd);
      double diff = ad.max_abs_diff(fd);
      if (diff > tol) ok = false;
      worst_rel = std::max(worst_rel, diff / tol);
      csv.row({std::to_string(trial), std::to_string(o[0]), std::to_string(o[1]), fmt(diff),
               fmt(tol)});
      ++trial;
    }
  }
  rep.trials = trial;
  rep.max_residual = worst_rel;  // worst diff as a fraction of its tolerance
  rep.tolerance = 1.0;
  rep.pass = ok;
  rep.message = "worst diff / tolerance = " + fmt(worst_rel);
  rep.csv_file = ctx.csv_path("oracle");
  return rep;
}

inline ExperimentReport run_homothety(const Context& ctx, const Json& p) {
  ExperimentReport rep;
  rep.type = "homothety";
  const WindField& w = require_wind(ctx);
  // the homothety property concerns the base metric being translated
  MetricInstance base =
      ctx.obj.navigation_g ? semi_riemannian_instance(*ctx.obj.navigation_g) : ctx.obj.metric;
  int samples = param_int(p, "samples", 10);
  rep.tolerance = param(p, "tolerance", 1e-8);
  double sigma_tol = param(p, "sigma_tolerance", 1e-6);

  CsvWriter csv(ctx.csv_path("homothety"), ctx.scenario.name, rep.type, ctx.experiment_seed());
  csv.header({"trial", "sigma_sample", "sigma_hat", "claimed_sigma", "residual"});

  Sampler smp(ctx.experiment_seed());
  std::vector<std::pair<Vec, Vec>> pts;
  for (int t = 0; t < samples; ++t)
    pts.push_back(smp.domain_sample(base, ctx.obj.x_box, ctx.obj.v_box,
                                    std::max(ctx.obj.margin, 1e-3)));
  HomothetyEstimate agg = homothety_constant(base, w, pts, 1e-3, ctx.obj.chart);
  for (int t = 0; t < samples; ++t) {
    HomothetyEstimate one =
        homothety_constant(base, w, {pts[static_cast<size_t>(t)]}, 1e-3, ctx.obj.chart);
    csv.row({std::to_string(t), fmt(one.sigma), fmt(agg.sigma),
             ctx.scenario.wind && ctx.scenario.wind->sigma ? fmt(*ctx.scenario.wind->sigma) : "",
             fmt(agg.residual)});
  }
  rep.trials = samples;
  rep.max_residual = agg.residual;
  bool sigma_ok = true;
  if (ctx.scenario.wind && ctx.scenario.wind->sigma)
    sigma_ok = std::abs(agg.sigma - *ctx.scenario.wind->sigma) <= sigma_tol;
  rep.pass = agg.residual <= rep.tolerance && sigma_ok;
  rep.message = "sigma_hat = " + fmt(agg.sigma) + ", residual = " + fmt(agg.residual);
  rep.csv_file = ctx.csv_path("homothety");
  return rep;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline std::vector<ExperimentReport> run_scenario(const Scenario& scenario,
                                                  const RunOverrides& overrides,
                                                  const std::string& out_dir,
                                                  std::ostream& log = std::cout) {
  std::filesystem::create_directories(out_dir);
  ScenarioObjects obj = realize(scenario);
  std::vector<ExperimentReport> reports;
  std::map<std::string, int> type_counts;

  for (size_t i = 0; i < scenario.experiments.size(); ++i) {
    const ExperimentSpec& e = scenario.experiments[i];
    detail::Context ctx{scenario, obj, overrides, out_dir,
                        overrides.seed.value_or(scenario.seed), static_cast<int>(i), &log};
    ctx.index_suffix = type_counts[e.type]++;
    auto t0 = std::chrono::steady_clock::now();
    ExperimentReport rep;
    try {
      if (e.type == "matsumoto") rep = detail::run_matsumoto(ctx, e.params);
      else if (e.type == "zermelo_translation") rep = detail::run_zermelo_translation(ctx, e.params);
      else if (e.type == "navigation_roundtrip")
        rep = detail::run_navigation_roundtrip(ctx, e.params);
      else if (e.type == "legendre_duality") rep = detail::run_legendre_duality(ctx, e.params);
      else if (e.type == "geodesic_correspondence")
        rep = detail::run_geodesic_correspondence(ctx, e.params);
      else if (e.type == "curvature_shift") rep = detail::run_curvature_shift(ctx, e.params);
      else if (e.type == "fanning_agreement") rep = detail::run_fanning_agreement(ctx, e.params);
      else if (e.type == "conservation") rep = detail::run_conservation(ctx, e.params);
      else if (e.type == "derivative_oracle") rep = detail::run_derivative_oracle(ctx, e.params);
      else if (e.type == "homothety") rep = detail::run_homothety(ctx, e.params);
      else throw NumericalError("unknown experiment type: " + e.type);
    } catch (const std::exception& err) {
      rep.type = e.type;
      rep.pass = false;
      rep.message = std::string("error: ") + err.what();
    }
    rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    log << (rep.pass ? "[PASS] " : "[FAIL] ") << scenario.name << "/" << rep.type << ": "
        << rep.message << " (" << rep.trials << " trials, " << static_cast<int>(rep.wall_ms)
        << " ms)\n";
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace finsler
