#include "daa/cli.hpp"

#include "daa/perturb.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace daa::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class CommandRun {
 public:
  CommandRun(std::string out_dir, std::string command, nlohmann::json params, uint64_t seed)
      : out_dir_(std::move(out_dir)),
        command_(std::move(command)),
        params_(std::move(params)),
        seed_(seed),
        start_(std::chrono::steady_clock::now()) {
    if (out_dir_.empty()) fail(Err::InvalidSpec, "--out directory is required");
    fs::create_directories(out_dir_);
  }

  std::string path(const std::string& name) const { return (fs::path(out_dir_) / name).string(); }

  void record(const std::string& p) { outputs_.push_back(p); }

  int finish(const std::string& error = "") {
    nlohmann::json m;
    m["command"] = command_;
    m["config_hash"] = hex64(fnv1a(params_.dump()));
    m["seed"] = seed_;
    m["versions"] = {{"daa", kVersion}};
    m["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    m["outputs"] = outputs_;
    if (!error.empty()) m["error"] = error;
    std::ofstream f(path("manifest.json"));
    f << m.dump(2) << "\n";
    if (!error.empty()) std::cerr << "error: " << error << "\n";
    return error.empty() ? 0 : 1;
  }

 private:
  std::string out_dir_;
  std::string command_;
  nlohmann::json params_;
  uint64_t seed_ = 0;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

std::string stem_of(const std::string& p) { return fs::path(p).stem().string(); }

}  // namespace

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) fail(Err::FileError, "cannot open '" + path + "' for writing");
  f << content;
  if (!f) fail(Err::FileError, "write failed for '" + path + "'");
}

const std::vector<std::string>& archetype_registry() {
  static const std::vector<std::string> names = {"ring", "limit_cycle", "fixed_point", "bistable",
                                                 "bla"};
  return names;
}

SystemSpec archetype_by_name(const std::string& name, int dim) {
  if (name == "ring") return make_ring_attractor(dim);
  if (name == "limit_cycle") return make_limit_cycle(dim);
  if (name == "fixed_point") return make_fixed_point(dim);
  if (name == "bistable") return make_bistable(dim);
  if (name == "bla") return make_bla(dim);
  if (name.size() > 5 && name.substr(name.size() - 5) == ".json") {
    std::ifstream f(name);
    if (!f) fail(Err::FileError, "cannot open spec file '" + name + "'");
    return spec_from_json(nlohmann::json::parse(f));
  }
  fail(Err::InvalidSpec, "unknown archetype '" + name + "'");
}

TrajectoryBatch simulate_target(const TargetSpec& target, const SimDefaults& defaults,
                                uint64_t seed, int substeps) {
  SimConfig cfg;
  cfg.dt = defaults.dt;
  cfg.t_max = defaults.t_max;
  cfg.n_traj = defaults.n_traj;
  cfg.seed = seed;
  cfg.substeps = substeps;
  InitSampler sampler = defaults.sampler;
  sampler.seed = stream_seed(seed, 0x1C5);

  nlohmann::json meta;
  meta["target"] = to_json(target);
  meta["sim"] = {{"dt", cfg.dt},       {"t_max", cfg.t_max},       {"n_traj", cfg.n_traj},
                 {"seed", cfg.seed},   {"substeps", cfg.substeps}};
  const auto field = [&target](const Vec& x) { return eval_target_field(target, x); };
  return simulate_batch(field, target.noise_sigma, sampler, cfg, meta);
}

int cmd_simulate(const SimulateOpts& opts) {
  nlohmann::json params = {{"system", opts.system}, {"seed", opts.seed}};
  CommandRun run(opts.out_dir, "simulate", params, opts.seed);
  try {
    TargetSpec target = target_by_name(opts.system);
    if (target.kind == TargetKind::External)
      fail(Err::ExternalSystemHasNoField, "external targets are loaded from file, not simulated");
    SimDefaults defaults = default_sim(opts.system, 0);
    if (opts.dt) defaults.dt = *opts.dt;
    if (opts.t_max) defaults.t_max = *opts.t_max;
    if (opts.n_traj) defaults.n_traj = *opts.n_traj;
    if (opts.sigma) target.noise_sigma = *opts.sigma;

    const auto batch = simulate_target(target, defaults, opts.seed, opts.substeps);
    const std::string stem = opts.name.empty() ? opts.system : opts.name;
    const std::string csv = run.path(stem + ".csv");
    write_trajectories(csv, batch);
    run.record(csv);
    run.record(meta_path_for(csv));
    return run.finish();
  } catch (const std::exception& e) {
    return run.finish(e.what());
  }
}

int cmd_perturb(const PerturbOpts& opts) {
  nlohmann::json params = {{"system", opts.system},
                           {"kind", opts.kind},
                           {"scale", opts.scale},
                           {"seed", opts.seed}};
  CommandRun run(opts.out_dir, "perturb", params, opts.seed);
  try {
    TargetSpec target = target_by_name(opts.system);
    SimDefaults defaults = default_sim(opts.system, 0);
    if (opts.dt) defaults.dt = *opts.dt;
    if (opts.t_max) defaults.t_max = *opts.t_max;
    if (opts.n_traj) defaults.n_traj = *opts.n_traj;

    PerturbationSpec pspec;
    pspec.s = opts.scale;
    pspec.seed = opts.seed;
    pspec.gp.grid_n = opts.grid_n;

    TrajectoryBatch batch;
    if (opts.kind == "diffeo") {
      pspec.kind = PerturbationSpec::Kind::DiffeoInterp;
      const auto base = simulate_target(target, defaults, opts.seed, opts.substeps);
      const auto deformation = random_diffeo_interp(pspec, base.dim(), opts.hidden);
      batch = base;
      for (auto& m : batch.steps) m = deformation.forward_batch(m);
    } else if (opts.kind == "vf") {
      pspec.kind = PerturbationSpec::Kind::GpField;
      const auto base = simulate_target(target, defaults, opts.seed, opts.substeps);
      const auto box = bounding_box(base.steps, 0.1);
      const auto delta = gp_field_perturbation_delta(pspec, box);
      const auto field = [&target, &delta](const Vec& x) -> Vec {
        return eval_target_field(target, x) + delta.eval(x);
      };
      SimConfig cfg{defaults.dt, defaults.t_max, defaults.n_traj, opts.seed, opts.substeps};
      InitSampler sampler = defaults.sampler;
      sampler.seed = stream_seed(opts.seed, 0x1C5);
      batch = simulate_batch(field, target.noise_sigma, sampler, cfg, base.meta);
    } else {
      fail(Err::InvalidSpec, "perturb kind must be 'diffeo' or 'vf'");
    }
    batch.meta["perturbation"] = to_json(pspec);

    std::ostringstream stem;
    if (opts.name.empty())
      stem << opts.system << "_" << opts.kind << "_s" << opts.scale << "_seed" << opts.seed;
    else
      stem << opts.name;
    const std::string csv = run.path(stem.str() + ".csv");
    write_trajectories(csv, batch);
    run.record(csv);
    run.record(meta_path_for(csv));
    return run.finish();
  } catch (const std::exception& e) {
    return run.finish(e.what());
  }
}

std::string fit_artifact_name(const std::string& archetype, const std::string& target) {
  return "fit_" + archetype + "__" + target;
}

int cmd_fit(const FitOpts& opts) {
  nlohmann::json params = {{"data", opts.data},
                           {"archetype", opts.archetype},
                           {"seed", opts.cfg.seed},
                           {"epochs", opts.cfg.epochs},
                           {"hidden", opts.cfg.hidden}};
  CommandRun run(opts.out_dir, "fit", params, opts.cfg.seed);
  try {
    const auto batch = load_trajectories(opts.data);
    const auto spec = archetype_by_name(opts.archetype, batch.dim());
    const std::string target = opts.target_name.empty() ? stem_of(opts.data) : opts.target_name;
    const std::string arch_label =
        (opts.archetype.size() > 5 && opts.archetype.substr(opts.archetype.size() - 5) == ".json")
            ? stem_of(opts.archetype)
            : opts.archetype;

    const auto res = fit(spec, batch, opts.cfg);

    const std::string stem = fit_artifact_name(arch_label, target);
    const std::string ckpt = stem + ".ckpt.json";
    const std::string curve = stem + ".loss.csv";

    nlohmann::json fj = res.metrics_json();
    fj["archetype_name"] = arch_label;
    fj["target_name"] = target;
    fj["checkpoint"] = ckpt;
    fj["loss_curve"] = curve;
    write_text_file(run.path(stem + ".json"), fj.dump(2) + "\n");
    run.record(run.path(stem + ".json"));

    nlohmann::json cj = res.model.to_json();
    cj["seed"] = opts.cfg.seed;
    write_text_file(run.path(ckpt), cj.dump(2) + "\n");
    run.record(run.path(ckpt));

    std::ostringstream curve_csv;
    curve_csv << "epoch,loss\n";
    for (size_t e = 0; e < res.loss_curve.size(); ++e)
      curve_csv << e << ',' << format_double(res.loss_curve[e]) << "\n";
    write_text_file(run.path(curve), curve_csv.str());
    run.record(run.path(curve));
    return run.finish();
  } catch (const std::exception& e) {
    return run.finish(e.what());
  }
}

int cmd_score(const ScoreOpts& opts) {
  nlohmann::json params = {{"fits", opts.fits_dir}};
  CommandRun run(opts.out_dir, "score", params, 0);
  try {
    std::map<std::pair<std::string, std::string>, FitCell> cells;
    std::vector<std::string> archetypes_seen, targets_seen;
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(opts.fits_dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("fit_", 0) == 0 && name.size() > 9 &&
          name.substr(name.size() - 5) == ".json" &&
          name.find(".ckpt.") == std::string::npos)
        files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(Err::IncompleteGrid, "no fit artifacts in '" + opts.fits_dir + "'");
    for (const auto& file : files) {
      std::ifstream f(file);
      const auto j = nlohmann::json::parse(f);
      const auto a = j.at("archetype_name").get<std::string>();
      const auto t = j.at("target_name").get<std::string>();
      cells[{a, t}] = FitCell{j.at("test_mse").get<double>(), j.at("complexity").get<double>()};
      if (std::find(archetypes_seen.begin(), archetypes_seen.end(), a) == archetypes_seen.end())
        archetypes_seen.push_back(a);
      if (std::find(targets_seen.begin(), targets_seen.end(), t) == targets_seen.end())
        targets_seen.push_back(t);
    }

    // registry order first, then any extra labels in sorted order
    auto ordered = [](const std::vector<std::string>& registry,
                      std::vector<std::string> seen) {
      std::vector<std::string> out;
      for (const auto& r : registry) {
        auto it = std::find(seen.begin(), seen.end(), r);
        if (it != seen.end()) {
          out.push_back(r);
          seen.erase(it);
        }
      }
      std::sort(seen.begin(), seen.end());
      out.insert(out.end(), seen.begin(), seen.end());
      return out;
    };
    const auto rows = ordered(archetype_registry(), archetypes_seen);
    const auto cols = ordered(target_registry(), targets_seen);

    const auto matrix = build_matrix(rows, cols, cells);
    write_text_file(run.path("score.json"), matrix.to_json().dump(2) + "\n");
    run.record(run.path("score.json"));
    write_text_file(run.path("score.csv"), matrix.to_csv());
    run.record(run.path("score.csv"));
    return run.finish();
  } catch (const std::exception& e) {
    return run.finish(e.what());
  }
}

namespace {

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string render_score_svg(const ScoreMatrix& m) {
  const int cell = 84, left = 150, top = 70;
  const int W = left + cell * static_cast<int>(m.targets.size()) + 20;
  const int H = top + cell * static_cast<int>(m.archetypes.size()) + 20;
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  for (size_t c = 0; c < m.targets.size(); ++c)
    svg << "<text x='" << left + cell * c + cell / 2 << "' y='" << top - 12
        << "' font-size='12' text-anchor='middle' font-family='sans-serif'>" << m.targets[c]
        << "</text>\n";
  for (size_t r = 0; r < m.archetypes.size(); ++r)
    svg << "<text x='" << left - 10 << "' y='" << top + cell * r + cell / 2 + 4
        << "' font-size='12' text-anchor='end' font-family='sans-serif'>" << m.archetypes[r]
        << "</text>\n";
  // nested squares per cell, side proportional to the normalized score:
  // similarity in yellow under simplicity in translucent blue
  for (size_t r = 0; r < m.archetypes.size(); ++r)
    for (size_t c = 0; c < m.targets.size(); ++c) {
      const double x0 = left + cell * c, y0 = top + cell * r;
      svg << "<rect x='" << fmt2(x0) << "' y='" << fmt2(y0) << "' width='" << cell
          << "' height='" << cell << "' fill='none' stroke='#cccccc'/>\n";
      auto square = [&](double score, const char* color, double opacity) {
        const double side = std::max(0.0, score) * (cell - 8);
        if (side <= 0.0) return;
        svg << "<rect x='" << fmt2(x0 + (cell - side) / 2) << "' y='"
            << fmt2(y0 + (cell - side) / 2) << "' width='" << fmt2(side) << "' height='"
            << fmt2(side) << "' fill='" << color << "' fill-opacity='" << opacity << "'/>\n";
      };
      square(m.similarity(r, c), "#f0c421", 0.9);
      square(m.simplicity(r, c), "#2b6fd4", 0.55);
    }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_sweep_svg(const std::vector<SweepRow>& rows) {
  if (rows.empty()) fail(Err::InvalidSpec, "sweep report needs at least one row");
  const int W = 860, H = 320, panel = 360, px0 = 70, px1 = px0 + panel + 80, py = 40, ph = 220;
  double smin = rows[0].s, smax = rows[0].s, dmax = 0, cmax = 0;
  for (const auto& r : rows) {
    smin = std::min(smin, r.s);
    smax = std::max(smax, r.s);
    dmax = std::max(dmax, r.dissimilarity);
    cmax = std::max(cmax, r.complexity);
  }
  if (smax == smin) smax = smin + 1.0;
  if (dmax <= 0) dmax = 1.0;
  if (cmax <= 0) cmax = 1.0;

  auto polyline = [&](int x0, double ymax, auto value, const char* color) {
    std::ostringstream os;
    os << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
    for (const auto& r : rows)
      os << fmt2(x0 + panel * (r.s - smin) / (smax - smin)) << ','
         << fmt2(py + ph - ph * value(r) / ymax) << ' ';
    os << "'/>\n";
    return os.str();
  };
  auto axes = [&](int x0, const char* title, double ymax) {
    std::ostringstream os;
    os << "<line x1='" << x0 << "' y1='" << py << "' x2='" << x0 << "' y2='" << py + ph
       << "' stroke='black'/>\n"
       << "<line x1='" << x0 << "' y1='" << py + ph << "' x2='" << x0 + panel << "' y2='"
       << py + ph << "' stroke='black'/>\n"
       << "<text x='" << x0 + panel / 2 << "' y='" << py - 14
       << "' font-size='13' text-anchor='middle' font-family='sans-serif'>" << title
       << "</text>\n"
       << "<text x='" << x0 - 8 << "' y='" << py + 6
       << "' font-size='10' text-anchor='end' font-family='sans-serif'>" << fmt2(ymax)
       << "</text>\n"
       << "<text x='" << x0 - 8 << "' y='" << py + ph
       << "' font-size='10' text-anchor='end' font-family='sans-serif'>0</text>\n"
       << "<text x='" << x0 << "' y='" << py + ph + 16
       << "' font-size='10' text-anchor='middle' font-family='sans-serif'>" << fmt2(smin)
       << "</text>\n"
       << "<text x='" << x0 + panel << "' y='" << py + ph + 16
       << "' font-size='10' text-anchor='middle' font-family='sans-serif'>" << fmt2(smax)
       << "</text>\n";
    return os.str();
  };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << axes(px0, "dissimilarity vs s", dmax)
      << polyline(px0, dmax, [](const SweepRow& r) { return r.dissimilarity; }, "#c23b22")
      << axes(px1, "complexity vs s", cmax)
      << polyline(px1, cmax, [](const SweepRow& r) { return r.complexity; }, "#2b6fd4")
      << "</svg>\n";
  return svg.str();
}

int cmd_report(const ReportOpts& opts) {
  nlohmann::json params = {{"score", opts.score_file}, {"sweep", opts.sweep_file}};
  CommandRun run(opts.out_dir, "report", params, 0);
  try {
    if (opts.score_file.empty() && opts.sweep_file.empty())
      fail(Err::InvalidSpec, "report needs --score and/or --sweep input");

    if (!opts.score_file.empty()) {
      std::ifstream f(opts.score_file);
      if (!f) fail(Err::FileError, "cannot open '" + opts.score_file + "'");
      const auto matrix = ScoreMatrix::from_json(nlohmann::json::parse(f));
      write_text_file(run.path("score_squares.svg"), render_score_svg(matrix));
      run.record(run.path("score_squares.svg"));
      write_text_file(run.path("score_table.csv"), matrix.to_csv());
      run.record(run.path("score_table.csv"));
    }
    if (!opts.sweep_file.empty()) {
      std::ifstream f(opts.sweep_file);
      if (!f) fail(Err::FileError, "cannot open '" + opts.sweep_file + "'");
      std::string line;
      if (!std::getline(f, line) || line.rfind("s,", 0) != 0)
        fail(Err::ParseError, "sweep file must start with header s,dissimilarity,complexity");
      std::vector<SweepRow> rows;
      int lineno = 1;
      while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        SweepRow r{};
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &r.s, &r.dissimilarity, &r.complexity) != 3)
          fail(Err::ParseError, "bad sweep row at line " + std::to_string(lineno));
        rows.push_back(r);
      }
      write_text_file(run.path("sweep_curves.svg"), render_sweep_svg(rows));
      run.record(run.path("sweep_curves.svg"));
    }
    return run.finish();
  } catch (const std::exception& e) {
    return run.finish(e.what());
  }
}

}  // namespace daa::cli
