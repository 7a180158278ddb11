#include "daa/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace daa {

void SimConfig::validate() const {
  if (!(dt > 0.0)) fail(Err::InvalidSpec, "dt must be positive");
  if (t_max < 0.0) fail(Err::InvalidSpec, "t_max must be nonnegative");
  if (n_traj < 1) fail(Err::InvalidSpec, "n_traj must be positive");
  if (substeps < 1) fail(Err::InvalidSpec, "substeps must be >= 1");
}

int InitSampler::dim() const {
  return kind == Kind::Annulus ? 2 : static_cast<int>(lo.size());
}

void InitSampler::validate() const {
  if (kind == Kind::Annulus) {
    if (!(r_min < r_max) || r_min < 0.0) fail(Err::InvalidSpec, "annulus needs 0 <= r_min < r_max");
    if (center.size() != 2) fail(Err::InvalidSpec, "annulus sampler is 2-D");
  } else {
    if (lo.size() == 0 || lo.size() != hi.size()) fail(Err::InvalidSpec, "box bounds size mismatch");
    for (int i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i])) fail(Err::InvalidSpec, "box needs lo < hi componentwise");
  }
}

InitSampler InitSampler::annulus(double r_min, double r_max, uint64_t seed, Vec center) {
  InitSampler s;
  s.kind = Kind::Annulus;
  s.r_min = r_min;
  s.r_max = r_max;
  s.center = std::move(center);
  s.seed = seed;
  s.validate();
  return s;
}

InitSampler InitSampler::box(Vec lo, Vec hi, uint64_t seed) {
  InitSampler s;
  s.kind = Kind::Box;
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  s.seed = seed;
  s.validate();
  return s;
}

std::vector<Vec> sample_initial(const InitSampler& sampler, int count) {
  sampler.validate();
  std::vector<Vec> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    Rng rng(stream_seed(sampler.seed, k));
    if (sampler.kind == InitSampler::Kind::Annulus) {
      // uniform in area: r^2 uniform between the squared radii
      const double r2 = sampler.r_min * sampler.r_min +
                        rng.uniform01() * (sampler.r_max * sampler.r_max -
                                           sampler.r_min * sampler.r_min);
      const double r = std::sqrt(r2);
      const double a = 2.0 * M_PI * rng.uniform01();
      Vec x(2);
      x[0] = sampler.center[0] + r * std::cos(a);
      x[1] = sampler.center[1] + r * std::sin(a);
      out.push_back(x);
    } else {
      Vec x(sampler.lo.size());
      for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(sampler.lo[i], sampler.hi[i]);
      out.push_back(x);
    }
  }
  return out;
}

namespace {

Vec rk4_step(const FieldFn& f, const Vec& x, double h) {
  const Vec k1 = f(x);
  const Vec k2 = f(x + 0.5 * h * k1);
  const Vec k3 = f(x + 0.5 * h * k2);
  const Vec k4 = f(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Mat integrate_ode(const FieldFn& field, const Vec& x0, const SimConfig& cfg) {
  cfg.validate();
  if (!all_finite(x0)) fail(Err::NonFiniteState, "integrate_ode: non-finite initial state");
  const int n = cfg.n_intervals();
  const double h = cfg.dt / cfg.substeps;
  Mat traj(x0.size(), n + 1);
  traj.col(0) = x0;
  Vec x = x0;
  for (int i = 1; i <= n; ++i) {
    for (int s = 0; s < cfg.substeps; ++s) x = rk4_step(field, x, h);
    if (!all_finite(x)) {
      std::ostringstream os;
      os << "integrate_ode: state left finite range at t=" << i * cfg.dt;
      fail(Err::NonFiniteState, os.str());
    }
    traj.col(i) = x;
  }
  return traj;
}

Mat integrate_sde(const FieldFn& field, double sigma, const Vec& x0, const SimConfig& cfg,
                  uint64_t noise_stream) {
  cfg.validate();
  if (sigma < 0.0) fail(Err::InvalidSpec, "sigma must be nonnegative");
  if (!all_finite(x0)) fail(Err::NonFiniteState, "integrate_sde: non-finite initial state");
  const int n = cfg.n_intervals();
  const double h = cfg.dt / cfg.substeps;
  const double noise_scale = sigma * std::sqrt(h);
  Rng rng(noise_stream);
  Mat traj(x0.size(), n + 1);
  traj.col(0) = x0;
  Vec x = x0;
  for (int i = 1; i <= n; ++i) {
    for (int s = 0; s < cfg.substeps; ++s) {
      x += h * field(x);
      if (sigma > 0.0)
        for (int k = 0; k < x.size(); ++k) x[k] += noise_scale * rng.normal();
    }
    if (!all_finite(x)) {
      std::ostringstream os;
      os << "integrate_sde: state left finite range at t=" << i * cfg.dt;
      fail(Err::NonFiniteState, os.str());
    }
    traj.col(i) = x;
  }
  return traj;
}

TrajectoryBatch TrajectoryBatch::select(const std::vector<int>& traj_indices) const {
  TrajectoryBatch out;
  out.dt = dt;
  out.meta = meta;
  out.normalization = normalization;
  out.steps.reserve(steps.size());
  for (const Mat& m : steps) {
    Mat sub(m.rows(), traj_indices.size());
    for (size_t j = 0; j < traj_indices.size(); ++j) sub.col(j) = m.col(traj_indices[j]);
    out.steps.push_back(std::move(sub));
  }
  return out;
}

bool TrajectoryBatch::all_finite() const {
  for (const Mat& m : steps)
    if (!m.allFinite()) return false;
  return true;
}

TrajectoryBatch simulate_batch(const FieldFn& field, double sigma, const InitSampler& sampler,
                               const SimConfig& cfg, nlohmann::json meta) {
  cfg.validate();
  const auto ics = sample_initial(sampler, cfg.n_traj);
  const int n = cfg.n_intervals();
  const int d = sampler.dim();

  TrajectoryBatch batch;
  batch.dt = cfg.dt;
  batch.meta = std::move(meta);
  batch.steps.assign(n + 1, Mat::Zero(d, cfg.n_traj));
  for (int b = 0; b < cfg.n_traj; ++b) {
    const Mat traj = (sigma > 0.0)
                         ? integrate_sde(field, sigma, ics[b], cfg, stream_seed(cfg.seed, b))
                         : integrate_ode(field, ics[b], cfg);
    for (int i = 0; i <= n; ++i) batch.steps[i].col(b) = traj.col(i);
  }
  return batch;
}

NormalizeResult normalize(const TrajectoryBatch& batch) {
  if (batch.steps.empty() || batch.n_traj() == 0) fail(Err::InvalidSpec, "normalize: empty batch");
  const int d = batch.dim();
  const double count = double(batch.n_traj()) * batch.steps.size();

  Vec mu = Vec::Zero(d);
  for (const Mat& m : batch.steps) mu += m.rowwise().sum();
  mu /= count;

  Vec var = Vec::Zero(d);
  for (const Mat& m : batch.steps) var += (m.colwise() - mu).array().square().matrix().rowwise().sum();
  var /= count;
  Vec sigma = var.array().sqrt();

  for (int i = 0; i < d; ++i) {
    if (!(sigma[i] > 1e-12 * std::max(1.0, std::abs(mu[i])))) {
      std::ostringstream os;
      os << "dimension " << i << " has no spread (sigma=" << sigma[i] << ")";
      fail(Err::DegenerateDimension, os.str());
    }
  }

  NormalizeResult out;
  out.mu = mu;
  out.sigma = sigma;
  out.batch.dt = batch.dt;
  out.batch.meta = batch.meta;
  out.batch.steps.reserve(batch.steps.size());
  for (const Mat& m : batch.steps)
    out.batch.steps.push_back(sigma.cwiseInverse().asDiagonal() * (m.colwise() - mu));
  out.batch.normalization = std::make_pair(mu, sigma);
  return out;
}

std::pair<TrajectoryBatch, TrajectoryBatch> split(const TrajectoryBatch& batch, double ratio,
                                                  uint64_t seed) {
  const int B = batch.n_traj();
  if (B < 2) fail(Err::InvalidSpec, "split needs at least two trajectories");
  if (!(ratio > 0.0 && ratio < 1.0)) fail(Err::InvalidSpec, "ratio must lie in (0,1)");

  std::vector<int> idx(B);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (int i = B - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next() % static_cast<uint64_t>(i + 1));
    std::swap(idx[i], idx[j]);
  }
  int n_train = static_cast<int>(std::llround(ratio * B));
  n_train = std::clamp(n_train, 1, B - 1);

  std::vector<int> train(idx.begin(), idx.begin() + n_train);
  std::vector<int> test(idx.begin() + n_train, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {batch.select(train), batch.select(test)};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string meta_path_for(const std::string& csv_path) {
  const auto pos = csv_path.rfind(".csv");
  if (pos != std::string::npos && pos + 4 == csv_path.size())
    return csv_path.substr(0, pos) + ".meta.json";
  return csv_path + ".meta.json";
}

void write_trajectories(const std::string& path, const TrajectoryBatch& batch) {
  if (!batch.all_finite())
    fail(Err::NonFiniteState, "write_trajectories: batch holds non-finite values");
  std::ofstream f(path);
  if (!f) fail(Err::FileError, "cannot open '" + path + "' for writing");

  const int d = batch.dim();
  f << "traj,t";
  for (int k = 0; k < d; ++k) f << ",x" << k;
  f << "\n";
  for (int b = 0; b < batch.n_traj(); ++b) {
    for (size_t i = 0; i < batch.steps.size(); ++i) {
      f << b << ',' << format_double(double(i) * batch.dt);
      for (int k = 0; k < d; ++k) f << ',' << format_double(batch.steps[i](k, b));
      f << "\n";
    }
  }
  if (!f) fail(Err::FileError, "write failed for '" + path + "'");
  f.close();

  nlohmann::json meta;
  meta["meta"] = batch.meta;
  meta["dt"] = batch.dt;
  meta["n_traj"] = batch.n_traj();
  meta["n_intervals"] = batch.n_intervals();
  meta["dim"] = d;
  if (batch.normalization) {
    meta["normalization"] = {
        {"mu", std::vector<double>(batch.normalization->first.begin(), batch.normalization->first.end())},
        {"sigma", std::vector<double>(batch.normalization->second.begin(), batch.normalization->second.end())}};
  } else {
    meta["normalization"] = nullptr;
  }
  std::ofstream mf(meta_path_for(path));
  if (!mf) fail(Err::FileError, "cannot open '" + meta_path_for(path) + "' for writing");
  mf << meta.dump(2) << "\n";
}

namespace {

double parse_cell(const std::string& token, int row, int col) {
  if (token.empty()) {
    std::ostringstream os;
    os << "empty cell at row " << row << ", column " << col;
    fail(Err::ParseError, os.str());
  }
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size()) {
    std::ostringstream os;
    os << "malformed number '" << token << "' at row " << row << ", column " << col;
    fail(Err::ParseError, os.str());
  }
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "non-finite value '" << token << "' at row " << row << ", column " << col;
    fail(Err::ParseError, os.str());
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TrajectoryBatch load_trajectories(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Err::FileError, "cannot open '" + path + "'");

  std::string line;
  if (!std::getline(f, line)) fail(Err::ParseError, "empty trajectory file");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "traj" || header[1] != "t")
    fail(Err::ParseError, "header must be traj,t,x0,...");
  const int d = static_cast<int>(header.size()) - 2;
  for (int k = 0; k < d; ++k)
    if (header[k + 2] != "x" + std::to_string(k))
      fail(Err::ParseError, "unexpected header column '" + header[k + 2] + "'");

  // rows grouped per trajectory, in order of first appearance
  std::vector<long long> ids;
  std::vector<std::vector<Vec>> rows;
  std::vector<std::vector<double>> times;
  int row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != d + 2) {
      std::ostringstream os;
      os << "row " << row << " has " << cells.size() << " cells, expected " << d + 2;
      fail(Err::ParseError, os.str());
    }
    const long long id = static_cast<long long>(parse_cell(cells[0], row, 1));
    const double t = parse_cell(cells[1], row, 2);
    Vec x(d);
    for (int k = 0; k < d; ++k) x[k] = parse_cell(cells[k + 2], row, k + 3);

    if (ids.empty() || ids.back() != id) {
      ids.push_back(id);
      rows.emplace_back();
      times.emplace_back();
    }
    rows.back().push_back(std::move(x));
    times.back().push_back(t);
  }
  if (rows.empty()) fail(Err::ParseError, "trajectory file holds no samples");

  const size_t len = rows[0].size();
  for (size_t b = 1; b < rows.size(); ++b) {
    if (rows[b].size() != len) {
      std::ostringstream os;
      os << "trajectory " << ids[b] << " has " << rows[b].size() << " samples, expected " << len;
      fail(Err::InconsistentTrajectoryLengths, os.str());
    }
  }

  TrajectoryBatch batch;
  batch.dt = (len > 1) ? times[0][1] - times[0][0] : 0.0;
  batch.steps.assign(len, Mat::Zero(d, rows.size()));
  for (size_t b = 0; b < rows.size(); ++b)
    for (size_t i = 0; i < len; ++i) batch.steps[i].col(b) = rows[b][i];

  std::ifstream mf(meta_path_for(path));
  if (mf) {
    try {
      nlohmann::json meta = nlohmann::json::parse(mf);
      if (meta.contains("meta")) batch.meta = meta["meta"];
      if (meta.contains("dt")) batch.dt = meta["dt"].get<double>();
      if (meta.contains("normalization") && !meta["normalization"].is_null()) {
        const auto mu = meta["normalization"]["mu"].get<std::vector<double>>();
        const auto sg = meta["normalization"]["sigma"].get<std::vector<double>>();
        batch.normalization =
            std::make_pair(Eigen::Map<const Vec>(mu.data(), mu.size()).eval(),
                           Eigen::Map<const Vec>(sg.data(), sg.size()).eval());
      }
    } catch (const nlohmann::json::exception& e) {
      fail(Err::ParseError, std::string("meta sidecar: ") + e.what());
    }
  }
  return batch;
}

}  // namespace daa
