// Copyright 2026 The ksdd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ksdd/experiments.hpp"

#include "ksdd/diagnostics.hpp"
#include "ksdd/errors.hpp"
#include "ksdd/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

namespace ksdd {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config helpers

BaseKernel make_kernel(const Config& cfg, const Positions& init) {
  const std::string family = cfg.get_string("kernel.family", "gaussian");
  if (family == "gaussian") {
    const std::string bw = cfg.get_string("kernel.bandwidth", "median");
    return BaseKernel::gaussian(bw == "median" ? median_heuristic_bandwidth(init) : cfg.get_double("kernel.bandwidth"));
  }
  if (family == "imq") return BaseKernel::imq(cfg.get_double("kernel.c", 1.0), cfg.get_double("kernel.beta", -0.5));
  throw ConfigError("kernel.family must be 'gaussian' or 'imq'");
}

std::vector<AnnealStage> parse_schedule(const std::vector<std::string>& items) {
  std::vector<AnnealStage> out;
  for (const auto& item : items) {
    AnnealStage st;
    const auto colon = item.find(':');
    try {
      std::size_t used = 0;
      const std::string b = item.substr(0, colon);
      st.beta = std::stod(b, &used);
      if (used != b.size()) throw std::invalid_argument(item);
      if (colon != std::string::npos) {
        const std::string it = item.substr(colon + 1);
        st.iters = std::stoi(it, &used);
        if (used != it.size()) throw std::invalid_argument(item);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("anneal.schedule: bad stage '" + item + "' (expected beta or beta:iters)");
    }
    out.push_back(st);
  }
  return out;
}

FlowConfig flow_config(const Config& cfg, Scheme scheme) {
  const std::string own = "flow." + to_string(scheme) + ".";
  auto num = [&](const std::string& key, double fallback) {
    return cfg.get_double(own + key, cfg.get_double("flow." + key, fallback));
  };
  auto integer = [&](const std::string& key, int fallback) {
    return cfg.get_int(own + key, cfg.get_int("flow." + key, fallback));
  };
  FlowConfig fc;
  fc.scheme = scheme;
  fc.step_size = num("step_size", fc.step_size);
  fc.max_iters = integer("max_iters", fc.max_iters);
  fc.tol = num("tol", fc.tol);
  fc.backtracking = cfg.get_bool(own + "backtracking", cfg.get_bool("flow.backtracking", false));
  fc.snapshot_every = cfg.get_int("flow.snapshot_every", fc.snapshot_every);
  fc.lbfgs.memory = cfg.get_int("lbfgs.memory", fc.lbfgs.memory);
  fc.lbfgs.c1 = cfg.get_double("lbfgs.c1", fc.lbfgs.c1);
  fc.lbfgs.c2 = cfg.get_double("lbfgs.c2", fc.lbfgs.c2);
  fc.lbfgs.max_line_search = cfg.get_int("lbfgs.max_line_search", fc.lbfgs.max_line_search);
  fc.validate();
  return fc;
}

std::vector<Scheme> schemes(const Config& cfg, const std::vector<std::string>& fallback) {
  std::vector<Scheme> out;
  for (const auto& name : cfg.get_list("schemes", fallback)) out.push_back(scheme_from_string(name));
  return out;
}

Positions init_particles(const Config& cfg, Index n, Index d, std::mt19937_64& rng) {
  if (n < 1) throw ConfigError("particles must be positive");
  const std::string dist = cfg.get_string("init.distribution", "gaussian");
  if (dist == "file") {
    Positions p = read_particles_csv(cfg.resolve(cfg.get_string("init.file")));
    if (p.cols() != d) throw ConfigError("init.file: particle dimension differs from target");
    return p;
  }
  Positions p(n, d);
  if (dist == "uniform") {
    const Vector lo = cfg.get_vector("init.lower");
    const Vector hi = cfg.get_vector("init.upper");
    if (lo.size() != d || hi.size() != d) throw ConfigError("init.lower/upper: wrong dimension");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Index i = 0; i < n; ++i) {
      for (Index a = 0; a < d; ++a) p(i, a) = lo(a) + (hi(a) - lo(a)) * unit(rng);
    }
    return p;
  }
  if (dist != "gaussian" && dist != "on_axis") {
    throw ConfigError("init.distribution must be gaussian, on_axis, uniform or file");
  }
  const Vector mean = cfg.get_vector("init.mean", Vector::Zero(d));
  if (mean.size() != d) throw ConfigError("init.mean: wrong dimension");
  const double scale = cfg.get_double("init.scale", 1.0);
  if (!(scale >= 0.0)) throw ConfigError("init.scale must be non-negative");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    for (Index a = 0; a < d; ++a) p(i, a) = mean(a) + scale * normal(rng);
  }
  if (dist == "on_axis") {
    const int axis = cfg.get_int("init.axis", 1);
    if (axis < 1 || axis > d) throw ConfigError("init.axis out of range");
    p.col(axis - 1).setConstant(cfg.get_double("init.offset", 0.0));
  }
  return p;
}

Positions draw_samples(const ScoreModel& model, Index m, std::mt19937_64& rng) {
  Positions out(m, model.dim());
  for (Index i = 0; i < m; ++i) out.row(i) = model.sample(rng).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Running one labelled flow and persisting it

struct RunSummary {
  std::string label;
  FlowTrace trace;
  json metrics;
};

RunSummary run_labelled(const std::string& label, const FlowConfig& fc, const FlowInputs& inputs,
                        const Positions& init, std::uint64_t seed, const fs::path* out_dir) {
  ParticleSet start;
  start.positions = init;
  start.rng_seed = seed;
  RunSummary r{label, run_flow(fc, inputs, start), {}};
  SteinKernel sk(inputs.kernel, inputs.model);
  const double init_ksd = ksd_between(sk, init);
  double final_ksd = std::numeric_limits<double>::quiet_NaN();
  if (r.trace.status != FlowStatus::Diverged) final_ksd = ksd_between(sk, r.trace.final.positions);
  json m;
  m["scheme"] = to_string(fc.scheme);
  m["status"] = to_string(r.trace.status);
  m["iterations"] = r.trace.final.iteration;
  m["step_size"] = fc.step_size;
  m["initial_ksd2"] = init_ksd * init_ksd;
  m["final_ksd2"] = final_ksd * final_ksd;
  m["final_grad_norm"] = r.trace.final_grad_norm;
  if (!fc.anneal_schedule.empty()) {
    json sched = json::array();
    for (const auto& st : fc.anneal_schedule) sched.push_back({{"beta", st.beta}, {"iters", st.iters ? *st.iters : -1}});
    m["anneal_schedule"] = sched;
  }
  if (!r.trace.message.empty()) m["message"] = r.trace.message;
  r.metrics = std::move(m);
  if (out_dir != nullptr) {
    write_trace_json(r.trace, *out_dir / ("trace_" + label + ".json"));
    write_trace_csv(r.trace, *out_dir / ("trace_" + label + ".csv"));
    write_particles_csv(*out_dir / ("particles_" + label + ".csv"), r.trace.final.positions);
  }
  return r;
}

struct Context {
  const Config& cfg;
  fs::path out;
  std::uint64_t seed;
  json metrics;
  bool diverged = false;

  void add(const RunSummary& r) {
    metrics["runs"][r.label] = r.metrics;
    if (r.trace.status == FlowStatus::Diverged) diverged = true;
  }
};

void rank_runs(json& metrics) {
  if (!metrics.contains("runs")) return;
  std::vector<std::pair<double, std::string>> order;
  for (const auto& [label, m] : metrics["runs"].items()) {
    const double v = m["final_ksd2"].is_number() ? m["final_ksd2"].get<double>() : std::numeric_limits<double>::infinity();
    order.emplace_back(std::isnan(v) ? std::numeric_limits<double>::infinity() : v, label);
  }
  std::stable_sort(order.begin(), order.end());
  json ranking = json::array();
  for (const auto& [v, label] : order) ranking.push_back(label);
  metrics["comparison"]["ranking_by_final_ksd2"] = ranking;
}

// ---------------------------------------------------------------------------
// Experiments

void run_standard(Context& ctx, ModelPtr model, Index n, const std::vector<std::string>& default_schemes,
                  bool annealed_pairs) {
  const Config& cfg = ctx.cfg;
  std::mt19937_64 rng(ctx.seed);
  const Positions init = init_particles(cfg, n, model->dim(), rng);
  write_particles_csv(ctx.out / "particles_init.csv", init);
  FlowInputs inputs{make_kernel(cfg, init), model, {}};
  ctx.metrics["kernel"] = inputs.kernel.describe();
  ctx.metrics["particles"] = init.rows();
  ctx.metrics["dim"] = init.cols();

  const auto list = schemes(cfg, default_schemes);
  if (std::find(list.begin(), list.end(), Scheme::MmdGd) != list.end()) {
    if (!model->can_sample()) throw ConfigError("mmd_gd needs a target that can be sampled");
    std::mt19937_64 target_rng(ctx.seed ^ 0x9e3779b97f4a7c15ULL);
    inputs.target_samples = draw_samples(*model, cfg.get_int("mmd.samples", 500), target_rng);
  }
  const auto schedule = parse_schedule(cfg.get_list("anneal.schedule", annealed_pairs ? std::vector<std::string>{"0.1", "1"} : std::vector<std::string>{}));
  for (Scheme s : list) {
    FlowConfig fc = flow_config(cfg, s);
    if (!annealed_pairs) {
      fc.anneal_schedule = schedule;
      ctx.add(run_labelled(to_string(s), fc, inputs, init, ctx.seed, &ctx.out));
      continue;
    }
    const RunSummary plain = run_labelled(to_string(s), fc, inputs, init, ctx.seed, &ctx.out);
    ctx.add(plain);
    fc.anneal_schedule = schedule;
    const RunSummary warm = run_labelled(to_string(s) + "_annealed", fc, inputs, init, ctx.seed, &ctx.out);
    ctx.add(warm);
    ctx.metrics["comparison"]["annealing_improves"][to_string(s)] =
        warm.metrics["final_ksd2"].get<double>() < plain.metrics["final_ksd2"].get<double>();
  }
}

void run_gaussian2d(Context& ctx) {
  const Vector mean = ctx.cfg.get_vector("target.mean", Vector::Zero(2));
  const double var = ctx.cfg.get_double("target.variance", 1.0);
  if (!(var > 0.0)) throw ConfigError("target.variance must be positive");
  auto model = std::make_shared<GaussianModel>(mean, var * Matrix::Identity(mean.size(), mean.size()));
  run_standard(ctx, model, ctx.cfg.get_int("particles", 50), {"ksd_lbfgs", "svgd", "mmd_gd"}, false);
}

ModelPtr mixture_model(const Config& cfg) {
  return GaussianMixtureModel::symmetric_pair(cfg.get_int("target.dim", 2), cfg.get_double("target.centroid", 1.0),
                                              cfg.get_double("target.variance", 0.1));
}

void add_symmetry_metrics(Context& ctx) {
  const int axis = ctx.cfg.get_int("symmetry.axis", 1);
  const Index d = ctx.metrics["dim"].get<Index>();
  if (axis < 1 || axis > d) throw ConfigError("symmetry.axis out of range");
  Vector normal = Vector::Zero(d);
  normal(axis - 1) = 1.0;
  for (const auto& label : ctx.metrics["runs"].items()) {
    const Positions fin = read_particles_csv(ctx.out / ("particles_" + label.key() + ".csv"));
    label.value()["symmetry_residual_final"] = symmetry_residual(fin, normal, 0.0);
  }
}

void run_mixture(Context& ctx, bool annealed) {
  run_standard(ctx, mixture_model(ctx.cfg), ctx.cfg.get_int("particles", 30), {"ksd_gd"}, annealed);
  add_symmetry_metrics(ctx);
}

void run_banana(Context& ctx) {
  auto model = std::make_shared<BananaModel>(ctx.cfg.get_double("target.a", 2.0), ctx.cfg.get_double("target.b", 0.2));
  run_standard(ctx, model, ctx.cfg.get_int("particles", 50), {"ksd_lbfgs", "svgd"}, false);
}

void run_logreg(Context& ctx) {
  const Config& cfg = ctx.cfg;
  LabeledDataset train;
  LabeledDataset test;
  if (cfg.has("data.train")) {
    train = read_labeled_csv(cfg.resolve(cfg.get_string("data.train")));
    test = read_labeled_csv(cfg.resolve(cfg.get_string("data.test")));
  } else {
    LogregData d = make_logreg_dataset(cfg.get_int("data.features", 5), cfg.get_int("data.train_size", 400),
                                       cfg.get_int("data.test_size", 200), cfg.get_double("data.margin", 0.1),
                                       cfg.get_u64("data.seed", ctx.seed));
    train = std::move(d.train);
    test = std::move(d.test);
  }
  if (test.num_features() != train.num_features()) throw InputError("train and test feature counts differ");
  if (cfg.get_bool("data.standardize", true)) {
    const Standardizer st = Standardizer::fit(train.features);
    train.features = st.apply(train.features);
    test.features = st.apply(test.features);
  }
  auto model = std::make_shared<LogisticPosterior>(train, cfg.get_double("target.prior_rate", 0.01));
  run_standard(ctx, model, cfg.get_int("particles", 50), {"ksd_lbfgs", "svgd"}, false);
  double lo = 1.0;
  double hi = 0.0;
  for (const auto& label : ctx.metrics["runs"].items()) {
    const Positions fin = read_particles_csv(ctx.out / ("particles_" + label.key() + ".csv"));
    double acc = std::numeric_limits<double>::quiet_NaN();
    if (fin.allFinite()) acc = logreg_accuracy(fin, test);
    label.value()["test_accuracy"] = acc;
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
  }
  ctx.metrics["comparison"]["accuracy_gap"] = hi - lo;
  ctx.metrics["train_size"] = train.size();
  ctx.metrics["test_size"] = test.size();
}

struct IcaRepeat {
  std::map<std::string, std::vector<double>> amari;  // label -> per-particle values
  std::map<std::string, std::string> status;
  bool diverged = false;
};

IcaRepeat ica_repeat(const Config& cfg, const std::vector<Scheme>& list, Index p, Index q, Index n,
                     std::uint64_t seed, const fs::path* trace_dir) {
  const IcaDataset data = make_ica_dataset(p, q, seed);
  auto model = std::make_shared<IcaPosterior>(data.samples);
  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
  const Positions init = init_particles(cfg, n, p * p, rng);
  FlowInputs inputs{make_kernel(cfg, init), model, {}};
  auto amari_of = [&](const Positions& x) {
    std::vector<double> out;
    for (Index i = 0; i < x.rows(); ++i) {
      const Matrix w = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          x.row(i).data(), p, p);
      out.push_back(amari_distance(w, data.unmixing));
    }
    return out;
  };
  IcaRepeat rep;
  rep.amari["random"] = amari_of(init);
  for (Scheme s : list) {
    const RunSummary r = run_labelled(to_string(s), flow_config(cfg, s), inputs, init, seed, trace_dir);
    rep.status[r.label] = to_string(r.trace.status);
    if (r.trace.status == FlowStatus::Diverged) {
      rep.diverged = true;
      rep.amari[r.label] = std::vector<double>(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
    } else {
      rep.amari[r.label] = amari_of(r.trace.final.positions);
    }
  }
  return rep;
}

double median_of(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void run_ica(Context& ctx) {
  const Config& cfg = ctx.cfg;
  const Index p = cfg.get_int("ica.p", 2);
  const Index q = cfg.get_int("ica.q", 1000);
  const int repeats = cfg.get_int("ica.repeats", 50);
  const Index n = cfg.get_int("particles", 10);
  if (p < 1 || q < 1 || repeats < 1) throw ConfigError("ica.p, ica.q and ica.repeats must be positive");
  const auto list = schemes(cfg, {"ksd_lbfgs", "svgd"});
  int workers = cfg.get_int("ica.workers", 0);
  if (workers <= 0) workers = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  // Validate the flow configuration before fanning out.
  for (Scheme s : list) flow_config(cfg, s);
  const bool traces = cfg.get_bool("ica.write_traces", false);

  std::vector<IcaRepeat> results(static_cast<std::size_t>(repeats));
  std::vector<std::future<void>> pending;
  int next = 0;
  std::mutex next_mutex;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      int r = 0;
      {
        std::lock_guard<std::mutex> lock(next_mutex);
        if (next >= repeats) return;
        r = next++;
      }
      try {
        const fs::path dir = ctx.out / ("repeat_" + std::to_string(r));
        results[static_cast<std::size_t>(r)] =
            ica_repeat(cfg, list, p, q, n, ctx.seed + static_cast<std::uint64_t>(r), traces ? &dir : nullptr);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  for (int w = 0; w < std::min(workers, repeats); ++w) pending.push_back(std::async(std::launch::async, worker));
  for (auto& f : pending) f.get();
  if (failure) std::rethrow_exception(failure);

  std::vector<std::string> labels{"random"};
  for (Scheme s : list) labels.push_back(to_string(s));
  ctx.metrics["particles"] = n;
  ctx.metrics["dim"] = p * p;
  ctx.metrics["ica"] = {{"p", p}, {"q", q}, {"repeats", repeats}};
  for (const auto& label : labels) {
    Matrix rows(repeats * n, 3);
    std::vector<double> all;
    int diverged_runs = 0;
    json statuses = json::object();
    for (int r = 0; r < repeats; ++r) {
      const auto& vals = results[static_cast<std::size_t>(r)].amari.at(label);
      const auto st = results[static_cast<std::size_t>(r)].status.find(label);
      if (st != results[static_cast<std::size_t>(r)].status.end()) {
        statuses[st->second] = statuses.value(st->second, 0) + 1;
        if (st->second == "diverged") ++diverged_runs;
      }
      for (Index i = 0; i < n; ++i) {
        rows.row(r * n + i) << r, static_cast<double>(i), vals[static_cast<std::size_t>(i)];
        all.push_back(vals[static_cast<std::size_t>(i)]);
      }
    }
    write_csv(ctx.out / ("amari_" + label + ".csv"), {"repeat", "particle", "amari"}, rows);
    json m;
    m["count"] = all.size();
    m["median_amari"] = median_of(all);
    double sum = 0.0;
    int finite = 0;
    for (double v : all) {
      if (!std::isnan(v)) {
        sum += v;
        ++finite;
      }
    }
    m["mean_amari"] = finite > 0 ? sum / finite : std::numeric_limits<double>::quiet_NaN();
    m["diverged_runs"] = diverged_runs;
    if (label != "random") m["status_counts"] = statuses;
    ctx.metrics["amari"][label] = m;
    if (diverged_runs > 0) ctx.diverged = true;
  }
}

void run_stein_points_banana(Context& ctx) {
  const Config& cfg = ctx.cfg;
  auto model = std::make_shared<BananaModel>(cfg.get_double("target.a", 2.0), cfg.get_double("target.b", 0.2));
  const int n = cfg.get_int("particles", 50);
  const Vector lower = cfg.get_vector("search.lower", (Vector(2) << -6.0, -9.0).finished());
  const Vector upper = cfg.get_vector("search.upper", (Vector(2) << 6.0, 4.0).finished());
  const std::string kind = cfg.get_string("search.kind", "grid");
  SearchSpec search;
  if (kind == "grid") {
    search = GridSearch{lower, upper, cfg.get_int("search.points_per_dim", 101)};
  } else if (kind == "random") {
    search = RandomSearch{lower, upper, cfg.get_int("search.candidates", 1000)};
  } else {
    throw ConfigError("search.kind must be 'grid' or 'random'");
  }
  if (cfg.get_string("kernel.bandwidth", "") == "median") {
    throw ConfigError("stein_points_banana needs an explicit kernel.bandwidth");
  }
  const BaseKernel kernel = make_kernel(cfg, Positions::Zero(1, 2));
  SteinKernel sk(kernel, model);
  const ParticleSet pts = stein_points(sk, n, search, ctx.seed);
  write_particles_csv(ctx.out / "particles_stein_points.csv", pts.positions);
  const double ksd = ksd_between(sk, pts.positions);
  ctx.metrics["kernel"] = kernel.describe();
  ctx.metrics["particles"] = n;
  ctx.metrics["dim"] = 2;
  ctx.metrics["runs"]["stein_points"] = {{"scheme", "stein_points"}, {"search", kind}, {"final_ksd2", ksd * ksd}};
  // Optional flows from the same kernel for comparison.
  const auto list = schemes(cfg, {});
  if (!list.empty()) {
    std::mt19937_64 rng(ctx.seed);
    const Positions init = init_particles(cfg, n, 2, rng);
    FlowInputs inputs{kernel, model, {}};
    if (std::find(list.begin(), list.end(), Scheme::MmdGd) != list.end()) {
      std::mt19937_64 target_rng(ctx.seed ^ 0x9e3779b97f4a7c15ULL);
      inputs.target_samples = draw_samples(*model, cfg.get_int("mmd.samples", 500), target_rng);
    }
    for (Scheme s : list) ctx.add(run_labelled(to_string(s), flow_config(cfg, s), inputs, init, ctx.seed, &ctx.out));
  }
}

void run_convergence_race(Context& ctx) {
  const Config& cfg = ctx.cfg;
  const Index d = cfg.get_int("target.dim", 2);
  if (d < 1) throw ConfigError("target.dim must be positive");
  auto model = GaussianModel::standard(d);
  std::mt19937_64 rng(ctx.seed);
  const Positions init = init_particles(cfg, cfg.get_int("particles", 50), d, rng);
  write_particles_csv(ctx.out / "particles_init.csv", init);
  FlowInputs inputs{make_kernel(cfg, init), model, {}};
  ctx.metrics["kernel"] = inputs.kernel.describe();
  ctx.metrics["particles"] = init.rows();
  ctx.metrics["dim"] = d;

  std::vector<std::pair<std::string, FlowConfig>> runs;
  runs.emplace_back("ksd_lbfgs", flow_config(cfg, Scheme::KsdLbfgs));
  const Vector gd_steps = cfg.get_vector("race.gd_steps", (Vector(3) << 0.1, 1.0, 10.0).finished());
  const Vector svgd_steps = cfg.get_vector("race.svgd_steps", (Vector(3) << 0.01, 0.1, 1.0).finished());
  for (Index i = 0; i < gd_steps.size(); ++i) {
    FlowConfig fc = flow_config(cfg, Scheme::KsdGd);
    fc.step_size = gd_steps(i);
    fc.validate();
    runs.emplace_back("ksd_gd_" + format_double(gd_steps(i)), fc);
  }
  for (Index i = 0; i < svgd_steps.size(); ++i) {
    FlowConfig fc = flow_config(cfg, Scheme::Svgd);
    fc.step_size = svgd_steps(i);
    fc.validate();
    runs.emplace_back("svgd_" + format_double(svgd_steps(i)), fc);
  }
  std::vector<std::string> header{"iteration"};
  std::vector<std::vector<double>> curves;
  std::size_t longest = 0;
  for (const auto& [label, fc] : runs) {
    const RunSummary r = run_labelled(label, fc, inputs, init, ctx.seed, &ctx.out);
    ctx.add(r);
    header.push_back(label);
    std::vector<double> c;
    for (const auto& rec : r.trace.records) c.push_back(2.0 * rec.loss);
    longest = std::max(longest, c.size());
    curves.push_back(std::move(c));
  }
  Matrix table = Matrix::Constant(static_cast<Index>(longest), static_cast<Index>(runs.size()) + 1,
                                  std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = 0; t < longest; ++t) {
    table(static_cast<Index>(t), 0) = static_cast<double>(t);
    for (std::size_t k = 0; k < curves.size(); ++k) {
      if (t < curves[k].size()) table(static_cast<Index>(t), static_cast<Index>(k) + 1) = curves[k][t];
    }
  }
  write_csv(ctx.out / "race.csv", header, table);
}

void check_known_keys(const Config& cfg) {
  static const std::set<std::string> known{
      "experiment", "seed", "output_dir", "particles", "schemes",
      "target.mean", "target.variance", "target.dim", "target.centroid", "target.a", "target.b",
      "target.prior_rate",
      "init.distribution", "init.mean", "init.scale", "init.axis", "init.offset", "init.lower", "init.upper",
      "init.file",
      "kernel.family", "kernel.bandwidth", "kernel.c", "kernel.beta",
      "flow.step_size", "flow.max_iters", "flow.tol", "flow.backtracking", "flow.snapshot_every",
      "lbfgs.memory", "lbfgs.c1", "lbfgs.c2", "lbfgs.max_line_search",
      "anneal.schedule", "mmd.samples", "symmetry.axis",
      "data.train", "data.test", "data.features", "data.train_size", "data.test_size", "data.margin",
      "data.seed", "data.standardize",
      "ica.p", "ica.q", "ica.repeats", "ica.workers", "ica.write_traces",
      "search.kind", "search.lower", "search.upper", "search.points_per_dim", "search.candidates",
      "race.gd_steps", "race.svgd_steps"};
  static const std::set<std::string> per_scheme{"step_size", "max_iters", "tol", "backtracking"};
  std::string bad;
  for (const auto& [key, value] : cfg.entries()) {
    if (known.count(key) != 0) continue;
    if (key.rfind("flow.", 0) == 0) {
      const auto dot = key.find('.', 5);
      if (dot != std::string::npos && per_scheme.count(key.substr(dot + 1)) != 0) {
        scheme_from_string(key.substr(5, dot - 5));
        continue;
      }
    }
    bad += (bad.empty() ? "" : ", ") + key;
  }
  if (!bad.empty()) throw ConfigError("unknown config keys: " + bad);
}

fs::path choose_output_dir(const Config& cfg, const std::optional<fs::path>& override_dir) {
  if (override_dir) return *override_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return fs::path(env);
  return cfg.resolve(cfg.get_string("output_dir", "out"));
}

}  // namespace

ExperimentOutcome run_experiment(const Config& cfg, const std::optional<fs::path>& output_override) {
  ExperimentOutcome outcome;
  const auto start = std::chrono::steady_clock::now();
  try {
    const std::string name = cfg.get_string("experiment");
    check_known_keys(cfg);
    Context ctx{cfg, choose_output_dir(cfg, output_override), cfg.get_u64("seed", 0), json::object()};
    outcome.output_dir = ctx.out;
    fs::create_directories(ctx.out);
    ctx.metrics["experiment"] = name;
    ctx.metrics["seed"] = ctx.seed;
    if (name == "gaussian2d") {
      run_gaussian2d(ctx);
    } else if (name == "mixture") {
      run_mixture(ctx, false);
    } else if (name == "mixture_annealed") {
      run_mixture(ctx, true);
    } else if (name == "banana") {
      run_banana(ctx);
    } else if (name == "logreg") {
      run_logreg(ctx);
    } else if (name == "ica") {
      run_ica(ctx);
    } else if (name == "stein_points_banana") {
      run_stein_points_banana(ctx);
    } else if (name == "convergence_race") {
      run_convergence_race(ctx);
    } else {
      throw ConfigError("unknown experiment '" + name + "'");
    }
    rank_runs(ctx.metrics);
    ctx.metrics["status"] = ctx.diverged ? "diverged" : "ok";
    const double runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ctx.metrics["runtime_seconds"] = runtime;
    std::ofstream out(ctx.out / "metrics.json");
    if (!out) throw IoError("cannot write " + (ctx.out / "metrics.json").string());
    out << ctx.metrics.dump(2) << '\n';
    outcome.metrics = std::move(ctx.metrics);
    if (ctx.diverged) {
      outcome.exit_code = kExitDiverged;
      outcome.message = "at least one flow diverged";
    }
  } catch (const DivergenceError& e) {
    outcome.exit_code = kExitDiverged;
    outcome.message = e.what();
  } catch (const Error& e) {
    outcome.exit_code = kExitConfig;
    outcome.message = e.what();
  } catch (const fs::filesystem_error& e) {
    outcome.exit_code = kExitConfig;
    outcome.message = e.what();
  } catch (const std::exception& e) {
    outcome.exit_code = kExitInternal;
    outcome.message = e.what();
  }
  return outcome;
}

ExperimentOutcome run_experiment_file(const fs::path& path, const std::optional<fs::path>& output_override) {
  try {
    return run_experiment(Config::load(path), output_override);
  } catch (const Error& e) {
    ExperimentOutcome outcome;
    outcome.exit_code = kExitConfig;
    outcome.message = e.what();
    return outcome;
  }
}

// ---------------------------------------------------------------------------
// Dataset generation

IcaDataset make_ica_dataset(Index p, Index q, std::uint64_t seed) {
  if (p < 1 || q < 1) throw InputError("ica dataset: p and q must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  IcaDataset out;
  out.unmixing.resize(p, p);
  for (int attempt = 0;; ++attempt) {
    for (Index i = 0; i < p; ++i) {
      for (Index j = 0; j < p; ++j) out.unmixing(i, j) = normal(rng);
    }
    Eigen::JacobiSVD<Matrix> svd(out.unmixing);
    const auto& sv = svd.singularValues();
    if (sv(p - 1) > 0.0 && sv(0) / sv(p - 1) <= 1e3) break;
    if (attempt > 1000) throw InputError("ica dataset: could not draw a well-conditioned W");
  }
  Matrix sources(q, p);
  const double pi = std::acos(-1.0);
  for (Index n = 0; n < q; ++n) {
    for (Index i = 0; i < p; ++i) {
      double u = unit(rng);
      while (u <= 0.0) u = unit(rng);
      sources(n, i) = std::log(std::tan(0.5 * pi * u));
    }
  }
  const Matrix mixing = out.unmixing.inverse();
  out.samples = sources * mixing.transpose();
  return out;
}

LogregData make_logreg_dataset(Index p, Index train_size, Index test_size, double margin,
                               std::uint64_t seed) {
  if (p < 1 || train_size < 1 || test_size < 0) throw InputError("logreg dataset: bad sizes");
  if (!(margin >= 0.0 && margin < 1.0)) throw InputError("logreg dataset: margin must lie in [0, 1)");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LogregData out;
  out.truth.resize(p);
  for (Index i = 0; i < p; ++i) out.truth(i) = normal(rng);
  if (out.truth.norm() == 0.0) out.truth(0) = 1.0;
  out.truth.normalize();
  auto draw = [&](Index count) {
    LabeledDataset d;
    d.features.resize(count, p);
    d.labels.resize(count);
    for (Index n = 0; n < count;) {
      Vector f(p);
      for (Index i = 0; i < p; ++i) f(i) = normal(rng);
      const double z = f.dot(out.truth);
      if (std::abs(z) < margin) continue;
      d.features.row(n) = f.transpose();
      d.labels(n) = z >= 0.0 ? 1.0 : -1.0;
      ++n;
    }
    return d;
  };
  out.train = draw(train_size);
  out.test = draw(test_size);
  return out;
}

std::vector<fs::path> generate_dataset(const Config& spec) {
  const std::string kind = spec.get_string("dataset");
  const std::set<std::string> known{"dataset", "seed", "output", "ica.p", "ica.q", "logreg.features",
                                    "logreg.train_size", "logreg.test_size", "logreg.margin"};
  for (const auto& [key, value] : spec.entries()) {
    if (known.count(key) == 0) throw ConfigError("unknown generate key: " + key);
  }
  const std::uint64_t seed = spec.get_u64("seed", 0);
  const fs::path output = spec.resolve(spec.get_string("output"));
  const fs::path stem = output.parent_path() / output.stem();
  std::vector<fs::path> files;
  if (kind == "ica") {
    const IcaDataset d = make_ica_dataset(spec.get_int("ica.p", 2), spec.get_int("ica.q", 1000), seed);
    write_particles_csv(output, d.samples);
    const fs::path truth = stem.string() + "_W.csv";
    write_csv(truth, numbered_header("c", d.unmixing.cols()), d.unmixing);
    files = {output, truth};
  } else if (kind == "logreg") {
    const LogregData d = make_logreg_dataset(spec.get_int("logreg.features", 5), spec.get_int("logreg.train_size", 400),
                                             spec.get_int("logreg.test_size", 0), spec.get_double("logreg.margin", 0.1),
                                             seed);
    write_labeled_csv(output, d.train);
    files.push_back(output);
    if (d.test.size() > 0) {
      const fs::path test = stem.string() + "_test.csv";
      write_labeled_csv(test, d.test);
      files.push_back(test);
    }
    const fs::path truth = stem.string() + "_truth.csv";
    write_csv(truth, numbered_header("w", d.truth.size()), d.truth.transpose());
    files.push_back(truth);
  } else {
    throw ConfigError("dataset must be 'ica' or 'logreg'");
  }
  return files;
}

// ---------------------------------------------------------------------------
// Check suite

namespace {

double rel_error(const Matrix& analytic, const Matrix& fd) {
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-8);
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Index a = 0; a < x.size(); ++a) {
    Vector xp = x;
    Vector xm = x;
    xp(a) += h;
    xm(a) -= h;
    g(a) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

struct ModelCase {
  std::string name;
  ModelPtr model;
  std::function<Vector(std::mt19937_64&)> point;
};

}  // namespace

std::vector<CheckRow> run_check_suite(std::uint64_t seed) {
  constexpr double kTol = 1e-5;
  std::vector<CheckRow> rows;
  for (const BaseKernel& k : {BaseKernel::gaussian(1.0), BaseKernel::gaussian(0.5), BaseKernel::imq(1.0, -0.5)}) {
    const FdCheckReport rep = fd_check(k, 100, 1e-5, seed);
    rows.push_back({"fd_check " + k.describe(), rep.worst(), kTol, rep.passed(kTol)});
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gauss_point = [&normal](Index d, double scale) {
    return [d, scale, &normal](std::mt19937_64& r) {
      Vector v(d);
      for (Index a = 0; a < d; ++a) v(a) = scale * normal(r);
      return v;
    };
  };
  Matrix cov(2, 2);
  cov << 1.5, 0.4, 0.4, 0.8;
  const LogregData lr = make_logreg_dataset(3, 40, 0, 0.0, seed);
  const IcaDataset ica = make_ica_dataset(2, 50, seed);
  std::vector<ModelCase> cases{
      {"gaussian", std::make_shared<GaussianModel>((Vector(2) << 0.5, -0.3).finished(), cov), gauss_point(2, 1.5)},
      {"mixture", GaussianMixtureModel::symmetric_pair(2, 1.0, 0.1), gauss_point(2, 1.0)},
      {"banana", std::make_shared<BananaModel>(), gauss_point(2, 1.5)},
      {"logistic", std::make_shared<LogisticPosterior>(lr.train), gauss_point(4, 0.5)},
      {"ica", std::make_shared<IcaPosterior>(ica.samples),
       [&normal](std::mt19937_64& r) {
         Vector v(4);
         v << 1.0, 0.0, 0.0, 1.0;
         for (Index a = 0; a < 4; ++a) v(a) += 0.3 * normal(r);
         return v;
       }},
  };
  const BaseKernel base = BaseKernel::gaussian(1.0);
  constexpr int kPoints = 20;
  constexpr double kStep = 1e-5;
  for (const auto& c : cases) {
    const ScoreModel& m = *c.model;
    SteinKernel sk(base, c.model);
    double score_err = 0.0;
    double jac_err = 0.0;
    double stein_err = 0.0;
    for (int t = 0; t < kPoints; ++t) {
      const Vector x = c.point(rng);
      const Vector y = c.point(rng);
      const Vector fd_score = fd_gradient([&](const Vector& z) { return *m.log_density(z); }, x, kStep);
      score_err = std::max(score_err, rel_error(m.score(x), fd_score));
      jac_err = std::max(jac_err, rel_error(m.score_jacobian(x), fd_score_jacobian(m, x, kStep)));
      const Vector fd_stein = fd_gradient([&](const Vector& z) { return sk.kpi(x, z); }, y, kStep);
      stein_err = std::max(stein_err, rel_error(sk.grad2_kpi(x, y), fd_stein));
    }
    rows.push_back({"score " + c.name, score_err, kTol, score_err < kTol});
    rows.push_back({"score_jacobian " + c.name, jac_err, kTol, jac_err < kTol});
    rows.push_back({"grad2_kpi " + c.name, stein_err, kTol, stein_err < kTol});
  }

  const Vector y = (Vector(2) << 0.5, 0.5).finished();
  const SteinKernel gauss(base, GaussianModel::standard(2));
  const SteinIdentityResult g = stein_identity_check(gauss, y, 100000, seed);
  rows.push_back({"stein_identity gaussian |mean|/stderr", std::abs(g.mean) / g.std_error, 4.0, g.pass});
  const SteinKernel mix(base, GaussianMixtureModel::symmetric_pair(2, 1.0, 0.1));
  const SteinIdentityResult mres = stein_identity_check(mix, (Vector(2) << 0.3, -0.2).finished(), 100000, seed);
  rows.push_back({"stein_identity mixture |mean|/stderr", std::abs(mres.mean) / mres.std_error, 4.0, mres.pass});
  return rows;
}

}  // namespace ksdd
