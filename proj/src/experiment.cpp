#include "tsvi/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "tsvi/baselines.hpp"
#include "tsvi/eval.hpp"
#include "tsvi/parallel.hpp"
#include "tsvi/trust_region.hpp"

namespace tsvi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Typed access to an optional config field with path-prefixed errors.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail("", "expected an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }
  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const std::string p = key.empty() ? path_ : path(key);
    throw ConfigError((p.empty() ? std::string("config") : p) + ": " + what);
  }

  Section sub(const std::string& key) const {
    static const json empty = json::object();
    return has(key) ? Section(node_.at(key), path(key)) : Section(empty, path(key));
  }

  double number(const std::string& key, double def) const {
    if (!has(key)) return def;
    const auto& v = node_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "expected a finite number");
    return d;
  }

  double positive(const std::string& key, double def) const {
    const double d = number(key, def);
    if (!(d > 0.0)) fail(key, "expected a positive number");
    return d;
  }

  std::optional<double> optional_positive(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return positive(key, 1.0);
  }

  std::size_t count(const std::string& key, std::size_t def, std::size_t min = 0) const {
    if (!has(key)) return def;
    const auto& v = node_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min)) {
      fail(key, "expected an integer >= " + std::to_string(min));
    }
    return v.get<std::size_t>();
  }

  bool flag(const std::string& key, bool def) const {
    if (!has(key)) return def;
    if (!node_.at(key).is_boolean()) fail(key, "expected true or false");
    return node_.at(key).get<bool>();
  }

  std::string text(const std::string& key, const std::string& def) const {
    if (!has(key)) return def;
    if (!node_.at(key).is_string()) fail(key, "expected a string");
    return node_.at(key).get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) const {
    const auto& v = node_.at(key);
    if (!v.is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key) const {
    const auto& v = node_.at(key);
    if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of integers");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<long long>() < 0) fail(key, "expected non-negative integers");
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }

  const json& raw() const { return node_; }

 private:
  const json& node_;
  std::string path_;
};

std::string infer_family(const ProblemSpec& problem, const Section& section) {
  if (section.has("preset")) return section.text("preset", "");
  if (const auto* bn = std::get_if<BayesNetSpec>(&problem.model)) {
    return bn->dim() <= 30 ? "bn-30" : "bn-80";
  }
  if (const auto* snlp = std::get_if<SnlpProblem>(&problem.model)) {
    return snlp->unknowns() <= 6 ? "snlp-small" : "snlp-large";
  }
  return "generic";
}

std::string run_stem(Method m, Seed seed) {
  return std::string(to_string(m)) + "_seed" + std::to_string(seed);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

struct JobOutput {
  RunResult run;
  double wall_ms = 0.0;
  double mmd = kNaN;
};

RunResult run_method(Method method, const ExperimentConfig& c, ParticleSet init,
                     const TargetModel& target, Seed seed, int workers) {
  const DriverOptions opts{workers, c.trace_wall_time};
  const KernelSpec kernel(c.kernel_lengthscale);
  const LocalKernelFamily local(target.layout_ptr(), kernel);
  switch (method) {
    case Method::TrSviAt:
      return tr_svi_at_run(std::move(init), target, local, c.iterations, opts);
    case Method::TrSviKl:
      return tr_svi_kl_run(std::move(init), target, local, c.tr_kl_initial_radius, c.iterations,
                           seed ^ 0x9e3779b97f4a7c15ULL, opts);
    case Method::MpSvgd:
      return run_mp_svgd(std::move(init), target, local, StepSchedule::fixed(c.mp_svgd_step),
                         c.iterations, opts);
    case Method::MpSvgdDlr:
      return run_mp_svgd(std::move(init), target, local, StepSchedule::decayed(c.dlr_step, c.dlr_decay),
                         c.iterations, opts);
    case Method::MpSvgdAg:
      return run_mp_svgd(std::move(init), target, local, StepSchedule::adagrad(*c.adagrad_step),
                         c.iterations, opts);
    case Method::SvnCtr:
      return run_svn_ctr(std::move(init), target, kernel, c.svn_radius, c.iterations, opts);
    case Method::Svgd:
      return run_svgd(std::move(init), target, kernel, c.svgd_step, c.iterations, opts);
  }
  throw std::logic_error("unhandled method");
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::TrSviAt: return "tr-svi-at";
    case Method::TrSviKl: return "tr-svi-kl";
    case Method::MpSvgd: return "mp-svgd";
    case Method::MpSvgdDlr: return "mp-svgd-dlr";
    case Method::MpSvgdAg: return "mp-svgd-ag";
    case Method::SvnCtr: return "svn-ctr";
    case Method::Svgd: return "svgd";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::TrSviAt, Method::TrSviKl, Method::MpSvgd, Method::MpSvgdDlr,
                   Method::MpSvgdAg, Method::SvnCtr, Method::Svgd}) {
    if (s == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown method '" + s + "'");
}

HyperparameterDefaults default_hyperparameters(const std::string& family) {
  if (family == "snlp-small") return {family, 1.0, 0.1, 0.99, 0.5, 1.0};
  if (family == "snlp-large") return {family, 3.0, 0.1, 0.99, std::nullopt, 0.1};
  if (family == "bn-30") return {family, 10.0, 0.01, 0.999, 0.05, 0.1};
  if (family == "bn-80") return {family, 60.0, 0.01, 0.99, 0.05, 0.1};
  if (family == "generic") return {family, 1.0, 0.1, 0.99, 0.5, 1.0};
  throw std::invalid_argument("unknown hyperparameter family '" + family + "'");
}

ProblemSpec generate_problem(const json& problem_section) {
  const Section p(problem_section, "problem");
  const std::string type = p.text("type", "");
  const Seed seed = p.count("seed", 0);
  if (type == "bayes_net") {
    const std::string preset = p.text("preset", "");
    BayesNetConfig c;
    if (preset == "bn-30" || preset.empty()) {
      c = BayesNetConfig::preset_30(seed);
    } else if (preset == "bn-80") {
      c = BayesNetConfig::preset_80(seed);
    } else {
      p.fail("preset", "unknown Bayes net preset '" + preset + "'");
    }
    if (p.has("layer_sizes")) c.layer_sizes = p.counts("layer_sizes");
    c.max_parents = p.count("max_parents", c.max_parents);
    c.gmm_nodes = p.count("gmm_nodes", c.gmm_nodes);
    if (p.has("mean_range")) {
      const auto r = p.numbers("mean_range");
      if (r.size() != 2 || r[0] > r[1]) p.fail("mean_range", "expected [low, high]");
      c.mean_min = r[0];
      c.mean_max = r[1];
    }
    if (p.has("variance_range")) {
      const auto r = p.numbers("variance_range");
      if (r.size() != 2 || !(r[0] > 0.0) || r[0] > r[1]) p.fail("variance_range", "expected [low, high] with low > 0");
      c.variance_min = r[0];
      c.variance_max = r[1];
    }
    try {
      return {generate_bayes_net(c)};
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("problem: ") + e.what());
    }
  }
  if (type == "snlp") {
    const std::string preset = p.text("preset", "snlp-small");
    SnlpConfig c;
    if (preset == "snlp-small") {
      c = SnlpConfig::preset_small(seed);
    } else if (preset == "snlp-large") {
      c = SnlpConfig::preset_large(seed);
    } else {
      p.fail("preset", "unknown SNLP preset '" + preset + "'");
    }
    c.unknowns = p.count("unknowns", c.unknowns, 1);
    c.anchors = p.count("anchors", c.anchors);
    c.side = p.positive("side", c.side);
    c.radius = p.positive("radius", c.radius);
    c.noise_variance = p.positive("noise_variance", c.noise_variance);
    c.noiseless = p.flag("noiseless", c.noiseless);
    return {build_snlp(c)};
  }
  if (type == "gaussian") {
    const auto mean = p.numbers("mean");
    const auto& cov = p.raw().at("covariance");
    GaussianProblem g;
    g.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    const auto d = static_cast<Eigen::Index>(mean.size());
    if (!cov.is_array() || cov.size() != mean.size()) p.fail("covariance", "expected a square matrix matching mean");
    g.covariance.resize(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      const auto& row = cov.at(static_cast<std::size_t>(r));
      if (!row.is_array() || row.size() != mean.size()) p.fail("covariance", "expected a square matrix matching mean");
      for (Eigen::Index col = 0; col < d; ++col) g.covariance(r, col) = row.at(static_cast<std::size_t>(col)).get<double>();
    }
    try {
      GaussianTarget check(g.mean, g.covariance);
    } catch (const std::invalid_argument& e) {
      p.fail("covariance", e.what());
    }
    return {g};
  }
  if (type == "file") {
    const std::string path = p.text("path", "");
    if (path.empty()) p.fail("path", "required for type 'file'");
    return load_problem(path);
  }
  p.fail("type", "expected one of bayes_net, snlp, gaussian, file");
}

ExperimentConfig parse_experiment_config(const json& j) {
  const Section root(j, "");
  for (const auto& [key, _] : j.items()) {
    static const std::set<std::string> known{"problem", "method", "kernel", "run", "eval", "output"};
    if (!known.count(key)) root.fail(key, "unknown section");
  }
  if (!root.has("problem")) root.fail("problem", "section is required");

  ExperimentConfig c;
  c.problem = j.at("problem");
  const ProblemSpec problem = generate_problem(c.problem);
  const Section problem_sec(c.problem, "problem");
  c.family = infer_family(problem, problem_sec);
  HyperparameterDefaults defaults;
  try {
    defaults = default_hyperparameters(c.family);
  } catch (const std::invalid_argument& e) {
    problem_sec.fail("preset", e.what());
  }

  const Section method = root.sub("method");
  if (method.has("names")) {
    const auto& names = method.raw().at("names");
    if (!names.is_array() || names.empty()) method.fail("names", "expected a non-empty array of method names");
    c.methods.clear();
    for (const auto& n : names) {
      try {
        c.methods.push_back(method_from_string(n.get<std::string>()));
      } catch (const std::exception&) {
        method.fail("names", "unknown method " + n.dump());
      }
    }
  } else {
    c.methods = {Method::TrSviAt};
  }
  c.iterations = method.count("iterations", c.iterations);
  c.tr_kl_initial_radius = method.sub("tr_svi_kl").positive("initial_radius", 1.0);
  c.mp_svgd_step = method.sub("mp_svgd").positive("step", 0.1);
  const Section dlr = method.sub("mp_svgd_dlr");
  c.dlr_step = dlr.positive("step", defaults.dlr_step);
  c.dlr_decay = dlr.positive("decay", defaults.dlr_decay);
  if (c.dlr_decay > 1.0) dlr.fail("decay", "expected a value in (0, 1]");
  c.adagrad_step = method.sub("mp_svgd_ag").optional_positive("step");
  if (!c.adagrad_step) c.adagrad_step = defaults.adagrad_step;
  for (Method m : c.methods) {
    if (m == Method::MpSvgdAg && !c.adagrad_step) {
      method.sub("mp_svgd_ag").fail("step", "required: no default for family '" + c.family + "'");
    }
  }
  c.svn_radius = method.sub("svn_ctr").positive("radius", defaults.svn_radius);
  c.svgd_step = method.sub("svgd").positive("step", 0.1);

  c.kernel_lengthscale = root.sub("kernel").positive("lengthscale", defaults.lengthscale);

  const Section run = root.sub("run");
  c.particles = run.count("particles", c.particles, 1);
  if (run.has("seeds")) {
    const auto seeds = run.counts("seeds");
    c.seeds.assign(seeds.begin(), seeds.end());
  }
  c.workers = static_cast<int>(run.count("workers", 1, 1));
  const Section init = run.sub("init");
  if (init.has("center")) {
    const auto& v = init.raw().at("center");
    if (v.is_number()) {
      c.init_center = std::vector<double>(std::get_if<SnlpProblem>(&problem.model)
                                              ? std::get<SnlpProblem>(problem.model).dim()
                                              : make_target(problem)->dim(),
                                          v.get<double>());
    } else {
      c.init_center = init.numbers("center");
    }
    if (c.init_center->size() != make_target(problem)->dim()) {
      init.fail("center", "expected a scalar or one value per dimension");
    }
  }
  c.init_scale = init.optional_positive("scale");

  const Section eval = root.sub("eval");
  c.ground_truth = eval.text("ground_truth", "auto");
  static const std::set<std::string> gt_kinds{"auto", "ancestral", "exact", "metropolis", "file", "none"};
  if (!gt_kinds.count(c.ground_truth)) eval.fail("ground_truth", "expected auto, ancestral, exact, metropolis, file or none");
  if (c.ground_truth == "auto") {
    c.ground_truth = problem.type_name() == "bayes_net" ? "ancestral"
                     : problem.type_name() == "gaussian" ? "exact"
                                                         : "metropolis";
  }
  if (c.ground_truth == "ancestral" && problem.type_name() != "bayes_net") {
    eval.fail("ground_truth", "ancestral sampling needs a bayes_net problem");
  }
  if (c.ground_truth == "exact" && problem.type_name() != "gaussian") {
    eval.fail("ground_truth", "exact sampling needs a gaussian problem");
  }
  c.ground_truth_size = eval.count("size", c.ground_truth_size, 2);
  c.ground_truth_path = eval.text("path", "");
  if (c.ground_truth == "file" && c.ground_truth_path.empty()) eval.fail("path", "required when ground_truth is 'file'");
  c.eval_seed = eval.count("seed", c.eval_seed);
  c.reference_cap = eval.count("reference_cap", c.reference_cap, 2);
  c.median_cap = eval.count("median_cap", c.median_cap, 2);
  c.mmd_lengthscale = eval.optional_positive("lengthscale");
  const Section mh = eval.sub("metropolis");
  c.metropolis_chains = mh.count("chains", c.metropolis_chains, 1);
  c.metropolis_chain_length = mh.count("chain_length", c.metropolis_chain_length, 1);
  c.metropolis_proposal_scale = mh.positive("proposal_scale", c.metropolis_proposal_scale);
  c.metropolis_burn_in = mh.count("burn_in", c.metropolis_burn_in);
  c.metropolis_thinning = mh.count("thinning", c.metropolis_thinning, 1);
  if (c.metropolis_burn_in >= c.metropolis_chain_length) mh.fail("burn_in", "must be smaller than chain_length");

  const Section output = root.sub("output");
  c.samples_binary = output.flag("samples_binary", c.samples_binary);
  c.ground_truth_binary = output.flag("ground_truth_binary", c.ground_truth_binary);
  c.trace_wall_time = output.flag("trace_wall_time", c.trace_wall_time);
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  return parse_experiment_config(j);
}

json ExperimentConfig::to_json() const {
  json methods_json = json::array();
  for (Method m : methods) methods_json.push_back(to_string(m));
  json out;
  out["problem"] = problem;
  out["problem"]["hyperparameter_family"] = family;
  out["method"] = {{"names", methods_json},
                   {"iterations", iterations},
                   {"tr_svi_kl", {{"initial_radius", tr_kl_initial_radius}, {"nystrom_fraction", 0.1}}},
                   {"tr_svi_at", {{"b_min", AdaTrustState::kBMin}}},
                   {"mp_svgd", {{"step", mp_svgd_step}}},
                   {"mp_svgd_dlr", {{"step", dlr_step}, {"decay", dlr_decay}}},
                   {"mp_svgd_ag", {{"step", adagrad_step ? json(*adagrad_step) : json(nullptr)},
                                   {"epsilon", StepSchedule::kEpsilon}}},
                   {"svn_ctr", {{"radius", svn_radius}}},
                   {"svgd", {{"step", svgd_step}}}};
  out["kernel"] = {{"lengthscale", kernel_lengthscale}};
  out["run"] = {{"particles", particles},
                {"seeds", seeds},
                {"workers", workers},
                {"init", {{"center", init_center ? json(*init_center) : json("default")},
                          {"scale", init_scale ? json(*init_scale) : json("default")}}}};
  out["eval"] = {{"ground_truth", ground_truth},
                 {"size", ground_truth_size},
                 {"path", ground_truth_path},
                 {"seed", eval_seed},
                 {"reference_cap", reference_cap},
                 {"median_cap", median_cap},
                 {"lengthscale", mmd_lengthscale ? json(*mmd_lengthscale) : json("median_heuristic")},
                 {"metropolis", {{"chains", metropolis_chains},
                                 {"chain_length", metropolis_chain_length},
                                 {"proposal_scale", metropolis_proposal_scale},
                                 {"burn_in", metropolis_burn_in},
                                 {"thinning", metropolis_thinning}}}};
  out["output"] = {{"samples_binary", samples_binary},
                   {"ground_truth_binary", ground_truth_binary},
                   {"trace_wall_time", trace_wall_time}};
  return out;
}

RowMatrix generate_ground_truth(const ExperimentConfig& c, const ProblemSpec& problem,
                                const TargetModel& target) {
  if (c.ground_truth == "none") return {};
  if (c.ground_truth == "file") return read_sample(c.ground_truth_path);
  if (c.ground_truth == "ancestral") {
    return ancestral_sample(std::get<BayesNetSpec>(problem.model), c.ground_truth_size, c.eval_seed);
  }
  if (c.ground_truth == "exact") {
    const auto& g = std::get<GaussianProblem>(problem.model);
    const Matrix chol = Eigen::LLT<Matrix>(g.covariance).matrixL();
    std::mt19937_64 rng(c.eval_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    RowMatrix out(static_cast<Eigen::Index>(c.ground_truth_size), g.mean.size());
    Vector z(g.mean.size());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
      out.row(r) = (g.mean + chol * z).transpose();
    }
    return out;
  }
  // Metropolis chains started at the true configuration (SNLP) or the origin.
  Vector start = Vector::Zero(static_cast<Eigen::Index>(target.dim()));
  if (const auto* snlp = std::get_if<SnlpProblem>(&problem.model)) start = snlp->truth();
  std::vector<MetropolisResult> chains(c.metropolis_chains);
  parallel_for(chains.size(), c.workers, [&](std::size_t k) {
    chains[k] = metropolis_reference(target, start, c.metropolis_chain_length,
                                     c.metropolis_proposal_scale, c.metropolis_burn_in,
                                     c.metropolis_thinning, c.eval_seed + k);
  });
  Eigen::Index rows = 0;
  for (const auto& ch : chains) rows += ch.samples.rows();
  RowMatrix out(rows, static_cast<Eigen::Index>(target.dim()));
  Eigen::Index r = 0;
  for (const auto& ch : chains) {
    out.middleRows(r, ch.samples.rows()) = ch.samples;
    r += ch.samples.rows();
  }
  return out;
}

RowMatrix initial_particles(const ExperimentConfig& c, const ProblemSpec& problem,
                            std::size_t dim, Seed seed) {
  Vector center = Vector::Zero(static_cast<Eigen::Index>(dim));
  double scale = 1.0;
  if (const auto* snlp = std::get_if<SnlpProblem>(&problem.model)) {
    center.setConstant(0.5 * snlp->side);
    scale = 0.25 * snlp->side;
  }
  if (c.init_center) center = Eigen::Map<const Vector>(c.init_center->data(), static_cast<Eigen::Index>(dim));
  if (c.init_scale) scale = *c.init_scale;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix out(static_cast<Eigen::Index>(c.particles), static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index k = 0; k < out.cols(); ++k) out(r, k) = center[k] + scale * normal(rng);
  }
  return out;
}

json metric_report_to_json(const MetricReport& r) {
  return {{"metric", r.metric},
          {"value", r.value},
          {"lengthscale", r.lengthscale},
          {"candidate_size", r.candidate_size},
          {"reference_size", r.reference_size},
          {"reference_subsample", r.reference_subsample},
          {"seed", r.seed}};
}

void run_experiment(const ExperimentConfig& c, const fs::path& out_dir) {
  const fs::path staging = out_dir.string() + ".partial";
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    throw std::runtime_error("output directory '" + out_dir.string() + "' exists and is not empty");
  }
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    const auto total_start = std::chrono::steady_clock::now();
    const ProblemSpec problem = generate_problem(c.problem);
    const auto target = make_target(problem);
    const std::size_t dim = target->dim();
    const auto names = dimension_names(*target);
    save_problem(staging / "problem.json", problem);

    const RowMatrix truth = generate_ground_truth(c, problem, *target);
    std::optional<MmdReference> reference;
    MetricReport ref_info;
    if (truth.rows() > 0) {
      if (c.ground_truth != "file") {
        if (c.ground_truth_binary) {
          write_sample_binary(staging / "ground_truth.bin", truth);
        } else {
          write_sample_csv(staging / "ground_truth.csv", truth, names);
        }
      }
      ref_info.reference_size = static_cast<std::size_t>(truth.rows());
      ref_info.lengthscale = c.mmd_lengthscale ? *c.mmd_lengthscale
                                               : median_heuristic(truth, c.eval_seed, c.median_cap);
      RowMatrix sub = subsample_rows(truth, c.reference_cap, c.eval_seed);
      ref_info.reference_subsample = static_cast<std::size_t>(sub.rows());
      reference.emplace(std::move(sub), ref_info.lengthscale, c.workers);
    }

    std::vector<RowMatrix> inits;
    for (Seed s : c.seeds) {
      inits.push_back(initial_particles(c, problem, dim, s));
      write_sample_csv(staging / ("init_seed" + std::to_string(s) + ".csv"), inits.back(), names);
    }

    struct Job {
      Method method;
      std::size_t seed_index;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < c.seeds.size(); ++s) {
      for (Method m : c.methods) jobs.push_back({m, s});
    }
    std::vector<JobOutput> outputs(jobs.size());
    const int outer = std::min<int>(c.workers, static_cast<int>(jobs.size()));
    const int inner = std::max(1, c.workers / std::max(1, outer));
    parallel_for(jobs.size(), outer, [&](std::size_t k) {
      const auto& job = jobs[k];
      const Seed seed = c.seeds[job.seed_index];
      ParticleSet init{inits[job.seed_index], 0, seed};
      const auto start = std::chrono::steady_clock::now();
      outputs[k].run = run_method(job.method, c, std::move(init), *target, seed, inner);
      outputs[k].wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (reference) outputs[k].mmd = (*reference)(outputs[k].run.particles.positions, inner);
    });

    json runs = json::array();
    json timings = json::object();
    std::map<std::string, std::vector<double>> by_method;
    std::vector<std::string> warnings;
    for (const auto& w : std::visit([](const auto& m) -> std::vector<std::string> {
           if constexpr (std::is_same_v<std::decay_t<decltype(m)>, SnlpProblem>) return m.warnings;
           return {};
         }, problem.model)) {
      warnings.push_back("problem: " + w);
    }
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      const auto& job = jobs[k];
      const Seed seed = c.seeds[job.seed_index];
      const std::string stem = run_stem(job.method, seed);
      const auto& out = outputs[k];
      write_trace_csv(staging / ("trace_" + stem + ".csv"), out.run.trace, c.trace_wall_time);
      write_sample_csv(staging / ("samples_" + stem + ".csv"), out.run.particles.positions, names);
      if (c.samples_binary) write_sample_binary(staging / ("samples_" + stem + ".bin"), out.run.particles.positions);
      for (const auto& w : out.run.trace.warnings) warnings.push_back(stem + ": " + w);
      json run = {{"method", to_string(job.method)},
                  {"seed", seed},
                  {"iterations", out.run.trace.rows.size() - 1},
                  {"initial_gradient_magnitude", out.run.trace.rows.front().gradient_magnitude},
                  {"final_gradient_magnitude", out.run.trace.rows.back().gradient_magnitude},
                  {"converged", out.run.trace.converged}};
      if (reference) {
        run["mmd"] = out.mmd;
        by_method[to_string(job.method)].push_back(out.mmd);
      }
      runs.push_back(std::move(run));
      timings[stem] = out.wall_ms;
    }

    json metrics = {{"runs", runs}};
    if (reference) {
      metrics["metric"] = "mmd_squared_biased";
      metrics["lengthscale"] = ref_info.lengthscale;
      metrics["reference_size"] = ref_info.reference_size;
      metrics["reference_subsample"] = ref_info.reference_subsample;
      metrics["candidate_size"] = c.particles;
      metrics["seed"] = c.eval_seed;
      json summary = json::object();
      for (Method m : c.methods) {
        const auto& v = by_method[to_string(m)];
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        summary[to_string(m)] = {{"mean", mean}, {"std", sd}, {"runs", v.size()}};
      }
      metrics["summary"] = summary;
    }
    write_json(staging / "metrics.json", metrics);

    timings["total"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - total_start).count();
    write_json(staging / "timings.json", timings);

    json files = json::array();
    std::vector<std::string> listed;
    for (const auto& entry : fs::directory_iterator(staging)) listed.push_back(entry.path().filename().string());
    listed.push_back("manifest.json");
    std::sort(listed.begin(), listed.end());
    for (const auto& f : listed) files.push_back(f);
    json manifest = {{"schema_version", 1},
                     {"config", c.to_json()},
                     {"seeds", c.seeds},
                     {"eval_seed", c.eval_seed},
                     {"dim", dim},
                     {"problem_type", problem.type_name()},
                     {"files", files},
                     {"warnings", warnings}};
    write_json(staging / "manifest.json", manifest);

    if (fs::exists(out_dir)) fs::remove(out_dir);
    if (out_dir.has_parent_path()) fs::create_directories(out_dir.parent_path());
    fs::rename(staging, out_dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
}

std::vector<fs::path> export_marginals(const fs::path& sample_csv, const FactorLayout& layout,
                                       const std::vector<std::size_t>& factors,
                                       const fs::path& out_dir) {
  const NamedSample sample = read_sample_csv(sample_csv);
  if (static_cast<std::size_t>(sample.values.cols()) != layout.total_dim()) {
    throw std::invalid_argument("export_marginals: sample has " + std::to_string(sample.values.cols()) +
                                " columns, layout expects " + std::to_string(layout.total_dim()));
  }
  for (std::size_t a : factors) {
    if (a >= layout.factor_count()) {
      throw std::out_of_range("export_marginals: unknown factor index " + std::to_string(a));
    }
  }
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (std::size_t a : factors) {
    const auto& f = layout.factor(a);
    const RowMatrix cols = sample.values.middleCols(static_cast<Eigen::Index>(f.offset),
                                                    static_cast<Eigen::Index>(f.size));
    std::vector<std::string> names(sample.names.begin() + static_cast<std::ptrdiff_t>(f.offset),
                                   sample.names.begin() + static_cast<std::ptrdiff_t>(f.end()));
    const fs::path path = out_dir / ("marginal_factor" + std::to_string(a) + ".csv");
    write_sample_csv(path, cols, names);
    written.push_back(path);
  }
  return written;
}

}  // namespace tsvi
