#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "tsvi/bayes_net.hpp"
#include "tsvi/eval.hpp"
#include "tsvi/io.hpp"
#include "tsvi/snlp.hpp"

using namespace tsvi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tsvi_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("mmd matches the direct double sum and is symmetric") {
  std::mt19937_64 rng(1);
  const RowMatrix X = oracle::random_rows(15, 3, rng);
  RowMatrix Y = oracle::random_rows(22, 3, rng);
  Y.array() += 0.5;
  const double want = oracle::mmd_naive(X, Y, 1.3);
  CHECK(mmd(X, Y, 1.3) == doctest::Approx(want).epsilon(1e-12));
  CHECK(mmd(X, Y, 1.3) == mmd(Y, X, 1.3));
  CHECK(mmd(X, Y, 1.3, 4) == mmd(X, Y, 1.3, 1));
  CHECK(MmdReference(Y, 1.3)(X) == doctest::Approx(want).epsilon(1e-12));
  CHECK(mmd(X, X, 0.7) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(mmd(X, Y, 1.3) >= 0.0);
}

TEST_CASE("mmd rejects mismatched or empty samples") {
  CHECK_THROWS_AS(mmd(RowMatrix::Zero(2, 2), RowMatrix::Zero(2, 3), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(mmd(RowMatrix::Zero(0, 2), RowMatrix::Zero(2, 2), 1.0), std::invalid_argument);
}

TEST_CASE("evaluate_mmd uses the median heuristic and caps the reference") {
  std::mt19937_64 rng(2);
  const RowMatrix ref = oracle::random_rows(300, 2, rng);
  const RowMatrix cand = oracle::random_rows(20, 2, rng);
  MmdOptions o;
  o.reference_cap = 100;
  o.seed = 4;
  const auto r = evaluate_mmd(cand, ref, o);
  CHECK(r.reference_size == 300);
  CHECK(r.reference_subsample == 100);
  CHECK(r.lengthscale == doctest::Approx(median_heuristic(ref)));
  CHECK(r.value == doctest::Approx(oracle::mmd_naive(cand, subsample_rows(ref, 100, 4), r.lengthscale)).epsilon(1e-12));
  CHECK(r.metric == "mmd_squared_biased");
}

TEST_CASE("subsample_rows is seeded and keeps rows intact") {
  std::mt19937_64 rng(3);
  const RowMatrix X = oracle::random_rows(50, 2, rng);
  const RowMatrix a = subsample_rows(X, 10, 7);
  CHECK(a == subsample_rows(X, 10, 7));
  CHECK(a.rows() == 10);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    bool found = false;
    for (Eigen::Index s = 0; s < X.rows(); ++s) found = found || X.row(s) == a.row(r);
    CHECK(found);
  }
  CHECK(subsample_rows(X, 100, 1) == X);
}

TEST_CASE("gradient magnitude is the flattened norm") {
  RowMatrix G(2, 2);
  G << 1.0, 2.0, 2.0, 4.0;
  CHECK(gradient_magnitude(G) == doctest::Approx(5.0));
  const Eigen::Map<const Vector> flat(G.data(), G.size());
  CHECK(gradient_magnitude(G) == doctest::Approx(flat.norm()).epsilon(1e-15));
}

TEST_CASE("metropolis samples a gaussian") {
  Matrix cov(2, 2);
  cov << 1.0, 0.5, 0.5, 2.0;
  const GaussianTarget t(Vector::Zero(2), cov);
  const auto r = metropolis_reference(t, Vector::Zero(2), 200000, 1.5, 5000, 5, 3);
  CHECK(r.samples.rows() == 39000);
  CHECK(r.acceptance_rate > 0.2);
  CHECK(r.acceptance_rate < 0.9);
  const Vector mean = r.samples.colwise().mean().transpose();
  CHECK(mean.norm() < 0.1);
  const RowMatrix c = r.samples.rowwise() - mean.transpose();
  const Matrix emp = c.transpose() * c / static_cast<double>(c.rows() - 1);
  CHECK((emp - cov).norm() < 0.15);
  CHECK(metropolis_accept(0.1, 0.99));
  CHECK_FALSE(metropolis_accept(std::log(0.5), 0.6));
  CHECK(metropolis_accept(std::log(0.5), 0.4));
}

TEST_CASE("problem specs round-trip through json") {
  BayesNetConfig c;
  c.layer_sizes = {3, 3};
  c.gmm_nodes = 2;
  c.seed = 2;
  const ProblemSpec bn{generate_bayes_net(c)};
  const ProblemSpec back = problem_from_json(problem_to_json(bn));
  CHECK(std::get<BayesNetSpec>(back.model) == std::get<BayesNetSpec>(bn.model));

  const ProblemSpec sn{build_snlp(SnlpConfig::preset_small(3))};
  const auto dir = scratch("problem");
  save_problem(dir / "p.json", sn);
  const auto loaded = std::get<SnlpProblem>(load_problem(dir / "p.json").model);
  const auto& orig = std::get<SnlpProblem>(sn.model);
  CHECK(loaded.edges == orig.edges);
  CHECK(loaded.true_positions == orig.true_positions);
  CHECK(loaded.radius == orig.radius);
  CHECK(make_target(sn)->log_density(orig.truth()) == make_target(ProblemSpec{loaded})->log_density(orig.truth()));

  nlohmann::json bad = problem_to_json(bn);
  bad["schema_version"] = 99;
  CHECK_THROWS(problem_from_json(bad));
}

TEST_CASE("sample csv and binary files round-trip exactly") {
  std::mt19937_64 rng(4);
  RowMatrix X = oracle::random_rows(7, 3, rng);
  X(0, 0) = 1e-300;
  X(1, 1) = -0.1;
  const auto dir = scratch("samples");
  write_sample_csv(dir / "s.csv", X, {"a", "b", "c"});
  const auto back = read_sample_csv(dir / "s.csv");
  CHECK(back.names == std::vector<std::string>{"a", "b", "c"});
  CHECK(back.values == X);
  write_sample_binary(dir / "s.bin", X);
  CHECK(read_sample_binary(dir / "s.bin") == X);
  CHECK(read_sample(dir / "s.bin") == X);
  CHECK(read_sample(dir / "s.csv") == X);
  CHECK_THROWS(write_sample_csv(dir / "t.csv", X, {"a"}));
}

TEST_CASE("trace csv uses empty fields for missing values") {
  Trace t;
  TraceRow r0;
  r0.gradient_magnitude = 2.0;
  r0.radius_or_step = 1.0;
  r0.wall_ms = 3.5;
  TraceRow r1 = r0;
  r1.iteration = 1;
  r1.rho = 0.5;
  r1.accepted = false;
  t.rows = {r0, r1};
  const auto dir = scratch("trace");
  write_trace_csv(dir / "a.csv", t, true);
  const std::string text = slurp(dir / "a.csv");
  CHECK(text ==
        "iteration,gradient_magnitude,radius_or_step,rho,approx_kl_u,approx_kl_o,accepted,wall_ms\n"
        "0,2,1,,,,1,3.5\n"
        "1,2,1,0.5,,,0,3.5\n");
  write_trace_csv(dir / "b.csv", t, false);
  CHECK(slurp(dir / "b.csv").find("3.5") == std::string::npos);
}

TEST_CASE("dimension names follow the target") {
  const SnlpTarget t(build_snlp(SnlpConfig::preset_small(1)));
  const auto names = dimension_names(t);
  CHECK(names.front() == "s0_x");
  CHECK(names.back() == "s5_y");
}
