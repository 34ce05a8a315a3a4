#include "tsvi/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tsvi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return in;
}

json bayes_net_to_json(const BayesNetSpec& spec) {
  json nodes = json::array();
  for (const auto& node : spec.nodes) {
    json n = {{"kind", to_string(node.kind)}, {"variance", node.variance}};
    if (node.kind == NodeKind::GaussianRoot) {
      n["mean"] = node.mean;
    } else {
      n["parents"] = node.parents;
      n["weights"] = node.weights;
    }
    if (node.kind == NodeKind::LinearGmm) {
      n["component_weights"] = {node.component_weights[0], node.component_weights[1]};
    }
    nodes.push_back(std::move(n));
  }
  return {{"layers", spec.layers}, {"nodes", nodes}};
}

BayesNetSpec bayes_net_from_json(const json& j) {
  BayesNetSpec spec;
  spec.layers = j.at("layers").get<std::vector<std::vector<std::size_t>>>();
  for (const auto& n : j.at("nodes")) {
    BayesNode node;
    node.kind = node_kind_from_string(n.at("kind").get<std::string>());
    node.variance = n.at("variance").get<double>();
    if (node.kind == NodeKind::GaussianRoot) {
      node.mean = n.at("mean").get<double>();
    } else {
      node.parents = n.at("parents").get<std::vector<std::size_t>>();
      node.weights = n.at("weights").get<std::vector<std::vector<double>>>();
    }
    if (node.kind == NodeKind::LinearGmm) {
      const auto cw = n.at("component_weights").get<std::vector<double>>();
      if (cw.size() != 2) throw std::invalid_argument("bayes net: two component weights required");
      node.component_weights = {cw[0], cw[1]};
    }
    spec.nodes.push_back(std::move(node));
  }
  spec.validate();
  return spec;
}

json points_to_json(const std::vector<Point2>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back({p.x(), p.y()});
  return arr;
}

std::vector<Point2> points_from_json(const json& j) {
  std::vector<Point2> pts;
  for (const auto& p : j) {
    const auto v = p.get<std::vector<double>>();
    if (v.size() != 2) throw std::invalid_argument("snlp: positions must be 2-vectors");
    pts.emplace_back(v[0], v[1]);
  }
  return pts;
}

json snlp_to_json(const SnlpProblem& p) {
  json edges = json::array();
  for (const auto& e : p.edges) edges.push_back({{"i", e.i}, {"j", e.j}, {"measured", e.measured}});
  return {{"side", p.side},           {"radius", p.radius},
          {"noise_variance", p.noise_variance},
          {"unknowns", points_to_json(p.true_positions)},
          {"anchors", points_to_json(p.anchors)},
          {"edges", edges},           {"warnings", p.warnings}};
}

SnlpProblem snlp_from_json(const json& j) {
  SnlpProblem p;
  p.side = j.at("side").get<double>();
  p.radius = j.at("radius").get<double>();
  p.noise_variance = j.at("noise_variance").get<double>();
  p.true_positions = points_from_json(j.at("unknowns"));
  p.anchors = points_from_json(j.at("anchors"));
  for (const auto& e : j.at("edges")) {
    p.edges.push_back({e.at("i").get<std::size_t>(), e.at("j").get<std::size_t>(),
                       e.at("measured").get<double>()});
  }
  if (j.contains("warnings")) p.warnings = j.at("warnings").get<std::vector<std::string>>();
  p.validate();
  return p;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string ProblemSpec::type_name() const {
  if (std::holds_alternative<BayesNetSpec>(model)) return "bayes_net";
  if (std::holds_alternative<SnlpProblem>(model)) return "snlp";
  return "gaussian";
}

json problem_to_json(const ProblemSpec& problem) {
  json body;
  if (const auto* bn = std::get_if<BayesNetSpec>(&problem.model)) {
    body = bayes_net_to_json(*bn);
  } else if (const auto* snlp = std::get_if<SnlpProblem>(&problem.model)) {
    body = snlp_to_json(*snlp);
  } else {
    const auto& g = std::get<GaussianProblem>(problem.model);
    body = {{"mean", std::vector<double>(g.mean.data(), g.mean.data() + g.mean.size())},
            {"covariance", matrix_to_json(g.covariance)}};
  }
  json out = {{"schema_version", kProblemSchemaVersion}, {"type", problem.type_name()}};
  out.update(body);
  return out;
}

ProblemSpec problem_from_json(const json& j) {
  const int version = j.at("schema_version").get<int>();
  if (version != kProblemSchemaVersion) {
    throw std::invalid_argument("problem spec: unsupported schema_version " + std::to_string(version));
  }
  const auto type = j.at("type").get<std::string>();
  if (type == "bayes_net") return {bayes_net_from_json(j)};
  if (type == "snlp") return {snlp_from_json(j)};
  if (type == "gaussian") {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto cov = j.at("covariance").get<std::vector<std::vector<double>>>();
    GaussianProblem g;
    g.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    g.covariance.resize(static_cast<Eigen::Index>(cov.size()), static_cast<Eigen::Index>(cov.size()));
    for (std::size_t r = 0; r < cov.size(); ++r) {
      if (cov[r].size() != cov.size()) throw std::invalid_argument("gaussian: covariance must be square");
      for (std::size_t c = 0; c < cov.size(); ++c) {
        g.covariance(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cov[r][c];
      }
    }
    return {g};
  }
  throw std::invalid_argument("problem spec: unknown type '" + type + "'");
}

void save_problem(const fs::path& path, const ProblemSpec& problem) {
  auto out = open_out(path);
  out << problem_to_json(problem).dump(2) << '\n';
}

ProblemSpec load_problem(const fs::path& path) {
  auto in = open_in(path);
  return problem_from_json(json::parse(in));
}

std::unique_ptr<TargetModel> make_target(const ProblemSpec& problem) {
  if (const auto* bn = std::get_if<BayesNetSpec>(&problem.model)) {
    return std::make_unique<BayesNetTarget>(*bn);
  }
  if (const auto* snlp = std::get_if<SnlpProblem>(&problem.model)) {
    return std::make_unique<SnlpTarget>(*snlp);
  }
  const auto& g = std::get<GaussianProblem>(problem.model);
  return std::make_unique<GaussianTarget>(g.mean, g.covariance);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_sample_csv(const fs::path& path, const RowMatrix& sample,
                      const std::vector<std::string>& names) {
  if (names.size() != static_cast<std::size_t>(sample.cols())) {
    throw std::invalid_argument("write_sample_csv: one name per column required");
  }
  auto out = open_out(path);
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  for (Eigen::Index r = 0; r < sample.rows(); ++r) {
    for (Eigen::Index c = 0; c < sample.cols(); ++c) out << (c ? "," : "") << format_double(sample(r, c));
    out << '\n';
  }
}

NamedSample read_sample_csv(const fs::path& path) {
  auto in = open_in(path);
  NamedSample out;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path.string() + "': empty CSV");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.names.push_back(cell);
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        throw std::runtime_error("'" + path.string() + "': bad number on data row " + std::to_string(rows + 1));
      }
      values.push_back(v);
      ++cols;
    }
    if (cols != out.names.size()) {
      throw std::runtime_error("'" + path.string() + "': row " + std::to_string(rows + 1) +
                               " has " + std::to_string(cols) + " columns");
    }
    ++rows;
  }
  out.values = Eigen::Map<RowMatrix>(values.data(), static_cast<Eigen::Index>(rows),
                                     static_cast<Eigen::Index>(out.names.size()));
  return out;
}

void write_sample_binary(const fs::path& path, const RowMatrix& sample) {
  static_assert(std::endian::native == std::endian::little, "binary sample format assumes a little-endian host");
  auto out = open_out(path, std::ios::binary);
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(sample.rows()),
                                 static_cast<std::uint64_t>(sample.cols())};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(sample.data()),
            static_cast<std::streamsize>(sample.size() * sizeof(double)));
}

RowMatrix read_sample_binary(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::uint64_t dims[2] = {0, 0};
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in) throw std::runtime_error("'" + path.string() + "': truncated header");
  const auto size = fs::file_size(path);
  if (size != sizeof dims + dims[0] * dims[1] * sizeof(double)) {
    throw std::runtime_error("'" + path.string() + "': size does not match header");
  }
  RowMatrix out(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size() * sizeof(double)));
  return out;
}

RowMatrix read_sample(const fs::path& path) {
  if (path.extension() == ".bin") return read_sample_binary(path);
  return read_sample_csv(path).values;
}

std::vector<std::string> dimension_names(const TargetModel& target) {
  std::vector<std::string> names;
  for (std::size_t d = 0; d < target.dim(); ++d) names.push_back(target.dim_name(d));
  return names;
}

void write_trace_csv(const fs::path& path, const Trace& trace, bool include_wall_time) {
  auto out = open_out(path);
  out << "iteration,gradient_magnitude,radius_or_step,rho,approx_kl_u,approx_kl_o,accepted,wall_ms\n";
  for (const auto& r : trace.rows) {
    out << r.iteration << ',' << format_double(r.gradient_magnitude) << ','
        << format_double(r.radius_or_step) << ',' << format_double(r.rho) << ','
        << format_double(r.approx_kl_u) << ',' << format_double(r.approx_kl_o) << ','
        << (r.accepted ? 1 : 0) << ',' << (include_wall_time ? format_double(r.wall_ms) : "")
        << '\n';
  }
}

}  // namespace tsvi
