#include "toricq/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace toricq {

namespace {

using nlohmann::json;

std::string line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::shared_ptr<const Polytope> parse_polytope(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw PolytopeError(origin + ": " + line_of(text, e.byte) + ": invalid JSON");
  }
  try {
    if (!doc.is_object()) throw PolytopeError("top level must be an object");
    const int dim = doc.at("dim").get<int>();
    std::vector<Facet> facets;
    for (const auto& f : doc.at("facets")) {
      Facet facet;
      for (const auto& n : f.at("normal")) facet.normal.push_back(n.get<std::int64_t>());
      const auto& off = f.at("offset");
      if (off.is_string()) {
        facet.offset = parse_rational(off.get<std::string>());
      } else if (off.is_number_integer()) {
        facet.offset = Rational(off.get<std::int64_t>());
      } else {
        throw PolytopeError("facet offset must be an integer or a \"p/q\" string");
      }
      facets.push_back(std::move(facet));
    }
    const std::string name = doc.value("name", std::string{});
    return std::make_shared<const Polytope>(Polytope::from_facets(dim, std::move(facets), name));
  } catch (const json::exception& e) {
    throw PolytopeError(origin + ": " + e.what());
  } catch (const PolytopeError& e) {
    throw PolytopeError(origin + ": " + e.what());
  }
}

std::shared_ptr<const Polytope> load_polytope(const std::filesystem::path& path) {
  return parse_polytope(read_file(path), path.string());
}

void write_weights_csv(const std::filesystem::path& path, const HermitianWeights& h) {
  auto out = open_out(path);
  const int m = h.dim();
  out << "# k=" << h.k() << " polytope=" << h.points().polytope().name() << "\n";
  for (int j = 0; j < m; ++j) out << "alpha_" << (j + 1) << ",";
  out << "logw\n";
  for (std::size_t a = 0; a < h.size(); ++a) {
    for (int j = 0; j < m; ++j) out << h.points()[a][j] << ",";
    out << format_double(h.logw()[a]) << "\n";
  }
}

HermitianWeights read_weights_csv(const std::filesystem::path& path, std::shared_ptr<const LatticePointSet> points) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<double> logw;
  const int m = points->dim();
  std::size_t row = 0, lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != m + 1 || row >= points->size())
      throw std::runtime_error(path.string() + ": line " + std::to_string(lineno) + ": unexpected row");
    for (int j = 0; j < m; ++j)
      if (std::stoll(cells[j]) != (*points)[row][j])
        throw std::runtime_error(path.string() + ": line " + std::to_string(lineno) + ": lattice point out of order");
    logw.push_back(std::stod(cells[m]));
    ++row;
  }
  if (row != points->size()) throw std::runtime_error(path.string() + ": expected " + std::to_string(points->size()) + " rows");
  return {std::move(points), std::move(logw)};
}

void write_run_log(const std::filesystem::path& path, const IterationState& st) {
  auto out = open_out(path);
  const int m = st.H.dim();
  out << "iter,residual";
  for (int j = 0; j < m; ++j) out << ",v_" << (j + 1);
  out << ",sup_twisted_bergman,inf_twisted_bergman\n";
  for (const auto& rec : st.history) {
    out << rec.iter << "," << format_double(rec.residual);
    for (double x : rec.v) out << "," << format_double(x);
    out << "," << format_double(rec.tb_sup) << "," << format_double(rec.tb_inf) << "\n";
  }
}

}  // namespace toricq
