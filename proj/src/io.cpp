#include "polymom/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace polymom {

using nlohmann::json;

namespace {

const json& field(const json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError("missing field '" + key + "'");
  return j.at(key);
}

int int_field(const json& j, const std::string& key) {
  const json& v = field(j, key);
  if (!v.is_number_integer()) throw SchemaError("field '" + key + "' must be an integer");
  return v.get<int>();
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError("field '" + where + "' must hold numbers");
  return v.get<double>();
}

void flatten(const json& v, std::vector<double>& out, const std::string& where) {
  if (v.is_array()) {
    for (const auto& e : v) flatten(e, out, where);
  } else {
    out.push_back(number(v, where));
  }
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw SchemaError("field '" + where + "' must be a nonempty array of rows");
  const auto rows = static_cast<int>(j.size());
  if (!j.front().is_array()) throw SchemaError("field '" + where + "' must be an array of rows");
  const auto cols = static_cast<int>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols)
      throw SchemaError("field '" + where + "' row " + std::to_string(i) + " has the wrong length");
    for (int c = 0; c < cols; ++c) m(i, c) = number(j[i][c], where);
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError("field '" + where + "' must be an array");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], where);
  return v;
}

json network_to_json(const PolyNetwork& net) {
  json j;
  j["r"] = net.r;
  j["d"] = net.d;
  switch (net.kind) {
    case NetworkKind::quadratic: {
      j["kind"] = "quadratic";
      json q = json::array();
      for (const auto& m : net.Q) q.push_back(vector_to_json(vec(m)));
      j["Q"] = std::move(q);
      break;
    }
    case NetworkKind::lowrank: {
      j["kind"] = "lowrank";
      j["omega"] = net.omega;
      j["ell"] = net.ell;
      json comps = json::array();
      for (const auto& unit : net.components) {
        json u = json::array();
        for (const auto& v : unit) u.push_back(vector_to_json(v));
        comps.push_back(std::move(u));
      }
      j["components"] = std::move(comps);
      break;
    }
    case NetworkKind::tensor: {
      j["kind"] = "tensor";
      j["omega"] = net.omega;
      j["layout"] = "sorted";
      json t = json::array();
      for (const auto& s : net.tensors) t.push_back(vector_to_json(s.values()));
      j["T"] = std::move(t);
      break;
    }
  }
  if (net.smoothing) j["smoothing"] = {{"rho", net.smoothing->rho}, {"seed", net.smoothing->seed}};
  return j;
}

PolyNetwork network_from_json(const json& j) {
  const json& kind = field(j, "kind");
  if (!kind.is_string()) throw SchemaError("field 'kind' must be a string");
  const int r = int_field(j, "r");
  const int d = int_field(j, "d");
  if (r < 1 || d < 1) throw SchemaError("fields 'r' and 'd' must be positive");
  PolyNetwork net;
  const std::string k = kind.get<std::string>();
  try {
    if (k == "quadratic") {
      const json& q = field(j, "Q");
      if (!q.is_array() || static_cast<int>(q.size()) != d) throw SchemaError("field 'Q' must hold d matrices");
      std::vector<Eigen::MatrixXd> mats;
      for (const auto& e : q) {
        std::vector<double> flat;
        flatten(e, flat, "Q");
        if (static_cast<int>(flat.size()) != r * r) throw SchemaError("field 'Q': each matrix needs r*r entries");
        mats.push_back(mat(Eigen::Map<Eigen::VectorXd>(flat.data(), r * r)));
      }
      net = PolyNetwork::quadratic(std::move(mats));
    } else if (k == "lowrank") {
      const int omega = int_field(j, "omega");
      const int ell = int_field(j, "ell");
      const json& c = field(j, "components");
      if (!c.is_array() || static_cast<int>(c.size()) != d) throw SchemaError("field 'components' must hold d units");
      std::vector<std::vector<Eigen::VectorXd>> comps;
      for (const auto& unit : c) {
        if (!unit.is_array() || static_cast<int>(unit.size()) != ell)
          throw SchemaError("field 'components': each unit needs ell vectors");
        std::vector<Eigen::VectorXd> vs;
        for (const auto& v : unit) {
          Eigen::VectorXd x = vector_from_json(v, "components");
          if (x.size() != r) throw SchemaError("field 'components': each vector needs r entries");
          vs.push_back(std::move(x));
        }
        comps.push_back(std::move(vs));
      }
      net = PolyNetwork::lowrank(omega, std::move(comps));
    } else if (k == "tensor") {
      const int omega = int_field(j, "omega");
      const json& t = field(j, "T");
      if (!t.is_array() || static_cast<int>(t.size()) != d) throw SchemaError("field 'T' must hold d tensors");
      std::vector<SymTensor> ts;
      for (const auto& e : t) ts.emplace_back(omega, r, vector_from_json(e, "T"));
      net = PolyNetwork::general(std::move(ts));
    } else {
      throw SchemaError("field 'kind' must be quadratic, lowrank or tensor");
    }
  } catch (const SchemaError&) {
    throw;
  } catch (const DomainError& e) {
    throw SchemaError(std::string("network: ") + e.what());
  }
  if (net.r != r || net.d != d) throw SchemaError("fields 'r'/'d' disagree with the stored units");
  if (j.contains("smoothing")) {
    const json& s = j.at("smoothing");
    net.smoothing = SmoothingInfo{number(field(s, "rho"), "smoothing.rho"), field(s, "seed").get<std::uint64_t>()};
  }
  return net;
}

json moments_to_json(const QuadraticMomentTable& m) {
  const int d = m.d();
  json t = json::array();
  for (int a = 0; a < d; ++a) {
    json plane = json::array();
    for (int b = 0; b < d; ++b) {
      json row = json::array();
      for (int c = 0; c < d; ++c) row.push_back(m.T(a, b, c));
      plane.push_back(std::move(row));
    }
    t.push_back(std::move(plane));
  }
  return {{"kind", "quadratic"}, {"mu", vector_to_json(m.mu)}, {"S", matrix_to_json(m.S)}, {"T", t}, {"eta", m.eta}};
}

json moments_to_json(const PairMomentTable& m) {
  return {{"kind", "pair"}, {"S", matrix_to_json(m.S)}, {"eta", m.eta}};
}

QuadraticMomentTable quadratic_moments_from_json(const json& j) {
  if (field(j, "kind") != "quadratic") throw SchemaError("field 'kind' must be 'quadratic'");
  QuadraticMomentTable m;
  m.mu = vector_from_json(field(j, "mu"), "mu");
  m.S = matrix_from_json(field(j, "S"), "S");
  m.eta = number(field(j, "eta"), "eta");
  const int d = m.d();
  std::vector<double> flat;
  flatten(field(j, "T"), flat, "T");
  if (static_cast<int>(flat.size()) != d * d * d) throw SchemaError("field 'T' must hold d^3 entries");
  m.T = Cube(d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c) m.T(a, b, c) = flat[(static_cast<size_t>(a) * d + b) * d + c];
  try {
    m.validate();
  } catch (const DomainError& e) {
    throw SchemaError(e.what());
  }
  return m;
}

PairMomentTable pair_moments_from_json(const json& j) {
  if (field(j, "kind") != "pair") throw SchemaError("field 'kind' must be 'pair'");
  PairMomentTable m;
  m.S = matrix_from_json(field(j, "S"), "S");
  m.eta = number(field(j, "eta"), "eta");
  try {
    m.validate();
  } catch (const DomainError& e) {
    throw SchemaError(e.what());
  }
  return m;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

void write_samples_csv(std::ostream& os, const Eigen::MatrixXd& z) {
  os << "# polymom-samples v1\n";
  for (int a = 0; a < z.cols(); ++a) os << (a ? "," : "") << 'z' << (a + 1);
  os << '\n' << std::setprecision(17);
  for (Eigen::Index k = 0; k < z.rows(); ++k) {
    for (int a = 0; a < z.cols(); ++a) os << (a ? "," : "") << z(k, a);
    os << '\n';
  }
}

Eigen::MatrixXd read_samples_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  bool header = true;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw SchemaError("samples line " + std::to_string(lineno) + ": not a number");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw SchemaError("samples line " + std::to_string(lineno) + ": wrong column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw SchemaError("samples file holds no rows");
  Eigen::MatrixXd z(rows.size(), rows.front().size());
  for (size_t k = 0; k < rows.size(); ++k)
    for (size_t a = 0; a < rows[k].size(); ++a) z(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a)) = rows[k][a];
  return z;
}

}  // namespace polymom
