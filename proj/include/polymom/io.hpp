#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "polymom/error.hpp"
#include "polymom/moments.hpp"
#include "polymom/network.hpp"

namespace polymom {

/// Malformed input document; the message names the offending field.
class SchemaError : public DomainError {
 public:
  using DomainError::DomainError;
};

nlohmann::json network_to_json(const PolyNetwork& net);
PolyNetwork network_from_json(const nlohmann::json& j);

nlohmann::json moments_to_json(const QuadraticMomentTable& m);
nlohmann::json moments_to_json(const PairMomentTable& m);
QuadraticMomentTable quadratic_moments_from_json(const nlohmann::json& j);
PairMomentTable pair_moments_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& field);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& field);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

/// One row per sample, 17 significant digits, preceded by a versioned header.
void write_samples_csv(std::ostream& os, const Eigen::MatrixXd& z);
Eigen::MatrixXd read_samples_csv(std::istream& is);

}  // namespace polymom
