#pragma once

// JSON dump of a QP instance, for bug reports and offline replay.

#include "qp.hpp"

#include <json.hpp>

#include <string>

namespace mrav::qp {

namespace detail {

inline nlohmann::json to_json_vec(const Vec & v)
{
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i))) {
      a.push_back(v(i));
    } else {
      a.push_back(v(i) > 0 ? "inf" : "-inf");
    }
  }
  return a;
}

inline nlohmann::json to_json_mat(const Mat & m)
{
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) { a.push_back(to_json_vec(m.row(i).transpose())); }
  return a;
}

inline Vec from_json_vec(const nlohmann::json & a)
{
  Vec v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].is_string()) {
      v(static_cast<Eigen::Index>(i)) = a[i].get<std::string>() == "inf" ? kInf : -kInf;
    } else {
      v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    }
  }
  return v;
}

inline Mat from_json_mat(const nlohmann::json & a, Eigen::Index cols)
{
  Mat m(a.size(), cols);
  for (std::size_t i = 0; i < a.size(); ++i) { m.row(static_cast<Eigen::Index>(i)) = from_json_vec(a[i]).transpose(); }
  return m;
}

}  // namespace detail

inline std::string dump_json(const DenseQp & q)
{
  nlohmann::json j;
  j["n"] = q.num_vars();
  j["m"] = q.num_rows();
  j["H"] = detail::to_json_mat(q.hessian);
  j["g"] = detail::to_json_vec(q.gradient);
  j["lb"] = detail::to_json_vec(q.lb);
  j["ub"] = detail::to_json_vec(q.ub);
  j["C"] = detail::to_json_mat(q.rows);
  j["lbC"] = detail::to_json_vec(q.row_lb);
  j["ubC"] = detail::to_json_vec(q.row_ub);
  return j.dump(1);
}

inline DenseQp load_json(const std::string & text)
{
  const auto j = nlohmann::json::parse(text);
  DenseQp q;
  const Eigen::Index n = j.at("n").get<Eigen::Index>();
  q.hessian = detail::from_json_mat(j.at("H"), n);
  q.gradient = detail::from_json_vec(j.at("g"));
  q.lb = detail::from_json_vec(j.at("lb"));
  q.ub = detail::from_json_vec(j.at("ub"));
  q.rows = detail::from_json_mat(j.at("C"), n);
  q.row_lb = detail::from_json_vec(j.at("lbC"));
  q.row_ub = detail::from_json_vec(j.at("ubC"));
  return q;
}

}  // namespace mrav::qp
