#include "ally/report_json.hpp"

#include <cmath>
#include <limits>

namespace ally {

namespace {

using nlohmann::json;

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

double read_num(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::vector<double> read_nums(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(read_num(x));
  return out;
}

}  // namespace

json to_json(const TrainReport& r) {
  json lh = json::array(), sh = json::array();
  for (const auto& v : r.lambda_history) lh.push_back(nums(v));
  for (const auto& v : r.slack_history) sh.push_back(nums(v));
  return {
      {"objective_trace", nums(r.objective_trace)},
      {"lagrangian_trace", nums(r.lagrangian_trace)},
      {"validation_trace", nums(r.validation_trace)},
      {"final_slacks", nums(r.final_slacks)},
      {"violation_fraction", num(r.violation_fraction)},
      {"stopped_epoch", r.stopped_epoch},
      {"early_stopped", r.early_stopped},
      {"final_dual",
       {{"lambdas", nums(r.final_dual.lambdas)},
        {"epsilons", nums(r.final_dual.epsilons)},
        {"slacks", nums(r.final_dual.slacks)}}},
      {"train_indices", r.train_indices},
      {"validation_indices", r.validation_indices},
      {"lambda_history", lh},
      {"slack_history", sh},
      {"dual_head_trained", r.dual_head_trained},
      {"diagnostic", r.diagnostic},
  };
}

TrainReport train_report_from_json(const json& j) {
  TrainReport r;
  r.objective_trace = read_nums(j.at("objective_trace"));
  r.lagrangian_trace = read_nums(j.at("lagrangian_trace"));
  r.validation_trace = read_nums(j.at("validation_trace"));
  r.final_slacks = read_nums(j.at("final_slacks"));
  r.violation_fraction = read_num(j.at("violation_fraction"));
  r.stopped_epoch = j.at("stopped_epoch").get<std::size_t>();
  r.early_stopped = j.at("early_stopped").get<bool>();
  const auto& d = j.at("final_dual");
  r.final_dual.lambdas = read_nums(d.at("lambdas"));
  r.final_dual.epsilons = read_nums(d.at("epsilons"));
  r.final_dual.slacks = read_nums(d.at("slacks"));
  r.train_indices = j.at("train_indices").get<std::vector<std::size_t>>();
  r.validation_indices = j.at("validation_indices").get<std::vector<std::size_t>>();
  for (const auto& v : j.at("lambda_history")) r.lambda_history.push_back(read_nums(v));
  for (const auto& v : j.at("slack_history")) r.slack_history.push_back(read_nums(v));
  r.dual_head_trained = j.at("dual_head_trained").get<bool>();
  r.diagnostic = j.at("diagnostic").get<std::string>();
  return r;
}

json to_json(const DualityReport& r) {
  json inst = json::array();
  for (const auto& i : r.instances)
    inst.push_back({{"seed", i.seed},
                    {"dim", i.dim},
                    {"constraints", i.constraints},
                    {"p_star", num(i.p_star)},
                    {"d_star", num(i.d_star)},
                    {"duality_gap", num(i.duality_gap)},
                    {"complementarity_residual", num(i.complementarity_residual)},
                    {"weak_duality_max_excess", num(i.weak_duality_max_excess)},
                    {"lambda_star", nums(i.lambda_star)},
                    {"numeric_derivative", nums(i.numeric_derivative)},
                    {"sensitivity_error", nums(i.sensitivity_error)},
                    {"passed", i.passed}});
  return {{"instances", inst},
          {"max_duality_gap", num(r.max_duality_gap)},
          {"max_complementarity", num(r.max_complementarity)},
          {"max_active_sensitivity_error", num(r.max_active_sensitivity_error)},
          {"max_inactive_sensitivity_error", num(r.max_inactive_sensitivity_error)},
          {"max_weak_duality_excess", num(r.max_weak_duality_excess)},
          {"step", r.step},
          {"passed", r.passed}};
}

json to_json(const CellRecord& c) {
  return {{"strategy", to_string(c.strategy)},
          {"seed", c.seed},
          {"k", c.k},
          {"ok", c.ok},
          {"error", c.error},
          {"violation_fractions", nums(c.violation_fractions)},
          {"dual_head_trained", c.dual_head_trained},
          {"dup_labeled", c.dup_labeled},
          {"dup_in_batch", c.dup_in_batch},
          {"seconds", num(c.seconds)}};
}

json to_json(const AscentTrajectory& t, bool include_points) {
  json snaps = json::array();
  for (const auto& s : t.snapshots) {
    json e = {{"step", s.step}, {"score", num(s.score)}};
    if (include_points) e["x"] = nums(s.x);
    snaps.push_back(std::move(e));
  }
  return {{"steps_taken", t.steps_taken},
          {"stalled", t.stalled},
          {"aborted", t.aborted},
          {"diagnostic", t.diagnostic},
          {"snapshots", snaps}};
}

json experiment_meta(const ExperimentResult& result, const ExperimentConfig& config) {
  json cells = json::array();
  for (const auto& c : result.cells) cells.push_back(to_json(c));
  return {{"config_hash", result.config_hash},
          {"config", serialize_config(config)},
          {"wall_seconds", num(result.wall_seconds)},
          {"all_ok", result.all_ok()},
          {"cells", cells}};
}

}  // namespace ally
