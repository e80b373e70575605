#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "zk3col/agents.hpp"
#include "zk3col/attacks.hpp"
#include "zk3col/randomness_lab.hpp"
#include "zk3col/stats.hpp"

namespace zk3col {

using json = nlohmann::json;

inline json to_json(const TransitionModel& m) {
  return {{"k", m.k}, {"order", m.order}, {"initial", m.initial}, {"rows", m.rows}};
}

inline TransitionModel transition_model_from_json(const json& j) {
  try {
    TransitionModel m;
    m.k = j.at("k").get<std::size_t>();
    m.order = j.value("order", 1);
    m.initial = j.at("initial").get<std::vector<double>>();
    m.rows = j.contains("rows") ? j.at("rows").get<std::vector<std::vector<double>>>()
                                : std::vector<std::vector<double>>(factorial(m.k), m.initial);
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("transition model: ") + e.what());
  }
}

inline json to_json(const stats::ChiSquare& c) { return {{"stat", c.stat}, {"df", c.df}, {"p", c.p}}; }

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? to_json(*v) : json(nullptr);
}

inline json to_json(const lab::TestReport& r) {
  return {{"subject", r.subject},
          {"test", r.test},
          {"k", r.k},
          {"length", r.length},
          {"history_visible", r.history_visible},
          {"chi2_uniform", to_json(r.chi2_uniform)},
          {"chi2_transition", optional_json(r.chi2_transition)},
          {"entropy_rate", {{"order0", r.entropy_rate0}, {"order1", r.entropy_rate1}}},
          {"repetition_rate", {{"observed", r.repetition.observed}, {"expected", r.repetition.expected}}},
          {"predictor_hit_rate", {{"order0", r.hit_rate0}, {"order1", r.hit_rate1}, {"chance", r.chance()}}},
          {"composite_score", lab::composite_score(r)}};
}

inline json to_json(const lab::Fingerprint& f) {
  return {{"subject", f.subject}, {"k", f.k}, {"marginal", f.marginal}, {"transitions", f.transitions}};
}

inline json to_json(const lab::AggregateReport& a) {
  json groups = json::array();
  for (const auto& g : a.groups)
    groups.push_back({{"k", g.k},
                      {"reports", g.reports},
                      {"chi2_uniform", to_json(g.chi2_uniform)},
                      {"chi2_transition", optional_json(g.chi2_transition)},
                      {"mean_hit_rate", {{"order0", g.mean_hit_rate0}, {"order1", g.mean_hit_rate1}}},
                      {"mean_bias", g.mean_bias}});
  json award = json::array();
  for (const auto& e : a.award_ranking) award.push_back({{"subject", e.subject}, {"score", e.score}});
  return {{"groups", groups},
          {"bias_vs_k_correlation", a.bias_vs_k_correlation ? json(*a.bias_vs_k_correlation) : json(nullptr)},
          {"award_ranking", award},
          {"award_weights",
           {{"predictor_uplift", a.weights.predictor_uplift},
            {"transition_deficit", a.weights.transition_deficit},
            {"uniformity_deficit", a.weights.uniformity_deficit}}}};
}

inline json to_json(const lab::ExperimentPlan& p) {
  json stages = json::array();
  for (const auto& s : p.stages) {
    json blocks = json::array();
    for (const auto& b : s.blocks) blocks.push_back({{"k", b.k}, {"draws", b.draws}});
    stages.push_back({{"stage", lab::to_string(s.kind)},
                      {"blocks", blocks},
                      {"rounds", s.rounds},
                      {"instruction", s.instruction},
                      {"award_scoring", s.award_scoring},
                      {"dashboards_unlocked", s.dashboards_unlocked},
                      {"blinded", s.blinded}});
  }
  return {{"subject", p.subject}, {"seed", p.seed}, {"history_visible", p.history_visible}, {"stages", stages}};
}

inline json attack_report_json(const PartitionHypothesis& h, const std::optional<PartitionScore>& score,
                               const json& parameters) {
  json classes = json::array();
  for (const auto& c : h.classes()) classes.push_back(c);
  json j{{"classes", classes}, {"covered", h.covered()}, {"margin", h.margin}, {"parameters", parameters}};
  if (score) {
    j["coverage"] = score->coverage;
    j["pairs"] = score->pairs;
    j["accuracy"] = score->accuracy ? json(*score->accuracy) : json(nullptr);
  }
  return j;
}

}  // namespace zk3col
