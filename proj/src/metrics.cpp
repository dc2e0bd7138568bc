#include "reasongr/metrics.hpp"

#include <cstdio>

#include "reasongr/error.hpp"
#include "reasongr/text.hpp"

namespace reasongr::metrics {

QueryRecord score_surfaces(std::string query_id, const std::string& pred_surface,
                           const std::string& gold_surface) {
  auto pred = pred_surface.empty() ? std::vector<std::string>{} : text::split(pred_surface, "-");
  auto gold = text::split(gold_surface, "-");
  return {std::move(query_id), pred_surface, gold_surface,
          score(std::span<const std::string>(pred), std::span<const std::string>(gold))};
}

MetricsReport aggregate(std::vector<QueryRecord> records) {
  if (records.empty()) throw ConfigError("cannot aggregate an empty record set");
  MetricsReport r;
  for (const auto& rec : records) {
    r.em += rec.scores.em;
    r.pm += rec.scores.pm;
    r.sm += rec.scores.sm;
    r.s_score += rec.scores.s_score;
  }
  r.n = records.size();
  const double n = static_cast<double>(r.n);
  r.em /= n;
  r.pm /= n;
  r.sm /= n;
  r.s_score /= n;
  r.records = std::move(records);
  return r;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& rec : records) {
    recs.push_back({{"query_id", rec.query_id},
                    {"pred", rec.pred_surface},
                    {"gold", rec.gold_surface},
                    {"em", rec.scores.em},
                    {"pm", rec.scores.pm},
                    {"sm", rec.scores.sm},
                    {"s_score", rec.scores.s_score}});
  }
  return {{"em", em}, {"pm", pm}, {"sm", sm}, {"s_score", s_score}, {"n", n}, {"records", recs}};
}

std::string csv_row(const std::string& model, const std::string& split, const MetricsReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f,%.4f", r.em, r.pm, r.sm, r.s_score);
  return model + "," + split + "," + buf;
}

}  // namespace reasongr::metrics
