#include "nom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace nom {

std::vector<double> lat_weights(const GridSpec& grid) {
  std::vector<double> w(static_cast<size_t>(grid.n_lat));
  double sum = 0.0;
  for (int i = 0; i < grid.n_lat; ++i) {
    const double lat = grid.lat_deg[static_cast<size_t>(i)];
    if (lat <= -90.0 || lat >= 90.0) throw MetricError("lat_weights: latitude outside (-90, 90)");
    w[static_cast<size_t>(i)] = std::cos(lat * M_PI / 180.0);
    sum += w[static_cast<size_t>(i)];
  }
  for (auto& v : w) v = static_cast<double>(grid.n_lat) * v / sum;
  return w;
}

double weighted_rmse(const float* pred, const float* truth, const std::vector<double>& weights,
                     const std::vector<uint8_t>& evaluate, int n_lat, int n_lon) {
  double acc = 0.0;
  int64_t count = 0;
  for (int i = 0; i < n_lat; ++i)
    for (int j = 0; j < n_lon; ++j) {
      const int64_t c = static_cast<int64_t>(i) * n_lon + j;
      if (!evaluate[static_cast<size_t>(c)]) continue;
      const double d = static_cast<double>(pred[c]) - static_cast<double>(truth[c]);
      acc += weights[static_cast<size_t>(i)] * d * d;
      count++;
    }
  if (count == 0) throw MetricError("weighted_rmse: empty evaluation mask");
  return std::sqrt(acc / static_cast<double>(count));
}

double weighted_acc(const float* pred_anom, const float* truth_anom,
                    const std::vector<double>& weights, const std::vector<uint8_t>& evaluate,
                    int n_lat, int n_lon) {
  double cross = 0.0, pp = 0.0, tt = 0.0;
  int64_t count = 0;
  for (int i = 0; i < n_lat; ++i)
    for (int j = 0; j < n_lon; ++j) {
      const int64_t c = static_cast<int64_t>(i) * n_lon + j;
      if (!evaluate[static_cast<size_t>(c)]) continue;
      const double w = weights[static_cast<size_t>(i)];
      const double p = static_cast<double>(pred_anom[c]);
      const double t = static_cast<double>(truth_anom[c]);
      cross += w * p * t;
      pp += w * p * p;
      tt += w * t * t;
      count++;
    }
  if (count == 0) throw MetricError("weighted_acc: empty evaluation mask");
  if (pp == 0.0 || tt == 0.0) throw MetricError("weighted_acc: zero anomaly variance");
  return cross / std::sqrt(pp * tt);
}

Contingency count_events(const float* pred, const float* truth, const float* threshold,
                         const std::vector<uint8_t>& evaluate, int64_t cells) {
  Contingency c;
  for (int64_t i = 0; i < cells; ++i) {
    if (!evaluate[static_cast<size_t>(i)]) continue;
    const bool p = pred[i] > threshold[i];
    const bool t = truth[i] > threshold[i];
    if (p && t) c.tp++;
    else if (p && !t) c.fp++;
    else if (!p && t) c.fn++;
    else c.tn++;
  }
  return c;
}

std::optional<double> csi(const Contingency& c) {
  const int64_t denom = c.tp + c.fp + c.fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(denom);
}

std::optional<double> sedi(const Contingency& c, bool conventional_far) {
  if (c.tp + c.fn == 0) return std::nullopt;
  const double h = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const int64_t f_denom = conventional_far ? c.fp + c.tn : c.fp + c.tp;
  if (f_denom == 0) return std::nullopt;
  const double f = static_cast<double>(c.fp) / static_cast<double>(f_denom);
  if (h <= 0.0 || h >= 1.0 || f <= 0.0 || f >= 1.0) return std::nullopt;
  const double num = std::log(f) - std::log(h) - std::log1p(-f) + std::log1p(-h);
  const double den = std::log(f) + std::log(h) + std::log1p(-f) + std::log1p(-h);
  return num / den;
}

std::vector<float> extreme_threshold(const std::vector<const float*>& samples, int64_t cells,
                                     double q) {
  if (q <= 0.0 || q >= 1.0) throw MetricError("extreme_threshold: quantile outside (0,1)");
  if (samples.empty()) throw MetricError("extreme_threshold: no samples");
  const size_t n = samples.size();
  const size_t rank = std::min(n - 1, static_cast<size_t>(std::ceil(q * static_cast<double>(n))) - 1);
  std::vector<float> out(static_cast<size_t>(cells));
  std::vector<float> column(n);
  for (int64_t c = 0; c < cells; ++c) {
    for (size_t s = 0; s < n; ++s) column[s] = samples[s][c];
    std::nth_element(column.begin(), column.begin() + static_cast<int64_t>(rank), column.end());
    out[static_cast<size_t>(c)] = column[rank];
  }
  return out;
}

std::string report_to_csv(const MetricReport& report) {
  std::string out = "variable,lead_days,rmse,acc,csi,sedi,n_ics,n_undefined\n";
  char buf[256];
  auto opt = [](const std::optional<double>& v) { return v ? *v : std::nan(""); };
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g,%.9g,%.9g,%d,%d\n", r.variable.c_str(),
                  r.lead, r.rmse, opt(r.acc), opt(r.csi), opt(r.sedi), r.n_ics, r.n_undefined);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Scored variables: prognostic channels plus derived current speed.
struct Variable {
  std::string name;
  int64_t channel = -1;  // -1 for derived current_speed
};

std::vector<float> extract_variable(const FieldSeries& layout, const std::vector<float>& rec,
                                    const Variable& v) {
  const int64_t cells = layout.cells();
  std::vector<float> out(static_cast<size_t>(cells));
  if (v.channel >= 0) {
    const float* f = rec.data() + v.channel * cells;
    std::copy_n(f, cells, out.begin());
  } else {
    const float* u = rec.data() + layout.channel_index("u_vel") * cells;
    const float* w = rec.data() + layout.channel_index("v_vel") * cells;
    for (int64_t i = 0; i < cells; ++i)
      out[static_cast<size_t>(i)] = std::sqrt(u[i] * u[i] + w[i] * w[i]);
  }
  return out;
}

}  // namespace

MetricReport evaluate_rollouts(const ModelStack& stack, const MultiScaleGraph& graph,
                               const FieldSeries& test_phys, const FieldSeries& train_phys,
                               const ClimatologyTable& clim, const NormStats& stats,
                               const EvalConfig& cfg) {
  if (cfg.leads.empty()) throw MetricError("evaluate_rollouts: no lead times");
  const int max_lead = *std::max_element(cfg.leads.begin(), cfg.leads.end());
  if (max_lead < 1) throw MetricError("evaluate_rollouts: leads must be >= 1");
  if (test_phys.n_records() < static_cast<size_t>(cfg.n_ics + max_lead))
    throw MetricError("evaluate_rollouts: test split too short for " + std::to_string(cfg.n_ics) +
                      " ICs at lead " + std::to_string(max_lead));

  const int64_t cells = test_phys.cells();
  const GridSpec grid_like = [&] {
    GridSpec g = GridSpec::regular(test_phys.n_lat, test_phys.n_lon);
    g.land = test_phys.land;
    return g;
  }();
  const std::vector<double> weights = lat_weights(grid_like);
  std::vector<uint8_t> ocean(static_cast<size_t>(cells));
  for (int64_t i = 0; i < cells; ++i) ocean[static_cast<size_t>(i)] = test_phys.land[static_cast<size_t>(i)] ? 0 : 1;

  std::vector<Variable> variables;
  for (const auto& name : prognostic_channels())
    variables.push_back({name, test_phys.channel_index(name)});
  variables.push_back({"current_speed", -1});

  // Per-variable extreme thresholds and day-of-cycle means from training data.
  const int cycle = clim.cycle > 0 ? clim.cycle : 1;
  std::vector<std::vector<float>> thresholds;
  std::vector<std::vector<std::vector<float>>> var_clim;  // [var][day_of_cycle][cells]
  for (const auto& v : variables) {
    std::vector<std::vector<float>> fields;
    fields.reserve(train_phys.n_records());
    for (size_t r = 0; r < train_phys.n_records(); ++r)
      fields.push_back(extract_variable(train_phys, train_phys.records[r], v));
    std::vector<const float*> ptrs;
    for (const auto& f : fields) ptrs.push_back(f.data());
    thresholds.push_back(extreme_threshold(ptrs, cells, cfg.quantile));
    std::vector<std::vector<double>> acc(static_cast<size_t>(cycle),
                                         std::vector<double>(static_cast<size_t>(cells), 0.0));
    std::vector<int64_t> counts(static_cast<size_t>(cycle), 0);
    for (size_t r = 0; r < train_phys.n_records(); ++r) {
      const int d = ((train_phys.day_index[r] % cycle) + cycle) % cycle;
      counts[static_cast<size_t>(d)]++;
      for (int64_t i = 0; i < cells; ++i) acc[static_cast<size_t>(d)][static_cast<size_t>(i)] += fields[r][static_cast<size_t>(i)];
    }
    std::vector<std::vector<float>> mean(static_cast<size_t>(cycle),
                                         std::vector<float>(static_cast<size_t>(cells), 0.0f));
    for (int d = 0; d < cycle; ++d) {
      if (counts[static_cast<size_t>(d)] == 0)
        throw MetricError("evaluate_rollouts: training split misses day-of-cycle " + std::to_string(d));
      for (int64_t i = 0; i < cells; ++i)
        mean[static_cast<size_t>(d)][static_cast<size_t>(i)] = static_cast<float>(
            acc[static_cast<size_t>(d)][static_cast<size_t>(i)] / static_cast<double>(counts[static_cast<size_t>(d)]));
    }
    var_clim.push_back(std::move(mean));
  }

  // Model-space copy of the test split for inputs and inversion templates.
  FieldSeries test_model = test_phys;
  prepare_model_space(test_model, clim, stats, cfg.subtract_climatology);

  struct Agg {
    double rmse_sum = 0.0;
    double acc_sum = 0.0;
    double csi_sum = 0.0;
    double sedi_sum = 0.0;
    int n = 0, acc_n = 0, csi_n = 0, sedi_n = 0, undefined = 0;
  };
  std::vector<std::vector<Agg>> agg(variables.size(), std::vector<Agg>(cfg.leads.size()));
  MetricReport report;

  for (int ic = 0; ic < cfg.n_ics; ++ic) {
    const size_t r0 = static_cast<size_t>(ic);
    DenseArray state = prognostic_matrix(test_model, r0);
    std::vector<DenseArray> forcings;
    for (int t = 0; t <= max_lead; ++t) forcings.push_back(forcing_matrix(test_model, r0 + static_cast<size_t>(t)));
    RolloutResult rr = rollout(stack, graph, state, forcings, max_lead);
    if (rr.diverged()) {
      report.diverged_ics++;
      continue;
    }
    for (size_t li = 0; li < cfg.leads.size(); ++li) {
      const int lead = cfg.leads[li];
      const size_t rt = r0 + static_cast<size_t>(lead);
      // Invert the pipeline on the prediction: model space -> physical space.
      std::vector<float> pred_rec = test_model.records[rt];
      store_prognostic(pred_rec, test_model, rr.states[static_cast<size_t>(lead - 1)]);
      denormalize_record(pred_rec, test_model, stats);
      if (cfg.subtract_climatology) {
        const auto& subset = periodic_channels();
        from_anomaly_record(pred_rec, test_model.day_index[rt], test_model, clim, &subset);
      }
      const int day = ((test_phys.day_index[rt] % cycle) + cycle) % cycle;
      for (size_t vi = 0; vi < variables.size(); ++vi) {
        Agg& a = agg[vi][li];
        const std::vector<float> pred = extract_variable(test_phys, pred_rec, variables[vi]);
        const std::vector<float> truth =
            extract_variable(test_phys, test_phys.records[rt], variables[vi]);
        a.rmse_sum += weighted_rmse(pred.data(), truth.data(), weights, ocean, test_phys.n_lat,
                                    test_phys.n_lon);
        a.n++;
        const auto& cmean = var_clim[vi][static_cast<size_t>(day)];
        std::vector<float> pred_anom(pred.size()), truth_anom(truth.size());
        for (size_t i = 0; i < pred.size(); ++i) {
          pred_anom[i] = pred[i] - cmean[i];
          truth_anom[i] = truth[i] - cmean[i];
        }
        try {
          a.acc_sum += weighted_acc(pred_anom.data(), truth_anom.data(), weights, ocean,
                                    test_phys.n_lat, test_phys.n_lon);
          a.acc_n++;
        } catch (const MetricError&) {
          a.undefined++;
        }
        const Contingency c =
            count_events(pred.data(), truth.data(), thresholds[vi].data(), ocean, cells);
        if (auto v = csi(c)) {
          a.csi_sum += *v;
          a.csi_n++;
        } else {
          a.undefined++;
        }
        if (auto v = sedi(c, cfg.conventional_far)) {
          a.sedi_sum += *v;
          a.sedi_n++;
        } else {
          a.undefined++;
        }
      }
    }
  }

  for (size_t vi = 0; vi < variables.size(); ++vi)
    for (size_t li = 0; li < cfg.leads.size(); ++li) {
      const Agg& a = agg[vi][li];
      MetricRow row;
      row.variable = variables[vi].name;
      row.lead = cfg.leads[li];
      row.n_ics = a.n;
      row.n_undefined = a.undefined;
      row.rmse = a.n > 0 ? a.rmse_sum / a.n : std::nan("");
      if (a.acc_n > 0) row.acc = a.acc_sum / a.acc_n;
      if (a.csi_n > 0) row.csi = a.csi_sum / a.csi_n;
      if (a.sedi_n > 0) row.sedi = a.sedi_sum / a.sedi_n;
      report.rows.push_back(row);
    }
  return report;
}

}  // namespace nom
