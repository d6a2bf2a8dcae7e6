#include "nom/run.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "nom/binio.hpp"
#include "nom/checkpoint.hpp"

namespace fs = std::filesystem;

namespace nom {

GridSpec grid_from_series(const FieldSeries& series) {
  GridSpec g = GridSpec::regular(series.n_lat, series.n_lon);
  g.land = series.land;
  return g;
}

MultiScaleGraph build_run_graph(const RunConfig& cfg, const FieldSeries& series) {
  return build_graph(grid_from_series(series), cfg.mesh_level, cfg.radius_factor);
}

NormStats stats_for_run(const RunConfig& cfg, const FieldSeries& train_phys) {
  if (cfg.climatology) return load_norm_stats(cfg.stats_path());
  return compute_norm_stats(train_phys);
}

int cmd_gen_data(const RunConfig& cfg, bool force) {
  fs::create_directories(cfg.data_dir);
  const std::vector<std::string> outputs{cfg.train_path(), cfg.valid_path(), cfg.test_path(),
                                         cfg.climatology_path(), cfg.stats_path()};
  if (!force)
    for (const auto& p : outputs)
      if (fs::exists(p))
        throw std::runtime_error(p + " already exists; pass --force to overwrite");

  const int n_days = cfg.train_days + cfg.valid_days + cfg.test_days;
  std::cout << "generating " << n_days << " days on " << cfg.n_lat << "x" << cfg.n_lon
            << " (seed " << cfg.seed << ")\n";
  FieldSeries all = generate_synthetic(cfg.seed, n_days, cfg.synth);

  FieldSeries train = all.slice(0, static_cast<size_t>(cfg.train_days));
  FieldSeries valid = all.slice(static_cast<size_t>(cfg.train_days), static_cast<size_t>(cfg.valid_days));
  FieldSeries test = all.slice(static_cast<size_t>(cfg.train_days + cfg.valid_days),
                               static_cast<size_t>(cfg.test_days));

  // Climatology over every prognostic channel (metrics need all of them);
  // the model pipeline subtracts only the periodic subset.
  ClimatologyTable clim = compute_climatology(train, cfg.synth.cycle, prognostic_channels());

  // Normalization statistics on anomaly space, matching the pipeline order.
  FieldSeries train_anom = train;
  const auto& subset = periodic_channels();
  to_anomaly(train_anom, clim, &subset);
  NormStats stats = compute_norm_stats(train_anom);

  write_fields(train, cfg.train_path());
  write_fields(valid, cfg.valid_path());
  write_fields(test, cfg.test_path());
  save_climatology(clim, cfg.climatology_path());
  save_norm_stats(stats, cfg.stats_path());
  std::cout << "wrote " << cfg.train_path() << " (" << train.n_records() << "), "
            << cfg.valid_path() << " (" << valid.n_records() << "), " << cfg.test_path() << " ("
            << test.n_records() << "), climatology + stats\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, bool resume) {
  fs::create_directories(cfg.checkpoint_dir);
  fs::create_directories(cfg.report_dir);
  if (!fs::exists(cfg.train_path()))
    throw std::runtime_error("missing training data " + cfg.train_path() + "; run gen-data first");

  FieldSeries train_phys = read_fields(cfg.train_path());
  FieldSeries valid_phys = read_fields(cfg.valid_path());
  ClimatologyTable clim = load_climatology(cfg.climatology_path());
  NormStats stats = stats_for_run(cfg, train_phys);

  FieldSeries train_model = train_phys;
  FieldSeries valid_model = valid_phys;
  prepare_model_space(train_model, clim, stats, cfg.climatology);
  prepare_model_space(valid_model, clim, stats, cfg.climatology);

  MultiScaleGraph graph = build_run_graph(cfg, train_phys);

  TrainConfig tc = cfg.train;
  ModelStack stack = make_stack(cfg.base_model_config(), tc.q, cfg.seed);

  const std::string report_path = cfg.report_dir + "/train_report.csv";
  if (resume && fs::exists(cfg.stack_checkpoint())) {
    std::cout << "stack checkpoint already complete: " << cfg.stack_checkpoint() << "\n";
    return kExitOk;
  }

  if (resume && fs::exists(cfg.stage1_checkpoint())) {
    ModelStack stage1 = load_stack(cfg.stage1_checkpoint());
    stack.base = stage1.base;
    std::cout << "resumed base model from " << cfg.stage1_checkpoint() << "\n";
  } else {
    TrainReport rep = train_stage1(tc, train_model, valid_model, graph, stack.base);
    append_report_csv(rep, report_path);
    ModelStack stage1;
    stage1.base = stack.base;
    stage1.frozen = {0};
    save_stack(stage1, cfg.stage1_checkpoint());
    std::cout << "stage 1 done: " << rep.rows.size() << " epochs, "
              << rep.wall_seconds << " s; checkpoint " << cfg.stage1_checkpoint() << "\n";
  }

  for (size_t r = 0; r < stack.residuals.size(); ++r) {
    for (size_t i = 0; i < stack.frozen.size(); ++i) stack.frozen[i] = i == r + 1 ? 0 : 1;
    TrainReport rep = train_residual_stage(tc, train_model, valid_model, graph, stack, r);
    append_report_csv(rep, report_path);
    std::cout << "residual stage " << (r + 1) << " done: " << rep.wall_seconds << " s\n";
  }
  std::fill(stack.frozen.begin(), stack.frozen.end(), 0);
  save_stack(stack, cfg.stack_checkpoint());
  std::cout << "saved " << cfg.stack_checkpoint() << "\n";
  return kExitOk;
}

FieldSeries trajectory_to_physical(const FieldSeries& test_model, const FieldSeries& test_phys,
                                   const ClimatologyTable& clim, const NormStats& stats,
                                   bool subtract_climatology, size_t init_index,
                                   const std::vector<DenseArray>& states) {
  FieldSeries traj;
  traj.n_lat = test_phys.n_lat;
  traj.n_lon = test_phys.n_lon;
  traj.channels = test_phys.channels;
  traj.land = test_phys.land;
  for (size_t k = 0; k < states.size(); ++k) {
    const size_t rt = init_index + k + 1;
    std::vector<float> rec = test_model.records[rt];
    store_prognostic(rec, test_model, states[k]);
    denormalize_record(rec, test_model, stats);
    if (subtract_climatology) {
      const auto& subset = periodic_channels();
      from_anomaly_record(rec, test_model.day_index[rt], test_model, clim, &subset);
    }
    traj.day_index.push_back(test_model.day_index[rt]);
    traj.records.push_back(std::move(rec));
  }
  fill_land(traj);
  return traj;
}

int cmd_rollout(const RunConfig& cfg, int init_index, int horizon, const std::string& out_path) {
  if (horizon < 1) throw std::runtime_error("rollout: horizon must be >= 1");
  if (!fs::exists(cfg.stack_checkpoint()))
    throw std::runtime_error("missing checkpoint " + cfg.stack_checkpoint() + "; run train first");
  ModelStack stack = load_stack(cfg.stack_checkpoint());
  FieldSeries test_phys = read_fields(cfg.test_path());
  FieldSeries train_phys = read_fields(cfg.train_path());
  ClimatologyTable clim = load_climatology(cfg.climatology_path());
  NormStats stats = stats_for_run(cfg, train_phys);
  if (init_index < 0 || static_cast<size_t>(init_index + horizon) >= test_phys.n_records())
    throw std::runtime_error("rollout: init " + std::to_string(init_index) + " + horizon " +
                             std::to_string(horizon) + " exceeds test split of " +
                             std::to_string(test_phys.n_records()) + " records");

  FieldSeries test_model = test_phys;
  prepare_model_space(test_model, clim, stats, cfg.climatology);
  MultiScaleGraph graph = build_run_graph(cfg, test_phys);

  DenseArray state = prognostic_matrix(test_model, static_cast<size_t>(init_index));
  std::vector<DenseArray> forcings;
  for (int t = 0; t <= horizon; ++t)
    forcings.push_back(forcing_matrix(test_model, static_cast<size_t>(init_index + t)));
  RolloutResult rr = rollout(stack, graph, state, forcings, horizon);

  FieldSeries traj = trajectory_to_physical(test_model, test_phys, clim, stats, cfg.climatology,
                                            static_cast<size_t>(init_index), rr.states);
  const std::string out = out_path.empty() ? cfg.report_dir + "/trajectory.nomf" : out_path;
  fs::create_directories(fs::path(out).parent_path().empty() ? "." : fs::path(out).parent_path().string());
  write_fields(traj, out);
  if (rr.diverged()) {
    std::cerr << "rollout diverged at step " << rr.diverged_at << "; wrote partial trajectory ("
              << traj.n_records() << " records) to " << out << "\n";
    return kExitDivergence;
  }
  std::cout << "wrote trajectory (" << traj.n_records() << " records) to " << out << "\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& out_path) {
  if (!fs::exists(cfg.stack_checkpoint()))
    throw std::runtime_error("missing checkpoint " + cfg.stack_checkpoint() + "; run train first");
  ModelStack stack = load_stack(cfg.stack_checkpoint());
  FieldSeries test_phys = read_fields(cfg.test_path());
  FieldSeries train_phys = read_fields(cfg.train_path());
  ClimatologyTable clim = load_climatology(cfg.climatology_path());
  NormStats stats = stats_for_run(cfg, train_phys);
  MultiScaleGraph graph = build_run_graph(cfg, test_phys);

  MetricReport report = evaluate_rollouts(stack, graph, test_phys, train_phys, clim, stats, cfg.eval);
  const std::string csv = report_to_csv(report);
  const std::string out = out_path.empty() ? cfg.report_dir + "/metrics.csv" : out_path;
  fs::create_directories(cfg.report_dir);
  write_file_atomic(out, std::vector<uint8_t>(csv.begin(), csv.end()));
  std::cout << csv;
  if (report.diverged_ics > 0)
    std::cerr << report.diverged_ics << " initial condition(s) diverged and were skipped\n";
  std::cout << "wrote " << out << "\n";
  return kExitOk;
}

namespace {

// Fixed 256-entry blue-white-red diverging colormap.
void diverging_color(double t, uint8_t rgb[3]) {
  t = std::min(1.0, std::max(0.0, t));
  const double r = t < 0.5 ? 2.0 * t : 1.0;
  const double b = t > 0.5 ? 2.0 * (1.0 - t) : 1.0;
  const double g = t < 0.5 ? 2.0 * t : 2.0 * (1.0 - t);
  rgb[0] = static_cast<uint8_t>(std::lround(255.0 * r));
  rgb[1] = static_cast<uint8_t>(std::lround(255.0 * g));
  rgb[2] = static_cast<uint8_t>(std::lround(255.0 * b));
}

}  // namespace

int cmd_plot(const RunConfig& cfg, const PlotSpec& spec) {
  (void)cfg;
  FieldSeries s = read_fields(spec.input);
  if (!s.has_channel(spec.variable)) {
    std::string avail;
    for (const auto& c : s.channels) avail += (avail.empty() ? "" : ", ") + c;
    throw std::runtime_error("variable '" + spec.variable + "' not found; available: " + avail);
  }
  if (spec.record < 0 || static_cast<size_t>(spec.record) >= s.n_records())
    throw std::runtime_error("record " + std::to_string(spec.record) + " out of range (have " +
                             std::to_string(s.n_records()) + ")");
  const int64_t cells = s.cells();
  const float* f = s.field(static_cast<size_t>(spec.record), s.channel_index(spec.variable));

  double vmin = spec.vmin, vmax = spec.vmax;
  if (vmin == vmax) {
    vmin = 1e300;
    vmax = -1e300;
    for (int64_t i = 0; i < cells; ++i)
      if (!s.land[static_cast<size_t>(i)]) {
        vmin = std::min(vmin, static_cast<double>(f[i]));
        vmax = std::max(vmax, static_cast<double>(f[i]));
      }
    if (vmin >= vmax) vmax = vmin + 1.0;
  }
  if (!std::isfinite(vmin) || !std::isfinite(vmax))
    throw std::runtime_error("plot: non-finite colormap range");

  std::string header = "P6\n" + std::to_string(s.n_lon) + " " + std::to_string(s.n_lat) + "\n255\n";
  std::vector<uint8_t> img(header.begin(), header.end());
  for (int64_t i = 0; i < cells; ++i) {
    uint8_t rgb[3] = {128, 128, 128};  // land
    if (!s.land[static_cast<size_t>(i)]) {
      const double t = (static_cast<double>(f[i]) - vmin) / (vmax - vmin);
      const int bucket = std::min(255, std::max(0, static_cast<int>(t * 255.0)));
      diverging_color(bucket / 255.0, rgb);
    }
    img.insert(img.end(), rgb, rgb + 3);
  }
  write_file_atomic(spec.out_image, img);
  std::cout << "wrote " << spec.out_image << " (" << s.n_lon << "x" << s.n_lat << ")\n";

  if (!spec.out_csv.empty()) {
    std::string csv;
    char buf[48];
    for (int i = 0; i < s.n_lat; ++i) {
      for (int j = 0; j < s.n_lon; ++j) {
        std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(f[static_cast<int64_t>(i) * s.n_lon + j]));
        csv += buf;
        csv += (j + 1 == s.n_lon) ? "\n" : ",";
      }
    }
    write_file_atomic(spec.out_csv, std::vector<uint8_t>(csv.begin(), csv.end()));
    std::cout << "wrote " << spec.out_csv << "\n";
  }
  return kExitOk;
}

int cmd_inspect_graph(const RunConfig& cfg, const std::string& dump_path) {
  GridSpec grid = GridSpec::regular(cfg.n_lat, cfg.n_lon);
  if (fs::exists(cfg.test_path())) grid.land = read_fields(cfg.test_path()).land;
  MultiScaleGraph g = build_graph(grid, cfg.mesh_level, cfg.radius_factor);
  std::cout << "grid nodes: " << g.n_grid() << " (" << cfg.n_lat << "x" << cfg.n_lon << ")\n";
  std::cout << "mesh level " << g.mesh.level << ": " << g.n_mesh() << " vertices, "
            << g.mesh.faces.size() << " faces\n";
  for (size_t l = 0; l < g.mesh.level_edges.size(); ++l)
    std::cout << "  level " << l << ": " << g.mesh.level_vertex_count[l] << " vertices, "
              << g.mesh.level_edges[l].size() << " undirected edges, " << g.mesh.level_face_count[l]
              << " faces\n";
  std::cout << "multiscale mesh edges (directed): " << g.mesh_edges.size() << "\n";
  std::cout << "grid-to-mesh edges: " << g.g2m.size() << "\n";
  std::cout << "mesh-to-grid edges: " << g.m2g.size() << "\n";
  if (!dump_path.empty()) {
    std::string text;
    char buf[80];
    for (int64_t e = 0; e < g.mesh_edges.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "%d %d %.9g\n", g.mesh_edges.senders[static_cast<size_t>(e)],
                    g.mesh_edges.receivers[static_cast<size_t>(e)],
                    static_cast<double>(g.mesh_edges.geom.at(e, 3)));
      text += buf;
    }
    write_file_atomic(dump_path, std::vector<uint8_t>(text.begin(), text.end()));
    std::cout << "wrote edge dump to " << dump_path << "\n";
  }
  return kExitOk;
}

}  // namespace nom
