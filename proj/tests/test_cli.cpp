#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "nom/binio.hpp"
#include "nom/checkpoint.hpp"
#include "nom/config.hpp"
#include "nom/field.hpp"
#include "nom/run.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kBin = NOMSIM_BIN;
const std::string kDir = "/tmp/nom_cli_test";

int run(const std::string& args) {
  const std::string cmd = kBin + " " + args + " >> " + kDir + "/cli.log 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string tiny_flags() {
  return "--set grid.n_lat=4 --set grid.n_lon=8 --set mesh.level=0 --set mesh.radius_factor=2.0"
         " --set model.hidden=8 --set model.blocks=1"
         " --set data.train_days=32 --set data.valid_days=10 --set data.test_days=10"
         " --set data.cycle=8 --set train.pretrain_epochs=2 --set train.m=1"
         " --set train.residual_epochs=1 --set train.n=2 --set train.batch=2"
         " --set train.steps_per_epoch=3 --set train.valid_windows=2"
         " --set eval.n_ics=2 --set eval.leads=[2,3]"
         " --set paths.data_dir=" + kDir + "/data" +
         " --set paths.checkpoint_dir=" + kDir + "/ckpt" +
         " --set paths.report_dir=" + kDir + "/reports";
}

std::vector<uint8_t> slurp(const std::string& path) { return nom::read_file(path); }

}  // namespace

TEST_CASE("cli end to end: gen-data, train, rollout, evaluate, plot, inspect") {
  fs::remove_all(kDir);
  fs::create_directories(kDir);

  SUBCASE("") {}  // keep doctest ordering simple; single flow below
  REQUIRE(run("gen-data " + tiny_flags()) == 0);
  CHECK(fs::exists(kDir + "/data/train.nomf"));
  CHECK(fs::exists(kDir + "/data/valid.nomf"));
  CHECK(fs::exists(kDir + "/data/test.nomf"));
  CHECK(fs::exists(kDir + "/data/climatology.nomf"));
  CHECK(fs::exists(kDir + "/data/norm_stats.csv"));

  // file sizes match the header arithmetic: header + records
  {
    nom::FieldSeries train = nom::read_fields(kDir + "/data/train.nomf");
    CHECK(train.n_records() == 32);
    CHECK(train.n_lat == 4);
    const size_t cells = 32;
    size_t expect = 4 + 4 + 4 * 4;  // magic, version, four counts
    for (const auto& c : train.channels) expect += 4 + c.size();
    expect += cells;  // land mask
    expect += train.n_records() * (4 + 4 * cells * train.channels.size());
    CHECK(fs::file_size(kDir + "/data/train.nomf") == expect);
  }

  // second run without --force refuses, with --force reproduces byte-identical files
  CHECK(run("gen-data " + tiny_flags()) == 1);
  const auto before = slurp(kDir + "/data/train.nomf");
  REQUIRE(run("gen-data --force " + tiny_flags()) == 0);
  CHECK(slurp(kDir + "/data/train.nomf") == before);

  REQUIRE(run("train " + tiny_flags()) == 0);
  CHECK(fs::exists(kDir + "/ckpt/stage1.nomw"));
  CHECK(fs::exists(kDir + "/ckpt/stack.nomw"));
  CHECK(fs::exists(kDir + "/reports/train_report.csv"));
  {
    nom::ModelStack stack = nom::load_stack(kDir + "/ckpt/stack.nomw");
    CHECK(stack.q() == 2);
  }

  // ablation: prc=off trains a single-model checkpoint
  REQUIRE(run("train --ablate prc=off " + tiny_flags() + " --set paths.checkpoint_dir=" + kDir +
              "/ckpt_noprc") == 0);
  {
    nom::ModelStack stack = nom::load_stack(kDir + "/ckpt_noprc/stack.nomw");
    CHECK(stack.q() == 1);
  }

  // rollout: horizon 1 gives a single record; exit 0
  REQUIRE(run("rollout --init 0 --horizon 1 --out " + kDir + "/traj1.nomf " + tiny_flags()) == 0);
  {
    nom::FieldSeries traj = nom::read_fields(kDir + "/traj1.nomf");
    CHECK(traj.n_records() == 1);
  }
  REQUIRE(run("rollout --init 1 --horizon 5 --out " + kDir + "/traj5.nomf " + tiny_flags()) == 0);

  // evaluate: deterministic CSV with one row per variable per lead
  REQUIRE(run("evaluate --out " + kDir + "/metrics.csv " + tiny_flags()) == 0);
  {
    std::ifstream in(kDir + "/metrics.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "variable,lead_days,rmse,acc,csi,sedi,n_ics,n_undefined");
    int rows = 0;
    while (std::getline(in, line))
      if (!line.empty()) rows++;
    CHECK(rows == 7 * 2);  // six prognostic channels + current_speed, two leads
  }
  const auto metrics_before = slurp(kDir + "/metrics.csv");
  REQUIRE(run("evaluate --out " + kDir + "/metrics.csv " + tiny_flags()) == 0);
  CHECK(slurp(kDir + "/metrics.csv") == metrics_before);

  // plot: dimensions, unknown-variable error, CSV dump round trip
  REQUIRE(run("plot --input " + kDir + "/traj5.nomf --variable height --record 0 --out " + kDir +
              "/h.ppm --csv " + kDir + "/h.csv " + tiny_flags()) == 0);
  {
    std::ifstream img(kDir + "/h.ppm", std::ios::binary);
    std::string magic, dims1, dims2, maxv;
    img >> magic >> dims1 >> dims2 >> maxv;
    CHECK(magic == "P6");
    CHECK(dims1 == "8");  // width = n_lon
    CHECK(dims2 == "4");
    const size_t header = 3 + dims1.size() + 1 + dims2.size() + 1 + 4;
    CHECK(fs::file_size(kDir + "/h.ppm") == header + 3 * 32);
    // csv dump matches the stored field
    nom::FieldSeries traj = nom::read_fields(kDir + "/traj5.nomf");
    const float* f = traj.field(0, traj.channel_index("height"));
    std::ifstream csv(kDir + "/h.csv");
    std::string cell;
    int idx = 0;
    while (std::getline(csv, cell, idx % 8 == 7 ? '\n' : ',')) {
      CHECK(std::stof(cell) == doctest::Approx(f[idx]).epsilon(1e-6));
      idx++;
    }
    CHECK(idx == 32);
  }
  CHECK(run("plot --input " + kDir + "/traj5.nomf --variable bogus --out " + kDir + "/x.ppm " +
            tiny_flags()) == 1);

  // constant field renders a uniform color away from land
  {
    nom::FieldSeries flat;
    flat.n_lat = 2;
    flat.n_lon = 3;
    flat.channels = {"c"};
    flat.land = {0, 1, 0, 0, 0, 0};
    flat.day_index = {0};
    flat.records = {{1.5f, 1.5f, 1.5f, 1.5f, 1.5f, 1.5f}};
    nom::write_fields(flat, kDir + "/flat.nomf");
    REQUIRE(run("plot --input " + kDir + "/flat.nomf --variable c --out " + kDir + "/flat.ppm " +
                tiny_flags()) == 0);
    auto img = slurp(kDir + "/flat.ppm");
    const size_t pix = img.size() - 11;  // header "P6\n3 2\n255\n"
    REQUIRE(pix == 18);
    std::vector<uint8_t> body(img.end() - 18, img.end());
    // cell 1 is land (gray); all others share one color
    CHECK(body[3] == 128);
    CHECK(body[4] == 128);
    CHECK(body[5] == 128);
    for (size_t c = 2; c < 6; ++c) {
      CHECK(body[c * 3 + 0] == body[0]);
      CHECK(body[c * 3 + 1] == body[1]);
      CHECK(body[c * 3 + 2] == body[2]);
    }
  }

  // inspect-graph prints counts and dumps sender/receiver/length lines
  REQUIRE(run("inspect-graph --dump " + kDir + "/edges.txt " + tiny_flags()) == 0);
  {
    std::ifstream in(kDir + "/edges.txt");
    std::string line;
    int n = 0;
    while (std::getline(in, line))
      if (!line.empty()) n++;
    CHECK(n == 60);  // level-0 mesh: 30 undirected edges, both directions
  }

  // exit code 2 when the rollout diverges: plant an unstable checkpoint
  {
    nom::ModelStack stack = nom::load_stack(kDir + "/ckpt/stack.nomw");
    auto& w = stack.base.out_head.head.w;
    for (int64_t k = 0; k < w.rows(); k += 2)
      for (int64_t j = 0; j < w.cols(); ++j) w.at(k, j) = 3e38f;
    nom::save_stack(stack, kDir + "/ckpt/stack.nomw");
  }
  CHECK(run("rollout --init 0 --horizon 4 --out " + kDir + "/boom.nomf " + tiny_flags()) == 2);
  CHECK(fs::exists(kDir + "/boom.nomf"));  // partial trajectory still written

  fs::remove_all(kDir);
}

TEST_CASE("config file parsing and overrides") {
  fs::create_directories(kDir);
  const std::string cfg_path = kDir + "/run.toml";
  {
    std::ofstream out(cfg_path);
    out << "seed = 99\n[grid]\nn_lat = 6\nn_lon = 12  # comment\n[train]\nbatch = 3\n"
        << "[ablate]\nmana = \"sum_only\"\n";
  }
  nom::RunConfig cfg = nom::make_run_config(cfg_path, {"train.batch=5"}, {"pei=off"});
  CHECK(cfg.seed == 99);
  CHECK(cfg.n_lat == 6);
  CHECK(cfg.n_lon == 12);
  CHECK(cfg.train.batch == 5);  // override wins over the file
  CHECK(cfg.mana == nom::GateMode::SumOnly);
  CHECK(!cfg.pei);
  CHECK(cfg.prc);

  // resolved text reparses to the same values
  const std::string text = nom::resolved_config_text(cfg);
  const std::string path2 = kDir + "/resolved.toml";
  {
    std::ofstream out(path2);
    out << text;
  }
  nom::RunConfig cfg2 = nom::make_run_config(path2, {}, {});
  CHECK(cfg2.seed == cfg.seed);
  CHECK(cfg2.train.batch == cfg.train.batch);
  CHECK(cfg2.mana == cfg.mana);
  CHECK(cfg2.pei == cfg.pei);
  CHECK(nom::resolved_config_text(cfg2) == text);

  CHECK_THROWS_AS(nom::make_run_config(cfg_path, {"no_equals_sign"}, {}), nom::ConfigError);
  fs::remove_all(kDir);
}
