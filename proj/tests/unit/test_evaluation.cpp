#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "test_support.hpp"

#include "texunwarp/error.hpp"
#include "texunwarp/evaluation.hpp"
#include "texunwarp/png_io.hpp"

using namespace texunwarp;

namespace {

std::vector<Image> random_set(std::mt19937_64& rng, int n, int side) {
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) out.push_back(test::random_image(rng, side, side));
  return out;
}

AblationTable table_with(double ours_ssim, double ours_fid, double e2e_ssim, double e2e_fid) {
  AblationTable t;
  t.seeds = {0};
  t.rows = {{"end_to_end", {e2e_ssim}, {e2e_fid}, e2e_ssim, e2e_fid},
            {"no_corrector", {0.1}, {5.0}, 0.1, 5.0},
            {"ours", {ours_ssim}, {ours_fid}, ours_ssim, ours_fid}};
  return t;
}

}  // namespace

TEST_CASE("scoring a perfect model") {
  std::mt19937_64 rng(1);
  const auto gt = random_set(rng, 5, 32);
  const MetricReport r = score_outputs(gt, gt);
  CHECK(r.ssim == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.fid_lite <= 1e-6);
  CHECK(r.sample_count == 5);
  CHECK_NOTHROW(r.validate());
  CHECK_THROWS_AS(score_outputs(std::span(gt).first(1), std::span(gt).first(1)), SizeError);
  CHECK_THROWS_AS(score_outputs(std::span(gt).first(3), gt), SizeError);
}

TEST_CASE("metric report validation and JSON round trip") {
  std::mt19937_64 rng(2);
  const auto a = random_set(rng, 4, 16), b = random_set(rng, 4, 16);
  MetricReport r = score_outputs(a, b);
  r.checkpoint_id = "abc";
  r.dataset_id = "def";
  const nlohmann::json j = r;
  CHECK(j.get<MetricReport>() == r);
  MetricReport bad = r;
  bad.ssim = 1.5;
  CHECK_THROWS_AS(bad.validate(), NumericError);
  bad = r;
  bad.fid_lite = -0.1;
  CHECK_THROWS_AS(bad.validate(), NumericError);
  bad = r;
  bad.sample_count = 9;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("figure grid layout") {
  std::mt19937_64 rng(3);
  const auto in = random_set(rng, 4, 24), out = random_set(rng, 4, 16), gt = random_set(rng, 4, 16);
  const Image g = figure_grid(in, out, gt);
  CHECK(g.width == 3 * 16);
  CHECK(g.height == 4 * 16);
  CHECK(g.rgb(16 + 3, 2 * 16 + 5) == out[2].rgb(3, 5));
  CHECK(g.rgb(32 + 7, 3 * 16 + 1) == gt[3].rgb(7, 1));
  CHECK_THROWS_AS(figure_grid({}, {}, {}), SizeError);

  test::TempDir dir("grid");
  emit_figure_grid(in, out, gt, dir / "a.png");
  emit_figure_grid(in, out, gt, dir / "b.png");
  CHECK(test::read_bytes(dir / "a.png") == test::read_bytes(dir / "b.png"));
  CHECK(read_png(dir / "a.png").width == 48);
}

TEST_CASE("published reference rows") {
  const auto& rows = published_reference_rows();
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].arm == "end_to_end");
  CHECK(rows[0].ssim == 0.17);
  CHECK(rows[0].lpips == 0.91);
  CHECK(rows[0].fid == 394.98);
  CHECK(rows[1].arm == "no_corrector");
  CHECK(rows[1].ssim == 0.29);
  CHECK(rows[1].lpips == 0.62);
  CHECK(rows[1].fid == 136.86);
  CHECK(rows[2].arm == "ours");
  CHECK(rows[2].ssim == 0.31);
  CHECK(rows[2].lpips == 0.61);
  CHECK(rows[2].fid == 114.57);
}

TEST_CASE("ablation ordering check") {
  CHECK(table_with(0.3, 10.0, 0.2, 20.0).ordering_holds());
  CHECK_FALSE(table_with(0.1, 10.0, 0.2, 20.0).ordering_holds());
  CHECK_FALSE(table_with(0.3, 30.0, 0.2, 20.0).ordering_holds());
  const AblationTable t = table_with(0.3, 10.0, 0.2, 20.0);
  const nlohmann::json j = t.to_json();
  CHECK(j["rows"].size() == 3);
  CHECK(j["reference"].size() == 3);
  CHECK(j["ordering_holds"] == true);
  CHECK(t.to_markdown().find("| ours | SSIM | 0.3000 | 0.3000 |") != std::string::npos);
  CHECK_THROWS_AS(t.row("baseline"), ParameterError);
}

TEST_CASE("tiny ablation produces three rows with equal-budget runs") {
  const TrainingData data = test::tiny_data(8, 4);
  const DataSplit split = split_dataset(data);
  AblationConfig cfg;
  cfg.base = test::tiny_train(Stage::pretrain_input);
  cfg.pretrain_steps = 2;
  cfg.corrector_steps = 3;
  cfg.seeds = {5};
  std::vector<std::string> messages;
  const AblationResult r = run_ablation(split.train, split.test, cfg, [&](const std::string& m) { messages.push_back(m); });
  REQUIRE(r.table.rows.size() == 3);
  CHECK(r.table.rows[0].arm == "end_to_end");
  CHECK(r.table.rows[1].arm == "no_corrector");
  CHECK(r.table.rows[2].arm == "ours");
  for (const auto& row : r.table.rows) {
    CHECK(row.ssim.size() == 1);
    CHECK(row.mean_ssim == row.ssim[0]);
  }
  REQUIRE(r.runs.size() == 1);
  CHECK(r.runs[0].pretrain_input.losses.size() == 2);
  CHECK(r.runs[0].corrector.losses.size() == 3);
  CHECK(r.runs[0].no_corrector.losses.size() == 3);
  CHECK(r.runs[0].end_to_end.losses.size() == 7);
  CHECK(messages.size() == 5);
  cfg.seeds.clear();
  CHECK_THROWS_AS(run_ablation(split.train, split.test, cfg), ParameterError);
}

TEST_CASE("evaluate_model is deterministic") {
  const TrainingData data = test::tiny_data(6, 8);
  const Checkpoint c = pretrain_autoencoder(data, test::tiny_train(Stage::pretrain_gt, 2)).checkpoint;
  const MetricReport a = evaluate_model(c, data, "ds");
  CHECK(a == evaluate_model(c, data, "ds"));
  CHECK(a.checkpoint_id == c.digest());
  CHECK(a.sample_count == 6);
}
