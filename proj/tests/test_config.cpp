#include <catch_amalgamated.hpp>

#include "asmkit/config.hpp"

using namespace asmkit;

namespace {

std::string parse_error(std::string_view text) {
  try {
    parse_config(text);
  } catch (const InvalidConfig& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config: defaults") {
  const RunConfig c;
  CHECK(c.seed == 0);
  CHECK(c.variance_fraction == 0.95);
  CHECK(c.mode == FrameMode::raw);
  CHECK(c.hidden_widths == std::vector<std::size_t>{128});
  CHECK(c.optimizer.learning_rate == 1e-2);
  CHECK(c.optimizer.batch_size == 50);
  CHECK(c.optimizer.epochs == 150);
  CHECK(c.loss == LossKind::asm_assisted);
  CHECK(c.weights.w_facial == 1.0);
  CHECK(c.weights.w_pose == 0.5);
  const auto e = c.eval_config(68);
  CHECK(e.left_eye_index == 36);
  CHECK(e.right_eye_index == 45);
  CHECK(e.failure_threshold == 0.1);
  CHECK(e.auc_upper == 0.1);
  CHECK(c.retention().variance_fraction == 0.95);
  CHECK(c.retention().count == 0);
}

TEST_CASE("config: parsing sections, comments and lists") {
  const auto c = parse_config(
      "# run settings\n"
      "seed = 17\n"
      "[synthetic]\n"
      "n_points = 20   # small\n"
      "mode_sigmas = 0.5, 0.25, 0, 0, 0, 0\n"
      "train_count = 30\r\n"
      "\n"
      "[model]\n"
      "components = 3\n"
      "mode = aligned\n"
      "[regressor]\n"
      "hidden = 32,16\n"
      "[optimizer]\n"
      "learning_rate = 0.001\n"
      "epochs = 12\n"
      "[loss]\n"
      "kind = mse\n"
      "w_pose = 0.25\n"
      "[eval]\n"
      "left_eye = 2\n"
      "right_eye = auto\n");
  CHECK(c.seed == 17);
  CHECK(c.synthetic.n_points == 20);
  CHECK(c.synthetic.mode_sigmas == std::vector<double>{0.5, 0.25, 0, 0, 0, 0});
  CHECK(c.synthetic.train_count == 30);
  CHECK(c.synthetic_config().seed == 17);
  CHECK(c.retention().count == 3);
  CHECK(c.mode == FrameMode::aligned);
  CHECK(c.hidden_widths == std::vector<std::size_t>{32, 16});
  CHECK(c.optimizer.learning_rate == 0.001);
  CHECK(c.optimizer.epochs == 12);
  CHECK(c.loss == LossKind::mse_only);
  CHECK(c.weights.w_pose == 0.25);
  const auto e = c.eval_config(20);
  CHECK(e.left_eye_index == 2);
  CHECK(e.right_eye_index == 18);
}

TEST_CASE("config: echo round-trips") {
  RunConfig c;
  c.seed = 123456789012345ULL;
  c.synthetic.obs_sigma = 0.1;  // not exactly representable
  c.synthetic.mode_sigmas = {1.0 / 3.0, 0.2};
  c.synthetic.n_modes = 2;
  c.hidden_widths = {64, 8};
  c.optimizer.decay = 0.0;
  c.right_eye = 5;
  const auto text = config_to_text(c);
  CHECK(text.starts_with("seed = 123456789012345\n\n[synthetic]\n"));
  CHECK(text.find("obs_sigma = 0.1\n") != std::string::npos);
  CHECK(text.find("left_eye = auto\n") != std::string::npos);
  CHECK(text.find("right_eye = 5\n") != std::string::npos);
  const auto back = parse_config(text);
  CHECK(config_to_text(back) == text);
  CHECK(back.synthetic.mode_sigmas[0] == 1.0 / 3.0);
  CHECK(config_to_text(parse_config(config_to_text(RunConfig{}))) == config_to_text(RunConfig{}));
}

TEST_CASE("config: errors name the key and line") {
  auto msg = parse_error("seed = 1\n[synthetic]\nn_pointz = 5\n");
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("n_pointz") != std::string::npos);
  msg = parse_error("[optimiser]\nepochs = 1\n");
  CHECK(msg.find("line 1") != std::string::npos);
  CHECK(msg.find("optimiser") != std::string::npos);
  CHECK(parse_error("[optimizer]\nepochs = many\n").find("line 2") != std::string::npos);
  CHECK(parse_error("[optimizer]\nepochs\n").find("line 2") != std::string::npos);
  CHECK(parse_error("[model\n").find("line 1") != std::string::npos);
  CHECK(parse_error("epochs = 3\n").find("epochs") != std::string::npos);  // needs its section
  CHECK(parse_error("[loss]\nkind = huber\n").find("huber") != std::string::npos);
  CHECK(parse_error("[synthetic]\nobs_sigma = nan\n").find("line 2") != std::string::npos);
}

TEST_CASE("config: later assignments override earlier ones") {
  auto c = parse_config("[optimizer]\nepochs = 10\n");
  CHECK(c.optimizer.epochs == 10);
  set_config_value(c, "optimizer", "epochs", "20");
  CHECK(c.optimizer.epochs == 20);
  const auto layered = parse_config("[optimizer]\nbatch_size = 7\n", c);
  CHECK(layered.optimizer.epochs == 20);
  CHECK(layered.optimizer.batch_size == 7);
  CHECK_THROWS_AS(set_config_value(c, "optimizer", "momentum", "0.9"), InvalidConfig);
}
