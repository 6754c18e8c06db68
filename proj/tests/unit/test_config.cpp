#include "chaosot/config.hpp"
#include "chaosot/error.hpp"
#include "doctest.h"

using namespace chaosot;

TEST_CASE("presets carry the published constants") {
  TrainConfig l63 = preset(SystemKind::l63, Method::sinkhorn);
  CHECK(l63.lambda == 0.2);
  CHECK(l63.epsilon == 0.05);
  CHECK(l63.resolved_warmup() == 10);
  CHECK(l63.grad_clip == 1.0);
  CHECK(l63.emulator_width == 128);
  CHECK(l63.emulator_depth == 4);
  CHECK(l63.emulator_activation == ad::Activation::gelu);
  TrainConfig l96 = preset(SystemKind::l96, Method::wgan);
  CHECK(l96.lambda == 3.0);
  CHECK(l96.epsilon == 0.02);
  CHECK(l96.p == 2.0);
  CHECK(l96.window == 100);
  CHECK(l96.stride == 2);
  CHECK(l96.critic_clip == 0.01);
  CHECK(l96.early_stop_fraction == doctest::Approx(0.7));
}

TEST_CASE("warm-up defaults to a tenth of the epochs") {
  TrainConfig c;
  c.epochs = 50;
  CHECK(c.resolved_warmup() == 5);
  c.warmup_epochs = 0;
  CHECK(c.resolved_warmup() == 0);
}

TEST_CASE("text form round trips") {
  TrainConfig c = preset(SystemKind::ks, Method::fixed_ot);
  c.lr = 3.25e-4;
  c.seed = 99;
  const std::string text = config_to_text(c);
  TrainConfig back;
  apply_config_text(back, text);
  CHECK(config_to_text(back) == text);
  CHECK(back.lr == c.lr);
  CHECK(back.method == Method::fixed_ot);
}

TEST_CASE("every key is documented and parsable") {
  const auto& keys = config_keys();
  CHECK(keys.size() > 30);
  for (const auto& k : keys) CHECK_FALSE(k.help.empty());
}

TEST_CASE("comments, blank lines and whitespace are ignored") {
  TrainConfig c;
  apply_config_text(c, "# header\n\n  lambda =  0.5   # inline\nmethod=wgan\n");
  CHECK(c.lambda == 0.5);
  CHECK(c.method == Method::wgan);
}

TEST_CASE("malformed configs name the offending line") {
  TrainConfig c;
  auto message = [&](const std::string& text) {
    try {
      apply_config_text(c, text, "run.cfg");
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("lambda = 1\nbogus = 2\n").find("run.cfg:2") != std::string::npos);
  CHECK(message("lambda = abc\n").find("expected a number") != std::string::npos);
  CHECK(message("epochs = -3\n").find("non-negative integer") != std::string::npos);
  CHECK(message("emulator_residual = maybe\n").find("true or false") != std::string::npos);
  CHECK(message("just words\n").find("key = value") != std::string::npos);
  CHECK(message("method = gradient\n").find("run.cfg:1") != std::string::npos);
}

TEST_CASE("method names") {
  CHECK(parse_method("no-ot") == Method::no_ot);
  CHECK(parse_method("no_ot") == Method::no_ot);
  CHECK(parse_method("fixed-ot") == Method::fixed_ot);
  CHECK(to_string(Method::sinkhorn) == "sinkhorn");
  CHECK_THROWS_AS(parse_method("adam"), InvalidArgument);
}

TEST_CASE("validation rejects inconsistent settings") {
  TrainConfig c;
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = TrainConfig{};
  c.early_stop_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = TrainConfig{};
  c.critic_clip = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}
