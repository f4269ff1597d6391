#include <doctest.h>

#include "sparse3d/config.hpp"
#include "sparse3d/error.hpp"

using namespace sparse3d;

TEST_CASE("defaults") {
  const ExperimentConfig c;
  CHECK(c.dataset == "synth4");
  CHECK(c.points == 16);
  CHECK(c.batch_size == 32);
  CHECK(c.learning_rate == 1e-3);
  CHECK(c.descriptor.kind == DescriptorKind::kTypeC);
  CHECK(c.train_rotation == RotationMode::kSO3);
  CHECK(c.synth_train_per_class == 400);
  CHECK(c.synth_test_per_class == 100);
  CHECK(c.voxel_threshold == 0.2);
  c.validate();
}

TEST_CASE("flat key = value text with comments") {
  const ExperimentConfig c = parse_config(
      "# run\n"
      "k = 32\n"
      "\n"
      "descriptor = b   # trailing comment\n"
      "train_rotation = z\n"
      "test_rotation=none\n"
      "shared_widths = 8, 16 ,32\n"
      "scale_norm = true\n"
      "lr = 0.005\n"
      "seed = 18446744073709551615\n");
  CHECK(c.points == 32);
  CHECK(c.descriptor.kind == DescriptorKind::kTypeB);
  CHECK(c.train_rotation == RotationMode::kAroundZ);
  CHECK(c.test_rotation == RotationMode::kNone);
  CHECK(c.shared_widths == std::vector<int>{8, 16, 32});
  CHECK(c.descriptor.scale_normalize);
  CHECK(c.learning_rate == 0.005);
  CHECK(c.seed == 18446744073709551615ull);
}

TEST_CASE("config errors carry the line number") {
  auto message = [](const char* text) {
    try {
      parse_config(text);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("k = 16\nbogus = 1\n") == "line 2: unknown config key 'bogus'");
  CHECK(message("k = 16\n\nk 16\n") == "line 3: expected 'key = value'");
  CHECK(message("epochs = many\n") == "line 1: bad value 'many' for epochs");
  CHECK(message("scale_norm = maybe\n") == "line 1: bad boolean 'maybe' for scale_norm");
}

TEST_CASE("validation") {
  ExperimentConfig c;
  c.points = 2;
  CHECK_THROWS_WITH(c.validate(), "need ≥ 3 points");
  c.descriptor.kind = DescriptorKind::kTypeA;
  c.validate();
  c.descriptor.count = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  ExperimentConfig d;
  d.dataset = "shapenet";
  CHECK_THROWS_AS(d.validate(), Error);
}

TEST_CASE("text form round trips") {
  ExperimentConfig c;
  apply_setting(c, "k", "64");
  apply_setting(c, "descriptor", "raw");
  apply_setting(c, "recon_weight", "0.5");
  apply_setting(c, "decoder_widths", "");
  const ExperimentConfig back = parse_config(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.points == 64);
  CHECK(back.decoder_widths.empty());
}

TEST_CASE("model config follows the experiment") {
  ExperimentConfig c;
  c.descriptor.kind = DescriptorKind::kTypeA;
  c.shared_widths = {8, 16};
  const ModelConfig m = c.model_config(4);
  CHECK(m.kind == DescriptorKind::kTypeA);
  CHECK(m.feature_dim() == 4);
  CHECK(m.latent_dim() == 16);
  CHECK(m.num_classes == 4);
}

TEST_CASE("integer lists") {
  CHECK(parse_int_list("5,10") == std::vector<int>{5, 10});
  CHECK(parse_int_list(" 8 , 16 ") == std::vector<int>{8, 16});
  CHECK(parse_int_list("").empty());
  CHECK_THROWS_AS(parse_int_list("5,,10"), Error);
}
