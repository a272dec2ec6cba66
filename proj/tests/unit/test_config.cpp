#include <filesystem>
#include <string>

#include "doctest.h"
#include "melvc/checkpoint.hpp"
#include "melvc/config.hpp"
#include "melvc/errors.hpp"

using namespace melvc;

TEST_CASE("defaults") {
  const PipelineConfig c;
  CHECK(c.sample_rate == 16000);
  CHECK(c.spectral().frame_length == 800);
  CHECK(c.spectral().hop_length == 160);
  CHECK(c.n_fft == 1024);
  CHECK(c.n_mels == 80);
  CHECK(c.lpc_order == 16);
  CHECK(c.bn_dim == 256);
  CHECK(c.prosody_dim == 128);
  CHECK(c.speeds == std::vector<double>{0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3});
  CHECK(c.profile == Profile::full);
  CHECK_NOTHROW(c.validate());
  CHECK(c.conversion_hyper().bank_output_channels() == 2048);
  CHECK(c.vocoder_hyper().gru_a == VocoderHyper::full().gru_a);
}

TEST_CASE("JSON round trip is lossless") {
  PipelineConfig c;
  c.frame_ms = 25.0;
  c.preemphasis = 0.1 + 0.2;
  c.speeds = {0.9, 1.0, 1.1};
  c.drop_unit_speed = true;
  c.profile = Profile::toy;
  c.seed = 0xffffffffffffull;
  c.conversion_lr = 3.0e-4;
  c.corpus_dir = "dir with \"quotes\" and \\ slash";
  const auto text = config_to_json(c);
  const auto back = config_from_json(text);
  CHECK(config_to_json(back) == text);
  CHECK(back.preemphasis == c.preemphasis);
  CHECK(back.seed == c.seed);
  CHECK(back.corpus_dir == c.corpus_dir);
  CHECK(back.effective_speeds() == std::vector<double>{0.9, 1.1});

  const auto path = std::filesystem::temp_directory_path() / "melvc_test_config.json";
  save_config(path, c);
  CHECK(config_to_json(load_config(path)) == text);
  CHECK_THROWS_AS(load_config(path.string() + ".missing"), NotFoundError);
}

TEST_CASE("partial files keep defaults") {
  const auto c = config_from_json(R"({"profile": "toy", "seed": 7})");
  CHECK(c.profile == Profile::toy);
  CHECK(c.seed == 7);
  CHECK(c.n_mels == 80);
  CHECK(c.conversion_hyper().bank_channels == ConversionHyper::toy().bank_channels);
  CHECK(config_from_json("{}").lpc_order == 16);
}

TEST_CASE("malformed files are FormatErrors") {
  CHECK_THROWS_AS(config_from_json("{"), FormatError);
  CHECK_THROWS_AS(config_from_json("[1, 2]"), FormatError);
  CHECK_THROWS_AS(config_from_json(R"({"n_mel": 80})"), FormatError);
  CHECK_THROWS_AS(config_from_json(R"({"n_mels": "80"})"), FormatError);
  CHECK_THROWS_AS(config_from_json(R"({"speeds": [1, "x"]})"), FormatError);
  CHECK_THROWS_AS(config_from_json(R"({"profile": "huge"})"), FormatError);
  CHECK_THROWS_AS(parse_profile("huge"), ParamError);
  CHECK(parse_profile("toy") == Profile::toy);
  CHECK(profile_name(Profile::full) == "full");
}

TEST_CASE("validation") {
  const auto bad = [](auto edit) {
    PipelineConfig c;
    edit(c);
    CHECK_THROWS_AS(c.validate(), ParamError);
  };
  bad([](PipelineConfig& c) { c.sample_rate = 22050; });
  bad([](PipelineConfig& c) { c.hop_ms = 12.5; });
  bad([](PipelineConfig& c) { c.frame_ms = 5.0; });
  bad([](PipelineConfig& c) { c.n_fft = 1000; });
  bad([](PipelineConfig& c) { c.n_fft = 512; });
  bad([](PipelineConfig& c) { c.fmax = 9000; });
  bad([](PipelineConfig& c) { c.preemphasis = 1.0; });
  bad([](PipelineConfig& c) { c.speeds.clear(); });
  bad([](PipelineConfig& c) { c.speeds = {3.0}; });
  bad([](PipelineConfig& c) { c.vocoder_chunk = 0; });
  bad([](PipelineConfig& c) { c.conversion_lr = -1; });
  PipelineConfig ok;
  ok.frame_ms = 25.0;
  ok.n_fft = 512;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("config hash covers model-shaping fields only") {
  const PipelineConfig base;
  const auto h = config_hash(base);
  CHECK(h.size() == 16);
  CHECK(config_hash(base) == h);
  PipelineConfig c = base;
  c.seed = 5;
  c.conversion_steps = 10;
  c.vocoder_lr = 0.5;
  c.output_dir = "elsewhere";
  c.speeds = {1.0};
  CHECK(config_hash(c) == h);
  c = base;
  c.lpc_order = 12;
  CHECK(config_hash(c) != h);
  c = base;
  c.profile = Profile::toy;
  CHECK(config_hash(c) != h);
  c = base;
  c.bn_seed = 1;
  CHECK(config_hash(c) != h);
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}
