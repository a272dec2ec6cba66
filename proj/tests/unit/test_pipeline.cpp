#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "melvc/errors.hpp"
#include "melvc/pipeline.hpp"
#include "melvc/prosody.hpp"
#include "melvc/synthetic.hpp"

#include <json.hpp>

using namespace melvc;
namespace fs = std::filesystem;

namespace {

PipelineConfig toy_config() {
  PipelineConfig c;
  c.profile = Profile::toy;
  c.seed = 3;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "melvc_test_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct ToyModels {
  fs::path dir;
  fs::path source;
};

ToyModels make_models(const std::string& name, const PipelineConfig& cfg) {
  const auto dir = fresh_dir(name);
  const Pipeline pipe(cfg);
  std::vector<ConversionExample> examples;
  std::vector<MelSpectrogram> mels;
  std::vector<std::string> ids;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    examples.push_back(pipe.conversion_example(synthetic_utterance(s, 0.3), "utt" + std::to_string(s)));
    mels.push_back(examples.back().mel);
    ids.push_back(examples.back().id);
  }
  ConversionModel conv(cfg.conversion_hyper(), cfg.seed);
  train_conversion(conv, examples, 3, {1e-3}, cfg.seed);
  const auto sel = select_prosody(conv, mels, ids);
  save_conversion(dir / kConversionCheckpoint, conv, cfg, 3, sel.medoid);
  VocoderModel voc(cfg.vocoder_hyper(), cfg.seed);
  save_vocoder(dir / kVocoderCheckpoint, voc, cfg, 0);
  const auto source = dir / "source.wav";
  write_wav(source, synthetic_utterance(9, 0.4));
  return {dir, source};
}

}  // namespace

TEST_CASE("pipeline front end follows the config") {
  const Pipeline pipe(toy_config());
  const auto w = synthetic_utterance(1, 0.25);
  const auto ex = pipe.conversion_example(w, "a");
  CHECK(ex.id == "a");
  CHECK(ex.mel.n_mels() == 80);
  CHECK(ex.bn.frames.cols() == 256);
  CHECK(ex.bn.frames.rows() == ex.mel.num_frames());
  const auto direct = mel_spectrogram(w);
  CHECK((direct.frames - ex.mel.frames).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("prosody selection returns a medoid of the set") {
  const auto cfg = toy_config();
  const Pipeline pipe(cfg);
  ConversionModel model(cfg.conversion_hyper(), cfg.seed);
  std::vector<MelSpectrogram> mels;
  std::vector<std::string> ids;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    mels.push_back(pipe.mel(synthetic_utterance(s, 0.2 + 0.05 * double(s))));
    ids.push_back("u" + std::to_string(s));
  }
  const auto sel = select_prosody(model, mels, ids);
  REQUIRE(sel.embeddings.size() == 5);
  CHECK(sel.index < 5);
  CHECK(sel.medoid.source_utterance == ids[sel.index]);
  CHECK((sel.medoid.vector - sel.embeddings[sel.index]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(select_medoid(sel.embeddings) == sel.index);
  ids.pop_back();
  CHECK_THROWS_AS(select_prosody(model, mels, ids), ParamError);
}

TEST_CASE("checkpoint bundles round trip") {
  const auto cfg = toy_config();
  const auto m = make_models("bundles", cfg);
  const auto conv = load_conversion(m.dir / kConversionCheckpoint, cfg);
  CHECK(conv.warnings.empty());
  CHECK(conv.step == 3);
  REQUIRE(conv.medoid.has_value());
  CHECK(conv.medoid->source_utterance.rfind("utt", 0) == 0);
  const auto voc = load_vocoder(m.dir / kVocoderCheckpoint, cfg);
  CHECK(voc.step == 0);

  const auto meta = nlohmann::json::parse(load_checkpoint(m.dir / kConversionCheckpoint).checkpoint.metadata);
  CHECK(meta["config_hash"] == config_hash(cfg));
  CHECK(meta["medoid_utterance"] == conv.medoid->source_utterance);
  CHECK(meta["step"] == 3);

  // resaving the loaded models reproduces the files
  save_conversion(m.dir / "again.mvc", conv.model, cfg, conv.step, conv.medoid);
  CHECK(read_file_bytes(m.dir / "again.mvc") == read_file_bytes(m.dir / kConversionCheckpoint));

  PipelineConfig shifted = cfg;
  shifted.bn_seed = 77;
  CHECK(load_vocoder(m.dir / kVocoderCheckpoint, shifted).warnings.size() == 1);
  PipelineConfig full = cfg;
  full.profile = Profile::full;
  CHECK_THROWS_AS(load_vocoder(m.dir / kVocoderCheckpoint, full), FormatError);
  CHECK_THROWS_AS(load_conversion(m.dir / "missing.mvc", cfg), NotFoundError);
}

TEST_CASE("run_convert end to end") {
  const auto cfg = toy_config();
  const auto m = make_models("convert", cfg);
  const auto out1 = m.dir / "out" / "a.wav", out2 = m.dir / "out" / "b.wav";
  const auto r = run_convert(cfg, m.source, m.dir, out1);
  run_convert(cfg, m.source, m.dir, out2);
  CHECK(read_file_bytes(out1) == read_file_bytes(out2));
  const auto w = read_wav(out1);
  CHECK(w.sample_rate == 16000);
  CHECK(w.size() == static_cast<std::size_t>(r.output_frames) * 160);
  CHECK(r.source_frames > 0);
  CHECK(r.output_frames <= 2 * r.source_frames);
  CHECK(r.source_seconds == doctest::Approx(0.4));
  CHECK(r.warnings.empty());

  auto sidecar = out1;
  sidecar += ".json";
  REQUIRE(fs::exists(sidecar));
  const auto j = nlohmann::json::parse(std::ifstream(sidecar));
  CHECK(j["output_frames"] == r.output_frames);
  CHECK(j["truncated"] == r.truncated);
  CHECK(j["medoid_utterance"] == r.medoid_utterance);

  PipelineConfig other = cfg;
  other.seed = 4;
  run_convert(other, m.source, m.dir, out2);
  CHECK(read_file_bytes(out1) != read_file_bytes(out2));
}

TEST_CASE("run_convert needs both checkpoints and a medoid") {
  const auto cfg = toy_config();
  const auto m = make_models("missing", cfg);
  const auto out = m.dir / "o.wav";
  fs::rename(m.dir / kVocoderCheckpoint, m.dir / "v.bak");
  CHECK_THROWS_AS(run_convert(cfg, m.source, m.dir, out), NotFoundError);
  fs::rename(m.dir / "v.bak", m.dir / kVocoderCheckpoint);

  const auto conv = load_conversion(m.dir / kConversionCheckpoint, cfg);
  save_conversion(m.dir / kConversionCheckpoint, conv.model, cfg, conv.step, std::nullopt);
  CHECK_THROWS_AS(run_convert(cfg, m.source, m.dir, out), NotFoundError);
  fs::remove(m.dir / kConversionCheckpoint);
  CHECK_THROWS_AS(run_convert(cfg, m.source, m.dir, out), NotFoundError);
  CHECK_FALSE(fs::exists(out));
}
