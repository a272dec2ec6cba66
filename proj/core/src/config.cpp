// SPDX-License-Identifier: Apache-2.0
#include "melvc/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "melvc/augment.hpp"
#include "melvc/checkpoint.hpp"
#include "melvc/errors.hpp"

namespace melvc {

using json = nlohmann::ordered_json;

std::string_view profile_name(Profile p) { return p == Profile::toy ? "toy" : "full"; }

Profile parse_profile(std::string_view name) {
  if (name == "full") return Profile::full;
  if (name == "toy") return Profile::toy;
  throw ParamError("unknown profile '" + std::string(name) + "' (expected full or toy)");
}

namespace {

int ms_to_samples(double ms, int rate) { return static_cast<int>(std::lround(ms * rate / 1000.0)); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ParamError("config: " + what);
}

}  // namespace

void PipelineConfig::validate() const {
  require(sample_rate == kWorkingRate, "sample_rate must be 16000");
  require(frame_ms > 0 && hop_ms > 0 && hop_ms <= frame_ms, "frame_ms and hop_ms must be positive, hop <= frame");
  require(std::abs(frame_ms * sample_rate / 1000.0 - ms_to_samples(frame_ms, sample_rate)) < 1e-9,
          "frame_ms must be a whole number of samples");
  require(std::abs(hop_ms * sample_rate / 1000.0 - ms_to_samples(hop_ms, sample_rate)) < 1e-9,
          "hop_ms must be a whole number of samples");
  require(ms_to_samples(hop_ms, sample_rate) == 160, "hop_ms must be 10 (the vocoder runs at 160 samples per frame)");
  require(n_fft >= ms_to_samples(frame_ms, sample_rate) && (n_fft & (n_fft - 1)) == 0,
          "n_fft must be a power of two no shorter than the frame");
  require(n_mels > 0, "n_mels must be positive");
  require(fmin >= 0 && fmax > fmin && fmax <= sample_rate / 2.0, "need 0 <= fmin < fmax <= Nyquist");
  require(preemphasis >= 0 && preemphasis < 1, "preemphasis must be in [0, 1)");
  require(lpc_order > 0 && lpc_order < n_fft / 2, "lpc_order out of range");
  require(bn_dim > 0 && prosody_dim > 0, "bn_dim and prosody_dim must be positive");
  require(!speeds.empty(), "speeds must not be empty");
  for (double s : speeds) require(s >= 0.5 && s <= 2.0, "speeds must lie in [0.5, 2]");
  require(conversion_steps >= 0 && vocoder_steps >= 0, "step counts must be non-negative");
  require(conversion_lr >= 0 && vocoder_lr >= 0 && clip_norm >= 0, "learning rates and clip_norm must be >= 0");
  require(vocoder_chunk > 0, "vocoder_chunk must be positive");
  require(max_decoder_ratio > 0, "max_decoder_ratio must be positive");
}

SpectralConfig PipelineConfig::spectral() const {
  SpectralConfig s;
  s.sample_rate = sample_rate;
  s.frame_length = ms_to_samples(frame_ms, sample_rate);
  s.hop_length = ms_to_samples(hop_ms, sample_rate);
  s.n_fft = n_fft;
  s.n_mels = n_mels;
  s.fmin = fmin;
  s.fmax = fmax;
  s.preemphasis = preemphasis;
  return s;
}

LpcConfig PipelineConfig::lpc() const {
  LpcConfig l;
  l.order = lpc_order;
  l.sample_rate = sample_rate;
  l.hop_length = ms_to_samples(hop_ms, sample_rate);
  l.frame_length = ms_to_samples(frame_ms, sample_rate);
  return l;
}

ConversionHyper PipelineConfig::conversion_hyper() const {
  ConversionHyper h = profile == Profile::toy ? ConversionHyper::toy() : ConversionHyper::full();
  h.bn_dim = bn_dim;
  h.n_mels = n_mels;
  h.prosody.n_mels = n_mels;
  if (profile == Profile::full) h.prosody.embedding_dim = prosody_dim;
  return h;
}

VocoderHyper PipelineConfig::vocoder_hyper() const {
  VocoderHyper h = profile == Profile::toy ? VocoderHyper::toy() : VocoderHyper::full();
  h.n_mels = n_mels;
  return h;
}

std::vector<double> PipelineConfig::effective_speeds() const {
  std::vector<double> out;
  for (double s : speeds)
    if (!(drop_unit_speed && s == 1.0)) out.push_back(s);
  return out;
}

namespace {

json to_json(const PipelineConfig& c) {
  json j;
  j["sample_rate"] = c.sample_rate;
  j["frame_ms"] = c.frame_ms;
  j["hop_ms"] = c.hop_ms;
  j["n_fft"] = c.n_fft;
  j["n_mels"] = c.n_mels;
  j["fmin"] = c.fmin;
  j["fmax"] = c.fmax;
  j["preemphasis"] = c.preemphasis;
  j["lpc_order"] = c.lpc_order;
  j["bn_dim"] = c.bn_dim;
  j["prosody_dim"] = c.prosody_dim;
  j["speeds"] = c.speeds;
  j["drop_unit_speed"] = c.drop_unit_speed;
  j["profile"] = std::string(profile_name(c.profile));
  j["seed"] = c.seed;
  j["bn_seed"] = c.bn_seed;
  j["conversion_steps"] = c.conversion_steps;
  j["conversion_lr"] = c.conversion_lr;
  j["vocoder_steps"] = c.vocoder_steps;
  j["vocoder_lr"] = c.vocoder_lr;
  j["vocoder_chunk"] = c.vocoder_chunk;
  j["clip_norm"] = c.clip_norm;
  j["max_decoder_ratio"] = c.max_decoder_ratio;
  j["medoid_originals_only"] = c.medoid_originals_only;
  j["corpus_dir"] = c.corpus_dir;
  j["features_dir"] = c.features_dir;
  j["model_dir"] = c.model_dir;
  j["output_dir"] = c.output_dir;
  return j;
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace

std::string config_to_json(const PipelineConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

PipelineConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  PipelineConfig c;
  const json known = to_json(c);
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw FormatError("unknown config key '" + key + "'");
  try {
    read(j, "sample_rate", c.sample_rate);
    read(j, "frame_ms", c.frame_ms);
    read(j, "hop_ms", c.hop_ms);
    read(j, "n_fft", c.n_fft);
    read(j, "n_mels", c.n_mels);
    read(j, "fmin", c.fmin);
    read(j, "fmax", c.fmax);
    read(j, "preemphasis", c.preemphasis);
    read(j, "lpc_order", c.lpc_order);
    read(j, "bn_dim", c.bn_dim);
    read(j, "prosody_dim", c.prosody_dim);
    read(j, "speeds", c.speeds);
    read(j, "drop_unit_speed", c.drop_unit_speed);
    std::string profile(profile_name(c.profile));
    read(j, "profile", profile);
    c.profile = parse_profile(profile);
    read(j, "seed", c.seed);
    read(j, "bn_seed", c.bn_seed);
    read(j, "conversion_steps", c.conversion_steps);
    read(j, "conversion_lr", c.conversion_lr);
    read(j, "vocoder_steps", c.vocoder_steps);
    read(j, "vocoder_lr", c.vocoder_lr);
    read(j, "vocoder_chunk", c.vocoder_chunk);
    read(j, "clip_norm", c.clip_norm);
    read(j, "max_decoder_ratio", c.max_decoder_ratio);
    read(j, "medoid_originals_only", c.medoid_originals_only);
    read(j, "corpus_dir", c.corpus_dir);
    read(j, "features_dir", c.features_dir);
    read(j, "model_dir", c.model_dir);
    read(j, "output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config value has the wrong type: ") + e.what());
  } catch (const ParamError& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const std::filesystem::path& path, const PipelineConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config " + path.string());
  out << config_to_json(cfg);
  if (!out) throw IoError("failed writing config " + path.string());
}

std::string config_hash(const PipelineConfig& cfg) {
  const json full = to_json(cfg);
  json j;
  for (const char* key : {"sample_rate", "frame_ms", "hop_ms", "n_fft", "n_mels", "fmin", "fmax", "preemphasis",
                          "lpc_order", "bn_dim", "prosody_dim", "profile", "bn_seed"})
    j[key] = full[key];
  return fnv1a_hex(j.dump());
}

}  // namespace melvc
