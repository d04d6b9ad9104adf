#include "hybridsig/config.hpp"

#include <charconv>
#include <cmath>
#include <initializer_list>
#include <string>

namespace hybridsig {

using nlohmann::json;

namespace {

void require_object(const json& j, const char* what, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (std::string_view key : allowed) known = known || key == item.key();
    if (!known) throw std::invalid_argument(std::string(what) + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be positive");
}

void ExperimentConfig::validate() const {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("snr_db must be a number or +inf");
  }
  if (per_class < 1 || test_per_class < 1) throw std::invalid_argument("segment counts must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train_fraction must be in (0, 1)");
  train.validate();
  modem.validate();
  render.validate();
}

json snr_to_json(double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return "inf";
  return snr_db;
}

double parse_snr(std::string_view text) {
  if (text == "inf" || text == "+inf" || text == "none") return modem::kNoNoise;
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw std::invalid_argument("invalid SNR '" + std::string(text) + "'");
  }
  return v;
}

double snr_from_json(const json& j) {
  if (j.is_string()) return parse_snr(j.get<std::string>());
  if (j.is_number()) return j.get<double>();
  throw std::invalid_argument("snr_db must be a number or \"inf\"");
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size}, {"epochs", c.epochs}, {"lr", c.lr}, {"seed", c.seed}, {"shuffle", c.shuffle}};
}

json to_json(const modem::ModemConfig& c) {
  json j = {{"sample_rate", c.sample_rate}, {"sps", c.sps}, {"gfsk_bt", c.gfsk_bt}, {"gfsk_h", c.gfsk_h}};
  if (const auto* rrc = std::get_if<modem::RrcPulse>(&c.pulse)) {
    j["pulse"] = "rrc";
    j["rolloff"] = rrc->rolloff;
    j["span_symbols"] = rrc->span_symbols;
  } else {
    j["pulse"] = "rect";
  }
  return j;
}

json to_json(const raster::RenderConfig& c) {
  return {{"width", c.width},         {"height", c.height},           {"db_range", c.db_range},
          {"psd_nfft", c.psd_nfft},   {"psd_overlap", c.psd_overlap}, {"stft_nfft", c.stft_nfft},
          {"stft_hop", c.stft_hop}};
}

json to_json(const ExperimentConfig& c) {
  return {{"snr_db", snr_to_json(c.snr_db)},
          {"seed", c.seed},
          {"per_class", c.per_class},
          {"test_per_class", c.test_per_class},
          {"train_fraction", c.train_fraction},
          {"representation", std::string(raster::representation_key(c.representation))},
          {"train", to_json(c.train)},
          {"modem", to_json(c.modem)},
          {"render", to_json(c.render)}};
}

void apply_json(const json& j, TrainConfig& c) {
  require_object(j, "train", {"batch_size", "epochs", "lr", "seed", "shuffle"});
  read_if(j, "batch_size", c.batch_size);
  read_if(j, "epochs", c.epochs);
  read_if(j, "lr", c.lr);
  read_if(j, "seed", c.seed);
  read_if(j, "shuffle", c.shuffle);
}

void apply_json(const json& j, modem::ModemConfig& c) {
  require_object(j, "modem", {"sample_rate", "sps", "pulse", "rolloff", "span_symbols", "gfsk_bt", "gfsk_h"});
  read_if(j, "sample_rate", c.sample_rate);
  read_if(j, "sps", c.sps);
  read_if(j, "gfsk_bt", c.gfsk_bt);
  read_if(j, "gfsk_h", c.gfsk_h);
  std::string pulse = std::holds_alternative<modem::RectPulse>(c.pulse) ? "rect" : "rrc";
  read_if(j, "pulse", pulse);
  if (pulse == "rect") {
    if (j.contains("rolloff") || j.contains("span_symbols")) {
      throw std::invalid_argument("modem: rolloff/span_symbols only apply to the rrc pulse");
    }
    c.pulse = modem::RectPulse{};
  } else if (pulse == "rrc") {
    modem::RrcPulse rrc = std::holds_alternative<modem::RrcPulse>(c.pulse) ? std::get<modem::RrcPulse>(c.pulse)
                                                                           : modem::RrcPulse{};
    read_if(j, "rolloff", rrc.rolloff);
    read_if(j, "span_symbols", rrc.span_symbols);
    c.pulse = rrc;
  } else {
    throw std::invalid_argument("modem: pulse must be \"rrc\" or \"rect\"");
  }
}

void apply_json(const json& j, raster::RenderConfig& c) {
  require_object(j, "render", {"width", "height", "db_range", "psd_nfft", "psd_overlap", "stft_nfft", "stft_hop"});
  read_if(j, "width", c.width);
  read_if(j, "height", c.height);
  read_if(j, "db_range", c.db_range);
  read_if(j, "psd_nfft", c.psd_nfft);
  read_if(j, "psd_overlap", c.psd_overlap);
  read_if(j, "stft_nfft", c.stft_nfft);
  read_if(j, "stft_hop", c.stft_hop);
}

void apply_json(const json& j, ExperimentConfig& c) {
  require_object(j, "config", {"snr_db", "seed", "per_class", "test_per_class", "train_fraction", "representation",
                               "train", "modem", "render"});
  if (j.contains("snr_db")) c.snr_db = snr_from_json(j.at("snr_db"));
  read_if(j, "seed", c.seed);
  read_if(j, "per_class", c.per_class);
  read_if(j, "test_per_class", c.test_per_class);
  read_if(j, "train_fraction", c.train_fraction);
  if (j.contains("representation")) {
    std::string rep;
    read_if(j, "representation", rep);
    c.representation = raster::parse_representation(rep);
  }
  if (j.contains("train")) apply_json(j.at("train"), c.train);
  if (j.contains("modem")) apply_json(j.at("modem"), c.modem);
  if (j.contains("render")) apply_json(j.at("render"), c.render);
}

}  // namespace hybridsig
