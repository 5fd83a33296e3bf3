#include "profpipe/training.hpp"

#include <charconv>
#include <sstream>

namespace profpipe {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be finite and non-negative");
  }
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be >= 0");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
}

json to_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate}, {"weight_decay", cfg.weight_decay},
          {"epochs", cfg.epochs},               {"batch_size", cfg.batch_size},
          {"alpha", cfg.alpha},                 {"seed", cfg.seed}};
}

void merge_json(const json& j, TrainConfig& cfg) {
  try {
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid train config: ") + e.what());
  }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  Engine engine(derive_seed(derive_seed(seed, "epoch-order"), static_cast<std::uint64_t>(epoch)));
  return permutation(n, engine);
}

namespace {

void put_number(std::string& out, double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

void put_optional(std::string& out, const std::optional<double>& value) {
  out += ',';
  if (value) put_number(out, *value);
}

std::optional<double> parse_field(std::string_view field, int line) {
  if (field.empty()) return std::nullopt;
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw ValidationError("loss curve CSV line " + std::to_string(line) + ": bad number '" +
                          std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::string loss_curves_to_csv(const LossCurves& curves) {
  std::string out(kLossCurveHeader);
  out += '\n';
  for (const auto& r : curves.epochs) {
    out += std::to_string(r.epoch);
    out += ',';
    put_number(out, r.train_total);
    put_optional(out, r.train_prof);
    put_optional(out, r.train_scen);
    put_optional(out, r.val_total);
    put_optional(out, r.val_prof);
    put_optional(out, r.val_scen);
    out += '\n';
  }
  return out;
}

LossCurves loss_curves_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kLossCurveHeader) {
    throw ValidationError("loss curve CSV must start with header '" + std::string(kLossCurveHeader) + "'");
  }
  LossCurves curves;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 7) {
      throw ValidationError("loss curve CSV line " + std::to_string(line_no) + ": expected 7 fields");
    }
    EpochRecord r;
    const auto epoch = parse_field(fields[0], line_no);
    const auto train = parse_field(fields[1], line_no);
    if (!epoch || !train) {
      throw ValidationError("loss curve CSV line " + std::to_string(line_no) + ": missing epoch or train_total");
    }
    r.epoch = static_cast<int>(*epoch);
    r.train_total = *train;
    r.train_prof = parse_field(fields[2], line_no);
    r.train_scen = parse_field(fields[3], line_no);
    r.val_total = parse_field(fields[4], line_no);
    r.val_prof = parse_field(fields[5], line_no);
    r.val_scen = parse_field(fields[6], line_no);
    if (!curves.epochs.empty() && r.epoch <= curves.epochs.back().epoch) {
      throw ValidationError("loss curve CSV epochs must be strictly increasing");
    }
    curves.epochs.push_back(r);
  }
  return curves;
}

}  // namespace profpipe
