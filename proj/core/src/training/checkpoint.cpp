#include "stan/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "stan/errors.hpp"
#include "stan/model/config_json.hpp"

namespace stan::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'T', 'A', 'N', 'C', 'K', 'P', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f64s(std::string& out, const std::vector<double>& values) {
  for (double d : values) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
  }
}

std::vector<double> get_f64s(const std::string& buf, std::size_t& pos, std::size_t count) {
  if (pos + count * 8 > buf.size()) throw FormatError("checkpoint truncated");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + 8 * k + i])) << (8 * i);
    out[k] = std::bit_cast<double>(bits);
  }
  pos += count * 8;
  return out;
}

}  // namespace

void save_checkpoint(const fs::path& path, const model::Network& network, const OptimizerState* optimizer,
                     const CheckpointMeta& meta) {
  const auto& params = network.params();
  json manifest = json::array();
  for (const auto& p : params.all()) {
    manifest.push_back({{"name", p.name}, {"group", p.group}, {"shape", p.value.shape()}});
  }
  json header{{"config", model::to_json(network.config())},
              {"seed", meta.seed},
              {"epoch", meta.epoch},
              {"step", meta.step},
              {"parameters", manifest},
              {"extra", meta.extra}};
  if (optimizer) {
    if (optimizer->m.size() != params.size() || optimizer->v.size() != params.size()) {
      throw DimensionError("optimizer state does not match the network parameters");
    }
    header["optimizer"] = {{"step", optimizer->step}};
  } else {
    header["optimizer"] = nullptr;
  }
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& p : params.all()) put_f64s(out, std::vector<double>(p.value.values().begin(), p.value.values().end()));
  if (optimizer) {
    for (const auto& m : optimizer->m) put_f64s(out, m);
    for (const auto& v : optimizer->v) put_f64s(out, v);
  }

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFoundError("cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 8) != 0) throw FormatError(path.string() + " is not a STANCKP1 checkpoint");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[8 + i])) << (8 * i);
  if (12 + static_cast<std::size_t>(len) > buf.size()) throw FormatError("checkpoint header truncated");
  Checkpoint ck;
  json header;
  try {
    header = json::parse(buf.substr(12, len));
    ck.config = model::network_config_from_json(header.at("config"));
    ck.meta.seed = header.at("seed").get<std::uint64_t>();
    ck.meta.epoch = header.at("epoch").get<std::size_t>();
    ck.meta.step = header.at("step").get<std::size_t>();
    ck.meta.extra = header.at("extra");
    for (const auto& p : header.at("parameters")) {
      ParameterRecord r;
      r.name = p.at("name").get<std::string>();
      r.group = p.at("group").get<std::string>();
      r.shape = p.at("shape").get<num::Shape>();
      ck.parameters.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed checkpoint header in " + path.string() + ": " + e.what());
  }
  std::size_t pos = 12 + len;
  for (auto& r : ck.parameters) r.data = get_f64s(buf, pos, num::element_count(r.shape));
  if (!header.at("optimizer").is_null()) {
    OptimizerState s;
    s.step = header.at("optimizer").at("step").get<std::uint64_t>();
    for (const auto& r : ck.parameters) s.m.push_back(get_f64s(buf, pos, r.data.size()));
    for (const auto& r : ck.parameters) s.v.push_back(get_f64s(buf, pos, r.data.size()));
    ck.optimizer = std::move(s);
  }
  if (pos != buf.size()) throw FormatError("trailing bytes in checkpoint " + path.string());
  return ck;
}

void restore_parameters(model::Network& network, const Checkpoint& ckpt) {
  auto& params = network.params();
  if (params.size() != ckpt.parameters.size()) {
    throw FormatError("checkpoint holds " + std::to_string(ckpt.parameters.size()) + " parameters, network has " +
                      std::to_string(params.size()));
  }
  std::vector<std::vector<double>> values;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const auto& r = ckpt.parameters[i];
    if (p.name != r.name || p.value.shape() != r.shape) {
      throw FormatError("checkpoint parameter " + r.name + " " + num::shape_string(r.shape) + " does not match " + p.name +
                        " " + num::shape_string(p.value.shape()));
    }
    values.push_back(r.data);
  }
  params.restore(values);
}

std::unique_ptr<model::Network> network_from_checkpoint(const Checkpoint& ckpt) {
  auto net = std::make_unique<model::Network>(ckpt.config);
  restore_parameters(*net, ckpt);
  return net;
}

}  // namespace stan::train
