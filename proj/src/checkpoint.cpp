#include "tasnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tasnn {

using nlohmann::json;

namespace {

constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) {
  put_u64(buf, std::bit_cast<std::uint64_t>(v));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  void need(std::size_t n) const {
    if (pos + n > buf.size()) {
      throw ParseError("checkpoint truncated at byte offset " +
                       std::to_string(pos));
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(buf[pos + i]))
           << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(buf[pos + i]))
           << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = buf.substr(pos, n);
    pos += n;
    return out;
  }
};

json spec_to_json(const NetworkSpec& spec) {
  json j;
  j["structure"] = spec.structure;
  j["strategy"] = strategy_name(spec.strategy);
  j["T"] = spec.T;
  j["in_c"] = spec.in_c;
  j["in_h"] = spec.in_h;
  j["in_w"] = spec.in_w;
  j["neuron"] = {
      {"mode", spec.neuron.mode == NeuronMode::LIF ? "lif" : "liaf"},
      {"u_th", double(spec.neuron.u_th)},
      {"leak", double(spec.neuron.leak)},
      {"surrogate_width", double(spec.neuron.surrogate_width)},
      {"detach_reset", spec.neuron.detach_reset}};
  j["ta"] = {{"r", spec.ta_r},
             {"hidden",
              spec.ta_hidden == TAHiddenRule::Ceil ? "ceil" : "floor"},
             {"d_th", double(spec.ta_d_th)},
             {"squeeze_prepool", spec.ta_squeeze_prepool}};
  j["bias"] = spec.bias;
  return j;
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec spec;
  spec.structure = j.at("structure").get<std::string>();
  spec.layers = parse_structure(spec.structure);
  spec.strategy = strategy_from_name(j.at("strategy").get<std::string>());
  spec.T = j.at("T").get<std::size_t>();
  spec.in_c = j.at("in_c").get<std::size_t>();
  spec.in_h = j.at("in_h").get<std::size_t>();
  spec.in_w = j.at("in_w").get<std::size_t>();
  const json& n = j.at("neuron");
  spec.neuron.mode = n.at("mode").get<std::string>() == "lif"
                         ? NeuronMode::LIF
                         : NeuronMode::LIAF;
  spec.neuron.u_th = static_cast<real>(n.at("u_th").get<double>());
  spec.neuron.leak = static_cast<real>(n.at("leak").get<double>());
  spec.neuron.surrogate_width =
      static_cast<real>(n.at("surrogate_width").get<double>());
  spec.neuron.detach_reset = n.at("detach_reset").get<bool>();
  const json& t = j.at("ta");
  spec.ta_r = t.at("r").get<std::size_t>();
  spec.ta_hidden = t.at("hidden").get<std::string>() == "ceil"
                       ? TAHiddenRule::Ceil
                       : TAHiddenRule::Floor;
  spec.ta_d_th = static_cast<real>(t.at("d_th").get<double>());
  spec.ta_squeeze_prepool = t.at("squeeze_prepool").get<bool>();
  spec.bias = j.at("bias").get<bool>();
  spec.validate();
  return spec;
}

}  // namespace

void save_checkpoint(const std::string& path, Network& net,
                     const ExperimentConfig& cfg, const History& history) {
  json meta;
  meta["format_version"] = kVersion;
  meta["spec"] = spec_to_json(net.spec());
  meta["config"] = json::parse(config_to_json(cfg));
  json hist = json::array();
  for (const EpochRecord& r : history) {
    hist.push_back({{"train_loss", r.train_loss},
                    {"eval_accuracy", r.eval_accuracy}});
  }
  meta["history"] = hist;
  const std::string meta_text = meta.dump();

  std::string buf;
  buf += "TASN";
  put_u32(buf, kVersion);
  put_u64(buf, meta_text.size());
  buf += meta_text;

  const std::vector<Tensor*> params = net.parameters();
  const std::vector<std::string> names = net.parameter_names();
  put_u64(buf, params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    put_u32(buf, static_cast<std::uint32_t>(names[i].size()));
    buf += names[i];
    const Tensor& t = *params[i];
    put_u32(buf, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d = 0; d < t.rank(); ++d) put_u64(buf, t.dim(d));
    for (std::size_t j = 0; j < t.size(); ++j) put_f64(buf, double(t[j]));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  Reader r{buf};
  if (buf.size() < 4 || buf.compare(0, 4, "TASN") != 0) {
    throw ParseError("checkpoint: bad magic at byte offset 0");
  }
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw ParseError("checkpoint: unsupported version " +
                     std::to_string(version));
  }
  const std::uint64_t meta_len = r.u64();
  const std::string meta_text = r.bytes(meta_len);
  json meta;
  try {
    meta = json::parse(meta_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint metadata: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.config = config_from_json_text(meta.at("config").dump());
    for (const json& h : meta.at("history")) {
      ckpt.history.push_back({h.at("train_loss").get<double>(),
                              h.at("eval_accuracy").get<double>()});
    }
    ckpt.net = Network::build(spec_from_json(meta.at("spec")), 0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint metadata: ") + e.what());
  }

  const std::uint64_t n_tensors = r.u64();
  std::vector<Tensor*> params = ckpt.net.parameters();
  const std::vector<std::string> names = ckpt.net.parameter_names();
  if (n_tensors != params.size()) {
    throw ParseError("checkpoint: tensor count " + std::to_string(n_tensors) +
                     " does not match the declared structure");
  }
  for (std::size_t i = 0; i < n_tensors; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    if (name != names[i]) {
      throw ParseError("checkpoint: tensor '" + name + "' where '" +
                       names[i] + "' was expected");
    }
    const std::uint32_t ndim = r.u32();
    std::vector<std::size_t> dims(ndim);
    for (std::uint32_t d = 0; d < ndim; ++d) {
      dims[d] = static_cast<std::size_t>(r.u64());
    }
    Tensor& t = *params[i];
    if (dims != t.shape()) {
      throw ParseError("checkpoint: tensor '" + name + "' has shape " +
                       shape_string(dims) + ", expected " +
                       shape_string(t.shape()));
    }
    for (std::size_t j = 0; j < t.size(); ++j) {
      t[j] = static_cast<real>(r.f64());
    }
  }
  if (r.pos != buf.size()) {
    throw ParseError("checkpoint: trailing bytes at offset " +
                     std::to_string(r.pos));
  }
  return ckpt;
}

}  // namespace tasnn
