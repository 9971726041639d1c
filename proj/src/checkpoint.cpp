#include "mlap/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mlap {

namespace {

using nlohmann::json;

json dump_array(const std::vector<double>& v, const char* what) {
  json arr = json::array();
  for (double x : v) {
    if (!std::isfinite(x))
      throw std::runtime_error(std::string("refusing to checkpoint non-finite ") +
                               what);
    arr.push_back(x);
  }
  return arr;
}

std::vector<double> read_array(const json& j, const char* what,
                               std::size_t expect) {
  if (!j.is_array() || j.size() != expect)
    throw std::runtime_error(std::string("checkpoint field '") + what +
                             "' has wrong shape");
  std::vector<double> out;
  out.reserve(expect);
  for (const auto& x : j) {
    if (!x.is_number())
      throw std::runtime_error(std::string("checkpoint field '") + what +
                               "' holds a non-numeric entry");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const StochasticNet& net,
                     const std::string& role) {
  json j;
  j["format"] = "mlap-checkpoint";
  j["version"] = {{"major", kCheckpointMajor}, {"minor", kCheckpointMinor}};
  j["role"] = role;
  j["arch"] = {{"layer_sizes", net.arch.layer_sizes}};
  json layers = json::array();
  for (const auto& l : net.layers) {
    json lj;
    lj["w_mu"] = dump_array(l.w.mu, "w_mu");
    lj["w_rho"] = dump_array(l.w.rho, "w_rho");
    lj["b_mu"] = dump_array(l.b.mu, "b_mu");
    lj["b_rho"] = dump_array(l.b.rho, "b_rho");
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out << j.dump(1) << "\n";
  if (!out) throw std::runtime_error("write failure on checkpoint: " + path);
}

StochasticNet load_checkpoint(const std::string& path, std::string* role) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed checkpoint " + path + ": " + e.what());
  }

  if (j.value("format", "") != "mlap-checkpoint")
    throw std::runtime_error("not a checkpoint file: " + path);
  const json& ver = j.at("version");
  const int major = ver.at("major").get<int>();
  if (major != kCheckpointMajor)
    throw std::runtime_error("unsupported checkpoint major version " +
                             std::to_string(major) + " in " + path);

  NetworkArch arch;
  arch.layer_sizes =
      j.at("arch").at("layer_sizes").get<std::vector<std::size_t>>();
  arch.validate();

  StochasticNet net = make_net(arch);
  const json& layers = j.at("layers");
  if (!layers.is_array() || layers.size() != net.layers.size())
    throw std::runtime_error("checkpoint layer count does not match arch in " +
                             path);
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    auto& l = net.layers[li];
    const json& lj = layers[li];
    const std::size_t nw = l.fan_in * l.fan_out;
    l.w.mu = read_array(lj.at("w_mu"), "w_mu", nw);
    l.w.rho = read_array(lj.at("w_rho"), "w_rho", nw);
    l.b.mu = read_array(lj.at("b_mu"), "b_mu", l.fan_out);
    l.b.rho = read_array(lj.at("b_rho"), "b_rho", l.fan_out);
  }
  if (role) *role = j.value("role", "");
  return net;
}

}  // namespace mlap
