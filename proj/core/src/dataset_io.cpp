#include "confope/dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace confope {

namespace {

using nlohmann::json;

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt_obs(const Obs& o) {
  if (obs_is_discrete(o)) return std::to_string(obs_index(o));
  return fmt_double(obs_scalar(o));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

Obs parse_obs(const std::string& s, bool discrete) {
  if (discrete) return Obs(std::stoi(s));
  return make_obs(std::stod(s));
}

json init_obs_json(const InitObsDist& init) {
  json j;
  j["exact"] = init.exact();
  if (init.exact()) {
    j["probs"] = std::vector<double>(init.probs.data(),
                                     init.probs.data() + init.probs.size());
  } else {
    std::vector<double> samples;
    samples.reserve(init.samples.size());
    for (const auto& o : init.samples) samples.push_back(obs_scalar(o));
    j["samples"] = samples;
  }
  return j;
}

InitObsDist init_obs_from_json(const json& j, bool discrete) {
  InitObsDist init;
  if (j.value("exact", false)) {
    const auto probs = j.at("probs").get<std::vector<double>>();
    init.probs = Eigen::Map<const Eigen::VectorXd>(probs.data(),
                                                   static_cast<long>(probs.size()));
  } else {
    for (double v : j.at("samples").get<std::vector<double>>())
      init.samples.push_back(discrete ? Obs(static_cast<int>(v)) : make_obs(v));
  }
  return init;
}

}  // namespace

void write_tuples_csv(const std::string& path, const TupleDataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "o_minus,o,a,r,o_plus\n";
  for (const auto& t : data.tuples) {
    out << fmt_obs(t.o_minus) << ',' << fmt_obs(t.o) << ',' << t.a << ','
        << fmt_double(t.r) << ',' << fmt_obs(t.o_plus) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);

  const bool discrete =
      !data.tuples.empty() && obs_is_discrete(data.tuples.front().o);
  json meta;
  meta["env_id"] = data.env_id;
  meta["seed"] = data.seed;
  meta["n"] = data.n;
  meta["gamma"] = data.gamma;
  meta["obs_kind"] = discrete ? "discrete" : "continuous";
  meta["skipped_trajectories"] = data.skipped_trajectories;
  meta["init_obs"] = init_obs_json(data.init_obs);
  std::ofstream mout(sidecar_path(path));
  if (!mout) throw std::runtime_error("cannot open sidecar for " + path);
  mout << meta.dump(2) << '\n';
}

TupleDataset read_tuples_csv(const std::string& path) {
  std::ifstream meta_in(sidecar_path(path));
  if (!meta_in)
    throw std::runtime_error("missing sidecar metadata: " + sidecar_path(path));
  json meta = json::parse(meta_in);
  const bool discrete = meta.at("obs_kind").get<std::string>() == "discrete";

  TupleDataset data;
  data.env_id = meta.value("env_id", "");
  data.seed = meta.value("seed", std::uint64_t{0});
  data.gamma = meta.value("gamma", 0.0);
  data.skipped_trajectories = meta.value("skipped_trajectories", std::size_t{0});
  data.init_obs = init_obs_from_json(meta.at("init_obs"), discrete);

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || split_line(line) !=
      std::vector<std::string>{"o_minus", "o", "a", "r", "o_plus"})
    throw std::runtime_error("bad tuples header in " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (f.size() != 5) throw std::runtime_error("bad tuples row in " + path);
    data.tuples.push_back(TransitionTuple{parse_obs(f[0], discrete),
                                          parse_obs(f[1], discrete),
                                          std::stoi(f[2]), std::stod(f[3]),
                                          parse_obs(f[4], discrete)});
  }
  data.n = data.tuples.size();
  return data;
}

void write_bandit_csv(const std::string& path, const BanditDataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "o_minus,a,o,r\n";
  for (const auto& t : data.tuples)
    out << t.o_minus << ',' << t.a << ',' << t.o << ',' << fmt_double(t.r)
        << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);

  json meta;
  meta["env_id"] = data.env_id;
  meta["seed"] = data.seed;
  meta["n"] = data.tuples.size();
  meta["num_preobs"] = data.num_preobs;
  meta["num_obs"] = data.num_obs;
  meta["num_actions"] = data.num_actions;
  meta["reward_support"] = data.reward_support;
  std::ofstream mout(sidecar_path(path));
  if (!mout) throw std::runtime_error("cannot open sidecar for " + path);
  mout << meta.dump(2) << '\n';
}

BanditDataset read_bandit_csv(const std::string& path) {
  BanditDataset data;
  std::ifstream meta_in(sidecar_path(path));
  if (meta_in) {
    json meta = json::parse(meta_in);
    data.env_id = meta.value("env_id", "");
    data.seed = meta.value("seed", std::uint64_t{0});
    data.num_preobs = meta.value("num_preobs", 0);
    data.num_obs = meta.value("num_obs", 0);
    data.num_actions = meta.value("num_actions", 0);
  }

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) ||
      split_line(line) != std::vector<std::string>{"o_minus", "a", "o", "r"})
    throw std::runtime_error("bad bandit header in " + path);
  std::set<double> support;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (f.size() != 4) throw std::runtime_error("bad bandit row in " + path);
    BanditTuple t{std::stoi(f[0]), std::stoi(f[1]), std::stoi(f[2]),
                  std::stod(f[3])};
    support.insert(t.r);
    data.num_preobs = std::max(data.num_preobs, t.o_minus + 1);
    data.num_obs = std::max(data.num_obs, t.o + 1);
    data.num_actions = std::max(data.num_actions, t.a + 1);
    data.tuples.push_back(t);
  }
  data.reward_support.assign(support.begin(), support.end());
  return data;
}

}  // namespace confope
