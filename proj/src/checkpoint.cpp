#include "safeq/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace safeq {

namespace {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw std::runtime_error("unknown activation in checkpoint: " + name);
}

void write_header(std::ofstream& out, const CheckpointMeta& meta) {
  out << "safeq-checkpoint v1 kind=" << meta.kind << " env=" << meta.env
      << " case=" << meta.case_id << '\n';
}

CheckpointMeta read_header(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty checkpoint file: " + path);
  }
  std::istringstream ss(line);
  std::string magic, version, field;
  ss >> magic >> version;
  if (magic != "safeq-checkpoint" || version != "v1") {
    throw std::runtime_error("not a v1 checkpoint: " + path);
  }
  CheckpointMeta meta;
  while (ss >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "kind") meta.kind = value;
    else if (key == "env") meta.env = value;
    else if (key == "case") meta.case_id = std::stoi(value);
  }
  return meta;
}

}  // namespace

void save_net_checkpoint(const std::string& path, const CheckpointMeta& meta,
                         const DenseNet& net) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_header(out, meta);
  out << "dims";
  for (int d : net.dims()) out << ' ' << d;
  out << "\nacts";
  for (Activation a : net.activations()) out << ' ' << activation_name(a);
  out << "\n";
  out.precision(17);
  for (double p : net.params()) out << p << '\n';
}

DenseNet load_net_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const CheckpointMeta m = read_header(in, path);
  if (meta) *meta = m;

  std::string tag;
  in >> tag;
  if (tag != "dims") throw std::runtime_error("bad checkpoint body: " + path);
  std::vector<int> dims;
  std::string line;
  std::getline(in, line);
  {
    std::istringstream ss(line);
    int d;
    while (ss >> d) dims.push_back(d);
  }
  in >> tag;
  if (tag != "acts") throw std::runtime_error("bad checkpoint body: " + path);
  std::getline(in, line);
  std::vector<Activation> acts;
  {
    std::istringstream ss(line);
    std::string name;
    while (ss >> name) acts.push_back(activation_from_name(name));
  }
  DenseNet net(dims, acts);
  for (double& p : net.params()) {
    if (!(in >> p)) throw std::runtime_error("truncated checkpoint: " + path);
  }
  return net;
}

void save_qtable_checkpoint(const std::string& path, const CheckpointMeta& meta,
                            const QTable& q) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_header(out, meta);
  out << "states " << q.num_states() << " actions " << q.num_actions() << '\n';
  out.precision(17);
  for (double v : q.values()) out << v << '\n';
}

QTable load_qtable_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const CheckpointMeta m = read_header(in, path);
  if (meta) *meta = m;
  std::string tag1, tag2;
  int states = 0, actions = 0;
  in >> tag1 >> states >> tag2 >> actions;
  if (tag1 != "states" || tag2 != "actions" || states < 1 || actions < 1) {
    throw std::runtime_error("bad table checkpoint: " + path);
  }
  QTable q(states, actions);
  for (double& v : q.values()) {
    if (!(in >> v)) throw std::runtime_error("truncated checkpoint: " + path);
  }
  return q;
}

void save_policy_table(const std::string& path, const CheckpointMeta& meta,
                       const std::vector<DiscreteDistribution>& policy) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  CheckpointMeta table_meta = meta;
  table_meta.kind = "policy-table";
  write_header(out, table_meta);
  out << "states " << policy.size() << " actions "
      << (policy.empty() ? 0 : policy.front().size()) << '\n';
  out.precision(17);
  for (const DiscreteDistribution& row : policy) {
    for (int a = 0; a < row.size(); ++a) {
      out << row[a] << (a + 1 == row.size() ? '\n' : ' ');
    }
  }
}

std::vector<DiscreteDistribution> load_policy_table(const std::string& path,
                                                    CheckpointMeta* meta) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const CheckpointMeta m = read_header(in, path);
  if (meta) *meta = m;
  std::string tag1, tag2;
  int states = 0, actions = 0;
  in >> tag1 >> states >> tag2 >> actions;
  if (tag1 != "states" || tag2 != "actions" || states < 1 || actions < 1) {
    throw std::runtime_error("bad policy table: " + path);
  }
  std::vector<DiscreteDistribution> policy;
  policy.reserve(states);
  for (int s = 0; s < states; ++s) {
    Vec row(actions);
    for (double& p : row) {
      if (!(in >> p)) throw std::runtime_error("truncated policy table: " + path);
    }
    policy.push_back(DiscreteDistribution(std::move(row)));
  }
  return policy;
}

CheckpointMeta peek_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_header(in, path);
}

}  // namespace safeq
