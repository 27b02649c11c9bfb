#include "colabel/mlp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "colabel/errors.hpp"
#include "colabel/jet.hpp"

namespace colabel {

std::ptrdiff_t MlpModel::weight_offset(int layer) const {
  std::ptrdiff_t off = 0;
  for (int l = 0; l < layer; ++l) off += std::ptrdiff_t(rows(l)) * cols(l) + rows(l);
  return off;
}

std::ptrdiff_t MlpModel::bias_offset(int layer) const {
  return weight_offset(layer) + std::ptrdiff_t(rows(layer)) * cols(layer);
}

Eigen::Map<const Eigen::MatrixXd> MlpModel::weight(int layer) const {
  return {params.data() + weight_offset(layer), rows(layer), cols(layer)};
}

Eigen::Map<const Eigen::VectorXd> MlpModel::bias(int layer) const {
  return {params.data() + bias_offset(layer), rows(layer)};
}

Eigen::Map<Eigen::MatrixXd> MlpModel::weight(int layer) {
  return {params.data() + weight_offset(layer), rows(layer), cols(layer)};
}

Eigen::Map<Eigen::VectorXd> MlpModel::bias(int layer) {
  return {params.data() + bias_offset(layer), rows(layer)};
}

std::ptrdiff_t MlpModel::param_count(int input_dim, const std::vector<int>& hidden) {
  std::ptrdiff_t n = 0;
  int prev = input_dim;
  for (int h : hidden) {
    n += std::ptrdiff_t(h) * prev + h;
    prev = h;
  }
  n += prev + 1;
  return n;
}

MlpModel init_mlp(int input_dim, const std::vector<int>& hidden, Rng& rng) {
  if (input_dim < 1 || input_dim > kMaxDim)
    throw ConfigError("init_mlp: input_dim must be 1 or 2");
  if (hidden.empty()) throw ConfigError("init_mlp: at least one hidden layer required");
  for (int h : hidden)
    if (h < 1) throw ConfigError("init_mlp: hidden widths must be positive");

  MlpModel m;
  m.input_dim = input_dim;
  m.layer_sizes.push_back(input_dim);
  for (int h : hidden) m.layer_sizes.push_back(h);
  m.layer_sizes.push_back(1);
  m.params = Eigen::VectorXd::Zero(MlpModel::param_count(input_dim, hidden));

  for (int l = 0; l < m.num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / (m.cols(l) + m.rows(l)));
    auto W = m.weight(l);
    // Column-major fill so the draw order is part of the file format of a
    // seeded run.
    for (int j = 0; j < W.cols(); ++j)
      for (int i = 0; i < W.rows(); ++i) W(i, j) = rng.uniform(-limit, limit);
  }
  return m;
}

namespace {
constexpr const char* kMlpMagic = "colabel-mlp";
constexpr int kMlpVersion = 1;
}  // namespace

void save_mlp(const MlpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_mlp: cannot open " + path);
  out << kMlpMagic << " " << kMlpVersion << "\n";
  out << "sizes";
  for (int s : model.layer_sizes) out << " " << s;
  out << "\nactivation tanh\n";
  out << "params " << model.params.size() << "\n";
  out << std::hexfloat;
  for (std::ptrdiff_t i = 0; i < model.params.size(); ++i) out << model.params[i] << "\n";
  if (!out) throw IoError("save_mlp: write failed for " + path);
}

MlpModel load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_mlp: cannot open " + path);
  std::string magic, key;
  int version = 0;
  in >> magic >> version;
  if (magic != kMlpMagic || version != kMlpVersion)
    throw IoError("load_mlp: bad header in " + path);

  MlpModel m;
  in >> key;
  if (key != "sizes") throw IoError("load_mlp: expected sizes in " + path);
  std::string line;
  std::getline(in, line);
  std::istringstream sizes(line);
  int s = 0;
  while (sizes >> s) m.layer_sizes.push_back(s);
  if (m.layer_sizes.size() < 3 || m.layer_sizes.back() != 1)
    throw IoError("load_mlp: bad layer sizes in " + path);
  m.input_dim = m.layer_sizes.front();

  std::string act;
  in >> key >> act;
  if (key != "activation" || act != "tanh")
    throw IoError("load_mlp: unsupported activation in " + path);

  std::ptrdiff_t n = 0;
  in >> key >> n;
  if (key != "params") throw IoError("load_mlp: expected params in " + path);
  std::vector<int> hidden(m.layer_sizes.begin() + 1, m.layer_sizes.end() - 1);
  if (n != MlpModel::param_count(m.input_dim, hidden))
    throw IoError("load_mlp: parameter count mismatch in " + path);

  m.params.resize(n);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    // std::hexfloat extraction is unreliable on libstdc++; parse via strtod.
    std::string tok;
    if (!(in >> tok)) throw IoError("load_mlp: truncated params in " + path);
    m.params[i] = std::strtod(tok.c_str(), nullptr);
  }
  return m;
}

}  // namespace colabel
