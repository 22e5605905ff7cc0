// Copyright 2026 The CIT Workbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cit/backbone.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "cit/errors.hpp"

namespace cit {
namespace {

DenseMatrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  DenseMatrix w(fan_in, fan_out);
  for (double& v : w.data()) v = u(rng);
  return w;
}

}  // namespace

void GcnParams::validate() const {
  if (layer_weights.empty()) throw ValidationError("GcnParams: no encoder layers");
  for (std::size_t l = 1; l < layer_weights.size(); ++l) {
    if (layer_weights[l].rows() != layer_weights[l - 1].cols())
      throw ShapeError("GcnParams: layer " + std::to_string(l) + " expects " +
                       std::to_string(layer_weights[l].rows()) + " inputs, previous layer emits " +
                       std::to_string(layer_weights[l - 1].cols()));
  }
  if (classifier_weight.rows() != hidden_dim())
    throw ShapeError("GcnParams: classifier expects " + std::to_string(classifier_weight.rows()) +
                     " inputs, encoder emits " + std::to_string(hidden_dim()));
  if (classifier_bias.shape() != Shape{1, classifier_weight.cols()})
    throw ShapeError("GcnParams: classifier bias must be 1x" +
                     std::to_string(classifier_weight.cols()));
}

GcnParams init_gcn_params(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                          std::size_t layers, std::uint64_t seed) {
  if (layers == 0) throw ValidationError("init_gcn_params: need at least one layer");
  Rng rng = make_rng(seed, "gcn-init");
  GcnParams p;
  std::size_t fan_in = input_dim;
  for (std::size_t l = 0; l < layers; ++l) {
    p.layer_weights.push_back(glorot(fan_in, hidden_dim, rng));
    fan_in = hidden_dim;
  }
  p.classifier_weight = glorot(hidden_dim, num_classes, rng);
  p.classifier_bias = DenseMatrix(1, num_classes);
  return p;
}

GcnBinding bind(ad::Tape& tape, const GcnParams& params) {
  params.validate();
  GcnBinding b;
  for (const auto& w : params.layer_weights) b.layer_weights.push_back(tape.leaf(w));
  b.classifier_weight = tape.leaf(params.classifier_weight);
  b.classifier_bias = tape.leaf(params.classifier_bias);
  return b;
}

ad::Value apply_dropout(const ad::Value& x, const Dropout& dropout) {
  if (dropout.rng == nullptr || dropout.rate <= 0.0) return x;
  if (dropout.rate >= 1.0) throw ValidationError("dropout rate must be below 1");
  std::bernoulli_distribution keep(1.0 - dropout.rate);
  const double kept = 1.0 / (1.0 - dropout.rate);
  DenseMatrix mask(x.shape().rows, x.shape().cols);
  for (double& v : mask.data()) v = keep(*dropout.rng) ? kept : 0.0;
  return ad::hadamard(x, x.tape().constant(std::move(mask)));
}

ad::Value gcn_forward(const NormalizedAdjacency& adj, const ad::Value& x, const GcnBinding& params,
                      const Dropout& dropout) {
  ad::Value h = x;
  const std::size_t layers = params.layer_weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = apply_dropout(h, dropout);
    h = ad::spmm(adj.matrix, ad::matmul(h, params.layer_weights[l]));
    if (l + 1 < layers) h = ad::relu(h);
  }
  return h;
}

ad::Value classify(const ad::Value& z, const GcnBinding& params) {
  return ad::broadcast_row_add(ad::matmul(z, params.classifier_weight), params.classifier_bias);
}

void write_checkpoint(std::ostream& out, const std::vector<NamedMatrix>& matrices) {
  out << "cit-checkpoint 1\n";
  char buf[32];
  for (const auto& m : matrices) {
    if (m.name.empty() || m.name.find_first_of(" \t\n") != std::string::npos)
      throw ValidationError("checkpoint: invalid matrix name '" + m.name + "'");
    out << "matrix " << m.name << ' ' << m.value.rows() << ' ' << m.value.cols() << '\n';
    for (std::size_t r = 0; r < m.value.rows(); ++r) {
      auto row = m.value.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", row[c]);
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  }
}

std::vector<NamedMatrix> read_checkpoint(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != "cit-checkpoint 1")
    throw ParseError("checkpoint", lineno, "missing 'cit-checkpoint 1' header");
  std::vector<NamedMatrix> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream head(line);
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    if (!(head >> tag >> name >> rows >> cols) || tag != "matrix")
      throw ParseError("checkpoint", lineno, "expected 'matrix <name> <rows> <cols>'");
    std::vector<double> values;
    values.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw ParseError("checkpoint", lineno, "truncated matrix " + name);
      ++lineno;
      std::istringstream row(line);
      std::string tok;
      std::size_t count = 0;
      while (row >> tok) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
          throw ParseError("checkpoint", lineno, "bad value '" + tok + "'");
        values.push_back(v);
        ++count;
      }
      if (count != cols)
        throw ParseError("checkpoint", lineno, "expected " + std::to_string(cols) + " values");
    }
    out.push_back({name, DenseMatrix(rows, cols, std::move(values))});
  }
  return out;
}

std::vector<NamedMatrix> to_named(const GcnParams& params) {
  std::vector<NamedMatrix> out;
  for (std::size_t l = 0; l < params.layer_weights.size(); ++l)
    out.push_back({"gcn.layer" + std::to_string(l) + ".weight", params.layer_weights[l]});
  out.push_back({"classifier.weight", params.classifier_weight});
  out.push_back({"classifier.bias", params.classifier_bias});
  return out;
}

GcnParams gcn_params_from_named(const std::vector<NamedMatrix>& matrices) {
  std::map<std::string, const DenseMatrix*> by_name;
  for (const auto& m : matrices) by_name[m.name] = &m.value;
  GcnParams p;
  for (std::size_t l = 0;; ++l) {
    auto it = by_name.find("gcn.layer" + std::to_string(l) + ".weight");
    if (it == by_name.end()) break;
    p.layer_weights.push_back(*it->second);
  }
  auto need = [&](const std::string& name) -> const DenseMatrix& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ValidationError("checkpoint: missing matrix " + name);
    return *it->second;
  };
  p.classifier_weight = need("classifier.weight");
  p.classifier_bias = need("classifier.bias");
  p.validate();
  return p;
}

}  // namespace cit
