// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vmclass/error.hpp"
#include "vmclass/model.hpp"

namespace vmclass {

namespace {

constexpr const char *kMagic = "vmclass-checkpoint";
constexpr int kVersion = 1;

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex_double(const std::string &token, const std::string &where) {
  char *end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0')
    throw Error(ErrorCode::Schema, where + ": bad number '" + token + "'");
  return v;
}

void write_group(std::ostream &out, std::string_view group, const Architecture &arch,
                 const Parameters &params) {
  for (const auto &[name, grid] : params.tensors(arch)) {
    out << "tensor " << group << ' ' << name << ' ' << grid->rank();
    for (std::size_t d : grid->shape())
      out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < grid->size(); ++i)
      out << (i ? " " : "") << hex_double((*grid)[i]);
    out << '\n';
  }
}

} // namespace

void save_checkpoint(const std::filesystem::path &path, const ModelState &model) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::Io, "cannot write checkpoint " + path.string());
  const auto &a = model.arch;
  out << kMagic << ' ' << kVersion << '\n';
  out << "arch input_len=" << a.input_len << " conv_filters=" << a.conv_filters
      << " kernel=" << a.kernel << " pool=" << a.pool << " hidden=" << a.hidden
      << " classes=" << a.classes << " dropout_rate=" << hex_double(a.dropout_rate)
      << " double_bias=" << (a.double_bias ? 1 : 0) << '\n';
  out << "seed " << model.seed << '\n';
  out << "step " << model.step << '\n';
  write_group(out, "param", a, model.params);
  write_group(out, "adam_m", a, model.adam_m);
  write_group(out, "adam_v", a, model.adam_v);
  out << "end\n";
  if (!out)
    throw Error(ErrorCode::Io, "failed while writing checkpoint " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot read checkpoint " + path.string());
  const std::string where = path.string();
  std::string line, word;

  std::getline(in, line);
  {
    std::istringstream ls(line);
    int version = 0;
    ls >> word >> version;
    if (word != kMagic || version != kVersion)
      throw Error(ErrorCode::Schema, where + ": not a version-1 checkpoint");
  }

  Architecture arch;
  std::getline(in, line);
  {
    std::istringstream ls(line);
    ls >> word;
    if (word != "arch")
      throw Error(ErrorCode::Schema, where + ": missing arch line");
    while (ls >> word) {
      const auto eq = word.find('=');
      const std::string key = word.substr(0, eq), value = word.substr(eq + 1);
      if (key == "dropout_rate")
        arch.dropout_rate = parse_hex_double(value, where);
      else if (key == "double_bias")
        arch.double_bias = value == "1";
      else {
        const auto n = static_cast<std::size_t>(std::stoull(value));
        if (key == "input_len")
          arch.input_len = n;
        else if (key == "conv_filters")
          arch.conv_filters = n;
        else if (key == "kernel")
          arch.kernel = n;
        else if (key == "pool")
          arch.pool = n;
        else if (key == "hidden")
          arch.hidden = n;
        else if (key == "classes")
          arch.classes = n;
        else
          throw Error(ErrorCode::Schema, where + ": unknown arch field '" + key + "'");
      }
    }
  }
  ModelState m;
  m.arch = arch;
  m.params = Parameters::zeros(arch);
  m.adam_m = Parameters::zeros(arch);
  m.adam_v = Parameters::zeros(arch);

  in >> word >> m.seed;
  if (word != "seed")
    throw Error(ErrorCode::Schema, where + ": missing seed");
  in >> word >> m.step;
  if (word != "step")
    throw Error(ErrorCode::Schema, where + ": missing step");

  std::size_t loaded = 0;
  while (in >> word && word != "end") {
    if (word != "tensor")
      throw Error(ErrorCode::Schema, where + ": unexpected token '" + word + "'");
    std::string group, name;
    std::size_t rank = 0;
    in >> group >> name >> rank;
    std::vector<std::size_t> shape(rank);
    for (auto &d : shape)
      in >> d;
    Parameters *target = group == "param"    ? &m.params
                         : group == "adam_m" ? &m.adam_m
                         : group == "adam_v" ? &m.adam_v
                                             : nullptr;
    if (!target)
      throw Error(ErrorCode::Schema, where + ": unknown tensor group '" + group + "'");
    NumericGrid *grid = nullptr;
    for (auto [n, g] : target->tensors(arch))
      if (n == name)
        grid = g;
    if (!grid)
      throw Error(ErrorCode::Schema, where + ": unknown tensor '" + name + "'");
    if (grid->shape() != shape)
      throw Error(ErrorCode::Schema, where + ": tensor " + name + " has shape " +
                                       shape_string(shape) + ", architecture implies " +
                                       shape_string(grid->shape()));
    for (std::size_t i = 0; i < grid->size(); ++i) {
      in >> word;
      (*grid)[i] = parse_hex_double(word, where);
    }
    ++loaded;
  }
  if (word != "end" || loaded != 3 * m.params.tensors(arch).size())
    throw Error(ErrorCode::Schema, where + ": truncated checkpoint");
  return m;
}

} // namespace vmclass
