// SPDX-License-Identifier: Apache-2.0
#include "vmclass/dataset.hpp"

#include <algorithm>
#include <bit>
#include <fstream>

#include "vmclass/csv.hpp"
#include "vmclass/error.hpp"

namespace vmclass {

std::string_view to_string(SplitTag tag) {
  switch (tag) {
  case SplitTag::Train:
    return "train";
  case SplitTag::Val:
    return "val";
  case SplitTag::Test:
    return "test";
  case SplitTag::Unassigned:
    break;
  }
  return "unassigned";
}

std::string_view to_string(Provenance p) {
  switch (p) {
  case Provenance::Synthetic:
    return "synthetic";
  case Provenance::Duplicate:
    return "duplicate";
  case Provenance::Real:
    break;
  }
  return "real";
}

SplitTag parse_split_tag(std::string_view text) {
  const auto t = csv::lower(csv::trim(text));
  if (t == "train")
    return SplitTag::Train;
  if (t == "val")
    return SplitTag::Val;
  if (t == "test")
    return SplitTag::Test;
  if (t == "unassigned")
    return SplitTag::Unassigned;
  throw Error(ErrorCode::Schema, "unknown split tag '" + std::string(text) + "'");
}

Provenance parse_provenance(std::string_view text) {
  const auto t = csv::lower(csv::trim(text));
  if (t == "real")
    return Provenance::Real;
  if (t == "synthetic")
    return Provenance::Synthetic;
  if (t == "duplicate")
    return Provenance::Duplicate;
  throw Error(ErrorCode::Schema, "unknown provenance '" + std::string(text) + "'");
}

Dataset Dataset::from_rows(std::vector<std::string> column_names,
                           std::vector<double> flat_features,
                           std::vector<int> labels) {
  Dataset d;
  const std::size_t n = labels.size();
  d.features = NumericGrid({n, column_names.size()}, std::move(flat_features));
  d.labels = std::move(labels);
  d.column_names = std::move(column_names);
  d.split.assign(n, SplitTag::Unassigned);
  d.provenance.assign(n, Provenance::Real);
  return d;
}

void Dataset::validate() const {
  const std::size_t n = labels.size();
  if (features.rank() != 2 || features.dim(0) != n || split.size() != n ||
      provenance.size() != n || features.dim(1) != column_names.size())
    throw Error(ErrorCode::Data, "dataset row/column bookkeeping is inconsistent");
}

std::size_t Dataset::count_label(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

std::size_t Dataset::count_split(SplitTag tag) const {
  return static_cast<std::size_t>(std::count(split.begin(), split.end(), tag));
}

std::vector<std::size_t> Dataset::rows_in(SplitTag tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == tag)
      out.push_back(i);
  return out;
}

Dataset Dataset::select_rows(std::span<const std::size_t> indices) const {
  Dataset out;
  out.column_names = column_names;
  const std::size_t c = cols();
  std::vector<double> flat;
  flat.reserve(indices.size() * c);
  for (std::size_t idx : indices) {
    const auto r = row(idx);
    flat.insert(flat.end(), r.begin(), r.end());
    out.labels.push_back(labels[idx]);
    out.split.push_back(split[idx]);
    out.provenance.push_back(provenance[idx]);
  }
  out.features = NumericGrid({indices.size(), c}, std::move(flat));
  return out;
}

Dataset Dataset::concat(const Dataset &a, const Dataset &b) {
  if (a.column_names != b.column_names)
    throw Error(ErrorCode::Data, "cannot concatenate datasets with different columns");
  Dataset out;
  out.column_names = a.column_names;
  std::vector<double> flat(a.features.data().begin(), a.features.data().end());
  flat.insert(flat.end(), b.features.data().begin(), b.features.data().end());
  out.features = NumericGrid({a.rows() + b.rows(), a.cols()}, std::move(flat));
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.split = a.split;
  out.split.insert(out.split.end(), b.split.begin(), b.split.end());
  out.provenance = a.provenance;
  out.provenance.insert(out.provenance.end(), b.provenance.begin(), b.provenance.end());
  return out;
}

std::size_t Dataset::column_index(std::string_view name) const {
  const auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end())
    throw Error(ErrorCode::Schema, "no column named '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - column_names.begin());
}

void write_dataset(const std::filesystem::path &path, const Dataset &dataset,
                   const Metadata &metadata) {
  dataset.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::Io, "cannot write " + path.string());
  std::vector<std::string> header = dataset.column_names;
  header.insert(header.end(), {"label", "split", "provenance"});
  out << csv::join(header) << '\n';
  std::string line;
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    line.clear();
    for (double v : dataset.row(i)) {
      line += csv::format_double(v);
      line.push_back(',');
    }
    line += std::to_string(dataset.labels[i]);
    line.push_back(',');
    line += to_string(dataset.split[i]);
    line.push_back(',');
    line += to_string(dataset.provenance[i]);
    out << line << '\n';
  }
  if (!out)
    throw Error(ErrorCode::Io, "failed while writing " + path.string());
  write_metadata(path.string() + ".meta", metadata);
}

Dataset read_dataset(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::Schema, path.string() + ": missing header row");
  auto header = csv::split_line(line);
  if (header.size() < 3 || header[header.size() - 3] != "label" ||
      header[header.size() - 2] != "split" || header.back() != "provenance")
    throw Error(ErrorCode::Schema,
                path.string() + ": header must end with label,split,provenance");
  Dataset d;
  d.column_names.assign(header.begin(), header.end() - 3);
  const std::size_t c = d.column_names.size();
  std::vector<double> flat;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty())
      continue;
    const auto fields = csv::split_line(line);
    if (fields.size() != c + 3)
      throw Error(ErrorCode::Row, path.string() + ":" + std::to_string(line_no) +
                                    ": expected " + std::to_string(c + 3) + " fields");
    for (std::size_t j = 0; j < c; ++j) {
      const auto v = csv::parse_double(fields[j]);
      if (!v)
        throw Error(ErrorCode::Row, path.string() + ":" + std::to_string(line_no) +
                                      ": malformed number in column '" +
                                      d.column_names[j] + "'");
      flat.push_back(*v);
    }
    const auto label = csv::parse_double(fields[c]);
    if (!label || (*label != 0.0 && *label != 1.0))
      throw Error(ErrorCode::Row, path.string() + ":" + std::to_string(line_no) +
                                    ": label must be 0 or 1");
    d.labels.push_back(static_cast<int>(*label));
    d.split.push_back(parse_split_tag(fields[c + 1]));
    d.provenance.push_back(parse_provenance(fields[c + 2]));
  }
  d.features = NumericGrid({d.labels.size(), c}, std::move(flat));
  return d;
}

void write_metadata(const std::filesystem::path &path, const Metadata &metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto &[key, value] : metadata)
    out << key << '=' << value << '\n';
  if (!out)
    throw Error(ErrorCode::Io, "failed while writing " + path.string());
}

Metadata read_metadata(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot read " + path.string());
  Metadata out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line.front() == '#')
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::Schema, path.string() + ": expected key=value, got '" + line + "'");
    out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return out;
}

std::uint64_t dataset_hash(const Dataset &dataset) {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (double v : dataset.features.data())
    mix(std::bit_cast<std::uint64_t>(v));
  for (int l : dataset.labels)
    mix(static_cast<std::uint64_t>(l));
  for (SplitTag t : dataset.split)
    mix(static_cast<std::uint64_t>(t));
  return h;
}

} // namespace vmclass
