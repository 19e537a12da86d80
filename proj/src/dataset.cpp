#include "nag/dataset.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "nag/errors.hpp"

namespace nag {

std::vector<int> Dataset::domains_present() const {
  std::set<int> seen;
  for (const auto& s : samples) seen.insert(s.domain);
  return std::vector<int>(seen.begin(), seen.end());
}

std::vector<std::size_t> Dataset::indices_of_domain(int domain) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].domain == domain) idx.push_back(i);
  return idx;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for write: " + path);
  out << "nagdata v1 classes=" << ds.num_classes << " domains=" << ds.num_domains
      << " dim=" << ds.dim << " true_labels=" << (ds.has_true_labels ? 1 : 0)
      << " high_ratio_warning=" << (ds.high_ratio_warning ? 1 : 0) << "\n";
  for (const auto& s : ds.samples) {
    out << s.id << ',' << s.domain << ',' << s.noisy_label;
    if (ds.has_true_labels) out << ',' << s.true_label;
    for (double v : s.x) out << ',' << format_double(v);
    out << "\n";
  }
  if (!out) throw ParseError("write failed: " + path);
}

namespace {

int parse_header_int(const std::string& header, const std::string& key) {
  const std::string tag = key + "=";
  const auto pos = header.find(tag);
  if (pos == std::string::npos)
    throw ParseError("dataset header missing field '" + key + "'");
  return std::stoi(header.substr(pos + tag.size()));
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  std::string header;
  if (!std::getline(in, header)) throw ParseError("empty dataset file: " + path);
  if (header.rfind("nagdata v1 ", 0) != 0)
    throw ParseError("unrecognized dataset header: " + header);

  Dataset ds;
  ds.num_classes = parse_header_int(header, "classes");
  ds.num_domains = parse_header_int(header, "domains");
  ds.dim = parse_header_int(header, "dim");
  ds.has_true_labels = parse_header_int(header, "true_labels") != 0;
  ds.high_ratio_warning = parse_header_int(header, "high_ratio_warning") != 0;
  if (ds.num_classes <= 0 || ds.num_domains <= 0 || ds.dim <= 0)
    throw ParseError("dataset header has non-positive sizes: " + header);

  const std::size_t fixed = ds.has_true_labels ? 4 : 3;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> tok;
    std::stringstream ss(line);
    std::string piece;
    while (std::getline(ss, piece, ',')) tok.push_back(piece);
    if (tok.size() != fixed + static_cast<std::size_t>(ds.dim))
      throw ParseError("dataset line " + std::to_string(lineno) + ": expected " +
                       std::to_string(fixed + ds.dim) + " fields, got " +
                       std::to_string(tok.size()));
    Sample s;
    try {
      s.id = std::stoll(tok[0]);
      s.domain = std::stoi(tok[1]);
      s.noisy_label = std::stoi(tok[2]);
      if (ds.has_true_labels) s.true_label = std::stoi(tok[3]);
      s.x.resize(ds.dim);
      for (int d = 0; d < ds.dim; ++d) s.x[d] = std::stod(tok[fixed + d]);
    } catch (const std::exception&) {
      throw ParseError("dataset line " + std::to_string(lineno) + ": malformed field");
    }
    if (s.domain < 0 || s.domain >= ds.num_domains)
      throw ParseError("dataset line " + std::to_string(lineno) + ": domain out of range");
    if (s.noisy_label < 0 || s.noisy_label >= ds.num_classes)
      throw ParseError("dataset line " + std::to_string(lineno) + ": label out of range");
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::uint64_t dataset_checksum(const Dataset& ds) {
  // FNV-1a over the exact serialized bytes, so equal checksums mean
  // byte-identical files.
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
  };
  feed("nagdata v1 classes=" + std::to_string(ds.num_classes) +
       " domains=" + std::to_string(ds.num_domains) + " dim=" + std::to_string(ds.dim) +
       " true_labels=" + std::to_string(ds.has_true_labels ? 1 : 0) +
       " high_ratio_warning=" + std::to_string(ds.high_ratio_warning ? 1 : 0) + "\n");
  for (const auto& s : ds.samples) {
    std::string line = std::to_string(s.id) + ',' + std::to_string(s.domain) + ',' +
                       std::to_string(s.noisy_label);
    if (ds.has_true_labels) line += ',' + std::to_string(s.true_label);
    for (double v : s.x) line += ',' + format_double(v);
    line += '\n';
    feed(line);
  }
  return h;
}

}  // namespace nag
