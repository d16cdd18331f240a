#include "simjoin/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace simjoin {

PayloadKind payload_kind(const DataObject& o) {
  if (std::holds_alternative<Eigen::VectorXd>(o.payload)) return PayloadKind::Vector;
  if (std::holds_alternative<std::string>(o.payload)) return PayloadKind::String;
  return PayloadKind::TokenSet;
}

PayloadKind required_payload(MetricKind metric) {
  switch (metric) {
    case MetricKind::L1Norm:
    case MetricKind::Euclidean:
      return PayloadKind::Vector;
    case MetricKind::EditDistance:
      return PayloadKind::String;
    case MetricKind::JaccardDistance:
      return PayloadKind::TokenSet;
  }
  throw std::invalid_argument("unknown metric");
}

const char* to_string(MetricKind metric) {
  switch (metric) {
    case MetricKind::L1Norm: return "l1";
    case MetricKind::Euclidean: return "l2";
    case MetricKind::EditDistance: return "edit";
    case MetricKind::JaccardDistance: return "jaccard";
  }
  return "?";
}

const char* to_string(PayloadKind kind) {
  switch (kind) {
    case PayloadKind::Vector: return "vector";
    case PayloadKind::String: return "string";
    case PayloadKind::TokenSet: return "set";
  }
  return "?";
}

MetricKind metric_from_string(const std::string& name) {
  if (name == "l1") return MetricKind::L1Norm;
  if (name == "l2" || name == "euclidean") return MetricKind::Euclidean;
  if (name == "edit") return MetricKind::EditDistance;
  if (name == "jaccard") return MetricKind::JaccardDistance;
  throw std::invalid_argument("unknown metric: " + name);
}

PayloadKind payload_from_string(const std::string& name) {
  if (name == "vector") return PayloadKind::Vector;
  if (name == "string") return PayloadKind::String;
  if (name == "set") return PayloadKind::TokenSet;
  throw std::invalid_argument("unknown payload kind: " + name);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return a.size();

  // Two-row dynamic program over the shorter string.
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      diag = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
    }
  }
  return row[b.size()];
}

namespace {

double jaccard_distance(const TokenSet& a, const TokenSet& b) {
  if (a.empty() && b.empty()) return 0.0;  // identical objects
  std::size_t inter = 0;
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

double distance(MetricKind metric, const DataObject& a, const DataObject& b) {
  const PayloadKind need = required_payload(metric);
  if (payload_kind(a) != need || payload_kind(b) != need) {
    throw std::invalid_argument("payload kind does not match metric");
  }
  switch (metric) {
    case MetricKind::L1Norm:
    case MetricKind::Euclidean: {
      const auto& va = std::get<Eigen::VectorXd>(a.payload);
      const auto& vb = std::get<Eigen::VectorXd>(b.payload);
      if (va.size() != vb.size()) {
        throw std::invalid_argument("vector dimension mismatch");
      }
      if (metric == MetricKind::L1Norm) return (va - vb).lpNorm<1>();
      return (va - vb).norm();
    }
    case MetricKind::EditDistance:
      return static_cast<double>(levenshtein(std::get<std::string>(a.payload),
                                             std::get<std::string>(b.payload)));
    case MetricKind::JaccardDistance:
      return jaccard_distance(std::get<TokenSet>(a.payload),
                              std::get<TokenSet>(b.payload));
  }
  throw std::invalid_argument("unknown metric");
}

bool is_similar(MetricKind metric, const DataObject& a, const DataObject& b,
                Threshold t) {
  return distance(metric, a, b) <= t.delta;
}

TokenSet make_token_set(std::vector<std::string> tokens) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return tokens;
}

namespace {

void finalize(Dataset& ds) {
  std::sort(ds.objects.begin(), ds.objects.end(),
            [](const DataObject& a, const DataObject& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < ds.objects.size(); ++i) {
    if (ds.objects[i].id == ds.objects[i - 1].id) {
      throw std::invalid_argument("duplicate object id " +
                                  std::to_string(ds.objects[i].id));
    }
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Dataset parse_dataset(const std::string& text, PayloadKind kind) {
  Dataset ds;
  ds.kind = kind;
  std::istringstream in(text);
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (kind == PayloadKind::Vector) {
      if (line.empty()) continue;
      std::vector<double> fields;
      std::uint64_t id = 0;
      const char* p = line.data();
      const char* end = p + line.size();
      auto idr = std::from_chars(p, end, id);
      if (idr.ec != std::errc()) {
        throw std::invalid_argument("bad id in line: " + line);
      }
      p = idr.ptr;
      while (p != end) {
        if (*p != ',') throw std::invalid_argument("expected ',' in line: " + line);
        ++p;
        double v = 0;
        auto r = std::from_chars(p, end, v);
        if (r.ec != std::errc()) {
          throw std::invalid_argument("bad number in line: " + line);
        }
        fields.push_back(v);
        p = r.ptr;
      }
      if (fields.empty()) throw std::invalid_argument("empty vector in line: " + line);
      Eigen::VectorXd vec = Eigen::Map<Eigen::VectorXd>(fields.data(), fields.size());
      if (ds.objects.empty()) {
        ds.dim = vec.size();
      } else if (vec.size() != ds.dim) {
        throw std::invalid_argument("inconsistent vector dimension");
      }
      ds.objects.push_back({id, std::move(vec)});
    } else if (kind == PayloadKind::String) {
      ds.objects.push_back({line_no, line});
    } else {
      std::istringstream ls(line);
      std::vector<std::string> tokens;
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      ds.objects.push_back({line_no, make_token_set(std::move(tokens))});
    }
    ++line_no;
  }
  finalize(ds);
  return ds;
}

Dataset read_dataset(const std::filesystem::path& path, PayloadKind kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), kind);
}

std::string format_dataset(const Dataset& ds) {
  std::string out;
  for (const auto& o : ds.objects) {
    switch (ds.kind) {
      case PayloadKind::Vector: {
        out += std::to_string(o.id);
        const auto& v = std::get<Eigen::VectorXd>(o.payload);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
          out += ',';
          out += format_double(v[i]);
        }
        break;
      }
      case PayloadKind::String:
        out += std::get<std::string>(o.payload);
        break;
      case PayloadKind::TokenSet: {
        const auto& toks = std::get<TokenSet>(o.payload);
        for (std::size_t i = 0; i < toks.size(); ++i) {
          if (i) out += ' ';
          out += toks[i];
        }
        break;
      }
    }
    out += '\n';
  }
  return out;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path.string());
  out << format_dataset(ds);
}

long long payload_bytes(const DataObject& o) {
  long long bytes = 8;  // id
  switch (payload_kind(o)) {
    case PayloadKind::Vector:
      bytes += 8 * std::get<Eigen::VectorXd>(o.payload).size();
      break;
    case PayloadKind::String:
      bytes += static_cast<long long>(std::get<std::string>(o.payload).size());
      break;
    case PayloadKind::TokenSet:
      for (const auto& t : std::get<TokenSet>(o.payload)) {
        bytes += static_cast<long long>(t.size()) + 1;
      }
      break;
  }
  return bytes;
}

}  // namespace simjoin
