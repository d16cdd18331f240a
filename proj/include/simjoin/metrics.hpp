#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace simjoin {

enum class PayloadKind { Vector, String, TokenSet };

enum class MetricKind { L1Norm, Euclidean, EditDistance, JaccardDistance };

// Token sets are kept sorted and deduplicated.
using TokenSet = std::vector<std::string>;

struct DataObject {
  std::uint64_t id = 0;
  std::variant<Eigen::VectorXd, std::string, TokenSet> payload;
};

struct Threshold {
  double delta = 0.0;
};

// A dataset holds objects of one payload kind; vector payloads share one
// dimension. Objects are stored sorted by id and ids are unique.
struct Dataset {
  PayloadKind kind = PayloadKind::Vector;
  Eigen::Index dim = 0;  // vector payloads only
  std::vector<DataObject> objects;

  std::size_t size() const { return objects.size(); }
};

PayloadKind payload_kind(const DataObject& o);
PayloadKind required_payload(MetricKind metric);

const char* to_string(MetricKind metric);
const char* to_string(PayloadKind kind);
MetricKind metric_from_string(const std::string& name);
PayloadKind payload_from_string(const std::string& name);

std::size_t levenshtein(std::string_view a, std::string_view b);

/// Metric distance between two objects of the payload kind the metric
/// requires. Throws std::invalid_argument on payload or dimension mismatch.
double distance(MetricKind metric, const DataObject& a, const DataObject& b);

bool is_similar(MetricKind metric, const DataObject& a, const DataObject& b,
                Threshold t);

// Dataset files.
//   vector:   CSV, one object per line: id,x1,...,xm
//   string:   one object per line, id = 0-based line number
//   token set: one object per line, whitespace-separated tokens, id = line number
Dataset read_dataset(const std::filesystem::path& path, PayloadKind kind);
void write_dataset(const Dataset& ds, const std::filesystem::path& path);

Dataset parse_dataset(const std::string& text, PayloadKind kind);
std::string format_dataset(const Dataset& ds);

TokenSet make_token_set(std::vector<std::string> tokens);

// Approximate serialized size of one object, used for the simulated
// network-transfer counters.
long long payload_bytes(const DataObject& o);

}  // namespace simjoin
