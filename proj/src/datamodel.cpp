#include "ltrlab/datamodel.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "ltrlab/rng.hpp"

namespace ltrlab::data {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("dataset parse error at line " + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& text, std::size_t line_no, const std::string& column) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) parse_fail(line_no, "trailing characters in " + column);
    return v;
  } catch (const std::invalid_argument&) {
    parse_fail(line_no, "not a number in " + column + ": '" + text + "'");
  } catch (const std::out_of_range&) {
    parse_fail(line_no, "number out of range in " + column);
  }
}

}  // namespace

std::string_view to_string(EngagementOutcome outcome) {
  switch (outcome) {
    case EngagementOutcome::kNonEngaged: return "non_engaged";
    case EngagementOutcome::kClicked: return "clicked";
    case EngagementOutcome::kAddedToCart: return "added_to_cart";
    case EngagementOutcome::kOrdered: return "ordered";
  }
  throw std::logic_error("unknown EngagementOutcome");
}

std::optional<EngagementOutcome> outcome_from_string(std::string_view text) {
  if (text == "non_engaged") return EngagementOutcome::kNonEngaged;
  if (text == "clicked") return EngagementOutcome::kClicked;
  if (text == "added_to_cart") return EngagementOutcome::kAddedToCart;
  if (text == "ordered") return EngagementOutcome::kOrdered;
  return std::nullopt;
}

std::string_view to_string(FeatureChannel channel) {
  switch (channel) {
    case FeatureChannel::kSparseContent: return "sparse-content";
    case FeatureChannel::kXeDense: return "xe-dense";
    case FeatureChannel::kEngagement: return "engagement";
  }
  throw std::logic_error("unknown FeatureChannel");
}

std::optional<FeatureChannel> channel_from_string(std::string_view text) {
  if (text == "sparse-content") return FeatureChannel::kSparseContent;
  if (text == "xe-dense") return FeatureChannel::kXeDense;
  if (text == "engagement") return FeatureChannel::kEngagement;
  return std::nullopt;
}

std::string_view to_string(ContentSource source) {
  switch (source) {
    case ContentSource::kGbdtBaseline: return "gbdt_baseline";
    case ContentSource::kContentScorer: return "content_scorer";
    case ContentSource::kFileScores: return "file_scores";
  }
  throw std::logic_error("unknown ContentSource");
}

std::optional<ContentSource> content_source_from_string(std::string_view text) {
  if (text == "gbdt_baseline") return ContentSource::kGbdtBaseline;
  if (text == "content_scorer") return ContentSource::kContentScorer;
  if (text == "file_scores") return ContentSource::kFileScores;
  return std::nullopt;
}

FeatureSchema::FeatureSchema(std::vector<FeatureField> fields) : fields_(std::move(fields)) {
  std::unordered_set<std::string> seen;
  for (const auto& f : fields_) {
    if (f.name.empty()) throw std::invalid_argument("FeatureSchema: empty feature name");
    if (f.name.find(',') != std::string::npos || f.name.find(':') != std::string::npos)
      throw std::invalid_argument("FeatureSchema: feature name may not contain ',' or ':'");
    if (!seen.insert(f.name).second)
      throw std::invalid_argument("FeatureSchema: duplicate feature name '" + f.name + "'");
  }
}

std::vector<std::size_t> FeatureSchema::indices_of(FeatureChannel channel) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fields_.size(); ++i)
    if (fields_[i].channel == channel) out.push_back(i);
  return out;
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i)
    if (fields_[i].name == name) return i;
  return std::nullopt;
}

std::uint64_t FeatureSchema::hash() const {
  std::string blob;
  for (const auto& f : fields_) {
    blob += f.name;
    blob += ':';
    blob += to_string(f.channel);
    blob += ';';
  }
  return fnv1a_hash(blob);
}

Dataset::Dataset(FeatureSchema schema, std::vector<QueryGroup> groups)
    : schema_(std::move(schema)), groups_(std::move(groups)) {
  std::unordered_set<std::string> query_ids;
  std::unordered_set<std::string> product_ids;
  std::optional<bool> latent_present;
  for (const auto& group : groups_) {
    if (group.query.id.empty()) throw std::invalid_argument("Dataset: empty query id");
    if (!query_ids.insert(group.query.id).second)
      throw std::invalid_argument("Dataset: duplicate query id '" + group.query.id + "'");
    if (group.items.size() < 2)
      throw std::invalid_argument("Dataset: group '" + group.query.id + "' has fewer than 2 items");
    std::unordered_set<std::string> group_products;
    for (const auto& item : group.items) {
      if (item.product_id.empty()) throw std::invalid_argument("Dataset: empty product id");
      if (!group_products.insert(item.product_id).second)
        throw std::invalid_argument("Dataset: duplicate product '" + item.product_id +
                                    "' in group '" + group.query.id + "'");
      if (!product_ids.insert(item.product_id).second)
        throw std::invalid_argument("Dataset: product id '" + item.product_id +
                                    "' appears in more than one group");
      if (item.features.size() != schema_.size())
        throw std::invalid_argument("Dataset: feature vector length mismatch for product '" +
                                    item.product_id + "'");
      for (double v : item.features)
        if (!std::isfinite(v))
          throw std::invalid_argument("Dataset: non-finite feature for product '" +
                                      item.product_id + "'");
      if (item.latent) {
        const auto& lat = *item.latent;
        if (!(lat.rho >= 0.0 && lat.rho <= 1.0 && lat.pi >= 0.0 && lat.pi <= 1.0))
          throw std::invalid_argument("Dataset: latent truth outside [0, 1] for product '" +
                                      item.product_id + "'");
      }
      if (!latent_present) latent_present = item.latent.has_value();
      if (*latent_present != item.latent.has_value())
        throw std::invalid_argument("Dataset: latent columns must be present on all items or none");
    }
  }
}

std::size_t Dataset::total_items() const {
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.items.size();
  return n;
}

bool Dataset::has_latent() const {
  return !groups_.empty() && !groups_.front().items.empty() &&
         groups_.front().items.front().latent.has_value();
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open '" + path.string() + "' for writing");

  const bool latent = dataset.has_latent();
  out << "group_id,query_id,segment,product_id,outcome";
  for (const auto& f : dataset.schema().fields()) out << ',' << f.name << ':' << to_string(f.channel);
  if (latent) out << ",latent.rho,latent.pi";
  out << '\n';

  std::size_t group_index = 0;
  for (const auto& group : dataset.groups()) {
    char gid[24];
    std::snprintf(gid, sizeof(gid), "g%05zu", group_index++);
    for (const auto& item : group.items) {
      out << gid << ',' << group.query.id << ',' << group.query.segment << ',' << item.product_id
          << ',' << to_string(item.outcome);
      for (double v : item.features) out << ',' << format_double(v);
      if (latent) out << ',' << format_double(item.latent->rho) << ',' << format_double(item.latent->pi);
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("save_dataset: write failure on '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_dataset: empty file (missing header)");

  const auto header = split_csv(line);
  constexpr std::size_t kFixed = 5;  // group_id,query_id,segment,product_id,outcome
  if (header.size() < kFixed || header[0] != "group_id" || header[1] != "query_id" ||
      header[2] != "segment" || header[3] != "product_id" || header[4] != "outcome")
    parse_fail(1, "malformed header");

  bool latent = false;
  std::size_t n_features = header.size() - kFixed;
  if (n_features >= 2 && header[header.size() - 2] == "latent.rho" &&
      header[header.size() - 1] == "latent.pi") {
    latent = true;
    n_features -= 2;
  }

  std::vector<FeatureField> fields;
  for (std::size_t i = 0; i < n_features; ++i) {
    const std::string& col = header[kFixed + i];
    const auto sep = col.rfind(':');
    if (sep == std::string::npos) parse_fail(1, "feature column '" + col + "' missing channel tag");
    const auto channel = channel_from_string(col.substr(sep + 1));
    if (!channel) parse_fail(1, "unknown channel tag in column '" + col + "'");
    fields.push_back({col.substr(0, sep), *channel});
  }
  FeatureSchema schema{std::move(fields)};

  std::vector<QueryGroup> groups;
  std::unordered_set<std::string> finished_groups;
  std::string current_gid;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    const std::size_t expected = kFixed + n_features + (latent ? 2 : 0);
    if (cols.size() != expected)
      parse_fail(line_no, "expected " + std::to_string(expected) + " columns, got " +
                              std::to_string(cols.size()));

    const std::string& gid = cols[0];
    if (gid.empty()) parse_fail(line_no, "empty group_id");
    if (gid != current_gid) {
      if (!finished_groups.insert(gid).second)
        parse_fail(line_no, "group '" + gid + "' is not contiguous");
      groups.push_back(QueryGroup{Query{cols[1], cols[2]}, {}});
      current_gid = gid;
    } else if (groups.back().query.id != cols[1]) {
      parse_fail(line_no, "query id changed within group '" + gid + "'");
    }

    Item item;
    item.product_id = cols[3];
    const auto outcome = outcome_from_string(cols[4]);
    if (!outcome) parse_fail(line_no, "unknown outcome '" + cols[4] + "'");
    item.outcome = *outcome;
    item.features.reserve(n_features);
    for (std::size_t i = 0; i < n_features; ++i) {
      const double v = parse_double(cols[kFixed + i], line_no, "feature '" + schema.field(i).name + "'");
      if (!std::isfinite(v))
        parse_fail(line_no, "non-finite value in feature '" + schema.field(i).name + "'");
      item.features.push_back(v);
    }
    if (latent) {
      LatentTruth truth;
      truth.rho = parse_double(cols[kFixed + n_features], line_no, "latent.rho");
      truth.pi = parse_double(cols[kFixed + n_features + 1], line_no, "latent.pi");
      item.latent = truth;
    }
    groups.back().items.push_back(std::move(item));
  }

  try {
    return Dataset{std::move(schema), std::move(groups)};
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("load_dataset: ") + e.what());
  }
}

}  // namespace ltrlab::data
