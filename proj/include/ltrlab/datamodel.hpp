#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ltrlab/sigmoid.hpp"

namespace ltrlab::data {

// Logged user action for a product under a query. The ordering is part
// of the contract: ordered > added-to-cart > clicked > non-engaged.
enum class EngagementOutcome : int {
  kNonEngaged = 0,
  kClicked = 1,
  kAddedToCart = 2,
  kOrdered = 3,
};

std::string_view to_string(EngagementOutcome outcome);
std::optional<EngagementOutcome> outcome_from_string(std::string_view text);

enum class FeatureChannel : int {
  kSparseContent = 0,  // text-match style signals
  kXeDense = 1,        // dense cross-encoder relevance signal
  kEngagement = 2,     // historical behavioral aggregates
};

std::string_view to_string(FeatureChannel channel);
std::optional<FeatureChannel> channel_from_string(std::string_view text);

struct FeatureField {
  std::string name;
  FeatureChannel channel;

  bool operator==(const FeatureField&) const = default;
};

// Ordered list of feature names with channel tags. The hash pins a
// trained model to the data layout it was trained on.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FeatureField> fields);

  std::size_t size() const { return fields_.size(); }
  const FeatureField& field(std::size_t i) const { return fields_.at(i); }
  const std::vector<FeatureField>& fields() const { return fields_; }

  std::vector<std::size_t> indices_of(FeatureChannel channel) const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::uint64_t hash() const;

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<FeatureField> fields_;
};

struct Query {
  std::string id;
  std::string segment;  // head / torso / tail

  bool operator==(const Query&) const = default;
};

// Ground truth attached to synthetic items: rho is latent content
// relevance, pi is latent engagement propensity, both in [0, 1].
struct LatentTruth {
  double rho = 0.0;
  double pi = 0.0;

  bool operator==(const LatentTruth&) const = default;
};

struct Item {
  std::string product_id;
  std::vector<double> features;
  EngagementOutcome outcome = EngagementOutcome::kNonEngaged;
  std::optional<LatentTruth> latent;

  bool operator==(const Item&) const = default;
};

// One logged search event: a query plus its candidates.
struct QueryGroup {
  Query query;
  std::vector<Item> items;

  bool operator==(const QueryGroup&) const = default;
};

// Immutable after construction; the constructor enforces every type
// invariant (group sizes, unique ids, finite features, uniform latent
// presence). Safe to share read-only across workers.
class Dataset {
 public:
  Dataset() = default;
  Dataset(FeatureSchema schema, std::vector<QueryGroup> groups);

  const FeatureSchema& schema() const { return schema_; }
  const std::vector<QueryGroup>& groups() const { return groups_; }
  std::size_t total_items() const;
  bool has_latent() const;

  bool operator==(const Dataset&) const = default;

 private:
  FeatureSchema schema_;
  std::vector<QueryGroup> groups_;
};

// How a variant sources its content relevance scores.
enum class ContentSource : int {
  kGbdtBaseline = 0,   // small tree regressor on sparse content features
  kContentScorer = 1,  // trainable relevance scorer
  kFileScores = 2,     // precomputed scores from a two-column file
};

std::string_view to_string(ContentSource source);
std::optional<ContentSource> content_source_from_string(std::string_view text);

// One row of the experiment grid: content-label source, optional
// polarizing transform, and whether the ranker sees xe-dense features.
struct VariantConfig {
  std::string name;
  ContentSource content_source = ContentSource::kContentScorer;
  std::optional<labels::SigmoidParams> transform;
  bool use_xe_features = true;
  std::string scores_file;  // only for kFileScores
};

// Line-delimited text corpus IO. The first line is a schema header;
// each record carries group id, query, segment, product, outcome, the
// feature values, and optionally the latent truth columns.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace ltrlab::data
