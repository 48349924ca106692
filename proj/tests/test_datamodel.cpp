#include <doctest.h>

#include <fstream>

#include "ltrlab/datamodel.hpp"
#include "testutil.hpp"

using namespace ltrlab;

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

const std::string kFixtureHeader =
    "group_id,query_id,segment,product_id,outcome,bm25:sparse-content,xe:xe-dense,ctr:engagement\n";

}  // namespace

TEST_CASE("engagement outcome ordering matches the funnel") {
  using data::EngagementOutcome;
  CHECK(EngagementOutcome::kNonEngaged < EngagementOutcome::kClicked);
  CHECK(EngagementOutcome::kClicked < EngagementOutcome::kAddedToCart);
  CHECK(EngagementOutcome::kAddedToCart < EngagementOutcome::kOrdered);

  for (auto outcome : {EngagementOutcome::kNonEngaged, EngagementOutcome::kClicked,
                       EngagementOutcome::kAddedToCart, EngagementOutcome::kOrdered})
    CHECK(data::outcome_from_string(data::to_string(outcome)) == outcome);
  CHECK_FALSE(data::outcome_from_string("bought").has_value());
}

TEST_CASE("schema hash distinguishes names and channels") {
  data::FeatureSchema a{{{"f0", data::FeatureChannel::kSparseContent}}};
  data::FeatureSchema b{{{"f0", data::FeatureChannel::kXeDense}}};
  data::FeatureSchema c{{{"f1", data::FeatureChannel::kSparseContent}}};
  CHECK(a.hash() != b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.hash() == data::FeatureSchema{{{"f0", data::FeatureChannel::kSparseContent}}}.hash());
}

TEST_CASE("load_dataset reads a two-group fixture") {
  const auto path = testutil::temp_path("fixture.csv");
  write_file(path, kFixtureHeader +
                       "g0,q0,head,p0,clicked,0.5,0.9,0.1\n"
                       "g0,q0,head,p1,non_engaged,0.2,0.3,0.0\n"
                       "g1,q1,tail,p2,ordered,1.5,0.8,0.4\n"
                       "g1,q1,tail,p3,added_to_cart,0.1,0.2,0.3\n");
  const auto dataset = data::load_dataset(path);
  REQUIRE(dataset.groups().size() == 2);
  CHECK(dataset.schema().size() == 3);
  CHECK(dataset.schema().field(1).name == "xe");
  CHECK(dataset.schema().field(1).channel == data::FeatureChannel::kXeDense);
  CHECK(dataset.groups()[0].query.id == "q0");
  CHECK(dataset.groups()[1].items[0].outcome == data::EngagementOutcome::kOrdered);
  CHECK(dataset.groups()[1].items[0].features[0] == 1.5);
  CHECK_FALSE(dataset.has_latent());
}

TEST_CASE("load_dataset rejects a NaN feature naming the line") {
  const auto path = testutil::temp_path("nan.csv");
  write_file(path, kFixtureHeader +
                       "g0,q0,head,p0,clicked,0.5,0.9,0.1\n"
                       "g0,q0,head,p1,clicked,nan,0.3,0.0\n");
  CHECK_THROWS_WITH_AS(data::load_dataset(path),
                       doctest::Contains("line 3"), std::runtime_error);
}

TEST_CASE("load_dataset rejects duplicate products within a group") {
  const auto path = testutil::temp_path("dup.csv");
  write_file(path, kFixtureHeader +
                       "g0,q0,head,p0,clicked,0.5,0.9,0.1\n"
                       "g0,q0,head,p0,clicked,0.2,0.3,0.0\n");
  CHECK_THROWS_WITH_AS(data::load_dataset(path), doctest::Contains("duplicate product"),
                       std::runtime_error);
}

TEST_CASE("load_dataset reports wrong column counts with line numbers") {
  const auto path = testutil::temp_path("cols.csv");
  write_file(path, kFixtureHeader +
                       "g0,q0,head,p0,clicked,0.5,0.9,0.1\n"
                       "g0,q0,head,p1,clicked,0.5,0.9\n");
  CHECK_THROWS_WITH_AS(data::load_dataset(path), doctest::Contains("line 3"), std::runtime_error);
}

TEST_CASE("non-contiguous groups are rejected") {
  const auto path = testutil::temp_path("contig.csv");
  write_file(path, kFixtureHeader +
                       "g0,q0,head,p0,clicked,0.5,0.9,0.1\n"
                       "g0,q0,head,p1,clicked,0.2,0.3,0.0\n"
                       "g1,q1,head,p2,clicked,0.5,0.9,0.1\n"
                       "g1,q1,head,p3,clicked,0.2,0.3,0.0\n"
                       "g0,q0,head,p4,clicked,0.2,0.3,0.0\n");
  CHECK_THROWS_WITH_AS(data::load_dataset(path), doctest::Contains("not contiguous"),
                       std::runtime_error);
}

TEST_CASE("empty dataset saves to a header-only file and loads back") {
  data::FeatureSchema schema{{{"f0", data::FeatureChannel::kSparseContent}}};
  data::Dataset empty{schema, {}};
  const auto path = testutil::temp_path("empty.csv");
  data::save_dataset(empty, path);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "group_id,query_id,segment,product_id,outcome,f0:sparse-content");
  CHECK_FALSE(std::getline(in, line));

  const auto loaded = data::load_dataset(path);
  CHECK(loaded.groups().empty());
  CHECK(loaded.schema() == schema);
}

TEST_CASE("save/load round-trip is the identity on random datasets") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const bool with_latent = (seed % 2 == 0);
    const auto dataset = testutil::random_dataset(seed, with_latent);
    const auto path = testutil::temp_path("roundtrip.csv");
    data::save_dataset(dataset, path);
    const auto loaded = data::load_dataset(path);
    REQUIRE(loaded == dataset);
  }
}

TEST_CASE("latent columns are preserved through save/load") {
  const auto dataset = testutil::random_dataset(7, true);
  REQUIRE(dataset.has_latent());
  const auto path = testutil::temp_path("latent.csv");
  data::save_dataset(dataset, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.find("latent.rho,latent.pi") != std::string::npos);

  const auto loaded = data::load_dataset(path);
  CHECK(loaded.has_latent());
  CHECK(loaded.groups()[0].items[0].latent == dataset.groups()[0].items[0].latent);
}

TEST_CASE("dataset invariants are enforced at construction") {
  data::FeatureSchema schema{{{"f0", data::FeatureChannel::kSparseContent}}};
  data::Item item{"p0", {0.5}, data::EngagementOutcome::kClicked, std::nullopt};
  data::Item item2{"p1", {0.7}, data::EngagementOutcome::kClicked, std::nullopt};

  SUBCASE("groups need at least two items") {
    CHECK_THROWS_AS((data::Dataset{schema, {{{"q0", "head"}, {item}}}}), std::invalid_argument);
  }
  SUBCASE("query ids must be unique") {
    data::QueryGroup g0{{"q0", "head"}, {item, item2}};
    data::QueryGroup g1{{"q0", "tail"},
                        {{"p2", {0.1}, data::EngagementOutcome::kClicked, std::nullopt},
                         {"p3", {0.2}, data::EngagementOutcome::kClicked, std::nullopt}}};
    CHECK_THROWS_AS((data::Dataset{schema, {g0, g1}}), std::invalid_argument);
  }
  SUBCASE("product ids must be unique across the dataset") {
    data::QueryGroup g0{{"q0", "head"}, {item, item2}};
    data::QueryGroup g1{{"q1", "tail"},
                        {{"p0", {0.1}, data::EngagementOutcome::kClicked, std::nullopt},
                         {"p4", {0.2}, data::EngagementOutcome::kClicked, std::nullopt}}};
    CHECK_THROWS_AS((data::Dataset{schema, {g0, g1}}), std::invalid_argument);
  }
  SUBCASE("feature width must match the schema") {
    data::Item wide{"p5", {0.5, 0.6}, data::EngagementOutcome::kClicked, std::nullopt};
    CHECK_THROWS_AS((data::Dataset{schema, {{{"q0", "head"}, {item, wide}}}}),
                    std::invalid_argument);
  }
  SUBCASE("latent presence must be uniform") {
    data::Item with_latent{"p6", {0.5}, data::EngagementOutcome::kClicked,
                           data::LatentTruth{0.5, 0.5}};
    CHECK_THROWS_AS((data::Dataset{schema, {{{"q0", "head"}, {item, with_latent}}}}),
                    std::invalid_argument);
  }
}
