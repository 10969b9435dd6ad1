#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "metric_table.hpp"
#include "support.hpp"
#include "walkeval/error.hpp"
#include "walkeval/registry.hpp"

using namespace walkeval;
using walkeval::testing::kMetricTable;

namespace {

std::vector<std::string> names(const std::vector<NamedMetric>& metrics) {
  std::vector<std::string> out;
  for (const auto& m : metrics) out.push_back(m.name);
  return out;
}

MetricSpec metric(std::string vague, std::string quantified, std::string criterion,
                  Actionability flag = Actionability::unspecified) {
  MetricSpec m;
  m.vague_name = std::move(vague);
  m.quantified_name = std::move(quantified);
  m.criterion = std::move(criterion);
  m.description = "d";
  m.scoring = {ScoringKind::graded, "r"};
  m.actionable = flag;
  return m;
}

}  // namespace

TEST(DefaultRegistry, HasTwentyOneMetricsPerCriterion) {
  const auto& r = default_registry();
  EXPECT_EQ(r.criteria(), (std::vector<std::string>{"Safety", "Attractiveness"}));
  EXPECT_EQ(r.metrics().size(), 42u);
  EXPECT_EQ(r.metrics_for("Safety", Naming::vague).size(), 21u);
  EXPECT_EQ(r.metrics_for("Attractiveness", Naming::quantified).size(), 21u);
}

TEST(DefaultRegistry, NamesMatchPublishedTableInOrder) {
  const auto& r = default_registry();
  const auto sv = names(r.metrics_for("Safety", Naming::vague));
  const auto sq = names(r.metrics_for("Safety", Naming::quantified));
  const auto av = names(r.metrics_for("Attractiveness", Naming::vague));
  const auto aq = names(r.metrics_for("Attractiveness", Naming::quantified));
  for (std::size_t i = 0; i < kMetricTable.size(); ++i) {
    EXPECT_EQ(sv[i], kMetricTable[i].safety_vague);
    EXPECT_EQ(sq[i], kMetricTable[i].safety_quantified);
    EXPECT_EQ(av[i], kMetricTable[i].attractiveness_vague);
    EXPECT_EQ(aq[i], kMetricTable[i].attractiveness_quantified);
  }
}

TEST(DefaultRegistry, MetricsForExamples) {
  const auto& r = default_registry();
  EXPECT_EQ(r.metrics_for("Safety", Naming::vague).front().name, "CrossingAids");
  const auto quantified = r.metrics_for("Safety", Naming::quantified);
  auto cctv = std::find_if(quantified.begin(), quantified.end(),
                           [](const NamedMetric& m) { return m.metric.vague_name == "CCTV"; });
  ASSERT_NE(cctv, quantified.end());
  EXPECT_EQ(cctv->name, "PresenceOfSecurityCameras");
}

TEST(DefaultRegistry, ActionableSubsetFollowsPublishedExamples) {
  const auto& r = default_registry();
  auto has = [](const std::vector<MetricSpec>& v, std::string_view name) {
    return std::any_of(v.begin(), v.end(), [&](const MetricSpec& m) { return m.quantified_name == name; });
  };
  const auto attractive = r.actionable_subset("Attractiveness");
  EXPECT_TRUE(has(attractive.actionable, "PresenceOfTrees"));
  EXPECT_TRUE(has(attractive.actionable, "NumberOfFixedFurniture"));
  EXPECT_TRUE(has(attractive.actionable, "EnvironmentalColorDiversity"));
  const auto safety = r.actionable_subset("Safety");
  EXPECT_FALSE(has(safety.actionable, "PresenceOfPedestrianSignals"));
  EXPECT_FALSE(has(safety.actionable, "NumberOfTrafficCalmingDevices"));
  EXPECT_FALSE(has(safety.unspecified, "PresenceOfPedestrianSignals"));
}

TEST(DefaultRegistry, ActionableSubsetIsSubsetAndIdempotent) {
  const auto& r = default_registry();
  for (const auto& c : r.criteria()) {
    const auto subset = r.actionable_subset(c);
    const auto all = r.metrics_for(c, Naming::quantified);
    for (const auto& m : subset.actionable) {
      EXPECT_TRUE(std::any_of(all.begin(), all.end(), [&](const NamedMetric& n) { return n.metric == m; }));
      EXPECT_EQ(m.actionable, Actionability::actionable);
    }
    MetricRegistry again({c}, subset.actionable);
    if (!subset.actionable.empty()) EXPECT_EQ(again.actionable_subset(c).actionable, subset.actionable);
  }
}

TEST(DefaultRegistry, TableTwoDescriptionsAreVerbatim) {
  const auto& r = default_registry();
  const auto* inst = r.find("Attractiveness", "PresenceOfInstitutionalArea", Naming::quantified);
  ASSERT_NE(inst, nullptr);
  EXPECT_EQ(inst->description, "Institutional area refers to educational, medical, community and cultural areas.");
  EXPECT_EQ(inst->description_provenance, Provenance::paper);
  EXPECT_EQ(inst->scoring.kind, ScoringKind::presence);
  const auto* calming = r.find("Safety", "NumberOfTrafficCalmingDevices", Naming::quantified);
  ASSERT_NE(calming, nullptr);
  EXPECT_EQ(calming->scoring.rubric, "A higher number of traffic calming devices corresponds to a higher score.");
}

TEST(DefaultRegistry, EveryMetricHasDescriptionAndRubric) {
  for (const auto& m : default_registry().metrics()) {
    EXPECT_FALSE(m.description.empty()) << m.quantified_name;
    EXPECT_FALSE(m.scoring.rubric.empty()) << m.quantified_name;
    EXPECT_NE(m.scoring.kind, ScoringKind::direct);
  }
}

TEST(LoadRegistry, EmptyDocumentIsEmptyRegistry) {
  const auto r = load_registry("");
  EXPECT_TRUE(r.criteria().empty());
  EXPECT_TRUE(r.metrics().empty());
  EXPECT_TRUE(load_registry("  \n").metrics().empty());
}

TEST(LoadRegistry, DuplicateNameIsRejected) {
  auto entry = [](const char* quantified) {
    return fmt::format(R"({{"vague_name": "CCTV", "quantified_name": "{}", "criterion": "Safety",
      "description": "d", "description_provenance": "authored", "scoring": {{"kind": "presence", "rubric": "r"}},
      "actionable": "unspecified", "method": "m", "data_source": "s"}})",
                       quantified);
  };
  const std::string doc = fmt::format(R"({{"criteria": ["Safety"], "metrics": [{}, {}]}})",
                                      entry("PresenceOfSecurityCameras"), entry("NumberOfCameras"));
  try {
    load_registry(doc);
    FAIL() << "expected DuplicateMetric";
  } catch (const DuplicateMetric& e) {
    EXPECT_EQ(e.name(), "CCTV");
  }
}

TEST(LoadRegistry, SameNameUnderDifferentCriteriaIsAllowed) {
  MetricRegistry r({"Safety", "Attractiveness"},
                   {metric("Colorfulness", "EnvironmentalColorDiversity", "Safety"),
                    metric("Colorfulness", "EnvironmentalColorDiversity", "Attractiveness")});
  EXPECT_EQ(r.metrics().size(), 2u);
}

TEST(LoadRegistry, RejectsBadInput) {
  EXPECT_THROW(load_registry("{"), ParseError);
  EXPECT_THROW(load_registry("[]"), ParseError);
  EXPECT_THROW(load_registry(R"({"criteria": ["Safety"], "extra": 1})"), ValidationError);
  EXPECT_THROW(MetricRegistry({"Safety"}, {metric("A", "B", "Comfort")}), UnknownCriterion);
  EXPECT_THROW(MetricRegistry({"Safety"}, {metric("Has space", "B", "Safety")}), ValidationError);
  EXPECT_THROW(MetricRegistry({"Safety", "Safety"}, {}), ValidationError);
  auto direct = metric("A", "B", "Safety");
  direct.scoring.kind = ScoringKind::direct;
  EXPECT_THROW(MetricRegistry({"Safety"}, {direct}), ValidationError);
  EXPECT_THROW(default_registry().metrics_for("Comfort", Naming::vague), UnknownCriterion);
}

TEST(LoadRegistry, ParseErrorCarriesPosition) {
  try {
    load_registry("{\n  \"criteria\": [\n  }");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadRegistry, RoundTripIsIdentity) {
  const auto& r = default_registry();
  const auto text = serialize_registry(r);
  EXPECT_EQ(load_registry(text), r);
  EXPECT_EQ(serialize_registry(load_registry(text)), text);
}

TEST(LoadRegistry, ShippedFileMatchesCanonicalRendering) {
  const auto file = walkeval::testing::read_file(WALKEVAL_SOURCE_DIR "/data/default_registry.json");
  EXPECT_EQ(serialize_registry(default_registry()), file);
}

TEST(LoadRegistry, AllNotActionableGivesEmptySubset) {
  MetricRegistry r({"Safety"}, {metric("A", "B", "Safety", Actionability::not_actionable),
                                metric("C", "D", "Safety", Actionability::not_actionable)});
  const auto subset = r.actionable_subset("Safety");
  EXPECT_TRUE(subset.actionable.empty());
  EXPECT_TRUE(subset.unspecified.empty());
}

TEST(LoadRegistry, MissingFileIsIoError) {
  EXPECT_THROW(load_registry_file("/nonexistent/registry.json"), IoError);
}

TEST(Identifiers, WhitespaceFree) {
  EXPECT_TRUE(is_identifier("PresenceOfTrees"));
  EXPECT_FALSE(is_identifier(""));
  EXPECT_FALSE(is_identifier("Presence Of Trees"));
  EXPECT_FALSE(is_identifier("Tab\tName"));
}
