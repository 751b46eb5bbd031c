#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <string>

#include "beads/schema.hpp"
#include "support.hpp"

using namespace beads;
using testing_support::kind_of;

namespace {

std::vector<std::string> codes(const std::vector<TagDef>& defs) {
  std::vector<std::string> out;
  for (const auto& d : defs) out.push_back(d.code);
  return out;
}

}  // namespace

TEST(Registry, AexDescription) {
  auto reg = load_registry();
  const TagDef* aex = reg.find("AEX");
  ASSERT_NE(aex, nullptr);
  EXPECT_EQ(aex->description, "Adversarial exchange");
  EXPECT_EQ(aex->layer, Layer::Beads);
}

TEST(Registry, FifteenBeadsTagsInTableOrder) {
  auto reg = load_registry();
  std::vector<std::string> expected{"GB",   "PB",  "CB",  "AP",   "AF",   "CBIAS", "SE",   "EXPL",
                                    "REB",  "AEX", "SEEP", "ATTR", "CORR", "INT",   "T_REQ"};
  EXPECT_EQ(codes(tags_in_layer(reg, Layer::Beads)), expected);
}

TEST(Registry, AnalysisLayer) {
  auto reg = load_registry();
  std::vector<std::string> expected{"CH", "PER", "PD", "APAT", "S", "DIS", "ANS", "OQ"};
  EXPECT_EQ(codes(tags_in_layer(reg, Layer::Analysis)), expected);
  for (const char* code : {"S", "DIS", "ANS", "OQ"}) EXPECT_EQ(reg.find(code)->category, Category::Structural);
}

TEST(Registry, DamslCoreHasFortyTwo) {
  auto reg = load_registry();
  EXPECT_EQ(tags_in_layer(reg, Layer::DamslCore).size(), 42u);
  EXPECT_FALSE(tags_in_layer(reg, Layer::PoliticalExtension).empty());
}

TEST(Registry, EveryTagHasLayerCategoryAndValidCode) {
  auto reg = load_registry();
  std::set<std::string> seen;
  for (const auto& t : reg.tags()) {
    EXPECT_TRUE(is_valid_code(t.code)) << t.code;
    EXPECT_TRUE(seen.insert(t.code).second) << t.code;
    EXPECT_FALSE(t.name.empty());
    EXPECT_FALSE(t.description.empty());
  }
}

TEST(Registry, GroupedCategories) {
  auto reg = load_registry();
  auto cat = [&](const char* c) { return reg.find(c)->category; };
  for (const char* c : {"PB", "CB", "CBIAS"}) EXPECT_EQ(cat(c), Category::IdeologicalFraming) << c;
  for (const char* c : {"AF", "AP"}) EXPECT_EQ(cat(c), Category::EmotionalPersuasion) << c;
  for (const char* c : {"REB", "AEX", "PER", "INT", "CH"}) EXPECT_EQ(cat(c), Category::InteractiveDynamics) << c;
  for (const char* c : {"CORR", "SEEP", "EXPL", "T_REQ"}) EXPECT_EQ(cat(c), Category::ClarificationTurnTaking) << c;
  for (const char* c : {"GB", "SE"}) EXPECT_EQ(cat(c), Category::IdentityFraming) << c;
}

TEST(Registry, DuplicateCodeInDocument) {
  auto doc = nlohmann::json::parse(R"({"tags":[
    {"code":"PB","name":"a","layer":"Beads","category":"IdeologicalFraming","description":"x"},
    {"code":"pb","name":"b","layer":"Beads","category":"IdeologicalFraming","description":"y"}]})");
  EXPECT_EQ(kind_of([&] { load_registry(doc); }), ErrorKind::DuplicateCode);
}

TEST(Registry, DuplicateAcrossDefaultIsOverride) {
  auto reg = load_registry(nlohmann::json::parse(R"({"tags":[
    {"code":"PB","name":"Partisan bias","layer":"Beads","category":"IdeologicalFraming","description":"x"},
    {"code":"NEW1","name":"New","layer":"Analysis","category":"Structural","description":"y"}]})"));
  EXPECT_EQ(reg.find("PB")->name, "Partisan bias");
  EXPECT_EQ(*reg.position("PB"), *load_registry().position("PB"));
  EXPECT_EQ(reg.tags().back().code, "NEW1");
  EXPECT_EQ(reg.size(), load_registry().size() + 1);
}

TEST(Registry, MalformedDocuments) {
  EXPECT_EQ(kind_of([] { load_registry_text("{not json"); }), ErrorKind::MalformedConfig);
  EXPECT_EQ(kind_of([] { load_registry_text(R"({"version":"2"})"); }), ErrorKind::MalformedConfig);
  EXPECT_EQ(kind_of([] {
              load_registry_text(R"({"tags":[{"code":"A B C","name":"n","layer":"Beads",
                "category":"Structural","description":"d"}]})");
            }),
            ErrorKind::MalformedConfig);
  EXPECT_EQ(kind_of([] {
              load_registry_text(R"({"tags":[{"code":"Q","name":"n","layer":"Nope",
                "category":"Structural","description":"d"}]})");
            }),
            ErrorKind::MalformedConfig);
}

TEST(Registry, Deterministic) { EXPECT_EQ(load_registry(), load_registry()); }

TEST(Resolve, Canonicalizes) {
  auto reg = load_registry();
  EXPECT_EQ(resolve_tag(reg, "AF").name, "Appeals to Fear");
  const auto& treq = resolve_tag(reg, " t req ");
  EXPECT_EQ(treq.code, "T_REQ");
  EXPECT_EQ(treq.display(), "T REQ");
  EXPECT_EQ(resolve_tag(reg, "cbias").display(), "CBias");
  EXPECT_EQ(kind_of([&] { resolve_tag(reg, "XYZ"); }), ErrorKind::UnknownTag);
  EXPECT_EQ(kind_of([&] { resolve_tag(reg, ""); }), ErrorKind::UnknownTag);
}

TEST(Resolve, RoundTripEveryTag) {
  auto reg = load_registry();
  for (const auto& t : reg.tags()) {
    EXPECT_EQ(resolve_tag(reg, t.code), t);
    EXPECT_EQ(resolve_tag(reg, t.display()), t);
  }
}

TEST(Resolve, EveryCodeUsedInFixturesResolves) {
  auto reg = load_registry();
  for (const char* c : {"S", "DIS", "ANS", "OQ", "AEX", "CH", "REB", "SE", "PB", "AF", "PER", "PD"})
    EXPECT_NO_THROW(resolve_tag(reg, c)) << c;
}

TEST(Layers, ByName) {
  auto reg = load_registry();
  EXPECT_EQ(tags_in_layer(reg, "Beads").size(), 15u);
  auto analysis = codes(tags_in_layer(reg, "Analysis"));
  EXPECT_NE(std::find(analysis.begin(), analysis.end(), "CH"), analysis.end());
  EXPECT_NE(std::find(analysis.begin(), analysis.end(), "PD"), analysis.end());
  EXPECT_EQ(kind_of([&] { tags_in_layer(reg, "Foo"); }), ErrorKind::UnknownLayer);
}

TEST(Layers, PartitionRegistry) {
  auto reg = load_registry();
  std::size_t total = 0;
  for (auto layer : kAllLayers) total += tags_in_layer(reg, layer).size();
  EXPECT_EQ(total, reg.size());
}

TEST(Codes, Validity) {
  EXPECT_TRUE(is_valid_code("T_REQ"));
  EXPECT_TRUE(is_valid_code("SW_SD"));
  EXPECT_FALSE(is_valid_code(""));
  EXPECT_FALSE(is_valid_code("_X"));
  EXPECT_FALSE(is_valid_code("X_"));
  EXPECT_FALSE(is_valid_code("A_B_C"));
  EXPECT_FALSE(is_valid_code("ab"));
  EXPECT_EQ(canonical_code("  t \t req "), "T_REQ");
}

TEST(Registry, JsonRoundTrip) {
  auto reg = load_registry();
  auto again = load_registry_text(to_json(reg).dump());
  EXPECT_EQ(again, reg);
}
