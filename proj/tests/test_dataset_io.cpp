#include <gtest/gtest.h>

#include <sstream>

#include "test_support.hpp"

using namespace annoloop;
using annoloop::testing::fixture;

namespace {

const char* kVocOne = R"(<annotation>
  <filename>img1.jpg</filename>
  <size><width>500</width><height>375</height><depth>3</depth></size>
  <object><name>person</name><difficult>1</difficult>
    <bndbox><xmin>10</xmin><ymin>20</ymin><xmax>110</xmax><ymax>220</ymax></bndbox></object>
</annotation>)";

std::string roundtrip_bytes(const Dataset& d) {
  std::ostringstream out;
  write_canonical(d, out);
  return out.str();
}

Dataset roundtrip(const Dataset& d) {
  std::istringstream in(roundtrip_bytes(d));
  return read_canonical(in);
}

}  // namespace

TEST(Voc, SingleObjectShiftsMinCorners) {
  const auto r = parse_voc({{"img1.xml", kVocOne}});
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.dataset.images.size(), 1u);
  const auto& img = r.dataset.images[0];
  EXPECT_EQ(img.image_id, "img1");
  EXPECT_EQ(img.width, 500);
  EXPECT_EQ(img.height, 375);
  ASSERT_EQ(img.objects.size(), 1u);
  EXPECT_EQ(img.objects[0].class_label, "person");
  EXPECT_EQ(img.objects[0].box, BoundingBox(9, 19, 110, 220));
  EXPECT_TRUE(img.objects[0].flags.contains(ObjectFlag::difficult));
}

TEST(Voc, DocumentWithoutObjects) {
  const auto r = parse_voc({{"e.xml", "<annotation><filename>e.jpg</filename><size><width>5</width>"
                                      "<height>5</height></size></annotation>"}});
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.dataset.images.size(), 1u);
  EXPECT_TRUE(r.dataset.images[0].objects.empty());
}

TEST(Voc, FixtureDirectoryVocabularyIsSorted) {
  const auto r = parse_voc(read_xml_directory(fixture("voc")));
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.dataset.images.size(), 4u);
  EXPECT_EQ(r.dataset.classes, (std::vector<std::string>{"car", "person"}));
  EXPECT_EQ(r.dataset.object_count(), 6u);
  // Truncated flag and a box touching the image border (1-based 353 -> 353).
  const auto* img2 = r.dataset.find("000002");
  ASSERT_NE(img2, nullptr);
  EXPECT_TRUE(img2->objects[0].flags.contains(ObjectFlag::truncated));
  EXPECT_EQ(r.dataset.find("000003")->objects[0].box, BoundingBox(0, 0, 353, 500));
}

TEST(Voc, MalformedDocumentsAreCollected) {
  const auto r = parse_voc({{"bad.xml", "<annotation><size>"},
                            {"nobox.xml", "<annotation><filename>n.jpg</filename><size><width>5</width>"
                                          "<height>5</height></size><object><name>x</name></object></annotation>"},
                            {"good.xml", kVocOne}});
  EXPECT_EQ(r.issues.size(), 2u);
  EXPECT_EQ(r.issues[0].document, "bad.xml");
  EXPECT_EQ(r.issues[1].document, "nobox.xml");
  EXPECT_EQ(r.dataset.images.size(), 1u);
}

TEST(Coco, FixtureParses) {
  const auto r = parse_coco(annoloop::testing::slurp(fixture("coco.json")));
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.dataset.images.size(), 2u);
  EXPECT_EQ(r.dataset.object_count(), 3u);
  EXPECT_EQ(r.dataset.classes, (std::vector<std::string>{"car", "person"}));
  const auto* a = r.dataset.find("1");
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(a->source_name, "a.jpg");
  EXPECT_EQ(a->objects[0].box, BoundingBox(10, 20, 110, 220));
  EXPECT_FALSE(a->objects[0].flags.contains(ObjectFlag::group));
  EXPECT_TRUE(a->objects[1].flags.contains(ObjectFlag::group));
  EXPECT_EQ(a->objects[1].class_label, "car");
}

TEST(Coco, MissingCrossReferencesAreReported) {
  const auto r = parse_coco(R"({"images":[{"id":1,"width":10,"height":10}],
    "annotations":[{"id":1,"image_id":2,"category_id":1,"bbox":[0,0,1,1]},
                   {"id":2,"image_id":1,"category_id":9,"bbox":[0,0,1,1]},
                   {"id":3,"image_id":1,"category_id":1,"bbox":[0,0,1,1]}],
    "categories":[{"id":1,"name":"a"}]})");
  ASSERT_EQ(r.issues.size(), 2u);
  EXPECT_NE(r.issues[0].reason.find("unknown image_id"), std::string::npos);
  EXPECT_NE(r.issues[1].reason.find("unknown category_id"), std::string::npos);
  EXPECT_EQ(r.dataset.object_count(), 1u);
}

TEST(OpenImages, ScalesNormalizedCoordinates) {
  const auto sizes = parse_image_sizes("ImageID,Width,Height\nq,1000,500\n");
  const auto r = parse_openimages(
      "ImageID,LabelName,XMin,XMax,YMin,YMax,IsOccluded,IsTruncated,IsGroupOf,IsDepiction\n"
      "q,/m/p,0.1,0.5,0.2,0.8,0,0,1,0\n",
      sizes);
  ASSERT_TRUE(r.ok());
  const auto& o = r.dataset.images.at(0).objects.at(0);
  EXPECT_NEAR(o.box.xmin(), 100, 1e-9);
  EXPECT_NEAR(o.box.ymin(), 100, 1e-9);
  EXPECT_NEAR(o.box.xmax(), 500, 1e-9);
  EXPECT_NEAR(o.box.ymax(), 400, 1e-9);
  EXPECT_TRUE(o.flags.contains(ObjectFlag::group));
}

TEST(OpenImages, FixtureWithUnknownImage) {
  const auto r = parse_openimages(annoloop::testing::slurp(fixture("openimages_boxes.csv")),
                                  parse_image_sizes(annoloop::testing::slurp(fixture("openimages_sizes.csv"))));
  EXPECT_TRUE(r.issues.empty());
  EXPECT_EQ(r.missing_dimensions, (std::vector<std::string>{"img_x"}));
  EXPECT_EQ(r.dataset.object_count(), 4u);
  EXPECT_EQ(r.dataset.images.size(), 2u);
  // Depiction is parsed but not part of the default filter.
  EXPECT_TRUE(r.dataset.find("img_b")->objects[1].flags.contains(ObjectFlag::depiction));
}

TEST(Filter, EmptyDropIsIdentity) {
  const auto r = parse_voc(read_xml_directory(fixture("voc")));
  EXPECT_EQ(filter_objects(r.dataset, {}), r.dataset);
}

TEST(Filter, DropsOnlyFlaggedBoxes) {
  Dataset d;
  d.classes = {"a"};
  d.images.push_back({"i", "i.jpg", 10, 10,
                      {{"a", {0, 0, 1, 1}, {}}, {"a", {0, 0, 2, 2}, {ObjectFlag::occluded}}, {"a", {0, 0, 3, 3}, {}}},
                      std::nullopt});
  d.images.push_back({"j", "j.jpg", 10, 10, {{"a", {0, 0, 1, 1}, {ObjectFlag::occluded}}}, std::nullopt});
  const auto f = filter_objects(d, {ObjectFlag::occluded});
  EXPECT_EQ(f.object_count(), 2u);
  EXPECT_EQ(f.images.size(), 2u);  // the emptied image stays
  EXPECT_EQ(f.classes, d.classes);
}

TEST(Filter, OpenImagesFullFilterKeepsUnflaggedRowsOnly) {
  const auto r = parse_openimages(annoloop::testing::slurp(fixture("openimages_boxes.csv")),
                                  parse_image_sizes(annoloop::testing::slurp(fixture("openimages_sizes.csv"))));
  const auto f = filter_objects(r.dataset, parse_flag_list("occluded,truncated,group"));
  // Only img_a's first row has all three columns zero among rows with sizes.
  EXPECT_EQ(f.object_count(), 1u);
  EXPECT_EQ(f.images.size(), r.dataset.images.size());
}

TEST(Filter, FlagListParsing) {
  EXPECT_TRUE(parse_flag_list("").empty());
  const auto s = parse_flag_list("occluded,group");
  EXPECT_TRUE(s.contains(ObjectFlag::occluded));
  EXPECT_TRUE(s.contains(ObjectFlag::group));
  EXPECT_FALSE(s.contains(ObjectFlag::truncated));
  EXPECT_THROW(parse_flag_list("occluded,blurry"), ConfigError);
}

TEST(Canonical, RoundTripsEveryParser) {
  const auto voc = parse_voc(read_xml_directory(fixture("voc"))).dataset;
  const auto coco = parse_coco(annoloop::testing::slurp(fixture("coco.json"))).dataset;
  const auto oi = parse_openimages(annoloop::testing::slurp(fixture("openimages_boxes.csv")),
                                   parse_image_sizes(annoloop::testing::slurp(fixture("openimages_sizes.csv"))))
                      .dataset;
  for (const auto* d : {&voc, &coco, &oi}) {
    const auto back = roundtrip(*d);
    EXPECT_EQ(back, *d);
    EXPECT_EQ(roundtrip_bytes(back), roundtrip_bytes(*d));
  }
  // Empty image survives.
  EXPECT_TRUE(roundtrip(voc).find("000004")->objects.empty());
}

TEST(CanonicalProperty, RandomDatasetsRoundTrip) {
  Rng rng(77);
  for (int t = 0; t < 50; ++t) {
    auto d = annoloop::testing::random_dataset(rng, 1 + rng.below(20), t % 2 == 0);
    for (auto& img : d.images) {
      for (auto& o : img.objects) {
        // Non-representable-in-decimal coordinates must survive too.
        o.box = BoundingBox(rng.uniform(0, 40), rng.uniform(0, 40), rng.uniform(50, 100), rng.uniform(50, 100));
        if (rng.below(3) == 0) o.flags.insert(kAllFlags[rng.below(5)]);
      }
    }
    ASSERT_EQ(roundtrip(d), d);
  }
}

TEST(Canonical, GoldenBytesForTwoImages) {
  Dataset d;
  d.provenance = Provenance::voc;
  d.classes = {"car", "person"};
  d.images.push_back({"a", "a.jpg", 640, 480,
                      {{"person", {9, 19, 110, 220}, {ObjectFlag::difficult}}, {"car", {0.5, 1.25, 300, 200}, {}}},
                      3});
  d.images.push_back({"b", "b.jpg", 320, 240, {}, std::nullopt});
  const auto bytes = roundtrip_bytes(d);
  EXPECT_EQ(bytes, roundtrip_bytes(d));
  EXPECT_TRUE(annoloop::testing::matches_golden("canonical_two_images.jsonl", bytes)) << bytes;
}

TEST(Canonical, ErrorsCarryLineNumbers) {
  std::istringstream bad(
      R"({"classes":["a"],"format":"annoloop-dataset","provenance":"voc","version":1})"
      "\n"
      R"({"height":5,"image_id":"x","objects":[],"source_name":"x","width":5})"
      "\n{not json\n");
  try {
    read_canonical(bad);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.document(), "line 3");
  }
  std::istringstream future(R"({"classes":[],"format":"annoloop-dataset","provenance":"voc","version":2})");
  EXPECT_THROW(read_canonical(future), VersionMismatch);
  std::istringstream unknown_class(
      R"({"classes":["a"],"format":"annoloop-dataset","provenance":"voc","version":1})"
      "\n"
      R"({"height":5,"image_id":"x","objects":[{"box":[0,0,1,1],"class_label":"b","flags":[]}],"source_name":"x","width":5})");
  EXPECT_THROW(read_canonical(unknown_class), ParseError);
  std::istringstream empty("");
  EXPECT_THROW(read_canonical(empty), ParseError);
}
