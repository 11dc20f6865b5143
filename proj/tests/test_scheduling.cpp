#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace annoloop;

namespace {

Dataset counts_dataset(const std::vector<int>& counts) {
  Dataset d;
  d.classes = {"a"};
  for (std::size_t i = 0; i < counts.size(); ++i) {
    ImageRecord img{"id" + std::to_string(i), "f" + std::to_string(i) + ".jpg", 10, 10, {}, std::nullopt};
    for (int k = 0; k < counts[i]; ++k) img.objects.push_back({"a", {0, 0, 1, 1}, {}});
    d.images.push_back(img);
  }
  return d;
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
  return out;
}

}  // namespace

TEST(Order, SortedByObjectCountDescending) {
  const auto d = counts_dataset({1, 5, 3});
  EXPECT_EQ(order_images(d, OrderingStrategy::sorted()), (std::vector<std::string>{"id1", "id2", "id0"}));
  // Ties go to the smaller image id.
  const auto tied = counts_dataset({2, 2, 4});
  EXPECT_EQ(order_images(tied, OrderingStrategy::sorted()), (std::vector<std::string>{"id2", "id0", "id1"}));
}

TEST(Order, ShuffledIsDeterministicPerSeed) {
  const auto d = counts_dataset(std::vector<int>(30, 1));
  const auto a = order_images(d, OrderingStrategy::shuffled(42));
  EXPECT_EQ(a, order_images(d, OrderingStrategy::shuffled(42)));
  EXPECT_NE(a, order_images(d, OrderingStrategy::shuffled(43)));
}

TEST(Order, ShuffleReferenceSequence) {
  // Frozen: Fisher-Yates over mt19937_64(7) with rejection-sampled bounds.
  const auto d = counts_dataset(std::vector<int>(6, 0));
  const auto order = order_images(d, OrderingStrategy::shuffled(7));
  std::vector<std::string> expected{"id0", "id1", "id2", "id3", "id4", "id5"};
  std::mt19937_64 eng(7);
  for (std::size_t i = expected.size(); i > 1; --i) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % i;
    std::uint64_t x = eng();
    while (x >= limit) x = eng();
    std::swap(expected[i - 1], expected[x % i]);
  }
  EXPECT_EQ(order, expected);
}

TEST(Order, OriginalPrefersTemporalIndex) {
  auto d = counts_dataset({1, 1, 1});
  d.images[0].sequence_index = 2;
  d.images[1].sequence_index = 0;
  d.images[2].sequence_index = 1;
  EXPECT_EQ(order_images(d, OrderingStrategy::original()), (std::vector<std::string>{"id1", "id2", "id0"}));
  // Without a complete temporal index, fall back to file names.
  d.images[2].sequence_index.reset();
  d.images[0].source_name = "c.jpg";
  d.images[1].source_name = "b.jpg";
  d.images[2].source_name = "a.jpg";
  EXPECT_EQ(order_images(d, OrderingStrategy::original()), (std::vector<std::string>{"id2", "id1", "id0"}));
}

TEST(Batches, ChunkArithmetic) {
  auto b = make_batches(ids(120), 50);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].image_ids.size(), 50u);
  EXPECT_EQ(b[1].image_ids.size(), 50u);
  EXPECT_EQ(b[2].image_ids.size(), 20u);
  EXPECT_EQ(b[2].index, 2u);

  b = make_batches(ids(50), 50);
  ASSERT_EQ(b.size(), 1u);

  b = make_batches(ids(101), 50);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[2].image_ids.size(), 1u);

  EXPECT_THROW(make_batches(ids(3), 0), ConfigError);
}

TEST(ClassScope, KeepsOnlyImagesWithTheClass) {
  const auto r = parse_voc(read_xml_directory(annoloop::testing::fixture("voc_airplane")));
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.dataset.images.size(), 10u);
  const auto scoped = class_scope(r.dataset, "aeroplane");
  EXPECT_EQ(scoped.images.size(), 4u);
  EXPECT_EQ(scoped.classes, (std::vector<std::string>{"aeroplane"}));
  for (const auto& img : scoped.images) {
    ASSERT_FALSE(img.objects.empty());
    for (const auto& o : img.objects) EXPECT_EQ(o.class_label, "aeroplane");
  }

  const auto persons = class_scope(r.dataset, "person");
  EXPECT_EQ(persons.images.size(), 6u);
  for (const auto& img : persons.images) EXPECT_FALSE(img.objects.empty());

  const auto with_distractors = class_scope(r.dataset, "aeroplane", true);
  EXPECT_EQ(with_distractors.images.size(), 4u);
  EXPECT_EQ(with_distractors.object_count(), 8u);

  EXPECT_THROW(class_scope(r.dataset, "unicorn"), UnknownClass);
}

TEST(ClassScope, ClassInEveryImageKeepsImageCount) {
  const auto d = counts_dataset({1, 2, 3});
  EXPECT_EQ(class_scope(d, "a").images.size(), 3u);
}

TEST(SchedulingProperty, PermutationsSortednessAndPartition) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto d = annoloop::testing::random_dataset(rng, 1 + rng.below(80), trial % 3 == 0);
    std::vector<std::string> all;
    for (const auto& img : d.images) all.push_back(img.image_id);
    std::sort(all.begin(), all.end());

    for (auto s : {OrderingStrategy::shuffled(rng.next_u64()), OrderingStrategy::sorted(), OrderingStrategy::original()}) {
      const auto order = order_images(d, s);
      auto sorted_ids = order;
      std::sort(sorted_ids.begin(), sorted_ids.end());
      ASSERT_EQ(sorted_ids, all);

      if (s.kind == OrderingStrategy::Kind::sorted_by_object_count) {
        for (std::size_t i = 1; i < order.size(); ++i) {
          ASSERT_GE(d.find(order[i - 1])->objects.size(), d.find(order[i])->objects.size());
        }
      }

      const std::size_t size = 1 + rng.below(30);
      const auto batches = make_batches(order, size);
      ASSERT_EQ(batches.size(), (order.size() + size - 1) / size);
      std::vector<std::string> joined;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        ASSERT_EQ(batches[b].index, b);
        ASSERT_FALSE(batches[b].image_ids.empty());
        if (b + 1 < batches.size()) {
          ASSERT_EQ(batches[b].image_ids.size(), size);
        }
        joined.insert(joined.end(), batches[b].image_ids.begin(), batches[b].image_ids.end());
      }
      ASSERT_EQ(joined, order);
    }

    for (const auto& c : d.classes) {
      const auto once = class_scope(d, c);
      ASSERT_EQ(class_scope(once, c), once);
    }
  }
}
