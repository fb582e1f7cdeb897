// SPDX-FileCopyrightText: Copyright (c) 2026 The minifp Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "minifp/error.h"
#include "minifp/fingerprints.h"
#include "minifp/molgraph.h"
#include "test_util.h"

namespace minifp {
namespace {

using testing::smallConfig;

std::string tempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("minifp_test_fp_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

TEST(PoolNodes, SumMeanMax) {
  const Tensor x{{1, 2}, {3, 0}};
  EXPECT_EQ(poolNodes(x, Pooling::Sum), (std::vector<double>{4, 2}));
  EXPECT_EQ(poolNodes(x, Pooling::Mean), (std::vector<double>{2, 1}));
  EXPECT_EQ(poolNodes(x, Pooling::Max), (std::vector<double>{3, 2}));
}

TEST(PoolNodes, SingleNodeReturnsRow) {
  const Tensor x{{0.5, -7.25, 3}};
  for (Pooling p : {Pooling::Sum, Pooling::Mean, Pooling::Max}) {
    EXPECT_EQ(poolNodes(x, p), (std::vector<double>{0.5, -7.25, 3}));
  }
}

TEST(PoolNodes, EmptyGraphThrows) {
  try {
    (void)poolNodes(Tensor(0, 4), Pooling::Max);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyGraph);
  }
}

TEST(PoolNodes, RowOrderDoesNotMatterAndSumIsNTimesMean) {
  Rng rng(3, "pool");
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    Tensor            x(n, 5);
    for (auto& v : x.values()) {
      v = rng.normal() * 1e3;
    }
    const auto perm = testing::randomPermutation(rng, n);
    Tensor     y(n, 5);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(x.row(i).begin(), x.row(i).end(), y.row(perm[i]).begin());
    }
    for (Pooling p : {Pooling::Sum, Pooling::Mean, Pooling::Max}) {
      EXPECT_EQ(poolNodes(x, p), poolNodes(y, p));
    }
    const auto sum  = poolNodes(x, Pooling::Sum);
    const auto mean = poolNodes(x, Pooling::Mean);
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_NEAR(sum[c], static_cast<double>(n) * mean[c], 1e-12 * std::max(1.0, std::abs(sum[c])));
    }
  }
}

TEST(Store, RoundTripIsBitExact) {
  FingerprintStore s(3);
  const float      a[] = {1.0f, -0.0f, 3.4028235e38f};
  const float      b[] = {1e-45f, 0.1f, -2.5f};
  s.add("CCO", std::span<const float>(a));
  s.add("c1ccccc1", std::span<const float>(b));
  const std::string path = tempPath("roundtrip.mfps");
  writeStore(path, s);
  const FingerprintStore r = readStore(path);
  EXPECT_EQ(r, s);
  EXPECT_EQ(std::bit_cast<std::uint32_t>(r.vector(0)[1]), std::bit_cast<std::uint32_t>(-0.0f));
  EXPECT_EQ(slurp(path).substr(0, 5), std::string("MFPS\x01", 5));
}

TEST(Store, RejectsDuplicatesAndWrongLengths) {
  FingerprintStore s(2);
  const float      v[] = {1, 2};
  s.add("a", std::span<const float>(v));
  EXPECT_THROW(s.add("a", std::span<const float>(v)), Error);
  const float w[] = {1, 2, 3};
  try {
    s.add("b", std::span<const float>(w));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  try {
    (void)s.at("zzz");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingFingerprint);
  }
}

TEST(Store, TruncatedOrForeignFilesAreCorrupt) {
  FingerprintStore s(4);
  const float      v[] = {1, 2, 3, 4};
  s.add("x", std::span<const float>(v));
  s.add("y", std::span<const float>(v));
  const std::string path = tempPath("trunc.mfps");
  writeStore(path, s);
  const std::string bytes = slurp(path);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, bytes.size() - 1}) {
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes.substr(0, cut);
    try {
      (void)readStore(path);
      FAIL() << cut;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::CorruptHeader) << cut;
    }
  }
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes << 'z';
  EXPECT_THROW((void)readStore(path), Error);
  std::string foreign = bytes;
  foreign[0]          = 'X';
  std::ofstream(path, std::ios::binary | std::ios::trunc) << foreign;
  EXPECT_THROW((void)readStore(path), Error);
}

TEST(Store, ExpectedDimensionMismatch) {
  FingerprintStore s(2);
  const std::string path = tempPath("dim.mfps");
  writeStore(path, s);
  EXPECT_EQ(readStore(path, 2).dimension(), 2u);
  try {
    (void)readStore(path, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Store, CsvExport) {
  FingerprintStore s(2);
  const float      v[] = {0.5f, -1.0f};
  s.add("CCO", std::span<const float>(v));
  const std::string path = tempPath("fp.csv");
  writeStoreCsv(path, s);
  EXPECT_EQ(slurp(path), "id,v0,v1\nCCO,0.5,-1\n");
}

class Extraction : public ::testing::TestWithParam<BackboneKind> {};

TEST_P(Extraction, DeduplicatesAndKeepsFirstOccurrenceOrder) {
  ParameterSet   ps;
  const Backbone model(smallConfig(GetParam(), 7), ps);
  const std::vector<std::string> in = {"CCO", "c1ccccc1", " CCO", "C1CC1", "C2CC2", "CC(=O)O"};
  const ExtractionReport r = extractFingerprints(model, in);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_EQ(r.duplicates, 2u);
  ASSERT_EQ(r.store.size(), 4u);
  EXPECT_EQ(r.store.id(0), "CCO");
  EXPECT_EQ(r.store.id(1), "c1ccccc1");
  EXPECT_EQ(r.store.id(2), "C1CC1");
  EXPECT_EQ(r.store.id(3), "CC(=O)O");
  EXPECT_EQ(r.store.dimension(), model.config().dNode);
}

TEST_P(Extraction, CollectsFailuresWithoutAborting) {
  ParameterSet   ps;
  const Backbone model(smallConfig(GetParam(), 8), ps);
  const std::vector<std::string> in = {"CCO", "C1CC", "Xx", "c1ccccc1", "C(C"};
  const ExtractionReport r = extractFingerprints(model, in);
  EXPECT_EQ(r.store.size(), 2u);
  ASSERT_EQ(r.failures.size(), 3u);
  EXPECT_EQ(r.failures[0].index, 1u);
  EXPECT_EQ(r.failures[1].smiles, "Xx");
  EXPECT_NE(r.failures[2].message.find("UnbalancedBranch"), std::string::npos) << r.failures[2].message;
}

TEST_P(Extraction, DeterministicAndBatchIndependent) {
  ParameterSet   ps;
  const Backbone model(smallConfig(GetParam(), 9), ps);
  const auto&    corpus = testing::drugLikeCorpus();
  const std::uint64_t before = ps.checksum();
  ExtractionOptions   one;
  one.batchSize = 1;
  const ExtractionReport a = extractFingerprints(model, corpus);
  const ExtractionReport b = extractFingerprints(model, corpus, one);
  EXPECT_EQ(ps.checksum(), before);
  EXPECT_EQ(a.store, b.store);
  const std::string p1 = tempPath("det1.mfps");
  const std::string p2 = tempPath("det2.mfps");
  writeStore(p1, a.store);
  writeStore(p2, extractFingerprints(model, corpus).store);
  EXPECT_EQ(slurp(p1), slurp(p2));
}

TEST_P(Extraction, RingSpellingsAgree) {
  ParameterSet   ps;
  const Backbone model(smallConfig(GetParam(), 10), ps);
  const std::vector<std::string> a = {"C1CC1"};
  const std::vector<std::string> b = {"C(C1)C1"};
  const auto ra = extractFingerprints(model, a);
  const auto rb = extractFingerprints(model, b);
  ASSERT_EQ(ra.store.size(), 1u);
  ASSERT_EQ(rb.store.size(), 1u);
  const auto va = ra.store.vector(0);
  const auto vb = rb.store.vector(0);
  EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin(), vb.end()));
}

INSTANTIATE_TEST_SUITE_P(Backbones, Extraction,
                         ::testing::Values(BackboneKind::Gcn, BackboneKind::Gine, BackboneKind::MpnnPlusPlus));

TEST(ExtractionGlobal, UsesGlobalWidthAndRejectsOtherBackbones) {
  ParameterSet   ps;
  const Backbone model(smallConfig(BackboneKind::MpnnPlusPlus, 4), ps);
  ExtractionOptions opt;
  opt.source = FingerprintSource::Global;
  const std::vector<std::string> in = {"CCO", "CCN"};
  EXPECT_EQ(extractFingerprints(model, in, opt).store.dimension(), model.config().dGlobal);
  ParameterSet   ps2;
  const Backbone gine(smallConfig(BackboneKind::Gine, 4), ps2);
  EXPECT_THROW(extractFingerprints(gine, in, opt), Error);
}

}  // namespace
}  // namespace minifp
