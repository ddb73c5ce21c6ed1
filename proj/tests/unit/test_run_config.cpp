#include <gtest/gtest.h>

#include <fstream>

#include "adpm/error.hpp"
#include "adpm/run_config.hpp"
#include "temp_dir.hpp"

using namespace adpm;

TEST(RunConfig, Defaults) {
  RunConfig c;
  EXPECT_EQ(c.words, 300u);
  EXPECT_EQ(c.lambda, 0.5);
  EXPECT_EQ(c.svm_c, 1.0);
  EXPECT_EQ(c.repeats, 10u);
  EXPECT_FALSE(c.uses_folds());
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, ParsesFileWithComments) {
  adpm::testing::TempDir dir;
  std::ofstream(dir / "run.cfg") << "# experiment\n"
                                    "manifest = a.tsv, b.tsv\n"
                                    "words = 50   # small\n"
                                    "lambda=0.25\n"
                                    "\n"
                                    "folds = 5\n"
                                    "scales = s227,s256\n"
                                    "trace_normalize = true\n"
                                    "encoder = spp\n"
                                    "spp_levels = 1,3\n";
  const auto c = RunConfig::from_file(dir / "run.cfg");
  EXPECT_EQ(c.workspace, dir.path());
  ASSERT_EQ(c.manifests.size(), 2u);
  EXPECT_EQ(c.resolve(c.manifests[1]), dir.path() / "b.tsv");
  EXPECT_EQ(c.words, 50u);
  EXPECT_EQ(c.lambda, 0.25);
  EXPECT_TRUE(c.uses_folds());
  EXPECT_EQ(c.scales, (std::vector<std::string>{"s227", "s256"}));
  EXPECT_TRUE(c.trace_normalize);
  EXPECT_EQ(c.encoder, Encoder::Spp);
  EXPECT_EQ(c.spp_levels, (std::vector<std::size_t>{1, 3}));
  const auto o = c.train_options();
  EXPECT_EQ(o.encoder.words, 50u);
  EXPECT_TRUE(o.trace_normalize);
}

TEST(RunConfig, RejectsBadInput) {
  RunConfig c;
  EXPECT_THROW(c.set("no_such_key", "1"), ValidationError);
  EXPECT_THROW(c.set("words", "many"), ValidationError);
  EXPECT_THROW(c.set("lambda", "x"), ValidationError);
  EXPECT_THROW(c.set("trace_normalize", "maybe"), ValidationError);

  adpm::testing::TempDir dir;
  std::ofstream(dir / "bad.cfg") << "words 5\n";
  EXPECT_THROW(RunConfig::from_file(dir / "bad.cfg"), ValidationError);
  EXPECT_THROW(RunConfig::from_file(dir / "missing.cfg"), ValidationError);
}

TEST(RunConfig, ValidateRanges) {
  RunConfig c;
  c.split_fraction = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c.split_fraction = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c.split_fraction = 0.5;
  c.repeats = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c.repeats = 1;
  c.folds = 1;
  EXPECT_THROW(c.validate(), ValidationError);
  c.folds = 0;
  c.svm_c = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(RunConfig, EntriesRoundTrip) {
  RunConfig c;
  c.set("manifest", "m.tsv");
  c.set("seed", "42");
  c.set("fixed_weights", "0.25,0.75");
  c.set("normalize_histograms", "true");
  RunConfig d;
  for (const auto& [k, v] : c.entries()) {
    if (!v.empty()) d.set(k, v);
  }
  EXPECT_EQ(d.entries(), c.entries());
  EXPECT_EQ(c.entries().front().first, "manifest");
}
