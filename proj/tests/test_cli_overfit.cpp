#include <gtest/gtest.h>

#include "cli_helpers.hpp"
#include "fanet/image.hpp"
#include "fanet/metrics.hpp"
#include "test_paths.hpp"

namespace fanet {
namespace {

// Five training scenes, default model and schedule: the network should
// memorize its own training split.
TEST(CliOverfit, FiveImagesMemorized) {
  const auto dir = testing_tmp_dir("overfit");
  const auto data = (dir / "d").string();
  ASSERT_EQ(run({"gen-data", "--seed", "21", "--out", data, "--train", "5", "--val", "1", "--test", "1"}).code, 0);
  const auto t = run({"train", "--data", data, "--out", (dir / "run").string(), "--seed", "0"});
  ASSERT_EQ(t.code, 0) << t.err;
  const auto e = run({"eval", "--checkpoint", (dir / "run" / "model.fant").string(), "--split", "train"});
  ASSERT_EQ(e.code, 0) << e.err;
  const auto report = metrics_from_json(nlohmann::json::parse(read_file(dir / "run" / "metrics_train.json")));
  std::cout << e.out;
  EXPECT_GE(report.pixel_acc, 0.95);
}

}  // namespace
}  // namespace fanet
