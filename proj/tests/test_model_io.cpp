#include "dcrkit/model.hpp"
#include "dcrkit/simulator.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

using namespace dcrkit;

namespace {

TrainOptions tiny() {
  TrainOptions o;
  o.grid = HyperparameterGrid::single({1e-3, 1.0, 0.1, 0.2});
  o.hidden = 4;
  o.max_epochs = 2;
  o.patience = 2;
  o.seed = 8;
  return o;
}

}  // namespace

class ModelIo : public ::testing::TestWithParam<ModelKind> {};

TEST_P(ModelIo, RoundTripIsBitExact) {
  const Cohort c = simulate(dcrkit::testing::informative_config(81), 200);
  const auto model = train_model(c, GetParam(), tiny());
  const auto dir = dcrkit::testing::scratch_dir("model_io");
  const auto path = dir / "m.bin";
  save_model(model, path);
  const auto loaded = load_model(path);
  EXPECT_EQ(loaded.kind(), model.kind());
  EXPECT_EQ(loaded.feature_names(), model.feature_names());
  EXPECT_EQ(loaded.risk_names(), model.risk_names());
  EXPECT_EQ(format_model(loaded), format_model(model));
  for (std::size_t i = 0; i < 20; ++i) {
    for (double t : {2.0, 6.0}) {
      const auto a = model.predict_cif(c.subjects[i].series, t);
      const auto b = loaded.predict_cif(c.subjects[i].series, t);
      EXPECT_EQ(a.grid, b.grid);
      EXPECT_EQ(a.values, b.values);
    }
  }
}

TEST_P(ModelIo, CorruptedFilesAreRejected) {
  const Cohort c = simulate(dcrkit::testing::informative_config(82), 150);
  const std::string bytes = format_model(train_model(c, GetParam(), tiny()));
  EXPECT_THROW(parse_model("not a model"), InputError);
  EXPECT_THROW(parse_model(bytes.substr(0, bytes.size() / 2)), InputError);
  std::string bad_header = bytes;
  bad_header[20] = '{';
  bad_header[21] = '{';
  EXPECT_THROW(parse_model(bad_header), InputError);
  EXPECT_THROW(load_model(dcrkit::testing::scratch_dir("model_io_missing") / "absent.bin"), InputError);
}

TEST_P(ModelIo, IncompatibleInputsRaiseCompatibilityError) {
  const Cohort c = simulate(dcrkit::testing::informative_config(83), 150);
  const auto model = parse_model(format_model(train_model(c, GetParam(), tiny())));
  EXPECT_THROW(model.predict_cif(dcrkit::testing::hourly(Matrix::Zero(3, 2)), 1.0), CompatibilityError);
  Cohort fewer = relabel_for_ablation(c, {1, 2});
  EXPECT_THROW(model.check_compatible(fewer), CompatibilityError);
  EXPECT_NO_THROW(model.check_compatible(c));
}

INSTANTIATE_TEST_SUITE_P(AllKinds, ModelIo,
                         ::testing::Values(ModelKind::finegray, ModelKind::deephit, ModelKind::ddrsa),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(ModelKindTest, ParseAndPrint) {
  for (auto k : {ModelKind::finegray, ModelKind::deephit, ModelKind::ddrsa}) EXPECT_EQ(parse_model_kind(to_string(k)), k);
  EXPECT_THROW(parse_model_kind("cox"), InputError);
}

TEST(ModelFile, NeuralHeaderRecordsHyperparameters) {
  const Cohort c = simulate(dcrkit::testing::informative_config(84), 150);
  const std::string bytes = format_model(train_model(c, ModelKind::deephit, tiny()));
  const auto header_end = bytes.find('\n', bytes.find('\n') + 1);
  const auto header = nlohmann::json::parse(bytes.substr(bytes.find('\n') + 1, header_end - bytes.find('\n') - 1));
  EXPECT_EQ(header.at("kind"), "deephit");
  EXPECT_EQ(header.at("hyperparameters").at("learning_rate").get<double>(), 1e-3);
  EXPECT_EQ(header.at("hyperparameters").at("dropout").get<double>(), 0.2);
  EXPECT_EQ(header.at("k").get<int>(), 3);
  EXPECT_EQ(header.at("d").get<int>(), 6);
}
