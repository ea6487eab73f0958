#include "doctest.h"

#include "cogmark/ensemble.hpp"
#include "cogmark/error.hpp"
#include "cogmark/rng.hpp"
#include "support.hpp"

using namespace cogmark;

namespace {

Eigen::MatrixXd rows(std::initializer_list<std::array<double, 3>> r) {
  Eigen::MatrixXd m(r.size(), 3);
  Eigen::Index i = 0;
  for (const auto& row : r) {
    for (int c = 0; c < 3; ++c) m(i, c) = row[c];
    ++i;
  }
  return m;
}

Eigen::VectorXd values(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

ErrorCode error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidConfig;
}

}  // namespace

TEST_CASE("soft vote") {
  const std::vector<Eigen::MatrixXd> two{rows({{1, 0, 0}}), rows({{0, 1, 0}})};
  const auto avg = combine_soft(two);
  CHECK(avg == rows({{0.5, 0.5, 0}}));

  Rng rng(1);
  std::vector<Eigen::MatrixXd> three;
  for (int m = 0; m < 3; ++m) {
    Eigen::MatrixXd p(10, 3);
    for (Eigen::Index i = 0; i < 10; ++i) {
      double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
      const double s = a + b + c;
      p.row(i) << a / s, b / s, c / s;
    }
    three.push_back(p);
  }
  const auto got = combine_soft(three);
  for (Eigen::Index i = 0; i < 10; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double oracle = (three[0](i, c) + three[1](i, c) + three[2](i, c)) / 3.0;
      CHECK(got(i, c) == doctest::Approx(oracle).epsilon(1e-15));
    }
  }
  const std::vector<double> w{1.0, 0.0, 1.0};
  CHECK_THROWS_AS(combine_soft(three, w), Error);
}

TEST_CASE("soft vote of fitted members") {
  const auto d = test::blobs(45, 3, 1.0, 2);
  std::vector<TrainedModel> one{fit_model(d, LearnerFamily::kRandomForest, Json{{"n_trees", 10}})};
  CHECK(vote_soft(one, d.x) == one[0].predict(d.x).probabilities);
  CHECK(vote_hard(one, d.x) == one[0].predict(d.x).labels());
  // Two-way ties in the soft average resolve to the lower class.
  VotingEnsemble e(
      {fit_model(make_classification(d.x, std::vector<int>(45, 0)), LearnerFamily::kRandomForest, Json{{"n_trees", 2}}),
       fit_model(make_classification(d.x, std::vector<int>(45, 1)), LearnerFamily::kRandomForest, Json{{"n_trees", 2}})},
      VoteKind::kSoft);
  for (int label : e.predict(d.x).labels) CHECK(label == 0);
}

TEST_CASE("hard vote") {
  const std::vector<Eigen::MatrixXd> votes{rows({{0, 1, 0}}), rows({{0, 1, 0}}), rows({{1, 0, 0}})};
  CHECK(combine_hard(votes) == std::vector<int>{1});
  // One vote each; the larger soft score breaks the tie.
  CHECK(hard_vote_winner({1, 1, 1}, {1.2, 1.5, 0.3}) == 1);
  CHECK(hard_vote_winner({1, 1, 0}, {0.9, 0.9, 1.2}) == 0);
  CHECK(hard_vote_winner({0, 2, 1}, {3.0, 0.0, 0.0}) == 1);
  const std::vector<Eigen::MatrixXd> tie{rows({{0.6, 0.3, 0.1}}), rows({{0.1, 0.5, 0.4}})};
  CHECK(combine_hard(tie) == std::vector<int>{1});  // HC 0.7 vs MCI 0.8
}

TEST_CASE("regressor mean") {
  const std::vector<Eigen::VectorXd> three{values({26}), values({28}), values({30})};
  CHECK(combine_regress(three)[0] == 28.0);
  const std::vector<Eigen::VectorXd> one{values({24.5, 29})};
  CHECK(combine_regress(one) == one[0]);
  const std::vector<Eigen::VectorXd> weighted{values({24}), values({28}), values({28})};
  const std::vector<double> w{2, 1, 1};
  CHECK(combine_regress(weighted, w)[0] == 26.0);
  const std::vector<Eigen::VectorXd> high{values({40}), values({35})};
  CHECK(combine_regress(high)[0] == 30.0);
}

TEST_CASE("ensemble member checks") {
  const auto cls = test::blobs(30, 3, 1.0, 3);
  const auto reg = make_regression(cls.x, std::vector<double>(30, 25.0));
  auto rf_c = fit_model(cls, LearnerFamily::kRandomForest, Json{{"n_trees", 3}});
  auto rf_r = fit_model(reg, LearnerFamily::kRandomForest, Json{{"n_trees", 3}});
  CHECK(error_of([&] { VotingEnsemble({rf_c, rf_r}, VoteKind::kSoft); }) == ErrorCode::kMixedTaskMembers);
  CHECK(error_of([&] { VotingEnsemble({rf_r}, VoteKind::kSoft); }) == ErrorCode::kMixedTaskMembers);
  auto narrow = fit_model(make_classification(cls.x.leftCols(2), cls.labels), LearnerFamily::kRandomForest,
                          Json{{"n_trees", 3}});
  CHECK(error_of([&] { VotingEnsemble({rf_c, narrow}, VoteKind::kHard); }) == ErrorCode::kSchemaMismatch);
  CHECK_THROWS_AS(VotingEnsemble({}, VoteKind::kSoft), Error);
}

TEST_CASE("submission configs") {
  const auto cls1 = build_submission_config("cls1");
  CHECK(cls1.features == FeatureSource::kLinguistic42);
  CHECK(cls1.train_split == TrainSplit::kTrainDev);
  REQUIRE(cls1.members.size() == 1);
  CHECK(cls1.members[0].family == LearnerFamily::kRandomForest);

  const auto cls3 = build_submission_config("cls3");
  CHECK(cls3.features == FeatureSource::kEmbeddingCtd);
  CHECK(cls3.vote == VoteKind::kSoft);
  REQUIRE(cls3.members.size() == 3);
  CHECK(cls3.members[0].family == LearnerFamily::kRandomForest);
  CHECK(cls3.members[1].family == LearnerFamily::kAdaBoost);
  CHECK(cls3.members[2].family == LearnerFamily::kNeuralNet);

  const auto reg3 = build_submission_config("reg3");
  CHECK(reg3.target == TargetKind::kRegression);
  CHECK(reg3.vote == VoteKind::kRegressorMean);
  CHECK(reg3.features == FeatureSource::kEmbeddingCtd);
  CHECK(reg3.train_split == TrainSplit::kTrainDev);

  CHECK(build_submission_config("reg1").features == FeatureSource::kLinguistic42);
  CHECK(build_submission_config("cls2").train_split == TrainSplit::kTrain);
  CHECK(error_of([] { build_submission_config("cls4"); }) == ErrorCode::kUnknownConfigName);
  CHECK(submission_config_names().size() == 6);
}

TEST_CASE("pipeline config JSON") {
  for (const auto& name : submission_config_names()) {
    const auto c = build_submission_config(name);
    CHECK(to_json(pipeline_config_from_json(to_json(c))) == to_json(c));
  }
  auto j = to_json(build_submission_config("cls1"));
  j["surprise"] = 1;
  CHECK(error_of([&] { pipeline_config_from_json(j); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("ensemble container round-trip") {
  const auto d = test::blobs(45, 4, 1.5, 4);
  auto config = build_submission_config("cls3");
  std::vector<TrainedModel> members{fit_model(d, LearnerFamily::kRandomForest, Json{{"n_trees", 8}}),
                                    fit_model(d, LearnerFamily::kAdaBoost, Json{{"n_estimators", 8}}),
                                    fit_model(d, LearnerFamily::kNeuralNet, Json{{"epochs", 10}})};
  const VotingEnsemble e(members, VoteKind::kSoft, {1.0, 2.0, 1.0});
  const auto bytes = save_ensemble(e, config);
  const auto back = load_ensemble(bytes);
  CHECK(back.ensemble.weights() == e.weights());
  CHECK(to_json(back.config) == to_json(config));
  const auto a = e.predict(d.x);
  const auto b = back.ensemble.predict(d.x, {}, 3);
  CHECK(a.probabilities == b.probabilities);
  CHECK(a.labels == b.labels);
  CHECK(save_ensemble(back.ensemble, back.config) == bytes);

  std::string cut = bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(load_ensemble(cut), Error);
  CHECK(error_of([&] { load_ensemble(save_model(members[0])); }) == ErrorCode::kNotAModelFile);
}
