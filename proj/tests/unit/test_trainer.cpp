#include <srt/srt.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace srt;

namespace {

std::string as_csv(const std::vector<IterationRecord>& records) {
  std::ostringstream out;
  write_records_csv(out, records);
  return out.str();
}

struct LogisticFixture {
  Rng rng{50};
  LabeledDataset<double> data = make_logistic_synthetic(400, 8, rng);
  LogisticRegression<double> f{data, 1e-3};
};

}  // namespace

TEST(Train, SameSeedSameBytes) {
  LogisticFixture fx;
  RunConfig rc;
  rc.epochs = 3;
  rc.batch_size = 16;
  rc.seed = 7;
  rc.srt.buffer_len = 10;
  const auto a = train(fx.f, fx.f.initial_parameters(), rc);
  const auto b = train(fx.f, fx.f.initial_parameters(), rc);
  EXPECT_EQ(a.records.size(), 3u * 25u);
  EXPECT_EQ(as_csv(a.records), as_csv(b.records));
  EXPECT_EQ(a.parameters, b.parameters);
  rc.seed = 8;
  EXPECT_NE(as_csv(train(fx.f, fx.f.initial_parameters(), rc).records), as_csv(a.records));
}

TEST(Train, IterationCountWithRemainderBatch) {
  LogisticFixture fx;
  RunConfig rc;
  rc.mode = FixedMode{0.1};
  rc.epochs = 2;
  rc.batch_size = 64;  // 400 = 6 x 64 + 16
  const auto r = train(fx.f, fx.f.initial_parameters(), rc);
  ASSERT_EQ(r.records.size(), 14u);
  EXPECT_EQ(r.records[6].epoch, 0u);
  EXPECT_EQ(r.records[7].epoch, 1u);
  for (std::size_t k = 0; k < r.records.size(); ++k) EXPECT_EQ(r.records[k].iteration, k);
  // default full-loss cadence: first iteration of each epoch
  for (const auto& rec : r.records) EXPECT_EQ(rec.full_loss.has_value(), rec.iteration % 7 == 0);
}

TEST(Train, FullLossCadence) {
  LogisticFixture fx;
  RunConfig rc;
  rc.mode = FixedMode{0.1};
  rc.batch_size = 50;
  rc.eval_full_loss_every = 3;
  auto r = train(fx.f, fx.f.initial_parameters(), rc);
  for (const auto& rec : r.records) EXPECT_EQ(rec.full_loss.has_value(), rec.iteration % 3 == 0);
  rc.eval_full_loss_every = 0;
  r = train(fx.f, fx.f.initial_parameters(), rc);
  for (const auto& rec : r.records) EXPECT_FALSE(rec.full_loss.has_value());
}

TEST(Train, FixedModeRecordsConstantAlphaAndRatios) {
  LogisticFixture fx;
  RunConfig rc;
  rc.mode = FixedMode{0.05};
  rc.epochs = 2;
  rc.batch_size = 8;
  const auto r = train(fx.f, fx.f.initial_parameters(), rc);
  ASSERT_EQ(r.status, RunStatus::completed);
  std::size_t with_rho = 0;
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.alpha, 0.05);
    EXPECT_EQ(rec.alpha_eff, 0.05);
    EXPECT_GE(rec.m_hat, 0.0);
    EXPECT_GE(rec.v_hat, 0.0);
    with_rho += rec.rho_hat.has_value() ? 1 : 0;
  }
  EXPECT_EQ(with_rho, r.records.size());
}

TEST(Train, SrtAlphaMovesByTauOnly) {
  LogisticFixture fx;
  RunConfig rc;
  rc.epochs = 5;
  rc.batch_size = 8;
  rc.srt.initial_step = 50.0;
  rc.srt.buffer_len = 5;
  rc.srt.step_factor = 3.0;
  const auto r = train(fx.f, fx.f.initial_parameters(), rc);
  ASSERT_EQ(r.status, RunStatus::completed);
  ASSERT_TRUE(r.state.has_value());
  EXPECT_GT(r.state->adjustments(), 0u);
  for (std::size_t k = 1; k < r.records.size(); ++k) {
    const double prev = r.records[k - 1].alpha;
    const double cur = r.records[k].alpha;
    EXPECT_TRUE(cur == prev || cur == prev * 3.0 || cur == prev / 3.0) << "k=" << k;
    EXPECT_LE(r.records[k].alpha_eff, cur);
    EXPECT_GE(r.records[k].m_hat, 0.0);
    EXPECT_GE(r.records[k].v_hat, 0.0);
  }
}

TEST(Train, FixedInverseLDecreasesMonotonically) {
  Rng rng(51);
  const auto q = make_synthetic(NoiseKind::noiseless, 40, 12, 0.2, 5.0, 0.0, rng);
  const QuadraticObjective f(q);
  RunConfig rc;
  rc.mode = FixedMode{1.0 / q.L};
  rc.epochs = 20;
  rc.batch_size = 4;
  rc.eval_full_loss_every = 1;
  const auto r = train(f, q.start, rc);
  ASSERT_EQ(r.records.size(), 200u);
  for (std::size_t k = 1; k < r.records.size(); ++k) {
    EXPECT_LE(*r.records[k].full_loss, *r.records[k - 1].full_loss);
  }
  EXPECT_LT(*r.records.back().full_loss, 1e-6 * *r.records.front().full_loss);
}

TEST(Train, TheoreticalModeEnvelope) {
  // multiplicative noise: E||grad F_S||^2 = (1 + M_V) ||grad F||^2 and M = 0,
  // so alpha = 1/(L(M_V+1)) contracts the expected gap by 1 - mu/(L(M_V+1)).
  Rng rng(52);
  const auto q = make_synthetic(NoiseKind::multiplicative, 64, 6, 1.0, 3.0, 0.8, rng);
  const QuadraticObjective f(q);
  const std::size_t m = 4;
  const auto sc = sampling_constants(q, m);
  ASSERT_GT(sc.M_V, 0.0);
  RunConfig rc;
  rc.mode = TheoreticalMode{q.L, sc.M_V};
  rc.batch_size = m;
  rc.epochs = 4;
  rc.eval_full_loss_every = 1;
  const std::size_t seeds = 100;
  const std::size_t len = 64;
  std::vector<RunningMoments> gap(len);
  for (std::size_t s = 0; s < seeds; ++s) {
    rc.seed = derive_seed(99, s);
    const auto r = train(f, q.start, rc);
    ASSERT_EQ(r.records.size(), len);
    for (std::size_t k = 0; k < len; ++k) gap[k].add(*r.records[k].full_loss);
    EXPECT_EQ(r.records[0].alpha, 1.0 / (q.L * (sc.M_V + 1.0)));
  }
  const double factor = 1.0 - q.mu / (q.L * (sc.M_V + 1.0));
  const double g0 = gap[0].mean();
  for (std::size_t k = 1; k < len; ++k) {
    const double bound = std::pow(factor, static_cast<double>(k)) * g0 + 3.0 * gap[k].standard_error();
    EXPECT_LE(gap[k].mean(), bound) << "k=" << k;
  }
}

TEST(Train, DivergenceStopsCleanly) {
  Rng rng(53);
  const auto q = make_synthetic(NoiseKind::noiseless, 16, 4, 1.0, 4.0, 0.0, rng);
  const QuadraticObjective f(q);
  RunConfig rc;
  rc.mode = FixedMode{10.0};
  rc.epochs = 1000;
  rc.batch_size = 16;
  std::size_t streamed = 0;
  const auto r = train(f, q.start, rc, [&](const IterationRecord&) { ++streamed; });
  EXPECT_EQ(r.status, RunStatus::diverged);
  EXPECT_FALSE(r.message.empty());
  EXPECT_LT(r.records.size(), 1000u);
  EXPECT_EQ(streamed, r.records.size());
  for (const auto& rec : r.records) EXPECT_LE(rec.batch_loss, 1e12);

  rc.divergence_threshold = std::nullopt;
  const auto r2 = train(f, q.start, rc);
  EXPECT_EQ(r2.status, RunStatus::diverged);
  EXPECT_GT(r2.records.size(), r.records.size());
  for (const auto& rec : r2.records) EXPECT_TRUE(std::isfinite(rec.batch_loss));
}

TEST(Train, RejectsBadConfig) {
  LogisticFixture fx;
  RunConfig rc;
  rc.batch_size = 401;
  EXPECT_THROW(train(fx.f, fx.f.initial_parameters(), rc), ParameterError);
  rc.batch_size = 0;
  EXPECT_THROW(train(fx.f, fx.f.initial_parameters(), rc), ParameterError);
  rc.batch_size = 4;
  rc.mode = FixedMode{-1.0};
  EXPECT_THROW(train(fx.f, fx.f.initial_parameters(), rc), ParameterError);
  rc.mode = FixedMode{0.1};
  EXPECT_THROW(train(fx.f, DenseVector(3), rc), DimensionError);
}

TEST(Train, MaxIterations) {
  LogisticFixture fx;
  RunConfig rc;
  rc.epochs = 10;
  rc.batch_size = 10;
  rc.max_iterations = 55;
  EXPECT_EQ(train(fx.f, fx.f.initial_parameters(), rc).records.size(), 55u);
}

TEST(Grid, SingleCellEqualsTrain) {
  LogisticFixture fx;
  const auto w0 = fx.f.initial_parameters();
  const auto cells = fixed_step_ratio_study(fx.f, w0, {0.003}, {8}, 2, 11);
  ASSERT_EQ(cells.size(), 1u);
  RunConfig rc;
  rc.mode = FixedMode{0.003};
  rc.epochs = 2;
  rc.batch_size = 8;
  rc.seed = 11;
  EXPECT_EQ(cells[0].result.records, train(fx.f, w0, rc).records);
}

TEST(Grid, ThreadCountDoesNotMatter) {
  LogisticFixture fx;
  const auto w0 = fx.f.initial_parameters();
  const auto one = fixed_step_ratio_study(fx.f, w0, {0.3, 3e-4}, {8, 64}, 1, 5, 1);
  const auto four = fixed_step_ratio_study(fx.f, w0, {0.3, 3e-4}, {8, 64}, 1, 5, 4);
  ASSERT_EQ(one.size(), 4u);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(one[c].seed, 5u ^ c);
    EXPECT_EQ(one[c].result.records, four[c].result.records);
  }
  EXPECT_EQ(one[1].alpha, 0.3);
  EXPECT_EQ(one[1].batch_size, 64u);
}

TEST(Grid, FailingCellDoesNotAbort) {
  LogisticFixture fx;
  const auto cells = fixed_step_ratio_study(fx.f, fx.f.initial_parameters(), {0.1}, {8, 1000}, 1, 3);
  EXPECT_EQ(cells[0].result.status, RunStatus::completed);
  EXPECT_EQ(cells[1].result.status, RunStatus::failed);
  EXPECT_FALSE(cells[1].error.empty());
  EXPECT_THROW(fixed_step_ratio_study(fx.f, fx.f.initial_parameters(), {}, {8}, 1, 3), ParameterError);
}

TEST(Grid, VarianceRatioSamplingStatistics) {
  // V_hat is the (1/m) sample variance of the per-sample gradients, so over all
  // m-subsets E[V_hat] = (m-1)/m * n/(n-1) * V_pop at any fixed iterate.
  Rng rng(55);
  const auto data = make_logistic_synthetic(10, 3, rng);
  const LogisticRegression<double> f(data, 0.05);
  const auto w = gaussian_vector(rng, 4, 1.0);
  const auto full = f.evaluate_batch(w, srt::testing::all_indices(10));
  const double v_pop = full.mean_per_sample_sq_norm - squared_norm(full.gradient);
  for (std::size_t m : {2u, 4u, 7u}) {
    RunningMean v;
    srt::oracle::for_each_subset(10, m, [&](const std::vector<std::size_t>& b) {
      const auto e = f.evaluate_batch(w, b);
      v.add(variance_ratio(e.mean_per_sample_sq_norm, squared_norm(e.gradient), 1e-12).v_hat);
    });
    const double md = static_cast<double>(m);
    EXPECT_NEAR(v.mean(), (md - 1.0) / md * 10.0 / 9.0 * v_pop, 1e-10 * v_pop) << "m=" << m;
  }
}

TEST(Grid, SmallStepRatioNearOne) {
  LogisticFixture fx;
  const auto cells = fixed_step_ratio_study(fx.f, fx.f.initial_parameters(), {0.3, 3e-4}, {8}, 3, 9);
  EXPECT_GT(cells[1].rho.mean, cells[0].rho.mean);
  EXPECT_NEAR(cells[1].rho.mean, 1.0, 1e-2);
}

TEST(Grid, CellFileNames) {
  EXPECT_EQ(cell_csv_name(0.003, 8), "alpha_0.003_batch_8.csv");
  EXPECT_EQ(cell_csv_name(3e-4, 64), "alpha_3e-04_batch_64.csv");
  EXPECT_EQ(cell_csv_name(3, 1), "alpha_3_batch_1.csv");
}

TEST(Telemetry, CsvRows) {
  IterationRecord r;
  r.iteration = 3;
  r.epoch = 1;
  r.batch_loss = 0.5;
  r.alpha = 0.1;
  r.alpha_eff = 0.05;
  r.m_hat = 1.0;
  r.v_hat = 0.25;
  r.grad_sq_norm = 2.0;
  EXPECT_EQ(to_csv_row(r), "3,1,0.5,0.1,0.05,,1,0.25,2,");
  r.rho_hat = 0.75;
  r.full_loss = 1e-300;
  EXPECT_EQ(to_csv_row(r), "3,1,0.5,0.1,0.05,0.75,1,0.25,2,1e-300");
  std::ostringstream out;
  write_records_csv(out, {r});
  EXPECT_EQ(out.str(), std::string(csv_header) + "\n3,1,0.5,0.1,0.05,0.75,1,0.25,2,1e-300\n");
}

TEST(Telemetry, ShortestRoundTrip) {
  Rng rng(54);
  for (int t = 0; t < 1000; ++t) {
    IterationRecord r;
    r.batch_loss = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
    const std::string row = to_csv_row(r);
    const auto first = row.find(',', row.find(',') + 1);
    const auto second = row.find(',', first + 1);
    EXPECT_EQ(std::stod(row.substr(first + 1, second - first - 1)), r.batch_loss);
  }
}

TEST(Telemetry, WriterFlushes) {
  const auto path = std::filesystem::temp_directory_path() / "srt_writer_test.csv";
  {
    CsvRecordWriter w(path, 2);
    IterationRecord r;
    w.write(r);
    w.write(r);
    std::ifstream in(path);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    EXPECT_EQ(lines, 3);
  }
  std::filesystem::remove(path);
}
