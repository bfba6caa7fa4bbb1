#include "doctest.h"
#include "oracles.hpp"

#include "sparsefoot/error.hpp"
#include "sparsefoot/rng.hpp"
#include "sparsefoot/schedule.hpp"

#include <cmath>
#include <sstream>

using namespace sparsefoot;

TEST_CASE("reward window keeps the most recent entries in order") {
  RewardWindow w(3);
  CHECK(w.count() == 0);
  CHECK(w.mean() == 0.0);
  w.push(1);
  w.push(2);
  CHECK(w.values() == std::vector<double>{1, 2});
  w.push(3);
  w.push(4);
  CHECK(w.full());
  CHECK(w.values() == std::vector<double>{2, 3, 4});
  CHECK(w.mean() == 3.0);
  CHECK(w.sample_std() == 1.0);
  w.clear();
  CHECK(w.count() == 0);
  CHECK(RewardWindow(0).capacity() == 1);
}

TEST_CASE("coefficient of variation matches a long-double reference") {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    RewardWindow w(2 + rng.next() % 150);
    const int n = 2 + int(rng.next() % 200);
    const double loc = rng.uniform(-5.0, 5.0), scale = rng.uniform(0.0, 3.0);
    for (int k = 0; k < n; ++k) w.push(loc + scale * rng.normal());
    REQUIRE(coefficient_of_variation(w) == doctest::Approx(oracle::cv(w.values())).epsilon(1e-10));
  }
}

TEST_CASE("adasmpl probability is tanh of the CV") {
  Rng rng(23);
  for (int trial = 0; trial < 500; ++trial) {
    RewardWindow w(100);
    for (int k = 0; k < 100; ++k) w.push(rng.uniform(0.0, 2.0) * rng.uniform(0.5, 1.5));
    REQUIRE(std::abs(adasmpl_prob(w) - oracle::ref_tanh(coefficient_of_variation(w))) <= 1e-12);
    REQUIRE(adasmpl_prob(w) >= 0.0);
    REQUIRE(adasmpl_prob(w) < 1.0);
  }
}

TEST_CASE("CV edge cases") {
  RewardWindow w(10);
  CHECK_THROWS_AS(coefficient_of_variation(w), Error);
  w.push(1.0);
  try {
    coefficient_of_variation(w);
    FAIL("expected InsufficientData");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientData);
  }
  w.push(1.0);
  CHECK(coefficient_of_variation(w) == 0.0);
  CHECK(adasmpl_prob(w) == 0.0);

  RewardWindow zero(4);
  for (double v : {-1.0, 1.0, -1.0, 1.0}) zero.push(v);
  CHECK(coefficient_of_variation(zero) == kCvCap);
  CHECK(adasmpl_prob(zero) == doctest::Approx(std::tanh(kCvCap)));

  RewardWindow wild(2);
  wild.push(1e-3);
  wild.push(-0.9e-3);
  CHECK(coefficient_of_variation(wild) == kCvCap);
}

TEST_CASE("CV is scale invariant") {
  Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    RewardWindow a(50), b(50), c(50);
    const double k = std::ldexp(1.0, int(rng.next() % 20) - 10);  // exact scaling
    for (int i = 0; i < 50; ++i) {
      const double v = rng.uniform(0.1, 1.0);
      a.push(v);
      b.push(k * v);
      c.push(-v);
    }
    REQUIRE(coefficient_of_variation(a) == coefficient_of_variation(b));
    REQUIRE(coefficient_of_variation(a) == coefficient_of_variation(c));
  }
}

TEST_CASE("source sampling") {
  Rng rng(31);
  int gt = 0;
  for (int k = 0; k < 20000; ++k) gt += sample_source(0.3, rng) == HeightmapSource::GroundTruth;
  CHECK(gt / 20000.0 == doctest::Approx(0.3).epsilon(0.05));
  for (int k = 0; k < 100; ++k) {
    CHECK(sample_source(1.0, rng, true) == HeightmapSource::Reconstructed);
    CHECK(sample_source(0.0, rng) == HeightmapSource::Reconstructed);
    CHECK(sample_source(1.0, rng) == HeightmapSource::GroundTruth);
  }
  // Deployment draws too, so the stream does not depend on the flag.
  Rng a(1), b(1);
  sample_source(0.5, a, true);
  sample_source(0.5, b, false);
  CHECK(a.state() == b.state());
}

TEST_CASE("curriculum promotes, switches phase and never demotes") {
  CurriculumStage s;
  s.n_levels = 3;
  s.base_levels = 1;
  CHECK(s.phase == CurriculumPhase::Base);
  s = curriculum_step(s, 0.5);
  CHECK(s.level == 0);
  s = curriculum_step(s, 0.8);
  CHECK(s.level == 1);
  CHECK(s.phase == CurriculumPhase::Advanced);
  s = curriculum_step(s, 0.0);
  CHECK(s.level == 1);
  s = curriculum_step(s, 0.9);
  s = curriculum_step(s, 0.9);
  CHECK(s.terminal());
  s = curriculum_step(s, 1.0);
  CHECK(s.level == 3);
}

TEST_CASE("schedule trace format") {
  std::ostringstream out;
  write_schedule_trace(out, {{3, 1.0, 0.5, 0.5, std::tanh(0.5), HeightmapSource::GroundTruth,
                              CurriculumPhase::Advanced, 2}});
  const std::string s = out.str();
  CHECK(s.rfind("episode,mean,std,cv,p_smpl,source_drawn,stage_phase,stage_level\n", 0) == 0);
  CHECK(s.find("3,1.000000,0.500000,0.500000,0.462117157,ground_truth,advanced,2\n") != std::string::npos);
}
