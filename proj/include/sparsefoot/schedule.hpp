#pragma once

// Adaptive ground-truth sampling and the two-phase terrain curriculum.
// Both are driven by streams of completed-episode statistics and know
// nothing about the trainer producing them.

#include "sparsefoot/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace sparsefoot {

/// Ring buffer of the most recent episode rewards.
class RewardWindow {
 public:
  explicit RewardWindow(std::size_t capacity = 100);

  void push(double reward);
  void clear();

  std::size_t count() const { return count_; }
  std::size_t capacity() const { return buffer_.size(); }
  bool full() const { return count_ == buffer_.size(); }

  /// Present entries, oldest first.
  std::vector<double> values() const;

  double mean() const;
  /// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 entries.
  double sample_std() const;

  bool operator==(const RewardWindow& other) const { return values() == other.values(); }

 private:
  std::vector<double> buffer_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

/// CV above this (and any CV of a near-zero-mean window) is clamped.
inline constexpr double kCvCap = 10.0;
inline constexpr double kNearZeroMean = 1e-9;

/// sample_std / |mean|, clamped to kCvCap. Throws InsufficientData for count < 2.
double coefficient_of_variation(const RewardWindow& window);

/// Probability of feeding the ground-truth heightmap: tanh(CV).
double adasmpl_prob(const RewardWindow& window);

enum class HeightmapSource { GroundTruth, Reconstructed };

std::string_view to_string(HeightmapSource source);

/// Ground truth with probability p. Deployment forces the reconstruction.
HeightmapSource sample_source(double p, Rng& rng, bool deployment = false);

enum class CurriculumPhase { Base, Advanced };

std::string_view to_string(CurriculumPhase phase);

struct CurriculumStage {
  CurriculumPhase phase = CurriculumPhase::Base;
  int level = 0;
  /// Levels [0, base_levels) are Base; the terminal level is n_levels.
  int n_levels = 5;
  int base_levels = 1;
  /// Mean traversing rate needed to promote.
  double promote_threshold = 0.8;
  RewardWindow window{100};

  bool terminal() const { return level >= n_levels; }
};

/// Promotes one level when `mean_traversing_rate >= promote_threshold`;
/// never demotes. Promotion past base_levels switches to Advanced.
CurriculumStage curriculum_step(CurriculumStage stage, double mean_traversing_rate);

/// One row of the schedule trace.
struct ScheduleTraceRow {
  std::int64_t episode = 0;
  double mean = 0.0;
  double std = 0.0;
  double cv = 0.0;
  double p_smpl = 0.0;
  HeightmapSource source = HeightmapSource::GroundTruth;
  CurriculumPhase phase = CurriculumPhase::Base;
  int level = 0;
};

void write_schedule_trace(std::ostream& out, const std::vector<ScheduleTraceRow>& rows);

}  // namespace sparsefoot
