#include "sparsefoot/schedule.hpp"

#include "sparsefoot/error.hpp"
#include "sparsefoot/io.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>

namespace sparsefoot {

RewardWindow::RewardWindow(std::size_t capacity) : buffer_(std::max<std::size_t>(capacity, 1), 0.0) {}

void RewardWindow::push(double reward) {
  buffer_[head_] = reward;
  head_ = (head_ + 1) % buffer_.size();
  count_ = std::min(count_ + 1, buffer_.size());
}

void RewardWindow::clear() {
  head_ = 0;
  count_ = 0;
}

std::vector<double> RewardWindow::values() const {
  std::vector<double> out;
  out.reserve(count_);
  const std::size_t start = (head_ + buffer_.size() - count_) % buffer_.size();
  for (std::size_t k = 0; k < count_; ++k) out.push_back(buffer_[(start + k) % buffer_.size()]);
  return out;
}

double RewardWindow::mean() const {
  if (count_ == 0) return 0.0;
  double sum = 0.0;
  for (double v : values()) sum += v;
  return sum / double(count_);
}

double RewardWindow::sample_std() const {
  if (count_ < 2) return 0.0;
  const auto vs = values();
  // Rounding in the mean would otherwise leave a constant window with a tiny spread.
  if (std::adjacent_find(vs.begin(), vs.end(), std::not_equal_to<>()) == vs.end()) return 0.0;
  const double m = mean();
  double ss = 0.0;
  for (double v : values()) ss += (v - m) * (v - m);
  return std::sqrt(ss / double(count_ - 1));
}

double coefficient_of_variation(const RewardWindow& window) {
  if (window.count() < 2)
    throw Error(ErrorCode::InsufficientData, "coefficient of variation needs at least 2 rewards");
  const double sd = window.sample_std();
  if (sd == 0.0) return 0.0;  // no variability at all, even around a zero mean
  const double m = std::abs(window.mean());
  if (m < kNearZeroMean) return kCvCap;
  return std::min(sd / m, kCvCap);
}

double adasmpl_prob(const RewardWindow& window) { return std::tanh(coefficient_of_variation(window)); }

std::string_view to_string(HeightmapSource source) {
  return source == HeightmapSource::GroundTruth ? "ground_truth" : "reconstructed";
}

HeightmapSource sample_source(double p, Rng& rng, bool deployment) {
  const double u = rng.uniform();
  if (deployment) return HeightmapSource::Reconstructed;
  return u < p ? HeightmapSource::GroundTruth : HeightmapSource::Reconstructed;
}

std::string_view to_string(CurriculumPhase phase) {
  return phase == CurriculumPhase::Base ? "base" : "advanced";
}

CurriculumStage curriculum_step(CurriculumStage stage, double mean_traversing_rate) {
  if (stage.terminal() || mean_traversing_rate < stage.promote_threshold) return stage;
  ++stage.level;
  stage.phase = stage.level >= stage.base_levels ? CurriculumPhase::Advanced : CurriculumPhase::Base;
  return stage;
}

void write_schedule_trace(std::ostream& out, const std::vector<ScheduleTraceRow>& rows) {
  out << "episode,mean,std,cv,p_smpl,source_drawn,stage_phase,stage_level\n";
  for (const auto& r : rows) {
    out << r.episode << ',' << format_double(r.mean) << ',' << format_double(r.std) << ','
        << format_double(r.cv) << ',' << format_double(r.p_smpl, 9) << ',' << to_string(r.source)
        << ',' << to_string(r.phase) << ',' << r.level << '\n';
  }
}

}  // namespace sparsefoot
