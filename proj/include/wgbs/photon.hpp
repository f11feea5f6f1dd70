#pragma once

/// Pulsed Hanbury Brown–Twiss simulation and second-order correlation
/// analysis.
///
/// A pulsed photon source drives a two-port splitter; each output port is
/// watched by a click detector with finite efficiency, dark counts, dead
/// time, and Gaussian timing jitter.  The simulator produces per-detector
/// timestamp streams, which are cross-correlated into a delay histogram.
/// The normalized coincidence ratio of the zero-delay window to the side
/// windows estimates the second-order correlation g2(0); a background
/// correction removes the contribution of detector dark counts.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "wgbs/config.hpp"
#include "wgbs/error.hpp"
#include "wgbs/rng.hpp"

namespace wgbs {

// ---------------------------------------------------------------------------
// Specifications
// ---------------------------------------------------------------------------

/// Photon-number statistics of the source, per excitation pulse.
enum class PhotonStatistics {
  /// At most two photons per pulse: P(>=1) = emission_probability and
  /// P(2) = two_photon_probability.
  two_level,
  /// Poisson-distributed photon number with mean `emission_probability`
  /// (classical pulsed laser reference).
  poissonian,
};

inline const char* photon_statistics_name(PhotonStatistics s) {
  switch (s) {
    case PhotonStatistics::two_level: return "two-level";
    case PhotonStatistics::poissonian: return "poissonian";
  }
  throw domain_error("unknown photon statistics");
}

inline PhotonStatistics photon_statistics_from_string(const std::string& name) {
  if (name == "two-level") return PhotonStatistics::two_level;
  if (name == "poissonian") return PhotonStatistics::poissonian;
  throw domain_error("unknown photon statistics: \"" + name +
                     "\" (expected \"two-level\" or \"poissonian\")");
}

/// Pulsed photon source.
struct SourceSpec {
  double rep_rate_hz = 66.0e6;        ///< Pulse repetition rate.
  double emission_probability = 0.1;  ///< P(>=1 photon) per pulse, or the
                                      ///< Poisson mean for `poissonian`.
  double two_photon_probability = 0.0;  ///< P(2 photons) per pulse
                                        ///< (`two_level` only).
  double lifetime_ns = 1.0;  ///< Exponential emission-delay constant.
  PhotonStatistics statistics = PhotonStatistics::two_level;

  void validate() const {
    if (!(rep_rate_hz > 0.0)) throw domain_error("repetition rate must be positive");
    if (!(lifetime_ns > 0.0)) throw domain_error("emitter lifetime must be positive");
    if (statistics == PhotonStatistics::two_level) {
      if (emission_probability < 0.0 || emission_probability > 1.0)
        throw domain_error("emission probability must lie in [0, 1]");
      if (two_photon_probability < 0.0 || two_photon_probability > emission_probability)
        throw domain_error(
            "two-photon probability must lie in [0, emission probability]");
    } else {
      if (emission_probability < 0.0)
        throw domain_error("mean photon number must be non-negative");
      if (two_photon_probability != 0.0)
        throw domain_error(
            "two-photon probability is implied by the Poisson mean; leave it at 0");
    }
  }
};

/// Single-photon click detector on one splitter arm.
struct DetectorSpec {
  std::string arm = "a";        ///< Arm label ("a" or "b").
  double efficiency = 1.0;      ///< Photon detection probability.
  double dark_rate_cps = 0.0;   ///< Dark-count rate, counts per second.
  double dead_time_ns = 50.0;   ///< Non-paralyzable dead time.
  double jitter_sigma_ns = 0.3; ///< Gaussian timing-jitter sigma.

  void validate() const {
    if (arm.empty()) throw domain_error("detector arm label must not be empty");
    if (efficiency < 0.0 || efficiency > 1.0)
      throw domain_error("detector efficiency must lie in [0, 1]");
    if (dark_rate_cps < 0.0) throw domain_error("dark rate must be non-negative");
    if (dead_time_ns < 0.0) throw domain_error("dead time must be non-negative");
    if (jitter_sigma_ns < 0.0) throw domain_error("jitter sigma must be non-negative");
  }
};

/// Timestamp record produced by one detector.
struct ClickStream {
  std::string detector;       ///< Arm label of the producing detector.
  std::vector<double> t_ns;   ///< Strictly increasing click times in ns.
  double duration_s = 0.0;    ///< Acquisition span covered by the stream.

  void validate() const {
    if (!(duration_s > 0.0)) throw domain_error("stream duration must be positive");
    const double span_ns = duration_s * 1.0e9;
    double last = -1.0;
    for (const double t : t_ns) {
      if (!(t >= 0.0) || t > span_ns)
        throw domain_error("click timestamp outside the acquisition window");
      if (t <= last) throw domain_error("click timestamps must be strictly increasing");
      last = t;
    }
  }
};

// ---------------------------------------------------------------------------
// Source statistics helpers
// ---------------------------------------------------------------------------

/// Intrinsic pulsed g2(0) of the source: <n(n-1)> / <n>^2 over the per-pulse
/// photon number n.
inline double pulsed_g2(const SourceSpec& source) {
  source.validate();
  if (source.statistics == PhotonStatistics::poissonian) {
    if (!(source.emission_probability > 0.0))
      throw domain_error("source never emits; g2 is undefined");
    return 1.0;
  }
  const double p2 = source.two_photon_probability;
  const double p1 = source.emission_probability - p2;
  const double mean = p1 + 2.0 * p2;
  if (!(mean > 0.0)) throw domain_error("source never emits; g2 is undefined");
  return 2.0 * p2 / (mean * mean);
}

/// Two-photon probability that makes a two-level source with the given
/// emission probability reach the target pulsed g2(0).  Solves
/// 2 p2 / (p_emit + p2)^2 = g2 for the physical (smaller) root, written in a
/// cancellation-free form.  Requires g2 * p_emit <= 1/2; larger targets are
/// unreachable with at most two photons per pulse.
inline double two_photon_probability_for_g2(double g2_target, double emission_probability) {
  if (emission_probability <= 0.0 || emission_probability > 1.0)
    throw domain_error("emission probability must lie in (0, 1]");
  if (g2_target < 0.0) throw domain_error("g2 target must be non-negative");
  if (g2_target == 0.0) return 0.0;
  const double x = g2_target * emission_probability;
  if (x > 0.5)
    throw domain_error("g2 target is unreachable with at most two photons per pulse");
  return g2_target * emission_probability * emission_probability /
         (1.0 - x + std::sqrt(1.0 - 2.0 * x));
}

// ---------------------------------------------------------------------------
// Hanbury Brown–Twiss simulation
// ---------------------------------------------------------------------------

namespace detail {

/// Per-pulse event model after folding source statistics, splitter fractions,
/// and detector efficiencies together.  q_a / q_b are the per-photon
/// probabilities of producing a click candidate on arm a / b.
struct HbtEventModel {
  PhotonStatistics statistics = PhotonStatistics::two_level;
  double q_a = 0.0;
  double q_b = 0.0;
  double p_event = 0.0;  ///< P(at least one click candidate in a pulse).
  double mu = 0.0;       ///< Poisson mean of detected photons per pulse.
  double split_a = 0.0;  ///< P(candidate is on arm a | candidate exists).
  // two_level outcome table, conditioned on "at least one candidate":
  // weights sum to p_event; counts are candidates per arm.
  std::array<double, 7> weight{};
  std::array<int, 7> n_a{};
  std::array<int, 7> n_b{};
};

inline HbtEventModel make_event_model(const SourceSpec& source, double cross_fraction,
                                      double through_fraction, const DetectorSpec& det_a,
                                      const DetectorSpec& det_b) {
  HbtEventModel m;
  m.statistics = source.statistics;
  // Detector a watches the through port, detector b the cross port.
  m.q_a = through_fraction * det_a.efficiency;
  m.q_b = cross_fraction * det_b.efficiency;
  if (source.statistics == PhotonStatistics::poissonian) {
    m.mu = source.emission_probability * (m.q_a + m.q_b);
    m.p_event = -std::expm1(-m.mu);
    m.split_a = (m.q_a + m.q_b) > 0.0 ? m.q_a / (m.q_a + m.q_b) : 0.0;
    return m;
  }
  const double p2 = source.two_photon_probability;
  const double p1 = source.emission_probability - p2;
  const double q_none = 1.0 - m.q_a - m.q_b;
  m.weight = {p1 * m.q_a,                  // one photon, click on a
              p1 * m.q_b,                  // one photon, click on b
              p2 * m.q_a * m.q_a,          // two photons, both on a
              2.0 * p2 * m.q_a * m.q_b,    // two photons, one per arm
              p2 * m.q_b * m.q_b,          // two photons, both on b
              2.0 * p2 * m.q_a * q_none,   // two photons, only one seen on a
              2.0 * p2 * m.q_b * q_none};  // two photons, only one seen on b
  m.n_a = {1, 0, 2, 1, 0, 1, 0};
  m.n_b = {0, 1, 0, 1, 2, 0, 1};
  m.p_event = 0.0;
  for (const double w : m.weight) m.p_event += w;
  return m;
}

/// Click candidates produced by one simulation block, one vector per arm.
struct BlockClicks {
  std::vector<double> arm_a;
  std::vector<double> arm_b;
};

/// Simulates the signal (pulsed-photon) clicks of one block of pulses.
/// Pulses without any click candidate are skipped in O(1) by sampling the
/// geometric gap to the next eventful pulse, so sparse detection is cheap.
inline void simulate_signal_block(const HbtEventModel& m, const SourceSpec& source,
                                  const DetectorSpec& det_a, const DetectorSpec& det_b,
                                  std::uint64_t pulse_begin, std::uint64_t pulse_end,
                                  CounterRng& rng, BlockClicks& out) {
  if (m.p_event <= 0.0 || pulse_begin >= pulse_end) return;
  const double period_ns = 1.0e9 / source.rep_rate_hz;
  const double log_miss = std::log1p(-std::min(m.p_event, 1.0 - 1e-16));
  std::uint64_t pulse = pulse_begin;
  while (pulse < pulse_end) {
    // Geometric number of empty pulses before the next eventful one.
    const double gap = std::floor(std::log(rng.uniform_pos()) / log_miss);
    if (gap >= static_cast<double>(pulse_end - pulse)) return;
    pulse += static_cast<std::uint64_t>(gap);
    const double pulse_t = static_cast<double>(pulse) * period_ns;

    int clicks_a = 0;
    int clicks_b = 0;
    if (m.statistics == PhotonStatistics::two_level) {
      double pick = rng.uniform() * m.p_event;
      std::size_t cat = 0;
      for (; cat + 1 < m.weight.size(); ++cat) {
        if (pick < m.weight[cat]) break;
        pick -= m.weight[cat];
      }
      clicks_a = m.n_a[cat];
      clicks_b = m.n_b[cat];
    } else {
      // Detected-photon count per pulse is Poisson(mu) by thinning; sample it
      // conditioned on being >= 1 by inverting the truncated CDF.
      const double p0 = std::exp(-m.mu);
      const double target = p0 + rng.uniform() * m.p_event;
      double pmf = p0;
      double cdf = p0;
      int n = 0;
      while (cdf < target && n < 1000) {
        ++n;
        pmf *= m.mu / n;
        cdf += pmf;
      }
      for (int i = 0; i < n; ++i) {
        if (rng.uniform() < m.split_a) ++clicks_a; else ++clicks_b;
      }
    }
    // Fixed draw order (all arm-a photons, then all arm-b photons) keeps the
    // stream reproducible.
    for (int i = 0; i < clicks_a; ++i) {
      double t = pulse_t + rng.exponential(source.lifetime_ns);
      if (det_a.jitter_sigma_ns > 0.0) t += rng.normal(0.0, det_a.jitter_sigma_ns);
      out.arm_a.push_back(t);
    }
    for (int i = 0; i < clicks_b; ++i) {
      double t = pulse_t + rng.exponential(source.lifetime_ns);
      if (det_b.jitter_sigma_ns > 0.0) t += rng.normal(0.0, det_b.jitter_sigma_ns);
      out.arm_b.push_back(t);
    }
    ++pulse;
  }
}

/// Appends homogeneous Poisson dark counts covering [t0_ns, t1_ns).
/// Exponential restarts at block boundaries compose into one global Poisson
/// process by memorylessness, so blocks stay independent.
inline void simulate_dark_block(double dark_rate_cps, double t0_ns, double t1_ns,
                                CounterRng& rng, std::vector<double>& out) {
  if (dark_rate_cps <= 0.0 || t1_ns <= t0_ns) return;
  const double mean_gap_ns = 1.0e9 / dark_rate_cps;
  double t = t0_ns + rng.exponential(mean_gap_ns);
  while (t < t1_ns) {
    out.push_back(t);
    t += rng.exponential(mean_gap_ns);
  }
}

/// Restores global time order after per-block vectors are concatenated.
/// Blocks are sorted internally, so only rare spill-over near boundaries is
/// out of place; a backward insertion fix costs O(n + displaced elements).
inline void repair_near_sorted(std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] >= v[i - 1]) continue;
    const double x = v[i];
    std::size_t j = i;
    while (j > 0 && v[j - 1] > x) {
      v[j] = v[j - 1];
      --j;
    }
    v[j] = x;
  }
}

/// Applies the acquisition window and non-paralyzable dead time, producing a
/// strictly increasing stream.
inline std::vector<double> apply_dead_time(const std::vector<double>& sorted,
                                           double dead_time_ns, double span_ns) {
  std::vector<double> kept;
  kept.reserve(sorted.size());
  double last = -std::numeric_limits<double>::infinity();
  for (const double t : sorted) {
    if (t < 0.0 || t > span_ns) continue;
    if (t - last > dead_time_ns) {
      kept.push_back(t);
      last = t;
    }
  }
  return kept;
}

}  // namespace detail

/// Simulates a Hanbury Brown–Twiss run: the source feeds a splitter whose
/// through port is watched by `det_a` and whose cross port is watched by
/// `det_b`.  Returns one click stream per detector.
///
/// The duration is segmented into one-second blocks, each driven by its own
/// deterministic counter-RNG substream; blocks are concatenated in time
/// order, so the result depends only on `seed`, never on `threads`.
inline std::pair<ClickStream, ClickStream> simulate_hbt(
    const SourceSpec& source, double cross_fraction, double through_fraction,
    const DetectorSpec& det_a, const DetectorSpec& det_b, double duration_s,
    std::uint64_t seed, int threads = 1) {
  source.validate();
  det_a.validate();
  det_b.validate();
  if (!(cross_fraction >= 0.0) || !(through_fraction >= 0.0) ||
      std::abs(cross_fraction + through_fraction - 1.0) > 1e-9)
    throw config_error("splitter cross and through fractions must sum to 1");
  if (!(duration_s > 0.0)) throw domain_error("acquisition duration must be positive");
  if (threads < 1) throw config_error("thread count must be positive");

  const detail::HbtEventModel model =
      detail::make_event_model(source, cross_fraction, through_fraction, det_a, det_b);

  constexpr double kBlockSeconds = 1.0;
  const double span_ns = duration_s * 1.0e9;
  const auto total_pulses =
      static_cast<std::uint64_t>(std::llround(duration_s * source.rep_rate_hz));
  const auto n_blocks = static_cast<std::size_t>(
      std::max<double>(1.0, std::ceil(duration_s / kBlockSeconds)));

  std::vector<detail::BlockClicks> blocks(n_blocks);
  std::atomic<std::size_t> next_block{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t b = next_block.fetch_add(1);
      if (b >= n_blocks) return;
      const double t0 = static_cast<double>(b) * kBlockSeconds * 1.0e9;
      const double t1 = std::min(span_ns, t0 + kBlockSeconds * 1.0e9);
      const auto pulse_begin = std::min<std::uint64_t>(
          total_pulses,
          static_cast<std::uint64_t>(std::llround(
              static_cast<double>(b) * kBlockSeconds * source.rep_rate_hz)));
      const auto pulse_end = std::min<std::uint64_t>(
          total_pulses,
          static_cast<std::uint64_t>(std::llround(
              static_cast<double>(b + 1) * kBlockSeconds * source.rep_rate_hz)));

      CounterRng signal_rng(seed, static_cast<std::uint64_t>(b) * 8);
      detail::simulate_signal_block(model, source, det_a, det_b, pulse_begin, pulse_end,
                                    signal_rng, blocks[b]);
      CounterRng dark_a_rng(seed, static_cast<std::uint64_t>(b) * 8 + 1);
      detail::simulate_dark_block(det_a.dark_rate_cps, t0, t1, dark_a_rng, blocks[b].arm_a);
      CounterRng dark_b_rng(seed, static_cast<std::uint64_t>(b) * 8 + 2);
      detail::simulate_dark_block(det_b.dark_rate_cps, t0, t1, dark_b_rng, blocks[b].arm_b);
      std::sort(blocks[b].arm_a.begin(), blocks[b].arm_a.end());
      std::sort(blocks[b].arm_b.begin(), blocks[b].arm_b.end());
    }
  };
  if (threads == 1 || n_blocks == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n_blocks);
    pool.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  const auto assemble = [&](bool arm_a, const DetectorSpec& det) {
    std::size_t total = 0;
    for (const auto& blk : blocks) total += (arm_a ? blk.arm_a : blk.arm_b).size();
    std::vector<double> merged;
    merged.reserve(total);
    for (const auto& blk : blocks) {
      const auto& src = arm_a ? blk.arm_a : blk.arm_b;
      merged.insert(merged.end(), src.begin(), src.end());
    }
    detail::repair_near_sorted(merged);
    ClickStream stream;
    stream.detector = det.arm;
    stream.duration_s = duration_s;
    stream.t_ns = detail::apply_dead_time(merged, det.dead_time_ns, span_ns);
    return stream;
  };
  return {assemble(true, det_a), assemble(false, det_b)};
}

// ---------------------------------------------------------------------------
// Cross-correlation histogram
// ---------------------------------------------------------------------------

/// Histogram of pairwise delays t_b - t_a.  Bin i is centred at
/// (i - half_bins()) * bin_width_ns and collects delays rounded to that
/// centre, so the covered delay interval is range_ns + bin_width_ns / 2 on
/// each side.
struct CorrelationHistogram {
  double bin_width_ns = 0.0;
  double range_ns = 0.0;  ///< Centre of the outermost bin.
  double duration_s = 0.0;
  std::vector<std::uint64_t> counts;

  std::size_t half_bins() const { return counts.empty() ? 0 : (counts.size() - 1) / 2; }

  double delay_of_bin(std::size_t i) const {
    return (static_cast<double>(i) - static_cast<double>(half_bins())) * bin_width_ns;
  }

  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (const auto c : counts) sum += c;
    return sum;
  }
};

/// Builds the delay histogram of all pairs (t_a, t_b) with
/// |t_b - t_a| <= range_ns + bin_width_ns / 2, using a two-pointer sweep over
/// the sorted streams: O(n_a + n_b + pairs).
inline CorrelationHistogram cross_correlate(const ClickStream& a, const ClickStream& b,
                                            double bin_width_ns, double range_ns) {
  if (!(bin_width_ns > 0.0)) throw config_error("bin width must be positive");
  if (!(range_ns >= bin_width_ns))
    throw config_error("correlation range must be at least one bin width");
  if (a.duration_s != b.duration_s)
    throw domain_error("click streams must cover the same acquisition duration");
  a.validate();
  b.validate();

  const auto half = static_cast<std::size_t>(std::llround(range_ns / bin_width_ns));
  CorrelationHistogram hist;
  hist.bin_width_ns = bin_width_ns;
  hist.range_ns = static_cast<double>(half) * bin_width_ns;
  hist.duration_s = a.duration_s;
  hist.counts.assign(2 * half + 1, 0);

  const double window = (static_cast<double>(half) + 0.5) * bin_width_ns;
  const auto n_bins = static_cast<std::int64_t>(hist.counts.size());
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (const double ta : a.t_ns) {
    while (lo < b.t_ns.size() && b.t_ns[lo] < ta - window) ++lo;
    if (hi < lo) hi = lo;
    while (hi < b.t_ns.size() && b.t_ns[hi] < ta + window) ++hi;
    for (std::size_t j = lo; j < hi; ++j) {
      const std::int64_t bin =
          std::llround((b.t_ns[j] - ta) / bin_width_ns) + static_cast<std::int64_t>(half);
      if (bin >= 0 && bin < n_bins) ++hist.counts[static_cast<std::size_t>(bin)];
    }
  }
  return hist;
}

// ---------------------------------------------------------------------------
// g2 estimation and background correction
// ---------------------------------------------------------------------------

/// Raw g2(0) estimate from a correlation histogram.
struct G2Estimate {
  double value = 0.0;        ///< Centre-window area over mean side-window area.
  double sigma = 0.0;        ///< Poisson statistical uncertainty of `value`.
  double center_area = 0.0;  ///< Coincidences in the zero-delay window.
  double side_mean = 0.0;    ///< Mean coincidences per side window.
  std::size_t side_windows = 0;
};

/// Estimates the raw g2(0) of a pulsed correlation histogram as the ratio of
/// the zero-delay window area to the mean side-window area, where window k
/// spans delays within rep_period / 2 of k * rep_period.  Only windows fully
/// inside the histogram are used; at least four side windows are required,
/// so the histogram must span at least three repetition periods per side.
inline G2Estimate g2_raw(const CorrelationHistogram& hist, double rep_period_ns) {
  if (!(rep_period_ns > 0.0)) throw domain_error("repetition period must be positive");
  if (hist.counts.empty() || !(hist.bin_width_ns > 0.0))
    throw domain_error("correlation histogram is empty");
  const double coverage = hist.range_ns + 0.5 * hist.bin_width_ns;
  if (coverage + 1e-9 * rep_period_ns < 3.0 * rep_period_ns)
    throw domain_error("histogram must span at least three repetition periods per side");

  const auto k_max = static_cast<std::int64_t>(
      std::floor((coverage - 0.5 * rep_period_ns) / rep_period_ns + 1e-9));
  std::vector<double> window_area(static_cast<std::size_t>(2 * k_max + 1), 0.0);
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    const std::int64_t k = std::llround(hist.delay_of_bin(i) / rep_period_ns);
    if (k < -k_max || k > k_max) continue;
    window_area[static_cast<std::size_t>(k + k_max)] += static_cast<double>(hist.counts[i]);
  }

  G2Estimate est;
  est.side_windows = static_cast<std::size_t>(2 * k_max);
  if (est.side_windows < 4)
    throw domain_error("need at least four complete side windows");
  est.center_area = window_area[static_cast<std::size_t>(k_max)];
  double side_sum = 0.0;
  for (std::int64_t k = -k_max; k <= k_max; ++k) {
    if (k != 0) side_sum += window_area[static_cast<std::size_t>(k + k_max)];
  }
  if (side_sum <= 0.0)
    throw numeric_error("insufficient statistics: all side windows are empty");
  est.side_mean = side_sum / static_cast<double>(est.side_windows);
  est.value = est.center_area / est.side_mean;
  est.sigma = std::sqrt(std::max(est.center_area, 1.0) +
                        est.center_area * est.center_area / side_sum) /
              est.side_mean;
  return est;
}

/// Background-corrected g2 value.
struct CorrectedG2 {
  double value = 0.0;
  double sigma = 0.0;
  bool floor_clipped = false;  ///< True when the raw value sat below the
                               ///< accidental floor and the result was clipped
                               ///< to 0.
};

/// Signal fraction rho = (rate - dark) / rate of one detector.
inline double signal_fraction(double total_rate_cps, double dark_rate_cps) {
  if (!(total_rate_cps > 0.0)) throw domain_error("total rate must be positive");
  if (dark_rate_cps < 0.0 || dark_rate_cps > total_rate_cps)
    throw domain_error("dark rate must lie in [0, total rate]");
  return (total_rate_cps - dark_rate_cps) / total_rate_cps;
}

/// Removes the dark-count accidental floor from a raw g2 value:
/// g2_corrected = (g2_raw - (1 - rho_a rho_b)) / (rho_a rho_b).  Values below
/// the floor are clipped to 0 and flagged.
inline CorrectedG2 background_correct(double g2_raw_value, double g2_raw_sigma,
                                      double rho_a, double rho_b) {
  if (g2_raw_value < 0.0) throw domain_error("raw g2 must be non-negative");
  if (g2_raw_sigma < 0.0) throw domain_error("raw g2 sigma must be non-negative");
  if (!(rho_a > 0.0) || rho_a > 1.0 || !(rho_b > 0.0) || rho_b > 1.0)
    throw domain_error("signal fractions must lie in (0, 1]");
  const double rho = rho_a * rho_b;
  CorrectedG2 out;
  out.sigma = g2_raw_sigma / rho;
  const double corrected = (g2_raw_value - (1.0 - rho)) / rho;
  if (corrected < 0.0) {
    out.value = 0.0;
    out.floor_clipped = true;
  } else {
    out.value = corrected;
  }
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end scenario
// ---------------------------------------------------------------------------

/// Complete description of one Hanbury Brown–Twiss acquisition.
struct HbtScenario {
  SourceSpec source;
  double cross_fraction = 0.5;
  double through_fraction = 0.5;
  DetectorSpec detector_a{"a", 1.0, 0.0, 50.0, 0.3};
  DetectorSpec detector_b{"b", 1.0, 0.0, 50.0, 0.3};
  double duration_s = 1.0;
  std::uint64_t seed = 1;
  double bin_width_ns = 0.0;  ///< 0 selects rep_period / 15.
  double range_ns = 0.0;      ///< 0 selects 3.5 * rep_period.
};

/// Result of simulating and analysing one scenario.
struct HbtResult {
  ClickStream arm_a;
  ClickStream arm_b;
  CorrelationHistogram histogram;
  G2Estimate raw;
  double rate_a_cps = 0.0;
  double rate_b_cps = 0.0;
  double rho_a = 1.0;
  double rho_b = 1.0;
  CorrectedG2 corrected;
  std::uint64_t seed = 0;
};

/// Simulates the scenario, builds the correlation histogram, and estimates
/// the raw and background-corrected g2(0).  Signal fractions come from the
/// measured click rates and the configured dark rates.
inline HbtResult run_hbt(const HbtScenario& scenario, int threads = 1) {
  HbtResult result;
  result.seed = scenario.seed;
  auto streams = simulate_hbt(scenario.source, scenario.cross_fraction,
                              scenario.through_fraction, scenario.detector_a,
                              scenario.detector_b, scenario.duration_s, scenario.seed,
                              threads);
  result.arm_a = std::move(streams.first);
  result.arm_b = std::move(streams.second);

  const double rep_period_ns = 1.0e9 / scenario.source.rep_rate_hz;
  const double bin_w =
      scenario.bin_width_ns > 0.0 ? scenario.bin_width_ns : rep_period_ns / 15.0;
  const double range = scenario.range_ns > 0.0 ? scenario.range_ns : 3.5 * rep_period_ns;
  result.histogram = cross_correlate(result.arm_a, result.arm_b, bin_w, range);
  result.raw = g2_raw(result.histogram, rep_period_ns);

  result.rate_a_cps = static_cast<double>(result.arm_a.t_ns.size()) / scenario.duration_s;
  result.rate_b_cps = static_cast<double>(result.arm_b.t_ns.size()) / scenario.duration_s;
  const auto fraction = [](double rate, const DetectorSpec& det) {
    if (det.dark_rate_cps <= 0.0) return 1.0;
    if (!(rate > det.dark_rate_cps))
      throw numeric_error("measured rate on arm " + det.arm +
                          " does not exceed its dark rate");
    return signal_fraction(rate, det.dark_rate_cps);
  };
  result.rho_a = fraction(result.rate_a_cps, scenario.detector_a);
  result.rho_b = fraction(result.rate_b_cps, scenario.detector_b);
  result.corrected =
      background_correct(result.raw.value, result.raw.sigma, result.rho_a, result.rho_b);
  return result;
}

/// Reads a scenario from a config with sections [source], [splitter],
/// [detector.a], [detector.b], and [hbt].
inline HbtScenario hbt_scenario_from_config(const Config& cfg) {
  HbtScenario sc;
  sc.source.rep_rate_hz = cfg.get_double("source", "rep_rate_hz", sc.source.rep_rate_hz);
  sc.source.emission_probability =
      cfg.get_double("source", "emission_probability", sc.source.emission_probability);
  sc.source.two_photon_probability =
      cfg.get_double("source", "two_photon_probability", sc.source.two_photon_probability);
  sc.source.lifetime_ns = cfg.get_double("source", "lifetime_ns", sc.source.lifetime_ns);
  sc.source.statistics = photon_statistics_from_string(
      cfg.get_string("source", "statistics", photon_statistics_name(sc.source.statistics)));
  sc.cross_fraction = cfg.get_double("splitter", "cross", sc.cross_fraction);
  sc.through_fraction = cfg.get_double("splitter", "through", sc.through_fraction);
  const auto load_detector = [&](const std::string& section, DetectorSpec& det) {
    det.efficiency = cfg.get_double(section, "efficiency", det.efficiency);
    det.dark_rate_cps = cfg.get_double(section, "dark_rate_cps", det.dark_rate_cps);
    det.dead_time_ns = cfg.get_double(section, "dead_time_ns", det.dead_time_ns);
    det.jitter_sigma_ns = cfg.get_double(section, "jitter_sigma_ns", det.jitter_sigma_ns);
  };
  load_detector("detector.a", sc.detector_a);
  load_detector("detector.b", sc.detector_b);
  sc.duration_s = cfg.get_double("hbt", "duration_s", sc.duration_s);
  sc.seed = static_cast<std::uint64_t>(cfg.get_int("hbt", "seed", static_cast<long long>(sc.seed)));
  sc.bin_width_ns = cfg.get_double("hbt", "bin_width_ns", sc.bin_width_ns);
  sc.range_ns = cfg.get_double("hbt", "range_ns", sc.range_ns);
  sc.source.validate();
  sc.detector_a.validate();
  sc.detector_b.validate();
  return sc;
}

// ---------------------------------------------------------------------------
// CSV interchange
// ---------------------------------------------------------------------------

/// Writes a click stream as CSV with columns detector,t_ns.  The acquisition
/// duration is recorded in a metadata comment.
inline void clicks_to_csv(const ClickStream& stream, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw domain_error("cannot open file for writing: " + path);
  out << "# duration_s = " << std::setprecision(17) << stream.duration_s << "\n";
  out << "detector,t_ns\n";
  out << std::setprecision(17);
  for (const double t : stream.t_ns) out << stream.detector << ',' << t << "\n";
  if (!out) throw domain_error("failed while writing: " + path);
}

/// Reads a click stream written by clicks_to_csv.
inline ClickStream clicks_from_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw domain_error("cannot open file: " + path);
  ClickStream stream;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  const auto fail = [&](const std::string& what) {
    throw domain_error(path + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (line.find("duration_s") != std::string::npos && eq != std::string::npos) {
        stream.duration_s = std::stod(line.substr(eq + 1));
      }
      continue;
    }
    if (!saw_header) {
      if (line != "detector,t_ns") fail("expected header \"detector,t_ns\"");
      saw_header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail("expected two comma-separated fields");
    const std::string det = line.substr(0, comma);
    if (stream.detector.empty()) {
      stream.detector = det;
    } else if (det != stream.detector) {
      fail("mixed detector labels in one stream");
    }
    std::size_t used = 0;
    double t = 0.0;
    try {
      t = std::stod(line.substr(comma + 1), &used);
    } catch (const std::exception&) {
      fail("invalid timestamp");
    }
    if (used != line.size() - comma - 1) fail("trailing characters after timestamp");
    stream.t_ns.push_back(t);
  }
  if (!saw_header) throw domain_error(path + ": missing header \"detector,t_ns\"");
  if (!(stream.duration_s > 0.0))
    throw domain_error(path + ": missing \"# duration_s = ...\" metadata");
  stream.validate();
  return stream;
}

/// Writes a correlation histogram as CSV with columns delay_ns,counts.
inline void histogram_to_csv(const CorrelationHistogram& hist, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw domain_error("cannot open file for writing: " + path);
  out << std::setprecision(17);
  out << "# bin_width_ns = " << hist.bin_width_ns << "\n";
  out << "# duration_s = " << hist.duration_s << "\n";
  out << "delay_ns,counts\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i)
    out << hist.delay_of_bin(i) << ',' << hist.counts[i] << "\n";
  if (!out) throw domain_error("failed while writing: " + path);
}

/// Reads a histogram written by histogram_to_csv.
inline CorrelationHistogram histogram_from_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw domain_error("cannot open file: " + path);
  CorrelationHistogram hist;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  std::vector<double> delays;
  const auto fail = [&](const std::string& what) {
    throw domain_error(path + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      if (line.find("bin_width_ns") != std::string::npos)
        hist.bin_width_ns = std::stod(line.substr(eq + 1));
      else if (line.find("duration_s") != std::string::npos)
        hist.duration_s = std::stod(line.substr(eq + 1));
      continue;
    }
    if (!saw_header) {
      if (line != "delay_ns,counts") fail("expected header \"delay_ns,counts\"");
      saw_header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail("expected two comma-separated fields");
    try {
      delays.push_back(std::stod(line.substr(0, comma)));
      hist.counts.push_back(static_cast<std::uint64_t>(
          std::stoull(line.substr(comma + 1))));
    } catch (const std::exception&) {
      fail("invalid histogram row");
    }
  }
  if (!saw_header) throw domain_error(path + ": missing header \"delay_ns,counts\"");
  if (!(hist.bin_width_ns > 0.0))
    throw domain_error(path + ": missing \"# bin_width_ns = ...\" metadata");
  if (hist.counts.size() % 2 == 0)
    throw domain_error(path + ": histogram must have an odd number of bins");
  hist.range_ns = static_cast<double>(hist.half_bins()) * hist.bin_width_ns;
  for (std::size_t i = 0; i < delays.size(); ++i) {
    if (std::abs(delays[i] - hist.delay_of_bin(i)) > 1e-6 * hist.bin_width_ns)
      throw domain_error(path + ": delay column is not uniformly spaced");
  }
  return hist;
}

}  // namespace wgbs
