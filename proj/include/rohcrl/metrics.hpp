#pragma once

#include <stdexcept>

#include "rohcrl/env.hpp"

namespace rohcrl {

struct MetricsReport {
  double transmission_efficiency = 0.0;
  double feedback_rate = 0.0;
  double mean_reward = 0.0;
  long decode_success_count = 0;
};

/// Running sums behind MetricsReport. Efficiency counts each delivered packet:
/// correctly received payload bits over all transmitted bits.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(HeaderLengths lengths) : lengths_(lengths) {}

  void add(CompressorAction action, double reward, const StepDiagnostics& diag) {
    ++slots_;
    if (action.request_feedback) ++feedback_requests_;
    reward_sum_ += reward;
    const long packet_bits = lengths_.payload + header_length(diag.delivered_header, lengths_);
    sent_bits_ += packet_bits;
    if (diag.decode_success) {
      ++successes_;
      delivered_payload_bits_ += lengths_.payload;
    }
  }

  long slots() const { return slots_; }

  MetricsReport report() const {
    if (slots_ == 0) throw std::invalid_argument("metrics of an empty trace are undefined");
    MetricsReport m;
    m.transmission_efficiency =
        static_cast<double>(delivered_payload_bits_) / static_cast<double>(sent_bits_);
    m.feedback_rate = static_cast<double>(feedback_requests_) / static_cast<double>(slots_);
    m.mean_reward = reward_sum_ / static_cast<double>(slots_);
    m.decode_success_count = successes_;
    return m;
  }

 private:
  HeaderLengths lengths_;
  long slots_ = 0;
  long feedback_requests_ = 0;
  long successes_ = 0;
  long delivered_payload_bits_ = 0;
  long sent_bits_ = 0;
  double reward_sum_ = 0.0;
};

inline MetricsReport compute_metrics(const Trace& trace, const HeaderLengths& lengths) {
  MetricsAccumulator acc(lengths);
  for (const TraceRow& r : trace) acc.add(r.action, r.reward, r.diagnostics);
  return acc.report();
}

}  // namespace rohcrl
