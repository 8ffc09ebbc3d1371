#include "pdt/belief_mdp.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

namespace pdt {

std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(hi > lo)) throw InvalidArgument("histogram needs bins > 0 and hi > lo");
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  return edges;
}

Histogram make_histogram(const std::vector<double>& values, std::vector<double> edges) {
  if (edges.size() < 2) throw InvalidArgument("histogram needs at least two edges");
  Histogram h;
  h.edges = std::move(edges);
  h.counts.assign(h.edges.size() - 1, 0);
  for (double v : values) {
    if (v < h.edges.front()) {
      ++h.underflow;
    } else if (v > h.edges.back()) {
      ++h.overflow;
    } else {
      auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
      std::size_t bin = static_cast<std::size_t>(it - h.edges.begin()) - 1;
      bin = std::min(bin, h.counts.size() - 1);
      ++h.counts[bin];
    }
  }
  return h;
}

double EvalSummary::standard_error() const {
  return returns.empty() ? 0.0 : sd / std::sqrt(static_cast<double>(returns.size()));
}

EvalSummary summarize(std::vector<std::uint64_t> seeds, std::vector<double> returns,
                      std::vector<std::size_t> lengths, std::vector<double> histogram_edges) {
  if (returns.empty()) throw InvalidArgument("cannot summarize zero episodes");
  EvalSummary s;
  const auto n = static_cast<double>(returns.size());
  s.mean = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : returns) ss += (r - s.mean) * (r - s.mean);
  s.sd = returns.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
  s.min = *lo;
  s.max = *hi;
  if (histogram_edges.empty())
    histogram_edges = s.max > s.min ? uniform_edges(s.min, s.max, 20) : uniform_edges(s.min - 0.5, s.min + 0.5, 1);
  s.histogram = make_histogram(returns, std::move(histogram_edges));
  s.seeds = std::move(seeds);
  s.returns = std::move(returns);
  s.lengths = std::move(lengths);
  return s;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

void write_episode_csv(std::ostream& out, const EvalSummary& summary) {
  out << "seed,return,length\n";
  for (std::size_t i = 0; i < summary.returns.size(); ++i)
    out << summary.seeds[i] << ',' << format_double(summary.returns[i]) << ',' << summary.lengths[i] << '\n';
}

void write_histogram_csv(std::ostream& out, const Histogram& histogram) {
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < histogram.counts.size(); ++i)
    out << format_double(histogram.edges[i]) << ',' << format_double(histogram.edges[i + 1]) << ','
        << histogram.counts[i] << '\n';
}

nlohmann::json summary_json(const EvalSummary& summary) {
  return {
      {"episodes", summary.returns.size()},
      {"mean", summary.mean},
      {"sd", summary.sd},
      {"standard_error", summary.standard_error()},
      {"min", summary.min},
      {"max", summary.max},
      {"histogram",
       {{"edges", summary.histogram.edges},
        {"counts", summary.histogram.counts},
        {"underflow", summary.histogram.underflow},
        {"overflow", summary.histogram.overflow}}},
  };
}

}  // namespace pdt
