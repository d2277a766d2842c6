#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace liqport::calibration {

/// One row of the chain CSV: as_of,expiry,underlying,rate,strike,call_price,volume.
struct RawQuote {
  std::string as_of;
  std::string expiry;
  double underlying = 0.0;
  double rate = 0.0;
  double strike = 0.0;
  double call_price = 0.0;
  double volume = 0.0;
};

enum class QuoteStatus { kept, low_volume, below_min_price, arbitrage, vol_cap, no_implied_vol };

const char* to_string(QuoteStatus s);

struct OptionQuote {
  double strike = 0.0;
  double call_price = 0.0;
  double volume = 0.0;
  double implied_vol = 0.0;
  double delta = 0.0;
  /// Share of the chain's retained volume; zero for filtered quotes.
  double volume_weight = 0.0;
  QuoteStatus status = QuoteStatus::kept;

  bool kept() const { return status == QuoteStatus::kept; }
};

struct OptionChain {
  std::string as_of;
  std::string expiry;
  double underlying = 0.0;
  double rate = 0.0;
  /// Year fraction days/365.
  double tau = 0.0;
  double forward = 0.0;
  double discount = 1.0;
  /// ceil(days/7); horizons 1..4 correspond to the 1w..4w buckets.
  int horizon_weeks = 0;
  /// Every input quote, sorted by strike, with its filter status.
  std::vector<OptionQuote> quotes;

  std::vector<OptionQuote> kept() const;
  std::size_t count(QuoteStatus s) const;
};

struct ChainFilters {
  double min_volume = 10000.0;
  double max_implied_vol = 1.0;
  double tick = 0.0001;
  double min_ticks = 2.0;
  std::size_t min_survivors = 5;
  /// Absolute slack on price monotonicity/convexity comparisons.
  double arbitrage_tolerance = 1e-12;
};

class ChainTooSmall : public std::runtime_error {
 public:
  ChainTooSmall(std::size_t survivors, std::size_t required);
  std::size_t survivors;
};

/// Calendar days between two ISO dates (YYYY-MM-DD); throws on malformed input.
int days_between(const std::string& from, const std::string& to);

/// ISO date shifted by a number of calendar days.
std::string add_days(const std::string& date, int days);

/// Filters one expiry's quotes: volume, minimum price, static-arbitrage
/// violations (call price non-increasing and convex in strike; quotes are
/// removed greedily, always the one whose removal clears the most
/// violations; ties go to the quote sitting highest above the chord of its
/// neighbours), implied volatility cap. Computes implied vols, forward deltas
/// and volume weights. Throws ChainTooSmall when fewer than min_survivors
/// remain, and std::invalid_argument when rows mix dates or underlyings.
OptionChain ingest_chain(std::span<const RawQuote> rows, const ChainFilters& filters = {});

std::vector<RawQuote> read_chain_csv(std::istream& in);
void write_chain_csv(std::span<const RawQuote> rows, std::ostream& out);

/// Splits rows by (as_of, expiry), preserving first-seen order.
std::vector<std::vector<RawQuote>> group_by_expiry(std::span<const RawQuote> rows);

}  // namespace liqport::calibration
