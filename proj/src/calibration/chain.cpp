#include "liqport/calibration/chain.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "liqport/calibration/black.hpp"

namespace liqport::calibration {

namespace {

std::chrono::sys_days parse_date(const std::string& s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream in(s);
  in >> y >> dash1 >> m >> dash2 >> d;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!in || dash1 != '-' || dash2 != '-' || !ymd.ok() || !(in >> std::ws).eof())
    throw std::invalid_argument("malformed ISO date '" + s + "'");
  return std::chrono::sys_days{ymd};
}

struct Violations {
  int count = 0;
  double magnitude = 0.0;
};

// Monotonicity and convexity violations over the quotes selected by `alive`.
Violations count_violations(const std::vector<OptionQuote>& q, const std::vector<std::size_t>& alive, double tol) {
  Violations v;
  for (std::size_t i = 0; i + 1 < alive.size(); ++i) {
    const double rise = q[alive[i + 1]].call_price - q[alive[i]].call_price;
    if (rise > tol) {
      ++v.count;
      v.magnitude += rise;
    }
  }
  for (std::size_t i = 1; i + 1 < alive.size(); ++i) {
    const OptionQuote &a = q[alive[i - 1]], &b = q[alive[i]], &c = q[alive[i + 1]];
    const double left = (b.call_price - a.call_price) / (b.strike - a.strike);
    const double right = (c.call_price - b.call_price) / (c.strike - b.strike);
    if (left - right > tol) {
      ++v.count;
      v.magnitude += left - right;
    }
  }
  return v;
}

// How far quote alive[j] sits above the chord through its alive neighbours
// (or above its left neighbour at the right end).
double local_excess(const std::vector<OptionQuote>& q, const std::vector<std::size_t>& alive, std::size_t j) {
  const OptionQuote& b = q[alive[j]];
  if (j == 0) return 0.0;
  const OptionQuote& a = q[alive[j - 1]];
  if (j + 1 == alive.size()) return std::max(b.call_price - a.call_price, 0.0);
  const OptionQuote& c = q[alive[j + 1]];
  const double chord = a.call_price + (c.call_price - a.call_price) * (b.strike - a.strike) / (c.strike - a.strike);
  return std::max(b.call_price - chord, 0.0);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_number(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("chain CSV line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

}  // namespace

const char* to_string(QuoteStatus s) {
  switch (s) {
    case QuoteStatus::kept: return "kept";
    case QuoteStatus::low_volume: return "low_volume";
    case QuoteStatus::below_min_price: return "below_min_price";
    case QuoteStatus::arbitrage: return "arbitrage";
    case QuoteStatus::vol_cap: return "vol_cap";
    case QuoteStatus::no_implied_vol: return "no_implied_vol";
  }
  return "unknown";
}

ChainTooSmall::ChainTooSmall(std::size_t n, std::size_t required)
    : std::runtime_error("option chain has " + std::to_string(n) + " usable quotes, needs at least " +
                         std::to_string(required)),
      survivors(n) {}

std::vector<OptionQuote> OptionChain::kept() const {
  std::vector<OptionQuote> out;
  for (const auto& q : quotes)
    if (q.kept()) out.push_back(q);
  return out;
}

std::size_t OptionChain::count(QuoteStatus s) const {
  return static_cast<std::size_t>(std::count_if(quotes.begin(), quotes.end(), [s](const auto& q) { return q.status == s; }));
}

int days_between(const std::string& from, const std::string& to) {
  return static_cast<int>((parse_date(to) - parse_date(from)).count());
}

std::string add_days(const std::string& date, int days) {
  const std::chrono::year_month_day ymd{parse_date(date) + std::chrono::days{days}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

OptionChain ingest_chain(std::span<const RawQuote> rows, const ChainFilters& f) {
  if (rows.empty()) throw ChainTooSmall(0, f.min_survivors);
  OptionChain chain;
  chain.as_of = rows[0].as_of;
  chain.expiry = rows[0].expiry;
  chain.underlying = rows[0].underlying;
  chain.rate = rows[0].rate;
  for (const auto& r : rows)
    if (r.as_of != chain.as_of || r.expiry != chain.expiry || r.underlying != chain.underlying || r.rate != chain.rate)
      throw std::invalid_argument("chain rows must share as_of, expiry, underlying and rate");
  const int days = days_between(chain.as_of, chain.expiry);
  if (days <= 0) throw std::invalid_argument("expiry must follow as_of");
  if (!(chain.underlying > 0.0)) throw std::invalid_argument("underlying must be > 0");
  chain.tau = days / 365.0;
  chain.horizon_weeks = (days + 6) / 7;
  chain.discount = std::exp(-chain.rate * chain.tau);
  chain.forward = chain.underlying / chain.discount;

  for (const auto& r : rows) {
    OptionQuote q;
    q.strike = r.strike;
    q.call_price = r.call_price;
    q.volume = r.volume;
    if (!(r.strike > 0.0)) throw std::invalid_argument("strikes must be > 0");
    if (r.volume < f.min_volume) q.status = QuoteStatus::low_volume;
    else if (r.call_price < f.min_ticks * f.tick) q.status = QuoteStatus::below_min_price;
    chain.quotes.push_back(q);
  }
  std::stable_sort(chain.quotes.begin(), chain.quotes.end(),
                   [](const OptionQuote& a, const OptionQuote& b) { return a.strike < b.strike; });
  for (std::size_t i = 1; i < chain.quotes.size(); ++i)
    if (chain.quotes[i].strike == chain.quotes[i - 1].strike)
      throw std::invalid_argument("duplicate strike in chain");

  // Static bounds first, then the greedy monotonicity/convexity repair.
  for (auto& q : chain.quotes) {
    if (!q.kept()) continue;
    const double lower = chain.discount * std::max(chain.forward - q.strike, 0.0);
    if (!(q.call_price > lower && q.call_price < chain.discount * chain.forward)) q.status = QuoteStatus::arbitrage;
  }
  for (;;) {
    std::vector<std::size_t> alive;
    for (std::size_t i = 0; i < chain.quotes.size(); ++i)
      if (chain.quotes[i].kept()) alive.push_back(i);
    const Violations now = count_violations(chain.quotes, alive, f.arbitrage_tolerance);
    if (now.count == 0) break;
    std::size_t best = alive.size();
    Violations best_after{now.count + 1, 0.0};
    double best_excess = -1.0;
    for (std::size_t j = 0; j < alive.size(); ++j) {
      std::vector<std::size_t> trial = alive;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(j));
      const Violations after = count_violations(chain.quotes, trial, f.arbitrage_tolerance);
      const double excess = local_excess(chain.quotes, alive, j);
      if (after.count < best_after.count ||
          (after.count == best_after.count &&
           (after.magnitude < best_after.magnitude ||
            (after.magnitude == best_after.magnitude && excess > best_excess)))) {
        best = j;
        best_after = after;
        best_excess = excess;
      }
    }
    chain.quotes[alive[best]].status = QuoteStatus::arbitrage;
  }

  double total_volume = 0.0;
  for (auto& q : chain.quotes) {
    if (!q.kept()) continue;
    try {
      q.implied_vol = implied_vol(q.call_price, chain.forward, q.strike, chain.tau, chain.discount);
    } catch (const std::domain_error&) {
      q.status = QuoteStatus::no_implied_vol;
      continue;
    }
    if (q.implied_vol > f.max_implied_vol) {
      q.status = QuoteStatus::vol_cap;
      continue;
    }
    q.delta = forward_delta(chain.forward, q.strike, q.implied_vol, chain.tau);
    total_volume += q.volume;
  }
  std::size_t survivors = 0;
  for (auto& q : chain.quotes) {
    if (!q.kept()) continue;
    q.volume_weight = q.volume / total_volume;
    ++survivors;
  }
  if (survivors < f.min_survivors) throw ChainTooSmall(survivors, f.min_survivors);
  return chain;
}

std::vector<RawQuote> read_chain_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty chain CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "as_of,expiry,underlying,rate,strike,call_price,volume")
    throw std::invalid_argument("chain CSV header must be as_of,expiry,underlying,rate,strike,call_price,volume");
  std::vector<RawQuote> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line);
    if (cells.size() != 7) throw std::invalid_argument("chain CSV line " + std::to_string(line_no) + ": expected 7 fields");
    RawQuote r;
    r.as_of = cells[0];
    r.expiry = cells[1];
    r.underlying = to_number(cells[2], line_no);
    r.rate = to_number(cells[3], line_no);
    r.strike = to_number(cells[4], line_no);
    r.call_price = to_number(cells[5], line_no);
    r.volume = to_number(cells[6], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_chain_csv(std::span<const RawQuote> rows, std::ostream& out) {
  out << "as_of,expiry,underlying,rate,strike,call_price,volume\n";
  const auto old = out.precision(17);
  for (const auto& r : rows)
    out << r.as_of << ',' << r.expiry << ',' << r.underlying << ',' << r.rate << ',' << r.strike << ','
        << r.call_price << ',' << r.volume << '\n';
  out.precision(old);
}

std::vector<std::vector<RawQuote>> group_by_expiry(std::span<const RawQuote> rows) {
  std::vector<std::vector<RawQuote>> groups;
  for (const auto& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
      return g.front().as_of == r.as_of && g.front().expiry == r.expiry;
    });
    if (it == groups.end()) groups.push_back({r});
    else it->push_back(r);
  }
  return groups;
}

}  // namespace liqport::calibration
