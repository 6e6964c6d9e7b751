#include "kcurv/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "kcurv/error.hpp"

namespace kcurv {

int ContractionSchema::total_slots() const noexcept {
  int s = 0;
  for (int k : factors) s += 4 + k;
  return s;
}

int ContractionSchema::max_derivative() const noexcept {
  return factors.empty() ? 0 : *std::max_element(factors.begin(), factors.end());
}

void ContractionSchema::validate() const {
  if (factors.empty()) throw SpecError("schema has no factors");
  for (int k : factors) {
    if (k < 0) throw SpecError("negative derivative order in schema");
  }
  const int n = total_slots();
  if (n % 2 != 0) throw SpecError("schema has an odd number of slots");
  if (static_cast<int>(pairs.size()) * 2 != n) throw SpecError("pairing does not cover every slot");
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (auto [a, b] : pairs) {
    if (a < 0 || b < 0 || a >= n || b >= n) throw SpecError("pair refers to a slot out of range");
    if (a == b) throw SpecError("slot paired with itself");
    if (seen[static_cast<std::size_t>(a)]++ || seen[static_cast<std::size_t>(b)]++) {
      throw SpecError("slot appears in more than one pair");
    }
  }
}

namespace {

int parse_int(std::string_view s, std::size_t& pos) {
  const std::size_t start = pos;
  int v = 0;
  while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
    v = v * 10 + (s[pos] - '0');
    if (v > 100000) throw ParseError("slot index too large", start);
    ++pos;
  }
  if (pos == start) throw ParseError("expected a slot index", pos);
  return v;
}

void expect(std::string_view s, std::size_t& pos, char c) {
  if (pos >= s.size() || s[pos] != c) throw ParseError(std::string("expected '") + c + "'", pos);
  ++pos;
}

}  // namespace

ContractionSchema ContractionSchema::parse(std::string_view line) {
  ContractionSchema out;
  const auto bar = line.find('|');
  if (bar == std::string_view::npos) throw ParseError("missing '|' between factors and pairing", line.size());
  std::size_t pos = 0;
  while (pos < bar) {
    int k = 0;
    const std::size_t start = pos;
    while (pos < bar && line[pos] == 'd') {
      ++k;
      ++pos;
    }
    if (pos >= bar || line[pos] != 'R') throw ParseError("expected a factor of the form d...dR", start);
    ++pos;
    out.factors.push_back(k);
    if (pos < bar) expect(line, pos, ',');
  }
  if (out.factors.empty()) throw ParseError("no factors before '|'", 0);
  pos = bar + 1;
  expect(line, pos, '(');
  while (true) {
    expect(line, pos, '(');
    const int a = parse_int(line, pos);
    expect(line, pos, ',');
    const int b = parse_int(line, pos);
    expect(line, pos, ')');
    out.pairs.emplace_back(a, b);
    if (pos < line.size() && line[pos] == ',') {
      ++pos;
      continue;
    }
    break;
  }
  expect(line, pos, ')');
  if (pos != line.size()) throw ParseError("trailing characters after pairing", pos);
  out.validate();
  return out;
}

std::string ContractionSchema::to_string() const {
  std::string s;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    if (f) s += ',';
    s.append(static_cast<std::size_t>(factors[f]), 'd');
    s += 'R';
  }
  s += "|(";
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    if (q) s += ',';
    s += '(' + std::to_string(pairs[q].first) + ',' + std::to_string(pairs[q].second) + ')';
  }
  s += ')';
  return s;
}

ContractionSchema ContractionSchema::canonical() const {
  validate();
  const std::size_t nf = factors.size();
  std::vector<int> begin(nf);
  for (std::size_t f = 0, s = 0; f < nf; ++f) {
    begin[f] = static_cast<int>(s);
    s += static_cast<std::size_t>(4 + factors[f]);
  }
  // order[new position] = old factor; groups of equal order are permuted jointly.
  std::vector<std::size_t> order(nf);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return factors[a] < factors[b]; });
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t q = 0; q < nf;) {
    std::size_t r = q;
    while (r < nf && factors[order[r]] == factors[order[q]]) ++r;
    groups.emplace_back(q, r);
    q = r;
  }
  ContractionSchema best;
  bool have = false;
  std::vector<int> relabel(static_cast<std::size_t>(total_slots()));
  while (true) {
    ContractionSchema c;
    int next = 0;
    for (std::size_t pos = 0; pos < nf; ++pos) {
      const std::size_t f = order[pos];
      c.factors.push_back(factors[f]);
      for (int s = 0; s < 4 + factors[f]; ++s) relabel[static_cast<std::size_t>(begin[f] + s)] = next++;
    }
    for (auto [a, b] : pairs) {
      int x = relabel[static_cast<std::size_t>(a)], y = relabel[static_cast<std::size_t>(b)];
      if (x > y) std::swap(x, y);
      c.pairs.emplace_back(x, y);
    }
    std::sort(c.pairs.begin(), c.pairs.end());
    if (!have || c.pairs < best.pairs) {
      best = std::move(c);
      have = true;
    }
    // Advance the product of per-group permutations.
    std::size_t g = 0;
    for (; g < groups.size(); ++g) {
      auto first = order.begin() + static_cast<std::ptrdiff_t>(groups[g].first);
      auto last = order.begin() + static_cast<std::ptrdiff_t>(groups[g].second);
      if (std::next_permutation(first, last)) break;
    }
    if (g == groups.size()) break;
  }
  return best;
}

namespace schemas {
ContractionSchema scalar_curvature() { return {{0}, {{0, 3}, {1, 2}}}; }
ContractionSchema ricci_norm() { return {{0, 0}, {{0, 3}, {4, 7}, {1, 5}, {2, 6}}}; }
ContractionSchema riemann_norm() { return {{0, 0}, {{0, 4}, {1, 5}, {2, 6}, {3, 7}}}; }
ContractionSchema nabla_riemann_norm() { return {{1, 1}, {{0, 5}, {1, 6}, {2, 7}, {3, 8}, {4, 9}}}; }
ContractionSchema cubic_a() { return {{0, 0, 0}, {{2, 4}, {3, 5}, {6, 8}, {7, 9}, {10, 0}, {11, 1}}}; }
ContractionSchema cubic_b() { return {{0, 0, 0}, {{0, 4}, {2, 6}, {1, 8}, {5, 9}, {3, 10}, {7, 11}}}; }
ContractionSchema laplacian_scalar() { return {{2}, {{0, 3}, {1, 2}, {4, 5}}}; }
}  // namespace schemas

namespace {

void all_matchings(std::vector<int>& free_slots, std::vector<std::pair<int, int>>& acc,
                   std::vector<std::vector<std::pair<int, int>>>& out) {
  if (free_slots.empty()) {
    out.push_back(acc);
    return;
  }
  const int a = free_slots.front();
  for (std::size_t q = 1; q < free_slots.size(); ++q) {
    const int b = free_slots[q];
    std::vector<int> rest;
    rest.reserve(free_slots.size() - 2);
    for (std::size_t r = 1; r < free_slots.size(); ++r) {
      if (r != q) rest.push_back(free_slots[r]);
    }
    acc.emplace_back(a, b);
    all_matchings(rest, acc, out);
    acc.pop_back();
  }
}

std::vector<std::pair<int, int>> random_matching(int slots, std::mt19937_64& rng) {
  std::vector<int> s(static_cast<std::size_t>(slots));
  std::iota(s.begin(), s.end(), 0);
  // Fisher-Yates with explicit draws so the sequence only depends on mt19937_64.
  for (std::size_t q = s.size(); q > 1; --q) {
    const std::size_t r = static_cast<std::size_t>(rng() % q);
    std::swap(s[q - 1], s[r]);
  }
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t q = 0; q + 1 < s.size(); q += 2) pairs.emplace_back(std::min(s[q], s[q + 1]), std::max(s[q], s[q + 1]));
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

void factor_lists(int max_factors, int max_deriv, std::vector<int>& acc, std::vector<std::vector<int>>& out) {
  if (!acc.empty()) out.push_back(acc);
  if (static_cast<int>(acc.size()) == max_factors) return;
  const int lo = acc.empty() ? 0 : acc.back();
  for (int k = lo; k <= max_deriv; ++k) {
    acc.push_back(k);
    factor_lists(max_factors, max_deriv, acc, out);
    acc.pop_back();
  }
}

}  // namespace

std::vector<ContractionSchema> catalog(int max_factors, int max_deriv, const CatalogOptions& options) {
  if (max_factors < 1) throw SpecError("catalog needs max_factors >= 1");
  if (max_deriv < 0) throw SpecError("catalog needs max_deriv >= 0");
  if (max_factors > kMaxCatalogFactors || max_deriv > kMaxCatalogDerivative) {
    throw SpecError("catalog(" + std::to_string(max_factors) + ", " + std::to_string(max_deriv) +
                    ") exceeds the resource limit (" + std::to_string(kMaxCatalogFactors) + " factors, order " +
                    std::to_string(kMaxCatalogDerivative) + ")");
  }
  std::vector<ContractionSchema> out;
  std::set<std::string> seen;
  const auto add = [&](ContractionSchema s) {
    if (static_cast<int>(s.factors.size()) > max_factors || s.max_derivative() > max_deriv) return;
    if (seen.insert(s.canonical().to_string()).second) out.push_back(std::move(s));
  };
  add(schemas::scalar_curvature());
  add(schemas::ricci_norm());
  add(schemas::riemann_norm());
  add(schemas::nabla_riemann_norm());
  add(schemas::cubic_a());
  add(schemas::cubic_b());
  add(schemas::laplacian_scalar());

  std::vector<std::vector<int>> lists;
  std::vector<int> acc;
  factor_lists(max_factors, max_deriv, acc, lists);
  std::stable_sort(lists.begin(), lists.end(), [](const auto& a, const auto& b) { return a.size() < b.size(); });
  for (const auto& fl : lists) {
    ContractionSchema base{fl, {}};
    const int n = base.total_slots();
    if (n % 2 != 0) continue;
    if (n <= options.exhaustive_slot_limit) {
      std::vector<int> free_slots(static_cast<std::size_t>(n));
      std::iota(free_slots.begin(), free_slots.end(), 0);
      std::vector<std::pair<int, int>> cur;
      std::vector<std::vector<std::pair<int, int>>> ms;
      all_matchings(free_slots, cur, ms);
      for (auto& m : ms) add({fl, std::move(m)});
    } else {
      std::uint64_t h = options.seed;
      for (int k : fl) h = h * 1000003u + static_cast<std::uint64_t>(k + 1);
      std::mt19937_64 rng(h);
      for (int q = 0; q < options.samples_per_multiset; ++q) add({fl, random_matching(n, rng)});
    }
  }
  return out;
}

std::vector<ContractionSchema> random_schemas(int count, std::uint64_t seed, int max_factors, int max_deriv) {
  if (count < 0) throw SpecError("schema count must be non-negative");
  if (max_factors < 2 || max_deriv < 0) throw SpecError("random schemas need max_factors >= 2, max_deriv >= 0");
  std::mt19937_64 rng(seed);
  std::vector<ContractionSchema> out;
  while (static_cast<int>(out.size()) < count) {
    ContractionSchema s;
    const int nf = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_factors - 1));
    for (int f = 0; f < nf; ++f) s.factors.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(max_deriv + 1)));
    if (s.total_slots() % 2 != 0) continue;
    s.pairs = random_matching(s.total_slots(), rng);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

struct SlotLayout {
  std::vector<int> begin;
  std::vector<int> owner;
  std::vector<int> mate;
};

SlotLayout layout_of(const ContractionSchema& schema) {
  schema.validate();
  SlotLayout l;
  const int n = schema.total_slots();
  l.owner.resize(static_cast<std::size_t>(n));
  l.mate.resize(static_cast<std::size_t>(n));
  int s = 0;
  for (std::size_t f = 0; f < schema.factors.size(); ++f) {
    l.begin.push_back(s);
    for (int q = 0; q < 4 + schema.factors[f]; ++q) l.owner[static_cast<std::size_t>(s++)] = static_cast<int>(f);
  }
  for (auto [a, b] : schema.pairs) {
    l.mate[static_cast<std::size_t>(a)] = b;
    l.mate[static_cast<std::size_t>(b)] = a;
  }
  return l;
}

}  // namespace

double evaluate(const ContractionSchema& schema, CurvatureEngine& engine) {
  const SlotLayout L = layout_of(schema);
  const auto& gi = engine.inverse_metric();
  std::vector<int> open;  // global slot ids awaiting their mate, in key order
  std::map<std::vector<int>, double> states{{{}, 1.0}};
  for (std::size_t f = 0; f < schema.factors.size(); ++f) {
    const int k = schema.factors[f];
    const int b = L.begin[f];
    const int e = b + 4 + k;
    std::vector<int> next_open;
    std::vector<int> source;  // per next_open entry: position in `open`, or -(slot offset) - 1
    for (std::size_t q = 0; q < open.size(); ++q) {
      const int t = L.mate[static_cast<std::size_t>(open[q])];
      if (t < b || t >= e) {
        next_open.push_back(open[q]);
        source.push_back(static_cast<int>(q));
      }
    }
    for (int s = b; s < e; ++s) {
      if (L.mate[static_cast<std::size_t>(s)] >= e) {
        next_open.push_back(s);
        source.push_back(-(s - b) - 1);
      }
    }
    std::vector<int> open_pos(static_cast<std::size_t>(schema.total_slots()), -1);
    for (std::size_t q = 0; q < open.size(); ++q) open_pos[static_cast<std::size_t>(open[q])] = static_cast<int>(q);

    const auto comps = engine.nonzero_components(k);
    std::map<std::vector<int>, double> next;
    std::vector<int> key(next_open.size());
    for (const auto& [okey, w0] : states) {
      for (const auto& c : comps) {
        double w = w0 * c.value;
        for (int s = b; s < e && w != 0.0; ++s) {
          const int t = L.mate[static_cast<std::size_t>(s)];
          const int is = c.slots[static_cast<std::size_t>(s - b)];
          if (t < b) {
            w *= gi(is, okey[static_cast<std::size_t>(open_pos[static_cast<std::size_t>(t)])]);
          } else if (t < s) {
            w *= gi(is, c.slots[static_cast<std::size_t>(t - b)]);
          }
        }
        if (w == 0.0) continue;
        for (std::size_t q = 0; q < next_open.size(); ++q) {
          const int src = source[q];
          key[q] = src >= 0 ? okey[static_cast<std::size_t>(src)] : c.slots[static_cast<std::size_t>(-src - 1)];
        }
        next[key] += w;
      }
    }
    states = std::move(next);
    open = std::move(next_open);
    if (states.empty()) return 0.0;
  }
  double total = 0.0;
  for (const auto& [key, w] : states) total += w;
  return total;
}

double evaluate_dense(const ContractionSchema& schema, CurvatureEngine& engine) {
  const SlotLayout L = layout_of(schema);
  const int m = static_cast<int>(engine.dimension());
  const int n = schema.total_slots();
  if (static_cast<double>(n) * std::log10(static_cast<double>(m)) > 9.0) {
    throw SpecError("schema too large for dense evaluation");
  }
  // Dense factor tables, index = sum slot_q * m^q.
  std::vector<std::vector<double>> dense;
  for (int k : schema.factors) {
    std::size_t size = 1;
    for (int q = 0; q < 4 + k; ++q) size *= static_cast<std::size_t>(m);
    std::vector<double> t(size, 0.0);
    for (const auto& c : engine.nonzero_components(k)) {
      std::size_t idx = 0;
      for (auto it = c.slots.rbegin(); it != c.slots.rend(); ++it) idx = idx * static_cast<std::size_t>(m) + static_cast<std::size_t>(*it);
      t[idx] = c.value;
    }
    dense.push_back(std::move(t));
  }
  const auto& gi = engine.inverse_metric();
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (auto [p, q] : schema.pairs) w *= gi(a[static_cast<std::size_t>(p)], a[static_cast<std::size_t>(q)]);
    for (std::size_t f = 0; f < schema.factors.size(); ++f) {
      const int b = L.begin[f];
      std::size_t idx = 0;
      for (int s = b + 4 + schema.factors[f] - 1; s >= b; --s) idx = idx * static_cast<std::size_t>(m) + static_cast<std::size_t>(a[static_cast<std::size_t>(s)]);
      w *= dense[f][idx];
    }
    total += w;
    int s = 0;
    for (; s < n; ++s) {
      if (++a[static_cast<std::size_t>(s)] < m) break;
      a[static_cast<std::size_t>(s)] = 0;
    }
    if (s == n) break;
  }
  return total;
}

double contraction_scale(const ContractionSchema& schema, CurvatureEngine& engine) {
  double scale = 1.0;
  for (int k : schema.factors) scale *= engine.max_abs_component(k);
  scale *= std::pow(engine.inverse_metric().cwiseAbs().maxCoeff(), static_cast<double>(schema.pairs.size()));
  return std::max(1.0, scale);
}

}  // namespace kcurv
