#include "pbshm/mcs.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>

namespace pbshm {

namespace {

class Bits {
 public:
  explicit Bits(std::size_t n = 0) : words_((n + 63) / 64, 0) {}

  void set(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void reset(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }

  bool none() const {
    for (auto w : words_)
      if (w) return false;
    return true;
  }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  Bits operator&(const Bits& o) const {
    Bits r = *this;
    for (std::size_t i = 0; i < words_.size(); ++i) r.words_[i] &= o.words_[i];
    return r;
  }

  template <typename F>
  void for_each(F&& f) const {
    for (std::size_t wi = 0; wi < words_.size(); ++wi) {
      auto w = words_[wi];
      while (w) {
        const auto bit = static_cast<std::size_t>(std::countr_zero(w));
        f(wi * 64 + bit);
        w &= w - 1;
      }
    }
  }

 private:
  std::vector<std::uint64_t> words_;
};

struct Association {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> weight;
  std::vector<Bits> neighbours;
};

Association build_association(const LabelledGraph& a, const LabelledGraph& b,
                              const std::function<double(std::size_t, std::size_t)>& pair_cost) {
  Association as;
  for (std::size_t u = 0; u < a.size(); ++u)
    for (std::size_t v = 0; v < b.size(); ++v)
      if (a.labels[u] == b.labels[v]) {
        as.pairs.emplace_back(u, v);
        as.weight.push_back(pair_cost ? pair_cost(u, v) : 0.0);
      }
  const auto n = as.pairs.size();
  as.neighbours.assign(n, Bits(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto [u1, v1] = as.pairs[i];
      const auto [u2, v2] = as.pairs[j];
      if (u1 == u2 || v1 == v2) continue;
      if (a.adjacent(u1, u2) != b.adjacent(v1, v2)) continue;
      as.neighbours[i].set(j);
      as.neighbours[j].set(i);
    }
  return as;
}

class CliqueSearch {
 public:
  explicit CliqueSearch(const Association& as) : as_(as) {}

  void run() {
    Bits all(as_.pairs.size());
    for (std::size_t i = 0; i < as_.pairs.size(); ++i) all.set(i);
    std::vector<std::size_t> current;
    expand(all, current, 0.0);
  }

  const std::vector<std::size_t>& best() const { return best_; }
  double best_cost() const { return best_cost_; }

 private:
  // Greedy sequential colouring; colour classes bound the clique size
  // reachable from each prefix of the returned order.
  void colour_sort(const Bits& p, std::vector<std::size_t>& order, std::vector<std::size_t>& colours) const {
    std::vector<std::size_t> pending;
    p.for_each([&](std::size_t v) { pending.push_back(v); });
    std::size_t colour = 0;
    while (!pending.empty()) {
      ++colour;
      std::vector<std::size_t> rest;
      std::vector<std::size_t> cls;
      for (auto v : pending) {
        bool clash = false;
        for (auto c : cls)
          if (as_.neighbours[v].test(c)) {
            clash = true;
            break;
          }
        if (clash) {
          rest.push_back(v);
        } else {
          cls.push_back(v);
          order.push_back(v);
          colours.push_back(colour);
        }
      }
      pending.swap(rest);
    }
  }

  void expand(Bits p, std::vector<std::size_t>& current, double cost) {
    if (p.none()) {
      if (current.size() > best_.size() || (current.size() == best_.size() && cost < best_cost_)) {
        best_ = current;
        best_cost_ = cost;
      }
      return;
    }
    std::vector<std::size_t> order;
    std::vector<std::size_t> colours;
    colour_sort(p, order, colours);
    for (std::size_t idx = order.size(); idx-- > 0;) {
      const auto reach = current.size() + colours[idx];
      if (reach < best_.size()) return;
      // Costs are non-negative, so a tie in size cannot beat an equal cost.
      if (reach == best_.size() && cost >= best_cost_) return;
      const auto v = order[idx];
      current.push_back(v);
      expand(p & as_.neighbours[v], current, cost + as_.weight[v]);
      current.pop_back();
      p.reset(v);
    }
  }

  const Association& as_;
  std::vector<std::size_t> best_;
  double best_cost_ = 0.0;
};

std::vector<std::size_t> greedy_clique(const Association& as) {
  const auto n = as.pairs.size();
  Bits p(n);
  for (std::size_t i = 0; i < n; ++i) p.set(i);
  std::vector<std::size_t> clique;
  while (!p.none()) {
    std::size_t pick = n;
    std::size_t pick_degree = 0;
    p.for_each([&](std::size_t v) {
      const auto d = (as.neighbours[v] & p).count();
      if (pick == n || d > pick_degree || (d == pick_degree && as.weight[v] < as.weight[pick])) {
        pick = v;
        pick_degree = d;
      }
    });
    clique.push_back(pick);
    p = p & as.neighbours[pick];
  }
  return clique;
}

}  // namespace

McsSearchResult max_common_induced_subgraph(const LabelledGraph& a, const LabelledGraph& b,
                                            const std::function<double(std::size_t, std::size_t)>& pair_cost,
                                            bool greedy) {
  const auto as = build_association(a, b, pair_cost);
  std::vector<std::size_t> clique;
  if (greedy) {
    clique = greedy_clique(as);
  } else {
    CliqueSearch search(as);
    search.run();
    clique = search.best();
  }
  McsSearchResult result;
  for (auto v : clique) {
    result.mapping.push_back(as.pairs[v]);
    result.cost += as.weight[v];
  }
  std::sort(result.mapping.begin(), result.mapping.end());
  return result;
}

}  // namespace pbshm
